"""
Closed-form weight and operation counts for pointwise versus standard convolution.

Operations are multiply-accumulates over the output map: a K x K convolution
from N to P channels producing an M x M map costs M^2 * K^2 * N * P. Depthwise
and transposed layers of the configured model get their own closed forms.
"""

from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Tuple

from nlvae.models.config import ConvCostSpec
from nlvae.models.records import ConvCost, CostRow, CostSummary, ReductionFactors
from nlvae.services.network import NlvaeModel, NlvaeParams
from nlvae.utils.helpers import markdown_table, write_csv

COST_COLUMNS = ["layer", "kind", "K", "N_in", "P_out", "M_spatial", "weights", "ops", "bias", "bn"]


def pointwise_cost(spec: ConvCostSpec) -> ConvCost:
    """W = N * P, O = M^2 * N * P."""
    weights = spec.N_in * spec.P_out
    return ConvCost(weights=weights, ops=spec.M_spatial ** 2 * weights)


def standard_cost(spec: ConvCostSpec) -> ConvCost:
    """W = K^2 * N * P, O = M^2 * K^2 * N * P."""
    weights = spec.K ** 2 * spec.N_in * spec.P_out
    return ConvCost(weights=weights, ops=spec.M_spatial ** 2 * weights)


def depthwise_cost(spec: ConvCostSpec) -> ConvCost:
    """Per-channel K x K filters (N_in = P_out channels): W = K^2 * N, O = M^2 * K^2 * N."""
    weights = spec.K ** 2 * spec.N_in
    return ConvCost(weights=weights, ops=spec.M_spatial ** 2 * weights)


def transposed_cost(spec: ConvCostSpec, stride: int = 1) -> ConvCost:
    """W = K^2 * N * P; each of the (M / stride)^2 input pixels scatters K^2 * N * P products."""
    weights = spec.K ** 2 * spec.N_in * spec.P_out
    return ConvCost(weights=weights, ops=(spec.M_spatial // stride) ** 2 * weights)


def reduction_factors(spec: ConvCostSpec) -> ReductionFactors:
    """Pointwise-to-standard ratios; both reduce to 1 / K^2."""
    pointwise, standard = pointwise_cost(spec), standard_cost(spec)
    return ReductionFactors(
        F_W=Fraction(pointwise.weights, standard.weights),
        F_O=Fraction(pointwise.ops, standard.ops),
    )


def model_cost_summary(params: NlvaeParams, input_hw: Optional[Tuple[int, int]] = None) -> CostSummary:
    """Per-layer weights and MACs for a configured model plus their totals."""
    input_side = input_hw[0] if input_hw else None
    rows: List[CostRow] = []
    for layer in NlvaeModel(params).layer_plan(input_side):
        spec = ConvCostSpec(K=layer.K, N_in=layer.N_in, P_out=layer.P_out, M_spatial=layer.M_spatial)
        if layer.kind == "conv":
            cost = standard_cost(spec)
        elif layer.kind == "depthwise":
            cost = depthwise_cost(spec)
        elif layer.kind == "transposed":
            cost = transposed_cost(spec, layer.stride)
        else:
            cost = pointwise_cost(spec)
        rows.append(CostRow(
            layer=layer.name,
            kind=layer.kind,
            K=layer.K,
            N_in=layer.N_in,
            P_out=layer.P_out,
            M_spatial=layer.M_spatial,
            weights=cost.weights,
            ops=cost.ops,
            bias=layer.bias,
            bn=layer.bn,
        ))
    return CostSummary(
        rows=rows,
        total_weights=sum(row.weights for row in rows),
        total_ops=sum(row.ops for row in rows),
        total_bias=sum(row.bias for row in rows),
        total_bn=sum(row.bn for row in rows),
        conv_weights=sum(row.weights for row in rows if row.kind != "dense"),
        dense_weights=sum(row.weights for row in rows if row.kind == "dense"),
    )


def summary_rows(summary: CostSummary) -> List[List]:
    rows = [[getattr(row, column) for column in COST_COLUMNS] for row in summary.rows]
    rows.append(["total", "", "", "", "", "", summary.total_weights, summary.total_ops,
                 summary.total_bias, summary.total_bn])
    return rows


def summary_markdown(summary: CostSummary, factors: Optional[ReductionFactors] = None) -> str:
    text = markdown_table(COST_COLUMNS, summary_rows(summary))
    if factors is not None:
        text += f"\nReduction factors (pointwise / standard): F_W = {factors.F_W}, F_O = {factors.F_O}\n"
    return text


def write_summary_csv(summary: CostSummary, path: Path) -> Path:
    return write_csv(path, COST_COLUMNS, summary_rows(summary))
