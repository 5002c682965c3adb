"""
Tests for the convolution cost model.
"""

from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from nlvae.models.config import ConvCostSpec
from nlvae.services.cost_model import (
    depthwise_cost,
    model_cost_summary,
    pointwise_cost,
    reduction_factors,
    standard_cost,
    summary_markdown,
    transposed_cost,
    write_summary_csv,
)
from nlvae.services.network import init_params
from nlvae.tests.conftest import tiny_model_config


class TestLayerCosts:
    """Test cases for the per-layer closed forms."""

    def setup_method(self):
        self.spec = ConvCostSpec(K=3, N_in=32, P_out=64, M_spatial=16)

    def test_pointwise(self):
        cost = pointwise_cost(self.spec)
        assert cost.weights == 2048
        assert cost.ops == 524288

    def test_standard(self):
        cost = standard_cost(self.spec)
        assert cost.weights == 18432
        assert cost.ops == 4718592

    def test_depthwise(self):
        cost = depthwise_cost(ConvCostSpec(K=3, N_in=32, P_out=32, M_spatial=16))
        assert cost.weights == 288
        assert cost.ops == 73728

    def test_transposed(self):
        spec = ConvCostSpec(K=3, N_in=32, P_out=64, M_spatial=16)
        assert transposed_cost(spec) == standard_cost(spec)
        upsampling = transposed_cost(spec, stride=2)
        assert upsampling.weights == 18432
        assert upsampling.ops == 64 * 18432

    def test_unit_layer(self):
        spec = ConvCostSpec(K=1, N_in=1, P_out=1, M_spatial=1)
        assert pointwise_cost(spec).weights == 1
        assert standard_cost(spec).ops == 1

    def test_kernel_one_is_degenerate(self):
        spec = ConvCostSpec(K=1, N_in=7, P_out=5, M_spatial=9)
        assert pointwise_cost(spec) == standard_cost(spec)
        factors = reduction_factors(spec)
        assert factors.F_W == 1 and factors.F_O == 1

    @pytest.mark.parametrize("k", [1, 3, 5, 7])
    def test_factors_are_inverse_kernel_area(self, k):
        factors = reduction_factors(ConvCostSpec(K=k, N_in=16, P_out=24, M_spatial=8))
        assert factors.F_W == Fraction(1, k * k)
        assert factors.F_O == Fraction(1, k * k)

    def test_factors_agree_on_random_layers(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            k, n, p, m = (int(v) for v in rng.integers(1, 64, size=4))
            factors = reduction_factors(ConvCostSpec(K=k, N_in=n, P_out=p, M_spatial=m))
            assert factors.F_W == factors.F_O

    def test_rejects_zero_channels(self):
        with pytest.raises(ValidationError):
            ConvCostSpec(K=3, N_in=0, P_out=4, M_spatial=4)


class TestModelCostSummary:
    """Test cases for model_cost_summary."""

    def setup_method(self):
        self.params = init_params(tiny_model_config())
        self.summary = model_cost_summary(self.params)

    def test_totals_are_row_sums(self):
        rows = self.summary.rows
        assert self.summary.total_weights == sum(row.weights for row in rows)
        assert self.summary.total_ops == sum(row.ops for row in rows)
        assert self.summary.conv_weights + self.summary.dense_weights == self.summary.total_weights

    def test_counts_every_parameter(self):
        summary = self.summary
        assert summary.total_weights + summary.total_bias + summary.total_bn == self.params.parameter_count()

    @pytest.mark.parametrize("block_type", ["standard", "depthwise_separable", "transposed"])
    def test_counts_every_parameter_block_variants(self, block_type):
        params = init_params(tiny_model_config(block_type=block_type))
        summary = model_cost_summary(params)
        assert summary.total_weights + summary.total_bias + summary.total_bn == params.parameter_count()

    def test_doubling_width_quadruples_inner_weights(self):
        wide = model_cost_summary(init_params(tiny_model_config(base_width=4)))
        for narrow_row, wide_row in zip(self.summary.rows, wide.rows):
            assert narrow_row.layer == wide_row.layer
            if narrow_row.kind == "dense" or narrow_row.N_in == 3 or narrow_row.P_out == 3:
                continue
            assert wide_row.weights == 4 * narrow_row.weights

    def test_input_side_only_moves_encoder_rows(self):
        larger = model_cost_summary(self.params, input_hw=(32, 32))
        for base_row, row in zip(self.summary.rows, larger.rows):
            if base_row.layer.startswith("encoder."):
                assert row.M_spatial == 2 * base_row.M_spatial
                assert row.ops == 4 * base_row.ops
            else:
                assert row == base_row

    def test_markdown_and_csv(self, tmp_path):
        factors = reduction_factors(ConvCostSpec(K=3, N_in=4, P_out=4, M_spatial=4))
        text = summary_markdown(self.summary, factors)
        assert "F_W = 1/9" in text
        assert "| total |" in text
        write_summary_csv(self.summary, tmp_path / "cost.csv")
        lines = (tmp_path / "cost.csv").read_text().strip().splitlines()
        assert len(lines) == len(self.summary.rows) + 2

    def test_variant_rows_use_their_own_forms(self):
        separable = model_cost_summary(init_params(tiny_model_config(block_type="depthwise_separable")))
        depthwise = [row for row in separable.rows if row.kind == "depthwise"]
        assert len(depthwise) == 4
        for row in depthwise:
            assert row.weights == 9 * row.N_in
            assert row.ops == row.M_spatial ** 2 * row.weights

        transposed = model_cost_summary(init_params(tiny_model_config(block_type="transposed")))
        decoder = [row for row in transposed.rows if row.kind == "transposed" and row.layer.startswith("decoder.")]
        assert [row.M_spatial for row in decoder] == [8, 16]
        for row in decoder:
            assert row.ops == (row.M_spatial // 2) ** 2 * row.weights
