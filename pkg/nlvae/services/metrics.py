"""
PSNR and SSIM scoring plus benchmark-table aggregation.

The default convention scores the BT.601 luma channel with a border shave, the
usual super-resolution benchmarking setup; `rgb` scores all three channels.
"""

import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from skimage.color import rgb2ycbcr
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

from nlvae.core.exceptions import ContractError, ShapeError
from nlvae.models.records import MetricsReport, MetricsRow
from nlvae.services.image_pipeline import Image
from nlvae.utils.constants import PSNR_CAP_DB, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW
from nlvae.utils.helpers import markdown_table, write_csv

REPORT_COLUMNS = ["name", "scale", "psnr", "ssim", "baseline_psnr", "baseline_ssim"]


def luma(pixels: np.ndarray) -> np.ndarray:
    """BT.601 Y on the [0, 1] scale (16/255 .. 235/255)."""
    return rgb2ycbcr(pixels.astype(np.float64))[..., 0] / 255.0


def _prepare(a: Image, b: Image, convention: str, shave: int):
    if a.size != b.size:
        raise ShapeError("images must have equal dimensions", {"a": list(a.size), "b": list(b.size)})
    if convention == "y":
        x, y = luma(a.pixels), luma(b.pixels)
    elif convention == "rgb":
        x, y = a.pixels.astype(np.float64), b.pixels.astype(np.float64)
    else:
        raise ContractError(f"Unknown metric convention: {convention}", {"allowed": ["y", "rgb"]})
    if shave > 0:
        if 2 * shave >= min(a.size):
            raise ShapeError("border shave removes the whole image", {"shave": shave, "size": list(a.size)})
        x, y = x[shave:-shave, shave:-shave], y[shave:-shave, shave:-shave]
    return x, y


def psnr(a: Image, b: Image, convention: str = "y", shave: int = 0) -> float:
    """10 * log10(1 / MSE) in dB; identical inputs report the 99 dB cap."""
    x, y = _prepare(a, b, convention, shave)
    if float(np.mean((x - y) ** 2)) == 0.0:
        return PSNR_CAP_DB
    return min(float(peak_signal_noise_ratio(x, y, data_range=1.0)), PSNR_CAP_DB)


def ssim(a: Image, b: Image, convention: str = "y", shave: int = 0) -> float:
    """Mean local SSIM with an 11 x 11 Gaussian window (sigma 1.5) and dynamic range 1."""
    x, y = _prepare(a, b, convention, shave)
    if min(x.shape[:2]) < SSIM_WINDOW:
        raise ShapeError("image smaller than the SSIM window", {"shape": list(x.shape[:2]), "window": SSIM_WINDOW})
    return float(structural_similarity(
        x,
        y,
        data_range=1.0,
        win_size=SSIM_WINDOW,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        K1=SSIM_K1,
        K2=SSIM_K2,
        channel_axis=-1 if x.ndim == 3 else None,
    ))


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    if not present or len(present) != len(values):
        return None
    return float(math.fsum(present) / len(present))


def benchmark_aggregate(
    rows: List[MetricsRow],
    convention: str = "y",
    shave_border: int = 0,
    failures: Optional[Dict[str, str]] = None,
) -> MetricsReport:
    """Arithmetic means over rows, ordered by image name."""
    if not rows:
        raise ContractError("cannot aggregate an empty set of rows", {"failures": failures or {}})
    ordered = sorted(rows, key=lambda row: row.name)
    return MetricsReport(
        rows=ordered,
        mean_psnr=_mean([row.psnr for row in ordered]),
        mean_ssim=_mean([row.ssim for row in ordered]),
        mean_baseline_psnr=_mean([row.baseline_psnr for row in ordered]),
        mean_baseline_ssim=_mean([row.baseline_ssim for row in ordered]),
        convention=convention,
        shave_border=shave_border,
        failures=failures or {},
    )


def _fmt(value: Optional[float], digits: int) -> str:
    return "" if value is None else f"{value:.{digits}f}"


def report_rows(report: MetricsReport) -> List[List[str]]:
    rows = [
        [row.name, str(row.scale), _fmt(row.psnr, 2), _fmt(row.ssim, 4),
         _fmt(row.baseline_psnr, 2), _fmt(row.baseline_ssim, 4)]
        for row in report.rows
    ]
    rows.append([
        "mean", "", _fmt(report.mean_psnr, 2), _fmt(report.mean_ssim, 4),
        _fmt(report.mean_baseline_psnr, 2), _fmt(report.mean_baseline_ssim, 4),
    ])
    return rows


def report_markdown(report: MetricsReport) -> str:
    """Benchmark table: one row per image, NLVAE and bicubic PSNR/SSIM columns, mean last."""
    header = ["image", "scale", "NLVAE PSNR", "NLVAE SSIM", "Bicubic PSNR", "Bicubic SSIM"]
    return markdown_table(header, report_rows(report))


def write_report_csv(report: MetricsReport, path: Path) -> Path:
    return write_csv(path, REPORT_COLUMNS, report_rows(report))
