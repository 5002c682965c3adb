"""
Loss-curve and metric-bar plots, rendered off-screen.
"""

from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from nlvae.core.exceptions import ImageIOError  # noqa: E402
from nlvae.models.records import MetricsReport  # noqa: E402


def _save(fig, path: Path) -> Path:
    try:
        fig.savefig(path, bbox_inches="tight")
    except OSError as e:
        raise ImageIOError(f"Cannot write plot: {path}", {"error": str(e)})
    finally:
        plt.close(fig)
    return path


def plot_loss_curves(curves: Dict[str, List[float]], path: Path, title: str = "Reconstruction loss") -> Path:
    """One line per curve; the output format follows the file suffix (svg or png)."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, values in curves.items():
        ax.plot(range(1, len(values) + 1), values, label=str(label), linewidth=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("L_R")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if curves:
        ax.legend()
    return _save(fig, path)


def plot_metric_bars(report: MetricsReport, path: Path) -> Path:
    """Per-image PSNR bars for the NLVAE and bicubic columns."""
    names = [row.name for row in report.rows]
    positions = range(len(names))
    fig, ax = plt.subplots(figsize=(max(5, len(names) * 0.9), 4))
    width = 0.4
    if any(row.psnr is not None for row in report.rows):
        ax.bar([p - width / 2 for p in positions], [row.psnr or 0.0 for row in report.rows], width, label="NLVAE")
    if any(row.baseline_psnr is not None for row in report.rows):
        ax.bar([p + width / 2 for p in positions], [row.baseline_psnr or 0.0 for row in report.rows], width,
               label="Bicubic")
    ax.set_xticks(list(positions))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("PSNR (dB)")
    ax.legend()
    return _save(fig, path)
