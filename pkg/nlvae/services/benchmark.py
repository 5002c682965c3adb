"""
Dataset benchmark harness and one-axis ablation sweeps.

Each image is an independent job: degrade the HR image, train a fresh model on
the LR copy, super-resolve, and score against HR next to a bicubic baseline.
Jobs may run in worker processes; only the orchestrator writes shared outputs.
"""

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from nlvae.core.config import get_settings
from nlvae.core.exceptions import BenchmarkPartialFailure, ImageIOError, NlvaeException
from nlvae.core.logging import get_logger
from nlvae.models.config import BenchmarkSpec, SweepSpec, TrainConfig
from nlvae.models.records import MetricsReport, MetricsRow, SweepResult
from nlvae.services import metrics
from nlvae.services.image_pipeline import (
    Image,
    degrade,
    list_images,
    load_image,
    prepare_canvas,
    save_image,
    upscale_bicubic,
)
from nlvae.services.plotting import plot_loss_curves, plot_metric_bars
from nlvae.services.trainer import SingleImageTrainer, super_resolve
from nlvae.utils.constants import SR_IMAGE_FILE
from nlvae.utils.helpers import ensure_dir, markdown_table, write_csv

logger = get_logger(__name__)


@dataclass
class ImageJob:
    """Everything one worker needs to score one image."""

    key: str
    path: str
    config: TrainConfig
    canvas_mode: str
    convention: str
    shave: Optional[int]
    baseline_only: bool = False
    output_dir: Optional[str] = None


@dataclass
class ImageResult:
    key: str
    row: MetricsRow
    curve: List[float] = field(default_factory=list)


def run_image_job(job: ImageJob) -> ImageResult:
    """Score one HR image; the bicubic column never touches the trainer."""
    config = job.config
    hr = prepare_canvas(load_image(job.path), job.canvas_mode)
    spec = config.degradation()
    lr = degrade(hr, spec)
    # degrade() crops HR to a multiple of the scale; score against that region
    hr = Image(pixels=hr.pixels[:lr.height * spec.scale, :lr.width * spec.scale], source_path=hr.source_path)
    shave = config.scale if job.shave is None else job.shave

    bicubic = upscale_bicubic(lr, spec.scale, size=hr.size)
    row = MetricsRow(
        name=Path(job.path).stem,
        scale=spec.scale,
        baseline_psnr=metrics.psnr(bicubic, hr, job.convention, shave),
        baseline_ssim=metrics.ssim(bicubic, hr, job.convention, shave),
    )
    curve: List[float] = []
    if not job.baseline_only:
        trainer = SingleImageTrainer(config, job.output_dir)
        report = trainer.fit(lr)
        sr = super_resolve(lr, (trainer.config, trainer.params), spec.scale)
        if trainer.output_dir:
            save_image(sr, str(trainer.output_dir / SR_IMAGE_FILE))
        row.psnr = metrics.psnr(sr, hr, job.convention, shave)
        row.ssim = metrics.ssim(sr, hr, job.convention, shave)
        curve = report.l_r_curve()
    logger.info(
        f"{job.key}: bicubic {row.baseline_psnr:.2f} dB"
        + ("" if row.psnr is None else f", NLVAE {row.psnr:.2f} dB")
    )
    return ImageResult(key=job.key, row=row, curve=curve)


def _record_failure(failures: Dict[str, str], job: ImageJob, error: Exception) -> None:
    if isinstance(error, NlvaeException):
        message = error.message
        logger.error(f"{job.key} failed: {message}")
    else:
        message = f"{error.__class__.__name__}: {error}"
        logger.error(f"{job.key} failed unexpectedly: {message}", exc_info=error)
    failures[job.key] = message


def execute_jobs(jobs: List[ImageJob], workers: int) -> Tuple[List[ImageResult], Dict[str, str]]:
    """
    Run jobs sequentially or in a process pool; failures are collected, not raised.

    Any exception a job raises, including a broken worker pool, marks only that job failed.
    """
    results: List[ImageResult] = []
    failures: Dict[str, str] = {}
    if workers <= 1:
        for job in jobs:
            try:
                results.append(run_image_job(job))
            except Exception as e:
                _record_failure(failures, job, e)
        return results, failures

    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(run_image_job, job): job for job in jobs}
        for future in as_completed(futures):
            job = futures[future]
            try:
                results.append(future.result())
            except Exception as e:
                _record_failure(failures, job, e)
    results.sort(key=lambda result: result.key)
    return results, failures


def run_benchmark(spec: BenchmarkSpec, output_dir: str) -> MetricsReport:
    """
    Benchmark every image in `spec.dataset_dir` and write report.csv, report.md and a PSNR bar plot.

    Raises:
        BenchmarkPartialFailure: if some images failed; the report of the rest is still written
    """
    paths = list_images(spec.dataset_dir)
    if not paths:
        raise ImageIOError(f"No PNG or BMP images in {spec.dataset_dir}")
    out = ensure_dir(output_dir)
    jobs = [
        ImageJob(
            key=path.stem,
            path=str(path),
            config=spec.train,
            canvas_mode=spec.canvas_mode,
            convention=spec.convention,
            shave=spec.shave,
            baseline_only=spec.baseline_only,
            output_dir=str(out / path.stem),
        )
        for path in paths
    ]
    logger.info(f"Benchmarking {len(jobs)} images at scale {spec.train.scale} with {spec.workers} worker(s)")
    results, failures = execute_jobs(jobs, spec.workers)
    if not results:
        raise BenchmarkPartialFailure("Every benchmark image failed", {"failures": failures})

    shave = spec.train.scale if spec.shave is None else spec.shave
    report = metrics.benchmark_aggregate([r.row for r in results], spec.convention, shave, failures)
    metrics.write_report_csv(report, out / "report.csv")
    (out / "report.md").write_text(metrics.report_markdown(report), encoding="utf-8")
    plot_metric_bars(report, out / f"psnr.{_plot_suffix()}")
    if failures:
        raise BenchmarkPartialFailure(
            f"{len(failures)} of {len(jobs)} images failed",
            {"failures": failures, "report": str(out / "report.csv")},
        )
    return report


def _plot_suffix() -> str:
    return get_settings().plot_format


def _mean_curve(curves: List[List[float]]) -> List[float]:
    if not curves:
        return []
    length = min(len(curve) for curve in curves)
    return [sum(curve[i] for curve in curves) / len(curves) for i in range(length)]


def sweep_trend(axis: str, reports: Dict[str, MetricsReport]) -> Optional[str]:
    """Directional summary of mean PSNR across the swept values; reported, never enforced."""
    scored = {value: report.mean_psnr for value, report in reports.items() if report.mean_psnr is not None}
    if len(scored) < 2:
        return None
    if axis in ("encoder_blocks", "decoder_blocks"):
        ordered = sorted(scored, key=lambda value: int(value))
        first, last = scored[ordered[0]], scored[ordered[-1]]
        direction = "no worse" if last >= first else "worse"
        return f"{axis}={ordered[-1]} is {direction} than {axis}={ordered[0]} ({last:.2f} vs {first:.2f} dB)"
    best = max(scored, key=scored.get)
    return f"best {axis}: {best} ({scored[best]:.2f} dB)"


def run_sweep(spec: SweepSpec, output_dir: str) -> SweepResult:
    """Train every axis value on every fixture image; emit curves, a comparison table and a trend line."""
    out = ensure_dir(output_dir)
    jobs = []
    for value, config in spec.variants().items():
        for path in spec.images:
            jobs.append(ImageJob(
                key=f"{value}::{Path(path).stem}",
                path=path,
                config=config,
                canvas_mode=spec.canvas_mode,
                convention=spec.convention,
                shave=None,
                output_dir=str(out / f"{spec.axis}={value}" / Path(path).stem),
            ))
    logger.info(f"Sweeping {spec.axis} over {spec.values} ({len(jobs)} runs)")
    results, failures = execute_jobs(jobs, spec.workers)

    curves: Dict[str, List[float]] = {}
    reports: Dict[str, MetricsReport] = {}
    for value in map(str, spec.values):
        mine = [r for r in results if r.key.split("::", 1)[0] == value]
        if not mine:
            continue
        curves[value] = _mean_curve([r.curve for r in mine])
        reports[value] = metrics.benchmark_aggregate(
            [r.row for r in mine],
            spec.convention,
            spec.base.scale,
            {k: v for k, v in failures.items() if k.startswith(f"{value}::")},
        )
    trend = sweep_trend(spec.axis, reports)
    result = SweepResult(axis=spec.axis, curves=curves, report=reports, trend=trend)

    plot_loss_curves(curves, out / f"loss_curves.{_plot_suffix()}", title=f"L_R by {spec.axis}")
    header = [spec.axis, "mean PSNR", "mean SSIM", "final L_R"]
    table = [
        [value, f"{reports[value].mean_psnr:.2f}", f"{reports[value].mean_ssim:.4f}",
         f"{curves[value][-1]:.5f}" if curves[value] else ""]
        for value in reports
    ]
    write_csv(out / "sweep.csv", header, table)
    text = markdown_table(header, table)
    if trend:
        text += f"\nTrend: {trend}\n"
        logger.info(f"Sweep trend: {trend}")
    (out / "sweep.md").write_text(text, encoding="utf-8")
    if failures:
        raise BenchmarkPartialFailure(f"{len(failures)} sweep runs failed", {"failures": failures})
    return result
