"""
Single-image zero-shot training and super-resolution inference.

Each epoch draws a fake minibatch of pseudo pairs from the LR image, runs
encode -> reparameterize -> decode, and updates encoder and decoder jointly on
the beta-weighted objective.
"""

import time
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from nlvae.core.exceptions import ConfigurationError, DegenerateInputError, NumericError
from nlvae.core.logging import get_logger
from nlvae.engine.tensor import Tensor, precision
from nlvae.models.config import TrainConfig
from nlvae.models.records import TrainReport, TrainRow
from nlvae.services import metrics
from nlvae.services.checkpoint import load_checkpoint, save_checkpoint
from nlvae.services.image_pipeline import (
    Image,
    make_fake_minibatch,
    resample,
    resample_batch,
    save_image,
    upscale_linear,
)
from nlvae.services.network import NlvaeModel, NlvaeParams
from nlvae.services.objective import kl_loss, reconstruction_loss, resolve_beta, total_loss
from nlvae.services.optimizer import build_optimizer
from nlvae.utils.constants import (
    CHECKPOINT_FILE,
    EPOCH_TIMES_FILE,
    MIN_TRAIN_SIDE,
    SR_IMAGE_FILE,
    TRAIN_LOG_COLUMNS,
    TRAIN_LOG_FILE,
)
from nlvae.utils.helpers import append_csv_row, ensure_dir, write_csv

logger = get_logger(__name__)

CheckpointSource = Union[str, Path, Tuple[TrainConfig, NlvaeParams]]


class SingleImageTrainer:
    """Trains one fresh model on one image; owns its parameters and optimizer state."""

    def __init__(self, config: TrainConfig, output_dir: Optional[str] = None):
        self.config = resolve_beta(config)
        self.output_dir = ensure_dir(output_dir)
        self.params: Optional[NlvaeParams] = None

    @property
    def log_path(self) -> Optional[Path]:
        return self.output_dir / TRAIN_LOG_FILE if self.output_dir else None

    @property
    def checkpoint_path(self) -> Optional[Path]:
        return self.output_dir / CHECKPOINT_FILE if self.output_dir else None

    def _effective_crop(self, lr: Image) -> int:
        config = self.config
        if min(lr.height, lr.width) < MIN_TRAIN_SIDE:
            raise DegenerateInputError(
                f"Image {lr.height}x{lr.width} is below the {MIN_TRAIN_SIDE}-pixel minimum for training",
                {"height": lr.height, "width": lr.width, "min_side": MIN_TRAIN_SIDE},
            )
        crop = min(config.crop, lr.height, lr.width)
        if crop < 4 * config.scale:
            raise DegenerateInputError(
                f"Image {lr.height}x{lr.width} too small to build pseudo pairs at scale {config.scale}",
                {"crop": crop, "scale": config.scale},
            )
        if crop != config.crop:
            logger.info(f"Crop reduced from {config.crop} to {crop} to fit the image")
        return crop

    def fit(self, lr_image: Image) -> TrainReport:
        """Run the training loop; the trained parameters end up in `self.params`."""
        config = self.config
        crop = self._effective_crop(lr_image)
        spec = config.degradation()
        canvas = config.model.canvas
        report = TrainReport(log_path=str(self.log_path) if self.log_path else None)
        if self.log_path:
            write_csv(self.log_path, TRAIN_LOG_COLUMNS, [])

        with precision(config.precision):
            model = NlvaeModel.create(config.model, seed=config.seed)
            self.params = model.params
            optimizer = build_optimizer(model.named_parameters(), config)
            rng = np.random.default_rng(config.seed)
            best, stale = float("inf"), 0

            for epoch in range(1, config.epochs + 1):
                started = time.perf_counter()
                batch = make_fake_minibatch(
                    lr_image, spec, config.minibatch, crop, rng_seed=config.seed + epoch, augment=config.augment
                )
                inputs = Tensor(resample_batch(batch.inputs, canvas))
                targets = Tensor(resample_batch(batch.targets, canvas))
                try:
                    optimizer.zero_grad()
                    recon, dist = model.forward(inputs, rng, "train")
                    l_r = reconstruction_loss(recon, targets, config.loss)
                    l_kl = kl_loss(dist, config.kl_form)
                    total, breakdown = total_loss(l_r, l_kl, config.beta, config.alpha)
                    total.backward()
                    optimizer.step()
                except NumericError as e:
                    logger.error(f"Numeric divergence at epoch {epoch}: {e.message}")
                    e.details.setdefault("epoch", epoch)
                    raise
                seconds = time.perf_counter() - started
                report.rows.append(TrainRow(epoch=epoch, loss=breakdown, seconds=seconds))
                if self.log_path:
                    append_csv_row(self.log_path, [
                        epoch, breakdown.l_r, breakdown.l_kl, breakdown.beta, breakdown.alpha, breakdown.total,
                    ])
                if epoch == 1 or epoch % config.log_every == 0:
                    logger.info(
                        f"epoch {epoch}/{config.epochs} l_r={breakdown.l_r:.5f} "
                        f"l_kl={breakdown.l_kl:.5f} total={breakdown.total:.5f} ({seconds:.2f}s)"
                    )
                if self.checkpoint_path and config.checkpoint_every and epoch % config.checkpoint_every == 0:
                    save_checkpoint(self.checkpoint_path, self.params, config)

                if config.early_stop:
                    if breakdown.total < best - config.min_delta:
                        best, stale = breakdown.total, 0
                    else:
                        stale += 1
                    if stale >= config.patience:
                        logger.info(f"Loss plateaued for {stale} epochs; stopping at epoch {epoch}")
                        report.stopped_early = True
                        break

        if self.output_dir:
            write_csv(
                self.output_dir / EPOCH_TIMES_FILE,
                ["epoch", "seconds"],
                [[row.epoch, row.seconds] for row in report.rows],
            )
            report.checkpoint_path = str(save_checkpoint(self.checkpoint_path, self.params, config))
        return report


def train_single_image(
    lr_image: Image,
    hr_reference: Optional[Image] = None,
    config: Optional[TrainConfig] = None,
    output_dir: Optional[str] = None,
) -> TrainReport:
    """
    Train on `lr_image`, super-resolve it, and score the result against `hr_reference` if given.

    With `output_dir`, writes the training log, per-epoch timings, checkpoint, and SR image.
    """
    trainer = SingleImageTrainer(config or TrainConfig(), output_dir)
    report = trainer.fit(lr_image)
    scale = trainer.config.scale
    sr = super_resolve(lr_image, (trainer.config, trainer.params), scale)
    if trainer.output_dir:
        report.output_image_path = str(save_image(sr, str(trainer.output_dir / SR_IMAGE_FILE)))
    if hr_reference is not None:
        hr = hr_reference
        if hr.size != sr.size:
            hr = Image(pixels=resample(hr.pixels, sr.size, "bicubic"))
            logger.info(f"HR reference resized to {sr.size} for scoring")
        report.psnr = metrics.psnr(sr, hr, "y", shave=scale)
        report.ssim = metrics.ssim(sr, hr, "y", shave=scale)
        logger.info(f"Scored SR output: PSNR {report.psnr:.2f} dB, SSIM {report.ssim:.4f}")
    return report


def _precision_of(params: NlvaeParams) -> str:
    return "f64" if params.parameters()[0].dtype == np.float64 else "f32"


def super_resolve(lr_image: Image, checkpoint: CheckpointSource, scale: int) -> Image:
    """
    Deterministic inference: bilinear upscale, encode with infer-mode batch norm,
    decode z = mu, and resize back to scale x the LR size.

    The canvas is entered and left with the same bicubic kernel that places
    training pairs on it, so inputs and outputs share one geometry.
    """
    if isinstance(checkpoint, (str, Path)):
        config, params = load_checkpoint(Path(checkpoint))
    else:
        config, params = checkpoint
    if config.scale != scale:
        raise ConfigurationError(
            "Checkpoint was trained for a different scale",
            {"checkpoint_scale": config.scale, "requested_scale": scale},
        )
    target = (lr_image.height * scale, lr_image.width * scale)
    upscaled = upscale_linear(lr_image, scale)
    canvas = params.config.canvas
    with precision(_precision_of(params)):
        x = Tensor(resample_batch(upscaled.pixels[None], canvas))
        out = NlvaeModel(params).reconstruct(x)
        pixels = resample(out.data[0], target, "bicubic")
    return Image(pixels=np.clip(pixels, 0.0, 1.0), source_path=lr_image.source_path)
