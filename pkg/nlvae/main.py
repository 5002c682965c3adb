"""
Command-line entry point for the NLVAE engine.
Parses arguments, configures logging, and maps exceptions to exit codes.
"""

import argparse
import sys
from typing import List, Optional

from nlvae.cli.commands import COMMANDS
from nlvae.core.config import get_settings
from nlvae.core.exceptions import NlvaeException
from nlvae.core.logging import get_logger, setup_logging
from nlvae.utils.constants import BLOCK_TYPES, EXIT_RUNTIME_ERROR

logger = get_logger(__name__)


def _flag(parser: argparse.ArgumentParser, *names: str, **kwargs) -> None:
    parser.add_argument(*names, default=None, **kwargs)


def _switch(parser: argparse.ArgumentParser, name: str, dest: str, value: bool, help_text: str) -> None:
    parser.add_argument(name, dest=dest, action="store_const", const=value, default=None, help=help_text)


def add_common_flags(parser: argparse.ArgumentParser) -> None:
    """Flags shared by every training-backed command; unset flags fall back to the config file."""
    _flag(parser, "--config", help="KEY=VALUE config file; explicit flags override it")
    _flag(parser, "--out", help="Output directory")
    _flag(parser, "--scale", type=int, help="Upscaling factor (>= 2; beta 500 outside 3, 4, 8)")
    _flag(parser, "--beta", type=float, help="KL weight; overrides the per-scale table")
    _flag(parser, "--beta-policy", dest="beta_policy", choices=["per_scale", "global"])
    _flag(parser, "--alpha", type=float, help="Additive constant of the objective")
    _flag(parser, "--epochs", type=int)
    _flag(parser, "--lr", dest="learning_rate", type=float, help="Learning rate")
    _flag(parser, "--minibatch", type=int, help="Pseudo pairs per epoch")
    _flag(parser, "--crop", type=int, help="Side of the square training crops")
    _flag(parser, "--seed", type=int)
    _flag(parser, "--precision", choices=["f32", "f64"])
    _flag(parser, "--optimizer", choices=["adam", "sgd", "rmsprop"])
    _flag(parser, "--loss", choices=["l2", "l1"])
    _flag(parser, "--kl-form", dest="kl_form", choices=["standard", "printed"])
    _flag(parser, "--down-kernel", dest="down_kernel", choices=["bicubic", "bilinear", "box"])
    _switch(parser, "--no-antialias", "antialias", False, "Downsample without anti-aliasing")
    _switch(parser, "--augment", "augment", True, "Add random flips and quarter turns to the pseudo pairs")
    _switch(parser, "--no-augment", "augment", False, "Disable flip/rotation augmentation")
    _switch(parser, "--early-stop", "early_stop", True, "Stop when the loss plateaus")
    _flag(parser, "--patience", type=int)
    _flag(parser, "--grad-clip", dest="grad_clip", type=float)
    _flag(parser, "--log-every", dest="log_every", type=int)
    _flag(parser, "--checkpoint-every", dest="checkpoint_every", type=int)
    _flag(parser, "--workers", type=int)
    add_model_flags(parser)


def add_model_flags(parser: argparse.ArgumentParser) -> None:
    _flag(parser, "--encoder-blocks", dest="encoder_blocks", type=int)
    _flag(parser, "--decoder-blocks", dest="decoder_blocks", type=int)
    _flag(parser, "--base-width", dest="base_width", type=int)
    _flag(parser, "--latent-dim", dest="latent_dim", type=int)
    _flag(parser, "--network-canvas", dest="canvas", type=int, help="Side of the network's working canvas")
    _flag(parser, "--upsample-stages", dest="upsample_stages", type=int)
    _flag(parser, "--block-type", dest="block_type", choices=BLOCK_TYPES)
    _flag(parser, "--mid-order", dest="mid_order", choices=["pointwise_first", "conv_first"])


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(prog="nlvae", description=settings.app_name)
    parser.add_argument("--log-level", dest="log_level", default=None, help="Override NLVAE_LOG_LEVEL")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.app_version}")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Train on one LR image and super-resolve it")
    _flag(train, "--input", help="Low-resolution input image")
    _flag(train, "--hr", help="Optional HR reference for scoring")
    add_common_flags(train)

    bench = sub.add_parser("benchmark", help="Score a directory of HR images against a bicubic baseline")
    bench.add_argument("dataset_dir", nargs="?", default=None)
    _flag(bench, "--canvas", dest="canvas_mode", choices=["resize256", "native"])
    _switch(bench, "--baseline-only", "baseline_only", True, "Compute only the bicubic column")
    _flag(bench, "--shave", type=int, help="Border shave in pixels (default: scale)")
    _flag(bench, "--convention", choices=["y", "rgb"])
    add_common_flags(bench)

    sweep = sub.add_parser("sweep", help="One-axis ablation over fixture images")
    _flag(sweep, "--axis", choices=["loss", "optimizer", "encoder_blocks", "decoder_blocks", "beta", "block_type"])
    _flag(sweep, "--values", help="Comma-separated axis values (default: the axis' standard set)")
    _flag(sweep, "--images", nargs="+", help="HR fixture images")
    _flag(sweep, "--canvas", dest="canvas_mode", choices=["resize256", "native"])
    _flag(sweep, "--convention", choices=["y", "rgb"])
    add_common_flags(sweep)

    cost = sub.add_parser("cost", help="Weight and operation counts of the configured model")
    _flag(cost, "--config")
    _flag(cost, "--out")
    _flag(cost, "--K", dest="k", type=int, help="Kernel extent for the reduction-factor line")
    _flag(cost, "--n-in", dest="n_in", type=int)
    _flag(cost, "--p-out", dest="p_out", type=int)
    _flag(cost, "--m-spatial", dest="m_spatial", type=int)
    _flag(cost, "--input-side", dest="input_side", type=int)
    add_model_flags(cost)

    score = sub.add_parser("metrics", help="PSNR/SSIM of an SR image against its HR reference")
    _flag(score, "--sr")
    _flag(score, "--hr")
    _flag(score, "--convention", choices=["y", "rgb"])
    _flag(score, "--scale", type=int, help="Upscaling factor of the SR image (default: 4)")
    _flag(score, "--shave", type=int, help="Border shave in pixels (default: scale)")
    _flag(score, "--config")
    _flag(score, "--out")

    replay = sub.add_parser("replay", help="Re-run a command from its manifest.json")
    replay.add_argument("manifest")
    _flag(replay, "--out")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(log_level=args.log_level)
    del args.log_level
    try:
        return COMMANDS[args.command](args)
    except NlvaeException as e:
        logger.error(f"{e.__class__.__name__}: {e.message}")
        if e.details:
            logger.error(f"Details: {e.details}")
        return e.exit_code
    except Exception as e:
        logger.error(f"Unhandled exception: {str(e)}", exc_info=True)
        return EXIT_RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
