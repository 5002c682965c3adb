"""
Command handlers for the nlvae CLI.
Resolves configuration, writes the run manifest, and delegates to the services.
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from nlvae import __version__
from nlvae.core.config import get_settings
from nlvae.core.exceptions import ConfigurationError, ValidationError
from nlvae.core.logging import get_logger
from nlvae.engine.tensor import precision
from nlvae.models.config import BenchmarkSpec, ConvCostSpec, ModelConfig, SweepSpec, TrainConfig
from nlvae.models.records import RunManifest
from nlvae.services import metrics
from nlvae.services.benchmark import run_benchmark, run_sweep
from nlvae.services.cost_model import model_cost_summary, reduction_factors, summary_markdown, write_summary_csv
from nlvae.services.image_pipeline import load_image
from nlvae.services.network import init_params
from nlvae.services.objective import resolve_beta
from nlvae.services.trainer import train_single_image
from nlvae.utils.constants import MANIFEST_FILE
from nlvae.utils.helpers import build_model, ensure_dir, load_key_value_config, read_json, write_model_json

logger = get_logger(__name__)

TRAIN_KEYS = set(TrainConfig.__fields__) - {"model"}
MODEL_KEYS = set(ModelConfig.__fields__)
RUN_KEYS = {
    "input", "hr", "out", "workers", "canvas_mode", "convention", "shave", "baseline_only",
    "dataset_dir", "axis", "values", "images", "sr", "k", "n_in", "p_out", "m_spatial", "input_side",
}
LIST_KEYS = {"encoder_channels", "decoder_channels", "values", "images"}


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def gather_values(args: Any) -> Dict[str, Any]:
    """Merge the `--config` file with explicit CLI flags; flags win."""
    values: Dict[str, Any] = {}
    config_path = getattr(args, "config", None)
    if config_path:
        for key, value in load_key_value_config(config_path).items():
            key = "learning_rate" if key == "lr" else key
            if key not in TRAIN_KEYS | MODEL_KEYS | RUN_KEYS:
                raise ConfigurationError(f"Unknown config key: {key}", {"file": config_path})
            values[key] = _split_list(value) if key in LIST_KEYS else value
    for key, value in vars(args).items():
        if key in ("config", "command", "manifest") or value is None:
            continue
        values[key] = value
    return values


def resolve_train_config(values: Dict[str, Any]) -> TrainConfig:
    """Build a TrainConfig with every default materialized and beta resolved."""
    settings = get_settings()
    model_values = {k: v for k, v in values.items() if k in MODEL_KEYS}
    train_values = {k: v for k, v in values.items() if k in TRAIN_KEYS}
    train_values.setdefault("precision", settings.precision)
    model = build_model(ModelConfig, **model_values)
    return resolve_beta(build_model(TrainConfig, model=model, **train_values))


def _output_dir(values: Dict[str, Any]) -> Path:
    return ensure_dir(values.get("out") or get_settings().output_dir)


# ---- manifest-wrapped runners -----------------------------------------------


def run_train(payload: Dict[str, Any], out: Path) -> None:
    config = TrainConfig(**payload["train"])
    lr_image = load_image(payload["input"])
    hr_image = load_image(payload["hr"]) if payload.get("hr") else None
    logger.info(f"Training on {payload['input']} at scale {config.scale} (beta={config.beta}, alpha={config.alpha})")
    report = train_single_image(lr_image, hr_image, config, output_dir=str(out))
    summary = f"Wrote {report.output_image_path} after {report.completed_epochs} epochs"
    if report.psnr is not None:
        summary += f"; PSNR {report.psnr:.2f} dB, SSIM {report.ssim:.4f}"
    logger.info(summary)


def run_benchmark_command(payload: Dict[str, Any], out: Path) -> None:
    report = run_benchmark(BenchmarkSpec(**payload["benchmark"]), str(out))
    print(metrics.report_markdown(report))


def run_sweep_command(payload: Dict[str, Any], out: Path) -> None:
    result = run_sweep(SweepSpec(**payload["sweep"]), str(out))
    print((out / "sweep.md").read_text(encoding="utf-8"))
    if result.trend:
        logger.info(result.trend)


def run_cost(payload: Dict[str, Any], out: Path) -> None:
    model = ModelConfig(**payload["model"])
    spec = ConvCostSpec(**payload["spec"])
    with precision("f32"):
        params = init_params(model)
    side = payload.get("input_side")
    summary = model_cost_summary(params, (side, side) if side else None)
    factors = reduction_factors(spec)
    write_summary_csv(summary, out / "cost.csv")
    text = summary_markdown(summary, factors)
    (out / "cost.md").write_text(text, encoding="utf-8")
    print(text)


def run_metrics(payload: Dict[str, Any], out: Path) -> None:
    sr, hr = load_image(payload["sr"]), load_image(payload["hr"])
    convention, shave = payload["convention"], payload["shave"]
    scores = {
        "psnr": metrics.psnr(sr, hr, convention, shave),
        "ssim": metrics.ssim(sr, hr, convention, shave),
        "convention": convention,
        "shave": shave,
    }
    (out / "metrics.json").write_text(json.dumps(scores, indent=2), encoding="utf-8")
    print(f"PSNR {scores['psnr']:.4f} dB  SSIM {scores['ssim']:.6f}")


RUNNERS: Dict[str, Callable[[Dict[str, Any], Path], None]] = {
    "train": run_train,
    "benchmark": run_benchmark_command,
    "sweep": run_sweep_command,
    "cost": run_cost,
    "metrics": run_metrics,
}


def execute(command: str, payload: Dict[str, Any], inputs: List[str], out: Path, seed: Optional[int]) -> int:
    """Write the manifest, run the command, and record its final status."""
    manifest = RunManifest(
        command=command,
        config=payload,
        inputs=inputs,
        output_dir=str(out),
        seed=seed,
        tool_version=__version__,
    )
    manifest_path = out / MANIFEST_FILE
    write_model_json(manifest_path, manifest)
    try:
        RUNNERS[command](payload, out)
        manifest.status = "completed"
    except Exception:
        manifest.status = "failed"
        raise
    finally:
        manifest.finished_at = datetime.utcnow()
        write_model_json(manifest_path, manifest)
    return 0


# ---- argparse handlers ------------------------------------------------------


def cmd_train(args: Any) -> int:
    values = gather_values(args)
    if not values.get("input"):
        raise ValidationError("train requires --input")
    config = resolve_train_config(values)
    out = _output_dir(values)
    payload = {"train": json.loads(config.json()), "input": values["input"], "hr": values.get("hr")}
    inputs = [values["input"]] + ([values["hr"]] if values.get("hr") else [])
    return execute("train", payload, inputs, out, config.seed)


def cmd_benchmark(args: Any) -> int:
    values = gather_values(args)
    if not values.get("dataset_dir"):
        raise ValidationError("benchmark requires a dataset directory")
    config = resolve_train_config(values)
    spec = build_model(
        BenchmarkSpec,
        dataset_dir=values["dataset_dir"],
        train=config,
        workers=values.get("workers", get_settings().workers),
        canvas_mode=values.get("canvas_mode", "resize256"),
        baseline_only=values.get("baseline_only", False),
        shave=values.get("shave"),
        convention=values.get("convention", "y"),
    )
    out = _output_dir(values)
    return execute("benchmark", {"benchmark": json.loads(spec.json())}, [spec.dataset_dir], out, config.seed)


def cmd_sweep(args: Any) -> int:
    values = gather_values(args)
    config = resolve_train_config(values)
    spec = build_model(
        SweepSpec,
        axis=values.get("axis"),
        values=_split_list(values.get("values")) or [],
        images=_split_list(values.get("images")) or [],
        base=config,
        workers=values.get("workers", get_settings().workers),
        canvas_mode=values.get("canvas_mode", "native"),
        convention=values.get("convention", "y"),
    )
    out = _output_dir(values)
    return execute("sweep", {"sweep": json.loads(spec.json())}, list(spec.images), out, config.seed)


def cmd_cost(args: Any) -> int:
    values = gather_values(args)
    model = build_model(ModelConfig, **{k: v for k, v in values.items() if k in MODEL_KEYS})
    spec = build_model(
        ConvCostSpec,
        K=values.get("k", 3),
        N_in=values.get("n_in", 64),
        P_out=values.get("p_out", 32),
        M_spatial=values.get("m_spatial", 16),
    )
    payload = {"model": model.dict(), "spec": spec.dict(), "input_side": values.get("input_side")}
    return execute("cost", payload, [], _output_dir(values), None)


def cmd_metrics(args: Any) -> int:
    values = gather_values(args)
    if not values.get("sr") or not values.get("hr"):
        raise ValidationError("metrics requires --sr and --hr")
    scale = int(values.get("scale", TrainConfig.__fields__["scale"].default))
    payload = {
        "sr": values["sr"],
        "hr": values["hr"],
        "convention": values.get("convention", "y"),
        "shave": int(values.get("shave", scale)),
    }
    return execute("metrics", payload, [values["sr"], values["hr"]], _output_dir(values), None)


def cmd_replay(args: Any) -> int:
    """Re-run a command from its manifest alone."""
    document = read_json(Path(args.manifest))
    try:
        manifest = RunManifest(**document)
    except Exception as e:
        raise ConfigurationError(f"Invalid manifest: {args.manifest}", {"error": str(e)})
    if manifest.command not in RUNNERS:
        raise ConfigurationError(f"Manifest names an unknown command: {manifest.command}")
    out = ensure_dir(args.out or manifest.output_dir)
    logger.info(f"Replaying {manifest.command} from {args.manifest} into {out}")
    return execute(manifest.command, manifest.config, manifest.inputs, out, manifest.seed)


COMMANDS: Dict[str, Callable[[Any], int]] = {
    "train": cmd_train,
    "benchmark": cmd_benchmark,
    "sweep": cmd_sweep,
    "cost": cmd_cost,
    "metrics": cmd_metrics,
    "replay": cmd_replay,
}
