"""
Configuration models for training, degradation, benchmarking, and sweeps.
Defines the structure and validation for every run-level parameter.
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, root_validator, validator

from nlvae.utils.constants import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    BN_EPS,
    BN_MOMENTUM,
    CANVAS_MODES,
    DECODER_WIDTH_MULTIPLIERS,
    DEFAULT_ALPHA,
    DEFAULT_BASE_WIDTH,
    DEFAULT_CANVAS,
    DEFAULT_CROP,
    DEFAULT_DECODER_BLOCKS,
    DEFAULT_ENCODER_BLOCKS,
    DEFAULT_EPOCHS,
    DEFAULT_LATENT_DIM,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MINIBATCH,
    DEFAULT_UPSAMPLE_STAGES,
    EARLY_STOP_MIN_DELTA,
    EARLY_STOP_PATIENCE,
    ENCODER_WIDTH_MULTIPLIERS,
    LEAKY_SLOPE,
    SWEEP_DEFAULT_VALUES,
)


def _widths(count: int, base: int, multipliers: List[int]) -> List[int]:
    return [base * multipliers[min(i, len(multipliers) - 1)] for i in range(count)]


class ModelConfig(BaseModel):
    """
    Architecture of the non-local encoder and decoder.

    Attributes:
        encoder_blocks: Non-local blocks in the encoder, each followed by 2x average pooling
        decoder_blocks: Non-local blocks in the decoder; the first `upsample_stages` follow a 2x upsample
        base_width: Channel unit that the default width plans scale with
        encoder_channels: Explicit encoder width plan (overrides base_width)
        decoder_channels: Explicit decoder width plan (overrides base_width)
        latent_dim: Latent dimension J
        canvas: Side length of the square network input and output
        upsample_stages: Number of 2x upsampling stages from the decoder seed map
        block_type: `non_local` (two-branch unit), `standard` (single conv unit),
            `depthwise_separable` (per-channel conv + 1 x 1 projection) or `transposed`
        mid_order: Ordering of the mid path inside a non-local block
    """

    encoder_blocks: int = Field(DEFAULT_ENCODER_BLOCKS, ge=1)
    decoder_blocks: int = Field(DEFAULT_DECODER_BLOCKS, ge=1)
    base_width: int = Field(DEFAULT_BASE_WIDTH, ge=1)
    encoder_channels: Optional[List[int]] = None
    decoder_channels: Optional[List[int]] = None
    latent_dim: int = Field(DEFAULT_LATENT_DIM, ge=1)
    canvas: int = Field(DEFAULT_CANVAS, ge=2)
    upsample_stages: int = Field(DEFAULT_UPSAMPLE_STAGES, ge=0)
    leaky_slope: float = LEAKY_SLOPE
    block_type: Literal["non_local", "standard", "depthwise_separable", "transposed"] = "non_local"
    mid_order: Literal["pointwise_first", "conv_first"] = "pointwise_first"
    upsample_mode: Literal["nearest", "bilinear"] = "bilinear"
    bn_eps: float = Field(BN_EPS, gt=0)
    bn_momentum: float = Field(BN_MOMENTUM, gt=0, le=1)

    @validator("leaky_slope")
    def validate_slope(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError("leaky_slope must lie in (0, 1)")
        return v

    @validator("encoder_channels", "decoder_channels")
    def validate_channel_plan(cls, v):
        if v is not None and any(c < 1 for c in v):
            raise ValueError("channel widths must be positive")
        return v

    @root_validator(skip_on_failure=True)
    def validate_geometry(cls, values):
        canvas = values["canvas"]
        if canvas % (2 ** values["encoder_blocks"]):
            raise ValueError(f"canvas {canvas} is not divisible by 2^encoder_blocks")
        if canvas % (2 ** values["upsample_stages"]):
            raise ValueError(f"canvas {canvas} is not divisible by 2^upsample_stages")
        plan = values.get("encoder_channels")
        if plan is not None and len(plan) != values["encoder_blocks"]:
            raise ValueError("encoder_channels length must equal encoder_blocks")
        plan = values.get("decoder_channels")
        if plan is not None and len(plan) != values["decoder_blocks"]:
            raise ValueError("decoder_channels length must equal decoder_blocks")
        return values

    @property
    def seed_size(self) -> int:
        return self.canvas // (2 ** self.upsample_stages)

    def encoder_widths(self) -> List[int]:
        if self.encoder_channels is not None:
            return list(self.encoder_channels)
        return _widths(self.encoder_blocks, self.base_width, ENCODER_WIDTH_MULTIPLIERS)

    def decoder_widths(self) -> List[int]:
        if self.decoder_channels is not None:
            return list(self.decoder_channels)
        return _widths(self.decoder_blocks, self.base_width, DECODER_WIDTH_MULTIPLIERS)

    def seed_channels(self) -> int:
        return self.base_width * DECODER_WIDTH_MULTIPLIERS[0]


class DegradationSpec(BaseModel):
    """Degradation operator D(.; scale) turning an HR image into its LR counterpart."""

    scale: int = Field(..., ge=2)
    down_kernel: Literal["bicubic", "bilinear", "box"] = "bicubic"
    antialias: bool = True


class TrainConfig(BaseModel):
    """
    Everything a single-image training run depends on.

    `beta` stays None until resolved from the scale table or the global value.
    """

    scale: int = Field(4, ge=2)
    beta: Optional[float] = None
    beta_policy: Literal["per_scale", "global"] = "per_scale"
    alpha: float = DEFAULT_ALPHA
    epochs: int = Field(DEFAULT_EPOCHS, ge=1)
    minibatch: int = Field(DEFAULT_MINIBATCH, ge=1)
    crop: int = Field(DEFAULT_CROP, ge=1)
    learning_rate: float = Field(DEFAULT_LEARNING_RATE, gt=0)
    adam_beta1: float = Field(ADAM_BETA1, ge=0, lt=1)
    adam_beta2: float = Field(ADAM_BETA2, ge=0, lt=1)
    adam_eps: float = Field(ADAM_EPS, gt=0)
    optimizer: Literal["adam", "sgd", "rmsprop"] = "adam"
    loss: Literal["l2", "l1"] = "l2"
    kl_form: Literal["standard", "printed"] = "standard"
    seed: int = 0
    precision: Literal["f32", "f64"] = "f32"
    augment: bool = False
    down_kernel: Literal["bicubic", "bilinear", "box"] = "bicubic"
    antialias: bool = True
    grad_clip: Optional[float] = Field(None, gt=0)
    early_stop: bool = False
    patience: int = Field(EARLY_STOP_PATIENCE, ge=1)
    min_delta: float = Field(EARLY_STOP_MIN_DELTA, ge=0)
    checkpoint_every: int = Field(0, ge=0)
    log_every: int = Field(50, ge=1)
    model: ModelConfig = Field(default_factory=ModelConfig)

    @validator("beta")
    def validate_beta(cls, v):
        if v is not None and v < 0:
            raise ValueError("beta must be non-negative")
        return v

    def degradation(self) -> DegradationSpec:
        return DegradationSpec(scale=self.scale, down_kernel=self.down_kernel, antialias=self.antialias)


class BenchmarkSpec(BaseModel):
    """Benchmark run over a directory of HR images: NLVAE and bicubic columns per image."""

    dataset_dir: str
    train: TrainConfig
    workers: int = Field(1, ge=1)
    canvas_mode: str = "resize256"
    baseline_only: bool = False
    shave: Optional[int] = None
    convention: Literal["y", "rgb"] = "y"

    @validator("canvas_mode")
    def validate_canvas_mode(cls, v):
        if v not in CANVAS_MODES:
            raise ValueError(f"canvas_mode must be one of {CANVAS_MODES}")
        return v


class SweepSpec(BaseModel):
    """One-axis ablation: the base config is trained once per axis value on every fixture image."""

    axis: Literal["loss", "optimizer", "encoder_blocks", "decoder_blocks", "beta", "block_type"]
    values: List[Any] = Field(default_factory=list)
    images: List[str] = Field(..., min_items=1)
    base: TrainConfig
    workers: int = Field(1, ge=1)
    canvas_mode: Literal["resize256", "native"] = "native"
    convention: Literal["y", "rgb"] = "y"

    @root_validator(skip_on_failure=True)
    def fill_and_check_values(cls, values):
        axis = values["axis"]
        chosen = values.get("values") or list(SWEEP_DEFAULT_VALUES[axis])
        if len(set(map(str, chosen))) != len(chosen):
            raise ValueError("sweep values must be distinct")
        values["values"] = chosen
        return values

    def variants(self) -> Dict[str, TrainConfig]:
        """Return one config per axis value; only the swept field differs from `base`."""
        variants: Dict[str, TrainConfig] = {}
        for value in self.values:
            data = self.base.dict()
            if self.axis in ("encoder_blocks", "decoder_blocks", "block_type"):
                data["model"][self.axis] = int(value) if self.axis != "block_type" else value
                data["model"]["encoder_channels"] = None
                data["model"]["decoder_channels"] = None
            elif self.axis == "beta":
                data["beta"] = float(value)
            else:
                data[self.axis] = value
            variants[str(value)] = TrainConfig(**data)
        return variants


class ConvCostSpec(BaseModel):
    """
    One convolution layer for the cost model.

    Attributes:
        K: Kernel extent
        N_in: Input channels
        P_out: Output channels
        M_spatial: Output spatial extent (square feature map)
    """

    K: int = Field(..., ge=1)
    N_in: int = Field(..., ge=1)
    P_out: int = Field(..., ge=1)
    M_spatial: int = Field(..., ge=1)
