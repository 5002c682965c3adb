"""
Probabilistic non-local encoder and decoder.

The encoder maps an N x H x W x 3 batch to a diagonal Gaussian posterior over a
J-dimensional latent; the decoder maps latent codes back to canvas-sized images.
Parameters are plain `Tensor` leaves held in dataclasses and enumerated in a
stable order so optimizers and checkpoints can address them by name.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from nlvae.core.exceptions import CheckpointError, ContractError, ShapeError
from nlvae.core.logging import get_logger
from nlvae.engine.ops import (
    RunningStats,
    avg_pool2x,
    batch_norm,
    concat_channels,
    conv2d,
    conv2d_transpose,
    dense,
    depthwise_conv2d,
    global_avg_pool,
    leaky_relu,
    pointwise_conv,
    sigmoid,
    upsample2x,
)
from nlvae.engine.tensor import Tensor, get_default_dtype
from nlvae.models.config import ModelConfig
from nlvae.utils.constants import LOG_VAR_BOUNDS

logger = get_logger(__name__)

Mode = str  # "train" or "infer"


def _he_std(fan_in: int, slope: float) -> float:
    return float(np.sqrt(2.0 / (fan_in * (1.0 + slope ** 2))))


def _param(values: np.ndarray, name: str) -> Tensor:
    return Tensor(values, requires_grad=True, name=name, dtype=get_default_dtype())


# ---- parameter containers ---------------------------------------------------


@dataclass
class ConvUnit:
    """K x K convolution with bias, optionally followed by batch norm and leaky ReLU."""

    kernel: Tensor
    bias: Tensor
    gamma: Optional[Tensor] = None
    beta_shift: Optional[Tensor] = None
    stats: Optional[RunningStats] = None
    slope: float = 0.2
    eps: float = 1e-5

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        k: int,
        c_in: int,
        c_out: int,
        config: ModelConfig,
        normalized: bool = True,
    ) -> "ConvUnit":
        dtype = get_default_dtype()
        std = _he_std(k * k * max(c_in, 1), config.leaky_slope)
        unit = cls(
            kernel=_param(rng.normal(0.0, std, size=(k, k, c_in, c_out)), "kernel"),
            bias=_param(np.zeros(c_out), "bias"),
            slope=config.leaky_slope,
            eps=config.bn_eps,
        )
        if normalized:
            unit.gamma = _param(np.ones(c_out), "gamma")
            unit.beta_shift = _param(np.zeros(c_out), "beta_shift")
            unit.stats = RunningStats.fresh(c_out, dtype, config.bn_momentum)
        return unit

    @property
    def normalized(self) -> bool:
        return self.gamma is not None

    def __call__(self, x: Tensor, mode: Mode) -> Tensor:
        if self.kernel.shape[0] == 1:
            y = pointwise_conv(x, self.kernel)
        else:
            y = conv2d(x, self.kernel)
        return self.finish(y, mode)

    def finish(self, y: Tensor, mode: Mode) -> Tensor:
        """Bias, then batch norm and leaky ReLU when normalized."""
        y = y + self.bias
        if not self.normalized:
            return y
        y = batch_norm(y, self.gamma, self.beta_shift, mode, self.stats, self.eps)
        return leaky_relu(y, self.slope)

    def named_parameters(self, prefix: str) -> List[Tuple[str, Tensor]]:
        named = [(f"{prefix}.kernel", self.kernel), (f"{prefix}.bias", self.bias)]
        if self.normalized:
            named += [(f"{prefix}.gamma", self.gamma), (f"{prefix}.beta_shift", self.beta_shift)]
        return named

    def named_buffers(self, prefix: str) -> List[Tuple[str, RunningStats, str]]:
        if not self.normalized:
            return []
        return [(f"{prefix}.running_mean", self.stats, "mean"), (f"{prefix}.running_var", self.stats, "var")]


@dataclass
class NonLocalBlockParams:
    """
    Two-branch feature unit.

    `first` maps C_in to C_out; the mid path (`mid_pointwise`, `mid_conv`) reduces
    to a narrower width and returns to C_out; `fuse_kernel` projects the 2 * C_out
    concatenation back to C_out.
    """

    first: ConvUnit
    mid_pointwise: ConvUnit
    mid_conv: ConvUnit
    fuse_kernel: Tensor
    fuse_bias: Tensor
    mid_order: str = "pointwise_first"

    @classmethod
    def create(cls, rng: np.random.Generator, c_in: int, c_out: int, config: ModelConfig) -> "NonLocalBlockParams":
        mid = max(1, c_out // 2)
        first = ConvUnit.create(rng, 3, c_in, c_out, config)
        if config.mid_order == "pointwise_first":
            mid_pointwise = ConvUnit.create(rng, 1, c_out, mid, config)
            mid_conv = ConvUnit.create(rng, 3, mid, c_out, config)
        else:
            mid_conv = ConvUnit.create(rng, 3, c_out, mid, config)
            mid_pointwise = ConvUnit.create(rng, 1, mid, c_out, config)
        fuse_std = _he_std(2 * c_out, config.leaky_slope)
        return cls(
            first=first,
            mid_pointwise=mid_pointwise,
            mid_conv=mid_conv,
            fuse_kernel=_param(rng.normal(0.0, fuse_std, size=(1, 1, 2 * c_out, c_out)), "fuse_kernel"),
            fuse_bias=_param(np.zeros(c_out), "fuse_bias"),
            mid_order=config.mid_order,
        )

    @property
    def in_channels(self) -> int:
        return int(self.first.kernel.shape[2])

    @property
    def out_channels(self) -> int:
        return int(self.fuse_kernel.shape[3])

    def units(self) -> List[Tuple[str, ConvUnit]]:
        return [("first", self.first), ("mid_pointwise", self.mid_pointwise), ("mid_conv", self.mid_conv)]

    def named_parameters(self, prefix: str) -> List[Tuple[str, Tensor]]:
        named: List[Tuple[str, Tensor]] = []
        for label, unit in self.units():
            named += unit.named_parameters(f"{prefix}.{label}")
        return named + [(f"{prefix}.fuse.kernel", self.fuse_kernel), (f"{prefix}.fuse.bias", self.fuse_bias)]

    def named_buffers(self, prefix: str) -> List[Tuple[str, RunningStats, str]]:
        named = []
        for label, unit in self.units():
            named += unit.named_buffers(f"{prefix}.{label}")
        return named


@dataclass
class StandardBlockParams:
    """Single 3 x 3 conv + batch norm + leaky ReLU unit, the plain baseline for block ablations."""

    unit: ConvUnit

    @classmethod
    def create(cls, rng: np.random.Generator, c_in: int, c_out: int, config: ModelConfig) -> "StandardBlockParams":
        return cls(unit=ConvUnit.create(rng, 3, c_in, c_out, config))

    @property
    def in_channels(self) -> int:
        return int(self.unit.kernel.shape[2])

    @property
    def out_channels(self) -> int:
        return int(self.unit.kernel.shape[3])

    def named_parameters(self, prefix: str) -> List[Tuple[str, Tensor]]:
        return self.unit.named_parameters(f"{prefix}.unit")

    def named_buffers(self, prefix: str) -> List[Tuple[str, RunningStats, str]]:
        return self.unit.named_buffers(f"{prefix}.unit")


@dataclass
class DepthwiseSeparableBlockParams:
    """Per-channel 3 x 3 convolution with bias, then a normalized 1 x 1 projection to C_out."""

    depthwise_kernel: Tensor
    depthwise_bias: Tensor
    pointwise: ConvUnit

    @classmethod
    def create(
        cls, rng: np.random.Generator, c_in: int, c_out: int, config: ModelConfig
    ) -> "DepthwiseSeparableBlockParams":
        std = _he_std(9, config.leaky_slope)
        return cls(
            depthwise_kernel=_param(rng.normal(0.0, std, size=(3, 3, c_in)), "depthwise_kernel"),
            depthwise_bias=_param(np.zeros(c_in), "depthwise_bias"),
            pointwise=ConvUnit.create(rng, 1, c_in, c_out, config),
        )

    @property
    def in_channels(self) -> int:
        return int(self.depthwise_kernel.shape[2])

    @property
    def out_channels(self) -> int:
        return int(self.pointwise.kernel.shape[3])

    def named_parameters(self, prefix: str) -> List[Tuple[str, Tensor]]:
        return [
            (f"{prefix}.depthwise.kernel", self.depthwise_kernel),
            (f"{prefix}.depthwise.bias", self.depthwise_bias),
        ] + self.pointwise.named_parameters(f"{prefix}.pointwise")

    def named_buffers(self, prefix: str) -> List[Tuple[str, RunningStats, str]]:
        return self.pointwise.named_buffers(f"{prefix}.pointwise")


@dataclass
class TransposedBlockParams:
    """
    Normalized 3 x 3 transposed-convolution unit.

    In decoder upsampling stages it runs at stride 2 and replaces `upsample2x`;
    everywhere else it keeps the spatial extent.
    """

    unit: ConvUnit

    @classmethod
    def create(cls, rng: np.random.Generator, c_in: int, c_out: int, config: ModelConfig) -> "TransposedBlockParams":
        return cls(unit=ConvUnit.create(rng, 3, c_in, c_out, config))

    @property
    def in_channels(self) -> int:
        return int(self.unit.kernel.shape[2])

    @property
    def out_channels(self) -> int:
        return int(self.unit.kernel.shape[3])

    def named_parameters(self, prefix: str) -> List[Tuple[str, Tensor]]:
        return self.unit.named_parameters(f"{prefix}.unit")

    def named_buffers(self, prefix: str) -> List[Tuple[str, RunningStats, str]]:
        return self.unit.named_buffers(f"{prefix}.unit")


BlockParams = Union[NonLocalBlockParams, StandardBlockParams, DepthwiseSeparableBlockParams, TransposedBlockParams]


@dataclass
class DenseParams:
    weight: Tensor
    bias: Tensor

    @classmethod
    def create(cls, rng: np.random.Generator, d_in: int, d_out: int, std: float) -> "DenseParams":
        values = rng.normal(0.0, std, size=(d_in, d_out)) if std > 0 else np.zeros((d_in, d_out))
        return cls(weight=_param(values, "weight"), bias=_param(np.zeros(d_out), "bias"))

    def __call__(self, x: Tensor) -> Tensor:
        return dense(x, self.weight, self.bias)

    def named_parameters(self, prefix: str) -> List[Tuple[str, Tensor]]:
        return [(f"{prefix}.weight", self.weight), (f"{prefix}.bias", self.bias)]


@dataclass
class NlvaeParams:
    """All encoder and decoder parameters for one model configuration."""

    config: ModelConfig
    encoder: List[BlockParams]
    mu_head: DenseParams
    logvar_head: DenseParams
    decoder_seed: DenseParams
    decoder: List[BlockParams]
    output_conv: ConvUnit

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        """Stable, ordered enumeration of every trainable tensor."""
        named: List[Tuple[str, Tensor]] = []
        for i, block in enumerate(self.encoder):
            named += block.named_parameters(f"encoder.{i}")
        named += self.mu_head.named_parameters("mu_head")
        named += self.logvar_head.named_parameters("logvar_head")
        named += self.decoder_seed.named_parameters("decoder_seed")
        for i, block in enumerate(self.decoder):
            named += block.named_parameters(f"decoder.{i}")
        named += self.output_conv.named_parameters("output_conv")
        return named

    def named_buffers(self) -> List[Tuple[str, RunningStats, str]]:
        named = []
        for i, block in enumerate(self.encoder):
            named += block.named_buffers(f"encoder.{i}")
        for i, block in enumerate(self.decoder):
            named += block.named_buffers(f"decoder.{i}")
        return named

    def parameters(self) -> List[Tensor]:
        return [tensor for _, tensor in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(t.size for t in self.parameters())

    def zero_grad(self) -> None:
        for tensor in self.parameters():
            tensor.zero_grad()

    def state_arrays(self) -> Dict[str, np.ndarray]:
        """Parameters and batch-norm running statistics keyed by name."""
        state = {name: tensor.data for name, tensor in self.named_parameters()}
        for name, stats, attribute in self.named_buffers():
            state[name] = getattr(stats, attribute)
        return state

    def load_state_arrays(self, state: Dict[str, np.ndarray]) -> None:
        expected = {name: tensor for name, tensor in self.named_parameters()}
        buffers = {name: (stats, attribute) for name, stats, attribute in self.named_buffers()}
        missing = (set(expected) | set(buffers)) - set(state)
        unknown = set(state) - set(expected) - set(buffers)
        if missing or unknown:
            raise CheckpointError(
                "Checkpoint tensors do not match the model",
                {"missing": sorted(missing)[:10], "unknown": sorted(unknown)[:10]},
            )
        for name, tensor in expected.items():
            values = state[name]
            if values.shape != tensor.shape:
                raise CheckpointError(
                    f"Shape mismatch for {name}",
                    {"checkpoint": list(values.shape), "model": list(tensor.shape)},
                )
            tensor.data = np.array(values, dtype=tensor.dtype, copy=True)
            tensor.zero_grad()
        for name, (stats, attribute) in buffers.items():
            current = getattr(stats, attribute)
            if state[name].shape != current.shape:
                raise CheckpointError(f"Shape mismatch for {name}")
            setattr(stats, attribute, np.array(state[name], dtype=current.dtype, copy=True))


@dataclass
class LatentDistribution:
    """Diagonal Gaussian posterior; `log_var` is already clamped to the configured bounds."""

    mu: Tensor
    log_var: Tensor

    @property
    def J(self) -> int:
        return int(self.mu.shape[-1])

    def sigma(self) -> np.ndarray:
        return np.exp(0.5 * self.log_var.data)


@dataclass
class LayerSpec:
    """Geometry of one weighted layer, used by the cost model."""

    name: str
    kind: str
    K: int
    N_in: int
    P_out: int
    M_spatial: int
    bias: int = 0
    bn: int = 0
    stride: int = 1


# ---- construction -----------------------------------------------------------


_BLOCK_TYPES = {
    "non_local": NonLocalBlockParams,
    "standard": StandardBlockParams,
    "depthwise_separable": DepthwiseSeparableBlockParams,
    "transposed": TransposedBlockParams,
}


def _make_block(rng: np.random.Generator, c_in: int, c_out: int, config: ModelConfig) -> BlockParams:
    return _BLOCK_TYPES[config.block_type].create(rng, c_in, c_out, config)


def init_params(config: ModelConfig, seed: int = 0, zero_heads: bool = False) -> NlvaeParams:
    """
    Initialize parameters in the active precision.

    Kernels are He-normal for the leaky slope, the decoder seed is Glorot-normal,
    biases zero, batch-norm scales one.
    With `zero_heads` the mu and log-variance heads start at zero, so every input
    maps to the prior N(0, I).
    """
    rng = np.random.default_rng(seed)
    encoder: List[BlockParams] = []
    c_in = 3
    for width in config.encoder_widths():
        encoder.append(_make_block(rng, c_in, width, config))
        c_in = width
    head_std = 0.0 if zero_heads else float(np.sqrt(1.0 / c_in))
    mu_head = DenseParams.create(rng, c_in, config.latent_dim, head_std)
    logvar_head = DenseParams.create(rng, c_in, config.latent_dim, head_std)

    seed_channels = config.seed_channels()
    seed_units = config.seed_size ** 2 * seed_channels
    glorot_std = float(np.sqrt(2.0 / (config.latent_dim + seed_units)))
    decoder_seed = DenseParams.create(rng, config.latent_dim, seed_units, glorot_std)
    decoder: List[BlockParams] = []
    c_in = seed_channels
    for width in config.decoder_widths():
        decoder.append(_make_block(rng, c_in, width, config))
        c_in = width
    output_conv = ConvUnit.create(rng, 3, c_in, 3, config, normalized=False)
    params = NlvaeParams(
        config=config,
        encoder=encoder,
        mu_head=mu_head,
        logvar_head=logvar_head,
        decoder_seed=decoder_seed,
        decoder=decoder,
        output_conv=output_conv,
    )
    logger.debug(f"Initialized model with {params.parameter_count()} parameters")
    return params


# ---- forward passes ---------------------------------------------------------


def non_local_block(x: Tensor, params: NonLocalBlockParams, mode: Mode) -> Tensor:
    """y = fuse(concat(f1, f3)) with f1 = unit(x) and f3 the mid path applied to f1."""
    if x.ndim != 4 or x.shape[3] != params.in_channels:
        raise ShapeError(
            "non_local_block input channels do not match first_conv",
            {"input": list(x.shape), "expected_channels": params.in_channels},
        )
    f1 = params.first(x, mode)
    if params.mid_order == "pointwise_first":
        f3 = params.mid_conv(params.mid_pointwise(f1, mode), mode)
    else:
        f3 = params.mid_pointwise(params.mid_conv(f1, mode), mode)
    fused = pointwise_conv(concat_channels(f1, f3), params.fuse_kernel)
    return fused + params.fuse_bias


def standard_block(x: Tensor, params: StandardBlockParams, mode: Mode) -> Tensor:
    if x.ndim != 4 or x.shape[3] != params.in_channels:
        raise ShapeError(
            "standard_block input channels do not match its kernel",
            {"input": list(x.shape), "expected_channels": params.in_channels},
        )
    return params.unit(x, mode)


def depthwise_separable_block(x: Tensor, params: DepthwiseSeparableBlockParams, mode: Mode) -> Tensor:
    if x.ndim != 4 or x.shape[3] != params.in_channels:
        raise ShapeError(
            "depthwise_separable_block input channels do not match its depthwise kernel",
            {"input": list(x.shape), "expected_channels": params.in_channels},
        )
    y = depthwise_conv2d(x, params.depthwise_kernel) + params.depthwise_bias
    return params.pointwise(y, mode)


def transposed_block(x: Tensor, params: TransposedBlockParams, mode: Mode, stride: int = 1) -> Tensor:
    """Transposed 3 x 3 conv at `stride` (output extent is stride x the input), then bias, BN, leaky ReLU."""
    if x.ndim != 4 or x.shape[3] != params.in_channels:
        raise ShapeError(
            "transposed_block input channels do not match its kernel",
            {"input": list(x.shape), "expected_channels": params.in_channels},
        )
    return params.unit.finish(conv2d_transpose(x, params.unit.kernel, stride), mode)


def apply_block(x: Tensor, params: BlockParams, mode: Mode) -> Tensor:
    if isinstance(params, StandardBlockParams):
        return standard_block(x, params, mode)
    if isinstance(params, DepthwiseSeparableBlockParams):
        return depthwise_separable_block(x, params, mode)
    if isinstance(params, TransposedBlockParams):
        return transposed_block(x, params, mode)
    return non_local_block(x, params, mode)


def encode(x: Tensor, params: NlvaeParams, mode: Mode = "train") -> LatentDistribution:
    """Blocks with 2x pooling after each, global average pooling, then the two dense heads."""
    if x.ndim != 4 or x.shape[3] != 3:
        raise ShapeError("encode expects an N x H x W x 3 batch", {"shape": list(x.shape)})
    stride = 2 ** len(params.encoder)
    if x.shape[1] % stride or x.shape[2] % stride:
        raise ContractError(
            "encoder input dims must be divisible by 2^encoder_blocks",
            {"shape": list(x.shape), "divisor": stride},
        )
    h = x
    for block in params.encoder:
        h = avg_pool2x(apply_block(h, block, mode))
    pooled = global_avg_pool(h)
    low, high = LOG_VAR_BOUNDS
    return LatentDistribution(mu=params.mu_head(pooled), log_var=params.logvar_head(pooled).clip(low, high))


def reparameterize(
    dist: LatentDistribution,
    rng: Optional[np.random.Generator] = None,
    eps: Optional[np.ndarray] = None,
) -> Tensor:
    """z = mu + exp(log_var / 2) * eps; eps is a constant, so gradients reach only mu and log_var."""
    if eps is None:
        if rng is None:
            raise ContractError("reparameterize needs an rng or explicit eps")
        eps = rng.standard_normal(dist.mu.shape)
    noise = Tensor(np.broadcast_to(eps, dist.mu.shape), dtype=dist.mu.dtype)
    return dist.mu + (dist.log_var * 0.5).exp() * noise


def decode(
    z: Tensor,
    params: NlvaeParams,
    target_hw: Optional[Tuple[int, int]] = None,
    mode: Mode = "train",
) -> Tensor:
    """
    Dense seed map, alternating 2x upsampling and blocks, 3 x 3 output conv, sigmoid.

    Transposed blocks in the upsampling stages double the extent themselves.
    """
    config = params.config
    if target_hw is not None and tuple(target_hw) != (config.canvas, config.canvas):
        raise ContractError(
            "decoder target not reachable from the seed map",
            {"target": list(target_hw), "canvas": config.canvas, "seed": config.seed_size},
        )
    if z.ndim == 1:
        z = z.reshape(1, z.shape[0])
    if z.shape[1] != config.latent_dim:
        raise ShapeError("latent width does not match the decoder", {"z": list(z.shape), "J": config.latent_dim})
    n = z.shape[0]
    side = config.seed_size
    h = leaky_relu(params.decoder_seed(z), config.leaky_slope)
    h = h.reshape(n, side, side, config.seed_channels())
    stages = config.upsample_stages
    for i, block in enumerate(params.decoder):
        if isinstance(block, TransposedBlockParams):
            h = transposed_block(h, block, mode, stride=2 if i < stages else 1)
            continue
        if i < stages:
            h = upsample2x(h, config.upsample_mode)
        h = apply_block(h, block, mode)
    for _ in range(len(params.decoder), stages):
        h = upsample2x(h, config.upsample_mode)
    return sigmoid(params.output_conv(h, mode))


def sample_prior(J: int, rng: np.random.Generator) -> Tensor:
    """Draw z ~ N(0, I) of length J."""
    if J < 1:
        raise ContractError("latent dimension must be at least 1", {"J": J})
    return Tensor(rng.standard_normal(J))


# ---- model facade -----------------------------------------------------------


@dataclass
class NlvaeModel:
    """Convenience wrapper binding parameters to the forward functions."""

    params: NlvaeParams

    @classmethod
    def create(cls, config: ModelConfig, seed: int = 0, zero_heads: bool = False) -> "NlvaeModel":
        return cls(params=init_params(config, seed=seed, zero_heads=zero_heads))

    @property
    def config(self) -> ModelConfig:
        return self.params.config

    def encode(self, x: Tensor, mode: Mode = "train") -> LatentDistribution:
        return encode(x, self.params, mode)

    def decode(self, z: Tensor, mode: Mode = "train") -> Tensor:
        return decode(z, self.params, mode=mode)

    def forward(self, x: Tensor, rng: np.random.Generator, mode: Mode = "train") -> Tuple[Tensor, LatentDistribution]:
        dist = self.encode(x, mode)
        return self.decode(reparameterize(dist, rng), mode), dist

    def reconstruct(self, x: Tensor) -> Tensor:
        """Deterministic inference: infer-mode batch norm and z = mu."""
        dist = self.encode(x, "infer")
        return self.decode(dist.mu, "infer")

    def parameters(self) -> List[Tensor]:
        return self.params.parameters()

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        return self.params.named_parameters()

    def layer_plan(self, input_side: Optional[int] = None) -> List[LayerSpec]:
        """Every weighted layer in execution order with its output spatial extent.

        `input_side` sets the encoder input extent (the canvas by default); decoder
        extents are fixed by the seed map.
        """
        config = self.config
        plan: List[LayerSpec] = []
        side = input_side or config.canvas
        for i, block in enumerate(self.params.encoder):
            plan += _block_layers(f"encoder.{i}", block, side)
            side //= 2
        for name, head in (("mu_head", self.params.mu_head), ("logvar_head", self.params.logvar_head),
                           ("decoder_seed", self.params.decoder_seed)):
            d_in, d_out = head.weight.shape
            plan.append(LayerSpec(name=name, kind="dense", K=1, N_in=d_in, P_out=d_out, M_spatial=1, bias=d_out))
        side = config.seed_size
        for i, block in enumerate(self.params.decoder):
            stride = 1
            if i < config.upsample_stages:
                side *= 2
                stride = 2
            plan += _block_layers(f"decoder.{i}", block, side, stride)
        unit = self.params.output_conv
        plan.append(_unit_layer("output_conv", unit, config.canvas))
        return plan


def _unit_layer(name: str, unit: ConvUnit, side: int) -> LayerSpec:
    k, _, c_in, c_out = unit.kernel.shape
    return LayerSpec(
        name=name,
        kind="pointwise" if k == 1 else "conv",
        K=int(k),
        N_in=int(c_in),
        P_out=int(c_out),
        M_spatial=side,
        bias=int(c_out),
        bn=2 * int(c_out) if unit.normalized else 0,
    )


def _block_layers(prefix: str, block: BlockParams, side: int, stride: int = 1) -> List[LayerSpec]:
    """Layers of one block producing a side x side map; `stride` applies to transposed blocks only."""
    if isinstance(block, StandardBlockParams):
        return [_unit_layer(f"{prefix}.unit", block.unit, side)]
    if isinstance(block, TransposedBlockParams):
        layer = _unit_layer(f"{prefix}.unit", block.unit, side)
        layer.kind, layer.stride = "transposed", stride
        return [layer]
    if isinstance(block, DepthwiseSeparableBlockParams):
        k, _, channels = block.depthwise_kernel.shape
        depthwise = LayerSpec(
            name=f"{prefix}.depthwise",
            kind="depthwise",
            K=int(k),
            N_in=int(channels),
            P_out=int(channels),
            M_spatial=side,
            bias=int(channels),
        )
        return [depthwise, _unit_layer(f"{prefix}.pointwise", block.pointwise, side)]
    layers = [_unit_layer(f"{prefix}.{label}", unit, side) for label, unit in block.units()]
    _, _, c_in, c_out = block.fuse_kernel.shape
    layers.append(LayerSpec(
        name=f"{prefix}.fuse",
        kind="pointwise",
        K=1,
        N_in=int(c_in),
        P_out=int(c_out),
        M_spatial=side,
        bias=int(c_out),
    ))
    return layers
