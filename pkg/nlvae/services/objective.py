"""
Objective: reconstruction loss, KL divergence, and the beta-weighted total.
"""

from typing import Optional, Tuple, Union

from nlvae.core.exceptions import ConfigurationError, ShapeError
from nlvae.core.logging import get_logger
from nlvae.engine.tensor import Tensor
from nlvae.models.config import TrainConfig
from nlvae.models.records import LossBreakdown
from nlvae.services.network import LatentDistribution
from nlvae.utils.constants import BETA_BY_SCALE, GLOBAL_BETA

logger = get_logger(__name__)

Scalar = Union[Tensor, float]


def reconstruction_loss(pred: Tensor, target: Tensor, kind: str = "l2") -> Tensor:
    """
    (1/M) * sum over samples and pixels of the squared (or absolute) error.

    Args:
        pred: M x ... reconstruction
        target: M x ... pseudo-label batch of the same shape
        kind: `l2` or `l1`
    """
    if pred.shape != target.shape:
        raise ShapeError("prediction and target shapes differ", {"pred": list(pred.shape), "target": list(target.shape)})
    if pred.ndim == 0 or pred.shape[0] < 1:
        raise ShapeError("reconstruction_loss needs at least one sample", {"shape": list(pred.shape)})
    diff = pred - target
    if kind == "l2":
        per_element = diff * diff
    elif kind == "l1":
        per_element = diff.abs()
    else:
        raise ConfigurationError(f"Unknown reconstruction loss: {kind}", {"allowed": ["l2", "l1"]})
    return per_element.sum() * (1.0 / pred.shape[0])


def kl_loss(dist: LatentDistribution, form: str = "standard") -> Tensor:
    """
    KL(q(z|x) || N(0, I)) averaged over the posteriors in `dist`.

    `standard` is -1/2 * sum(1 + log_var - mu^2 - exp(log_var)), always >= 0.
    `printed` drops the -1/2 factor; it is kept for comparison runs only and is <= 0.
    """
    mu, log_var = dist.mu, dist.log_var
    count = mu.shape[0] if mu.ndim == 2 else 1
    terms = 1.0 + log_var - mu * mu - log_var.exp()
    if form == "standard":
        return terms.sum() * (-0.5 / count)
    if form == "printed":
        return terms.sum() * (1.0 / count)
    raise ConfigurationError(f"Unknown KL form: {form}", {"allowed": ["standard", "printed"]})


def _as_tensor(value: Scalar) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(float(value))


def total_loss(l_r: Scalar, l_kl: Scalar, beta: float, alpha: float = 0.0) -> Tuple[Tensor, LossBreakdown]:
    """
    L = l_r + beta * l_kl + alpha.

    Returns the differentiable total and its float breakdown. `alpha` enters as a
    constant, so parameter gradients do not depend on it.
    """
    if beta < 0:
        raise ConfigurationError("beta must be non-negative", {"beta": beta})
    l_r_t, l_kl_t = _as_tensor(l_r), _as_tensor(l_kl)
    total = l_r_t + l_kl_t * float(beta) + float(alpha)
    l_r_v, l_kl_v = l_r_t.item(), l_kl_t.item()
    breakdown = LossBreakdown(
        l_r=l_r_v,
        l_kl=l_kl_v,
        beta=float(beta),
        alpha=float(alpha),
        total=l_r_v + float(beta) * l_kl_v + float(alpha),
    )
    return total, breakdown


def beta_for_scale(scale: int, override: Optional[float] = None) -> float:
    """Per-scale KL weight: 3 -> 150, 4 -> 200, 8 -> 300, unless overridden."""
    if override is not None:
        if override < 0:
            raise ConfigurationError("beta must be non-negative", {"beta": override})
        return float(override)
    if scale not in BETA_BY_SCALE:
        raise ConfigurationError(
            f"No default beta for scale {scale}; pass an explicit beta",
            {"scale": scale, "known_scales": sorted(BETA_BY_SCALE)},
        )
    return float(BETA_BY_SCALE[scale])


def resolve_beta(config: TrainConfig) -> TrainConfig:
    """
    Return a copy of `config` with beta materialized: explicit > per-scale table > global.

    Scales missing from the table fall back to the global value under either policy.
    """
    if config.beta is not None:
        return config
    if config.beta_policy == "per_scale" and config.scale in BETA_BY_SCALE:
        beta = beta_for_scale(config.scale)
    else:
        beta = float(GLOBAL_BETA)
        if config.beta_policy == "per_scale":
            logger.info(f"No table beta for scale {config.scale}; using the global beta {beta:g}")
    return config.copy(update={"beta": beta})
