"""
First-order optimizers over named parameter tensors.

Adam is the default; SGD and RMSProp exist for optimizer comparison runs.
Every `step` validates all gradients before touching any state, so a
non-finite gradient leaves parameters and moments exactly as they were.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from nlvae.core.exceptions import ConfigurationError, NumericError
from nlvae.core.logging import get_logger
from nlvae.engine.tensor import Tensor
from nlvae.models.config import TrainConfig
from nlvae.utils.constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, RMSPROP_RHO

logger = get_logger(__name__)

NamedParams = Sequence[Tuple[str, Tensor]]


def collect_gradients(params: NamedParams) -> Dict[str, np.ndarray]:
    """Gradient per parameter name; parameters without a gradient count as zero."""
    grads = {}
    for name, tensor in params:
        grad = np.zeros_like(tensor.data) if tensor.grad is None else tensor.grad
        if not np.all(np.isfinite(grad)):
            raise NumericError("Non-finite gradient", {"parameter": name})
        grads[name] = grad
    return grads


def clip_gradients(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    """Rescale `grads` in place so their global L2 norm is at most `max_norm`; return the original norm."""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm > max_norm:
        factor = max_norm / (norm + 1e-12)
        for name in grads:
            grads[name] = grads[name] * factor
    return norm


@dataclass
class AdamState:
    """Step counter and per-parameter moment estimates."""

    learning_rate: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: NamedParams, grads: Dict[str, np.ndarray], state: AdamState) -> AdamState:
    """
    One bias-corrected Adam update, in place.

    param -= (lr / bc1) * m / (sqrt(v / bc2) + eps) with bc_i = 1 - beta_i^t.
    """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericError("Non-finite gradient", {"parameter": name, "step": state.t})
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    step_size = state.learning_rate / bc1
    for name, tensor in params:
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(tensor.data)
            state.v[name] = np.zeros_like(tensor.data)
        state.m[name] *= state.beta1
        state.m[name] += (1.0 - state.beta1) * g
        state.v[name] *= state.beta2
        state.v[name] += (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(state.v[name] * (1.0 / bc2)) + state.eps
        tensor.data -= (step_size * state.m[name] / denom).astype(tensor.dtype, copy=False)
    return state


class Optimizer:
    """Base optimizer bound to an ordered list of named parameters."""

    def __init__(self, params: NamedParams, learning_rate: float, grad_clip: Optional[float] = None):
        if learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive", {"learning_rate": learning_rate})
        self.params: List[Tuple[str, Tensor]] = list(params)
        self.learning_rate = learning_rate
        self.grad_clip = grad_clip
        self.steps = 0

    def zero_grad(self) -> None:
        for _, tensor in self.params:
            tensor.zero_grad()

    def step(self) -> None:
        grads = collect_gradients(self.params)
        if self.grad_clip is not None:
            clip_gradients(grads, self.grad_clip)
        self._update(grads)
        self.steps += 1

    def _update(self, grads: Dict[str, np.ndarray]) -> None:
        raise NotImplementedError


class Adam(Optimizer):
    def __init__(
        self,
        params: NamedParams,
        learning_rate: float = 1e-3,
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        eps: float = ADAM_EPS,
        grad_clip: Optional[float] = None,
    ):
        super().__init__(params, learning_rate, grad_clip)
        self.state = AdamState(learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps)

    def _update(self, grads: Dict[str, np.ndarray]) -> None:
        adam_step(self.params, grads, self.state)


class SGD(Optimizer):
    """Plain gradient descent."""

    def _update(self, grads: Dict[str, np.ndarray]) -> None:
        for name, tensor in self.params:
            tensor.data -= (self.learning_rate * grads[name]).astype(tensor.dtype, copy=False)


class RMSProp(Optimizer):
    """Gradient scaled by a running RMS of past gradients."""

    def __init__(
        self,
        params: NamedParams,
        learning_rate: float = 1e-3,
        rho: float = RMSPROP_RHO,
        eps: float = ADAM_EPS,
        grad_clip: Optional[float] = None,
    ):
        super().__init__(params, learning_rate, grad_clip)
        self.rho = rho
        self.eps = eps
        self.square_avg: Dict[str, np.ndarray] = {}

    def _update(self, grads: Dict[str, np.ndarray]) -> None:
        for name, tensor in self.params:
            g = grads[name]
            avg = self.square_avg.setdefault(name, np.zeros_like(tensor.data))
            avg *= self.rho
            avg += (1.0 - self.rho) * (g * g)
            tensor.data -= (self.learning_rate * g / (np.sqrt(avg) + self.eps)).astype(tensor.dtype, copy=False)


def build_optimizer(params: NamedParams, config: TrainConfig) -> Optimizer:
    """Instantiate the optimizer named by `config.optimizer`."""
    if config.optimizer == "adam":
        return Adam(
            params,
            learning_rate=config.learning_rate,
            beta1=config.adam_beta1,
            beta2=config.adam_beta2,
            eps=config.adam_eps,
            grad_clip=config.grad_clip,
        )
    if config.optimizer == "sgd":
        return SGD(params, config.learning_rate, config.grad_clip)
    if config.optimizer == "rmsprop":
        return RMSProp(params, config.learning_rate, grad_clip=config.grad_clip)
    raise ConfigurationError(f"Unknown optimizer: {config.optimizer}")
