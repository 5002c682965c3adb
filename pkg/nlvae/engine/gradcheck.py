"""
Central finite-difference gradient checking for the autodiff engine.
Intended for 64-bit mode; 32-bit checks need a larger step and looser tolerance.
"""

from typing import Callable, List, Sequence

import numpy as np

from nlvae.engine.tensor import Tensor

LossFn = Callable[[], Tensor]


def numerical_gradient(loss_fn: LossFn, target: Tensor, eps: float = 1e-6) -> np.ndarray:
    """Estimate d(loss)/d(target) by perturbing each element of `target` in place."""
    grad = np.zeros(target.shape, dtype=np.float64)
    flat = target.data.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + eps
        plus = loss_fn().item()
        flat[index] = original - eps
        minus = loss_fn().item()
        flat[index] = original
        grad.flat[index] = (plus - minus) / (2.0 * eps)
    return grad


def analytic_gradients(loss_fn: LossFn, inputs: Sequence[Tensor]) -> List[np.ndarray]:
    for tensor in inputs:
        tensor.zero_grad()
    loss_fn().backward()
    return [
        np.zeros(t.shape) if t.grad is None else np.array(t.grad, dtype=np.float64)
        for t in inputs
    ]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm relative error between two gradient arrays."""
    if analytic.size == 0:
        return 0.0
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def check_gradients(loss_fn: LossFn, inputs: Sequence[Tensor], eps: float = 1e-6) -> float:
    """Return the worst relative error between autodiff and finite differences over `inputs`."""
    analytic = analytic_gradients(loss_fn, inputs)
    worst = 0.0
    for tensor, grad in zip(inputs, analytic):
        worst = max(worst, relative_error(grad, numerical_gradient(loss_fn, tensor, eps)))
    return worst
