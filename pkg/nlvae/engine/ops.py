"""
Differentiable neural-network operations on N x H x W x C tensors.

Each operation is a `Function` with an explicit backward rule plus a thin
functional wrapper that validates shapes before recording the node.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import expit

from nlvae.core.exceptions import ContractError, ShapeError
from nlvae.engine.tensor import Function, Tensor
from nlvae.utils.constants import BN_EPS, BN_MOMENTUM, LEAKY_SLOPE


def _require_nhwc(x: Tensor, op: str) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{op} expects an N x H x W x C tensor", {"shape": list(x.shape)})


def conv_output_size(size: int, kernel: int, stride: int, padding: str) -> Tuple[int, int, int]:
    """Return (output extent, pad before, pad after) for one spatial axis."""
    if padding == "same":
        out = -(-size // stride)
        total = max((out - 1) * stride + kernel - size, 0)
        return out, total // 2, total - total // 2
    if padding == "valid":
        out = (size - kernel) // stride + 1
        if out < 1:
            raise ShapeError("valid convolution kernel larger than input", {"size": size, "kernel": kernel})
        return out, 0, 0
    raise ContractError(f"Unknown padding mode: {padding}", {"allowed": ["same", "valid"]})


class Conv2d(Function):
    """Cross-correlation accumulated over kernel offsets, one matmul per tap."""

    def forward(self, x, w, stride: int, padding: str):
        k = w.shape[0]
        n, h, wd, _ = x.shape
        oh, pad_top, pad_bottom = conv_output_size(h, k, stride, padding)
        ow, pad_left, pad_right = conv_output_size(wd, k, stride, padding)
        self.stride = stride
        self.out_hw = (oh, ow)
        self.crop = (pad_top, pad_left, h, wd)
        self.xp = np.pad(x, ((0, 0), (pad_top, pad_bottom), (pad_left, pad_right), (0, 0)))
        out = np.zeros((n, oh, ow, w.shape[3]), dtype=np.result_type(x, w))
        for i in range(k):
            for j in range(k):
                out += np.tensordot(self.xp[self._window(i, j)], w[i, j], axes=([3], [0]))
        return out

    def _window(self, i: int, j: int):
        oh, ow = self.out_hw
        s = self.stride
        return (
            slice(None),
            slice(i, i + s * (oh - 1) + 1, s),
            slice(j, j + s * (ow - 1) + 1, s),
            slice(None),
        )

    def backward(self, grad):
        _, w = self.tensors
        k = w.shape[0]
        grad_xp = np.zeros_like(self.xp)
        grad_w = np.zeros_like(w.data)
        for i in range(k):
            for j in range(k):
                window = self._window(i, j)
                grad_w[i, j] = np.tensordot(self.xp[window], grad, axes=([0, 1, 2], [0, 1, 2]))
                grad_xp[window] += np.tensordot(grad, w.data[i, j], axes=([3], [1]))
        top, left, h, wd = self.crop
        return grad_xp[:, top:top + h, left:left + wd, :], grad_w


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: str = "same") -> Tensor:
    """2D convolution of an N x H x W x Cin input with a K x K x Cin x Cout kernel."""
    _require_nhwc(x, "conv2d")
    if kernel.ndim != 4 or kernel.shape[0] != kernel.shape[1] or kernel.shape[0] < 1:
        raise ShapeError("conv2d expects a square K x K x Cin x Cout kernel", {"kernel": list(kernel.shape)})
    if kernel.shape[2] != x.shape[3]:
        raise ShapeError(
            "Kernel input channels do not match input",
            {"input_channels": x.shape[3], "kernel_channels": kernel.shape[2]},
        )
    if stride < 1:
        raise ContractError("stride must be at least 1", {"stride": stride})
    return Conv2d.apply(x, kernel, stride=stride, padding=padding)


def pointwise_conv(x: Tensor, kernel: Tensor) -> Tensor:
    """1 x 1 convolution: a per-pixel channel projection with Cin x Cout weights."""
    if kernel.ndim != 4 or kernel.shape[:2] != (1, 1):
        raise ContractError("pointwise_conv requires a 1 x 1 kernel", {"kernel": list(kernel.shape)})
    return conv2d(x, kernel, stride=1, padding="valid")


class DepthwiseConv2d(Function):
    """Per-channel K x K cross-correlation with same padding; channels never mix."""

    def forward(self, x, w):
        k = w.shape[0]
        _, h, wd, _ = x.shape
        pad = ((k - 1) // 2, k // 2)
        self.hw = (h, wd)
        self.xp = np.pad(x, ((0, 0), pad, pad, (0, 0)))
        out = np.zeros(x.shape, dtype=np.result_type(x, w))
        for i in range(k):
            for j in range(k):
                out += self.xp[:, i:i + h, j:j + wd, :] * w[i, j]
        return out

    def backward(self, grad):
        _, w = self.tensors
        k = w.shape[0]
        h, wd = self.hw
        grad_xp = np.zeros_like(self.xp)
        grad_w = np.zeros_like(w.data)
        for i in range(k):
            for j in range(k):
                window = self.xp[:, i:i + h, j:j + wd, :]
                grad_w[i, j] = (window * grad).sum(axis=(0, 1, 2))
                grad_xp[:, i:i + h, j:j + wd, :] += grad * w.data[i, j]
        top = (k - 1) // 2
        return grad_xp[:, top:top + h, top:top + wd, :], grad_w


def depthwise_conv2d(x: Tensor, kernel: Tensor) -> Tensor:
    """Depthwise convolution of an N x H x W x C input with a K x K x C kernel, same padding."""
    _require_nhwc(x, "depthwise_conv2d")
    if kernel.ndim != 3 or kernel.shape[0] != kernel.shape[1] or kernel.shape[0] < 1:
        raise ShapeError("depthwise_conv2d expects a square K x K x C kernel", {"kernel": list(kernel.shape)})
    if kernel.shape[2] != x.shape[3]:
        raise ShapeError(
            "Kernel channels do not match input",
            {"input_channels": x.shape[3], "kernel_channels": kernel.shape[2]},
        )
    return DepthwiseConv2d.apply(x, kernel)


class Conv2dTranspose(Function):
    """
    Transposed convolution: every input pixel scatters a K x K x Cout patch at
    stride spacing. The full (H - 1) * s + K map is cropped to H * s.
    """

    def forward(self, x, w, stride: int):
        k = w.shape[0]
        n, h, wd, _ = x.shape
        self.stride = stride
        self.in_hw = (h, wd)
        self.full_shape = (n, (h - 1) * stride + k, (wd - 1) * stride + k, w.shape[3])
        self.offset = (k - stride) // 2
        full = np.zeros(self.full_shape, dtype=np.result_type(x, w))
        for i in range(k):
            for j in range(k):
                full[self._window(i, j)] += np.tensordot(x, w[i, j], axes=([3], [0]))
        top = self.offset
        return full[:, top:top + h * stride, top:top + wd * stride, :]

    def _window(self, i: int, j: int):
        h, wd = self.in_hw
        s = self.stride
        return (slice(None), slice(i, i + s * (h - 1) + 1, s), slice(j, j + s * (wd - 1) + 1, s), slice(None))

    def backward(self, grad):
        x, w = self.tensors
        k = w.shape[0]
        h, wd = self.in_hw
        top, s = self.offset, self.stride
        grad_full = np.zeros(self.full_shape, dtype=grad.dtype)
        grad_full[:, top:top + h * s, top:top + wd * s, :] = grad
        grad_x = np.zeros_like(x.data)
        grad_w = np.zeros_like(w.data)
        for i in range(k):
            for j in range(k):
                window = grad_full[self._window(i, j)]
                grad_x += np.tensordot(window, w.data[i, j], axes=([3], [1]))
                grad_w[i, j] = np.tensordot(x.data, window, axes=([0, 1, 2], [0, 1, 2]))
        return grad_x, grad_w


def conv2d_transpose(x: Tensor, kernel: Tensor, stride: int = 1) -> Tensor:
    """Transposed convolution with a K x K x Cin x Cout kernel; output is stride x the input extent."""
    _require_nhwc(x, "conv2d_transpose")
    if kernel.ndim != 4 or kernel.shape[0] != kernel.shape[1]:
        raise ShapeError("conv2d_transpose expects a square K x K x Cin x Cout kernel", {"kernel": list(kernel.shape)})
    if kernel.shape[2] != x.shape[3]:
        raise ShapeError(
            "Kernel input channels do not match input",
            {"input_channels": x.shape[3], "kernel_channels": kernel.shape[2]},
        )
    if stride < 1 or kernel.shape[0] < stride:
        raise ContractError("conv2d_transpose needs 1 <= stride <= K", {"stride": stride, "K": kernel.shape[0]})
    return Conv2dTranspose.apply(x, kernel, stride=stride)


@dataclass
class RunningStats:
    """Mutable per-channel running mean and variance used by inference-mode batch norm."""

    mean: np.ndarray
    var: np.ndarray
    momentum: float = BN_MOMENTUM

    @classmethod
    def fresh(cls, channels: int, dtype, momentum: float = BN_MOMENTUM) -> "RunningStats":
        return cls(np.zeros(channels, dtype=dtype), np.ones(channels, dtype=dtype), momentum)

    def update(self, batch_mean: np.ndarray, batch_var: np.ndarray) -> None:
        m = self.momentum
        self.mean = ((1.0 - m) * self.mean + m * batch_mean).astype(self.mean.dtype)
        self.var = ((1.0 - m) * self.var + m * batch_var).astype(self.var.dtype)


class BatchNorm(Function):
    def forward(self, x, gamma, beta, mode: str, stats: RunningStats, eps: float):
        self.axes = tuple(range(x.ndim - 1))
        self.mode = mode
        self.count = x.size // x.shape[-1]
        if mode == "train":
            mean = x.mean(axis=self.axes)
            var = x.var(axis=self.axes)
            unbiased = var * self.count / (self.count - 1) if self.count > 1 else var
            stats.update(mean, unbiased)
        else:
            mean, var = stats.mean, stats.var
        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.xhat = (x - mean) * self.inv_std
        return (gamma * self.xhat + beta).astype(x.dtype, copy=False)

    def backward(self, grad):
        _, gamma, _ = self.tensors
        grad_gamma = (grad * self.xhat).sum(axis=self.axes)
        grad_beta = grad.sum(axis=self.axes)
        grad_xhat = grad * gamma.data
        if self.mode == "train":
            n = self.count
            grad_x = (self.inv_std / n) * (
                n * grad_xhat
                - grad_xhat.sum(axis=self.axes)
                - self.xhat * (grad_xhat * self.xhat).sum(axis=self.axes)
            )
        else:
            grad_x = grad_xhat * self.inv_std
        return grad_x, grad_gamma, grad_beta


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta_shift: Tensor,
    mode: str,
    running_stats: RunningStats,
    eps: float = BN_EPS,
) -> Tensor:
    """
    Per-channel batch normalization.

    `train` normalizes over batch and spatial axes and updates `running_stats`;
    `infer` normalizes with the running statistics.
    """
    channels = x.shape[-1]
    if gamma.shape != (channels,) or beta_shift.shape != (channels,):
        raise ShapeError(
            "batch_norm affine parameters must match input channels",
            {"channels": channels, "gamma": list(gamma.shape), "beta_shift": list(beta_shift.shape)},
        )
    if mode not in ("train", "infer"):
        raise ContractError(f"Unknown batch_norm mode: {mode}", {"allowed": ["train", "infer"]})
    if eps <= 0:
        raise ContractError("batch_norm epsilon must be positive", {"eps": eps})
    return BatchNorm.apply(x, gamma, beta_shift, mode=mode, stats=running_stats, eps=eps)


class LeakyRelu(Function):
    def forward(self, x, slope: float):
        self.slope_mask = np.where(x > 0, 1.0, slope).astype(x.dtype)
        return x * self.slope_mask

    def backward(self, grad):
        return (grad * self.slope_mask,)


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    """Elementwise max(x, slope * x); the subgradient at 0 is `slope`."""
    if not 0.0 < slope < 1.0:
        raise ContractError("leaky_relu slope must lie in (0, 1)", {"slope": slope})
    return LeakyRelu.apply(x, slope=slope)


class Sigmoid(Function):
    def forward(self, x):
        self.out = expit(x).astype(x.dtype, copy=False)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


class GlobalAvgPool(Function):
    def forward(self, x):
        return x.mean(axis=(1, 2))

    def backward(self, grad):
        (x,) = self.tensors
        _, h, w, _ = x.shape
        return (np.broadcast_to(grad[:, None, None, :] / (h * w), x.shape).astype(x.dtype),)


def global_avg_pool(x: Tensor) -> Tensor:
    """Per-channel spatial mean: N x H x W x C -> N x C."""
    _require_nhwc(x, "global_avg_pool")
    if x.shape[1] < 1 or x.shape[2] < 1:
        raise ShapeError("global_avg_pool needs a non-empty spatial extent", {"shape": list(x.shape)})
    return GlobalAvgPool.apply(x)


class AvgPool2x(Function):
    def forward(self, x):
        n, h, w, c = x.shape
        return x.reshape(n, h // 2, 2, w // 2, 2, c).mean(axis=(2, 4))

    def backward(self, grad):
        return (np.repeat(np.repeat(grad, 2, axis=1), 2, axis=2) * 0.25,)


def avg_pool2x(x: Tensor) -> Tensor:
    """2 x 2 average pooling with stride 2."""
    _require_nhwc(x, "avg_pool2x")
    if x.shape[1] % 2 or x.shape[2] % 2:
        raise ContractError("avg_pool2x needs even spatial dims", {"shape": list(x.shape)})
    return AvgPool2x.apply(x)


def upsample_matrix(size: int, mode: str, dtype=np.float64) -> np.ndarray:
    """
    Return the (2*size) x size interpolation operator for one axis.

    Bilinear uses half-pixel centres with edge clamping, so every row sums to 1.
    """
    matrix = np.zeros((2 * size, size), dtype=np.float64)
    if mode == "nearest":
        rows = np.arange(2 * size)
        matrix[rows, rows // 2] = 1.0
    elif mode == "bilinear":
        for out in range(2 * size):
            src = (out + 0.5) / 2.0 - 0.5
            low = int(np.floor(src))
            frac = src - low
            matrix[out, min(max(low, 0), size - 1)] += 1.0 - frac
            matrix[out, min(max(low + 1, 0), size - 1)] += frac
    else:
        raise ContractError(f"Unknown upsample mode: {mode}", {"allowed": ["nearest", "bilinear"]})
    return matrix.astype(dtype)


class Upsample2x(Function):
    def forward(self, x, mode: str):
        _, h, w, _ = x.shape
        self.rows = upsample_matrix(h, mode, x.dtype)
        self.cols = upsample_matrix(w, mode, x.dtype)
        tall = np.einsum("ah,nhwc->nawc", self.rows, x, optimize=True)
        return np.einsum("bw,nawc->nabc", self.cols, tall, optimize=True)

    def backward(self, grad):
        tall = np.einsum("bw,nabc->nawc", self.cols, grad, optimize=True)
        return (np.einsum("ah,nawc->nhwc", self.rows, tall, optimize=True),)


def upsample2x(x: Tensor, mode: str = "bilinear") -> Tensor:
    """Double both spatial dims with nearest or bilinear interpolation."""
    _require_nhwc(x, "upsample2x")
    return Upsample2x.apply(x, mode=mode)


class ConcatChannels(Function):
    def forward(self, a, b):
        self.split = a.shape[-1]
        return np.concatenate([a, b], axis=-1)

    def backward(self, grad):
        return grad[..., :self.split], grad[..., self.split:]


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the channel axis; leading dims must agree."""
    if a.ndim != b.ndim or a.shape[:-1] != b.shape[:-1]:
        raise ShapeError("concat_channels operands disagree outside the channel axis", {
            "a": list(a.shape), "b": list(b.shape),
        })
    return ConcatChannels.apply(a, b)


class Dense(Function):
    def forward(self, x, weight, bias):
        return x @ weight + bias

    def backward(self, grad):
        x, weight, _ = self.tensors
        return grad @ weight.data.T, x.data.T @ grad, grad.sum(axis=0)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map N x D -> N x E."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError("dense inner dimensions disagree", {"x": list(x.shape), "weight": list(weight.shape)})
    if bias.shape != (weight.shape[1],):
        raise ShapeError("dense bias must match output width", {"bias": list(bias.shape), "weight": list(weight.shape)})
    return Dense.apply(x, weight, bias)
