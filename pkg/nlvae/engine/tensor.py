"""
Dense tensors with reverse-mode automatic differentiation.

A `Tensor` wraps a NumPy array. Every differentiable operation is a `Function`
subclass: `apply` runs the forward pass on raw arrays and links the result to its
operands; `ComputationGraph` orders the recorded functions topologically and runs
their `backward` methods in reverse, accumulating gradients into leaf tensors.

Graphs are not thread-safe: build and differentiate one graph per thread.
"""

import contextvars
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from nlvae.core.exceptions import ConfigurationError, ContractError, NumericError, ShapeError

Scalar = Union[int, float]

PRECISIONS: Dict[str, type] = {"f32": np.float32, "f64": np.float64}

_precision = contextvars.ContextVar("nlvae_precision", default="f32")


@contextmanager
def precision(mode: str) -> Iterator[None]:
    """Set the default floating-point precision (`f32` or `f64`) inside the block."""
    if mode not in PRECISIONS:
        raise ConfigurationError(f"Unknown precision mode: {mode}", {"allowed": list(PRECISIONS)})
    token = _precision.set(mode)
    try:
        yield
    finally:
        _precision.reset(token)


def get_default_dtype() -> type:
    """Return the NumPy dtype of the active precision mode."""
    return PRECISIONS[_precision.get()]


def dtype_for(mode: str) -> type:
    if mode not in PRECISIONS:
        raise ConfigurationError(f"Unknown precision mode: {mode}", {"allowed": list(PRECISIONS)})
    return PRECISIONS[mode]


class Function:
    """
    Base class for differentiable operations.

    Subclasses implement `forward` on NumPy arrays and `backward`, which receives
    dL/d(output) and returns one gradient (or None) per operand.
    """

    def __init__(self, *tensors: "Tensor"):
        self.tensors = tensors
        self.backward_calls = 0

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no forward pass")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{type(self).__name__} has no backward pass")

    @classmethod
    def apply(cls, *tensors: "Tensor", **kwargs: Any) -> "Tensor":
        func = cls(*tensors)
        out = func.forward(*(t.data for t in tensors), **kwargs)
        requires_grad = any(t.requires_grad for t in tensors)
        return Tensor(
            out,
            requires_grad=requires_grad,
            creator=func if requires_grad else None,
            dtype=out.dtype,
            origin=cls.__name__,
        )

    @staticmethod
    def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        """Sum out the axes that broadcasting expanded so `grad` matches `shape`."""
        if grad.shape == shape:
            return grad
        while grad.ndim > len(shape):
            grad = grad.sum(axis=0)
        for axis, extent in enumerate(shape):
            if extent == 1 and grad.shape[axis] != 1:
                grad = grad.sum(axis=axis, keepdims=True)
        return grad


class Tensor:
    """
    Dense n-dimensional array with optional gradient tracking.

    Image-like data uses the N x H x W x C layout. All elements must be finite;
    constructing a tensor with NaN or Inf raises `NumericError`.
    """

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        creator: Optional[Function] = None,
        name: Optional[str] = None,
        dtype: Optional[type] = None,
        origin: Optional[str] = None,
    ):
        self.data = np.asarray(data, dtype=dtype or get_default_dtype())
        if not np.all(np.isfinite(self.data)):
            raise NumericError(
                "Non-finite value in tensor",
                {"origin": origin or "leaf", "name": name, "shape": list(self.data.shape)},
            )
        self.requires_grad = requires_grad
        self.creator = creator
        self.name = name
        self.grad: Optional[np.ndarray] = None

    # ---- properties -------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self.creator is None

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"

    # ---- gradient bookkeeping --------------------------------------------

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.shape:
            raise ShapeError(
                "Gradient shape does not match tensor shape",
                {"grad": list(grad.shape), "tensor": list(self.shape), "name": self.name},
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.dtype, copy=True)
        else:
            self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> "ComputationGraph":
        """Differentiate this scalar with respect to every leaf that requires grad."""
        if self.size != 1:
            raise ContractError("backward() requires a scalar loss", {"shape": list(self.shape)})
        graph = ComputationGraph(self)
        graph.backward()
        return graph

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, dtype=self.dtype, name=self.name)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    # ---- arithmetic -------------------------------------------------------

    def _lift(self, other: Union["Tensor", Scalar, np.ndarray]) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(other, dtype=self.dtype)

    def __add__(self, other):
        return Add.apply(self, self._lift(other))

    def __radd__(self, other):
        return Add.apply(self._lift(other), self)

    def __sub__(self, other):
        return Sub.apply(self, self._lift(other))

    def __rsub__(self, other):
        return Sub.apply(self._lift(other), self)

    def __mul__(self, other):
        return Mul.apply(self, self._lift(other))

    def __rmul__(self, other):
        return Mul.apply(self._lift(other), self)

    def __neg__(self):
        return Mul.apply(self, Tensor(-1.0, dtype=self.dtype))

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return Div.apply(self, other)
        return Mul.apply(self, Tensor(1.0 / other, dtype=self.dtype))

    def __pow__(self, exponent: Scalar):
        return Pow.apply(self, exponent=float(exponent))

    def __matmul__(self, other):
        return MatMul.apply(self, self._lift(other))

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        total = self.sum(axis=axis, keepdims=keepdims)
        count = self.size // max(total.size, 1) if self.size else 1
        return total * (1.0 / count)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)

    def exp(self) -> "Tensor":
        return Exp.apply(self)

    def abs(self) -> "Tensor":
        return Abs.apply(self)

    def clip(self, low: float, high: float) -> "Tensor":
        return Clip.apply(self, low=low, high=high)


class ComputationGraph:
    """
    Topologically ordered record of the functions that produced `output`.

    `nodes` lists functions in execution order and `edges` the (operand, result)
    links. `backward` visits each node exactly once, in reverse order.
    """

    def __init__(self, output: Tensor):
        self.output = output
        self.order: List[Tensor] = []
        self.nodes: List[Function] = []
        self.edges: List[Tuple[Tensor, Tensor]] = []
        self._build()

    def _build(self) -> None:
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self.output, False)]
        while stack:
            tensor, expanded = stack.pop()
            if id(tensor) in visited:
                continue
            if expanded:
                visited.add(id(tensor))
                self.order.append(tensor)
                continue
            stack.append((tensor, True))
            if tensor.creator is not None:
                for operand in tensor.creator.tensors:
                    if operand.requires_grad and id(operand) not in visited:
                        stack.append((operand, False))
        for tensor in self.order:
            if tensor.creator is not None:
                self.nodes.append(tensor.creator)
                self.edges.extend((operand, tensor) for operand in tensor.creator.tensors)

    def leaves(self) -> List[Tensor]:
        return [t for t in self.order if t.creator is None and t.requires_grad]

    def backward(self) -> None:
        if not self.output.requires_grad:
            return
        pending: Dict[int, np.ndarray] = {id(self.output): np.ones_like(self.output.data)}
        for tensor in reversed(self.order):
            grad = pending.pop(id(tensor), None)
            if grad is None:
                continue
            if tensor.creator is None:
                tensor.accumulate_grad(grad)
                continue
            func = tensor.creator
            func.backward_calls += 1
            operand_grads = func.backward(grad)
            for operand, operand_grad in zip(func.tensors, operand_grads):
                if operand_grad is None or not operand.requires_grad:
                    continue
                if not np.all(np.isfinite(operand_grad)):
                    raise NumericError(
                        "Non-finite gradient during backward pass",
                        {"function": type(func).__name__, "operand": operand.name},
                    )
                key = id(operand)
                if key in pending:
                    pending[key] = pending[key] + operand_grad
                else:
                    pending[key] = operand_grad


# ---- elementary functions ---------------------------------------------------


class Add(Function):
    def forward(self, a, b):
        return a + b

    def backward(self, grad):
        a, b = self.tensors
        return self.unbroadcast(grad, a.shape), self.unbroadcast(grad, b.shape)


class Sub(Function):
    def forward(self, a, b):
        return a - b

    def backward(self, grad):
        a, b = self.tensors
        return self.unbroadcast(grad, a.shape), self.unbroadcast(-grad, b.shape)


class Mul(Function):
    def forward(self, a, b):
        return a * b

    def backward(self, grad):
        a, b = self.tensors
        return (
            self.unbroadcast(grad * b.data, a.shape),
            self.unbroadcast(grad * a.data, b.shape),
        )


class Div(Function):
    def forward(self, a, b):
        return a / b

    def backward(self, grad):
        a, b = self.tensors
        return (
            self.unbroadcast(grad / b.data, a.shape),
            self.unbroadcast(-grad * a.data / (b.data * b.data), b.shape),
        )


class Pow(Function):
    def forward(self, a, exponent: float):
        self.exponent = exponent
        return np.power(a, exponent).astype(a.dtype, copy=False)

    def backward(self, grad):
        (a,) = self.tensors
        return (grad * self.exponent * np.power(a.data, self.exponent - 1),)


class MatMul(Function):
    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError("matmul inner dimensions disagree", {"a": list(a.shape), "b": list(b.shape)})
        return a @ b

    def backward(self, grad):
        a, b = self.tensors
        return grad @ b.data.T, a.data.T @ grad


class Sum(Function):
    def forward(self, a, axis=None, keepdims: bool = False):
        self.axis = axis
        self.keepdims = keepdims
        return np.asarray(a.sum(axis=axis, keepdims=keepdims), dtype=a.dtype)

    def backward(self, grad):
        (a,) = self.tensors
        if self.axis is not None and not self.keepdims:
            axes = (self.axis,) if isinstance(self.axis, int) else self.axis
            grad = np.expand_dims(grad, tuple(ax % a.ndim for ax in axes))
        return (np.broadcast_to(grad, a.shape).astype(a.dtype, copy=True),)


class Reshape(Function):
    def forward(self, a, shape: Sequence[int]):
        try:
            return a.reshape(shape)
        except ValueError as exc:
            raise ShapeError(f"Cannot reshape {a.shape} to {tuple(shape)}") from exc

    def backward(self, grad):
        (a,) = self.tensors
        return (grad.reshape(a.shape),)


class Exp(Function):
    def forward(self, a):
        self.out = np.exp(a)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Abs(Function):
    def forward(self, a):
        return np.abs(a)

    def backward(self, grad):
        (a,) = self.tensors
        return (grad * np.sign(a.data),)


class Clip(Function):
    """Clamp to [low, high]; gradient passes only where the input is inside the bounds."""

    def forward(self, a, low: float, high: float):
        self.mask = (a >= low) & (a <= high)
        return np.clip(a, low, high)

    def backward(self, grad):
        return (grad * self.mask,)
