"""Reverse-mode automatic differentiation over float64 numpy arrays.

Deliberately small: just enough operator coverage for the prediction
heads (linear maps, layer norm, softmax attention, pooling, Huber).
Every op supports numpy-style broadcasting; gradients of broadcast
operands are reduced back to the operand shape. Graphs are built only
while gradients are enabled (see :func:`no_grad`), so pure inference
pays no bookkeeping cost.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from sfmprobe.exceptions import DomainError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the context (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` over the axes numpy broadcast when producing it."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A float64 ndarray plus the bookkeeping for reverse-mode gradients."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- introspection ------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph --------------------------------------------------------------

    def backward(self) -> None:
        """Backpropagate from a scalar (size-1) tensor, accumulating .grad."""
        if self.size != 1:
            raise ShapeError(f"backward() requires a scalar tensor, got shape {self.shape}")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = _op(self.data + other.data, (self, other))
        if out._parents:
            def backward(g, a=self, b=other):
                _accum(a, _unbroadcast(g, a.shape))
                _accum(b, _unbroadcast(g, b.shape))
            out._backward = backward
        return out

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        out = _op(-self.data, (self,))
        if out._parents:
            def backward(g, a=self):
                _accum(a, -g)
            out._backward = backward
        return out

    def __sub__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = _op(self.data - other.data, (self, other))
        if out._parents:
            def backward(g, a=self, b=other):
                _accum(a, _unbroadcast(g, a.shape))
                _accum(b, _unbroadcast(-g, b.shape))
            out._backward = backward
        return out

    def __rsub__(self, other) -> "Tensor":
        return as_tensor(other) - self

    def __mul__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = _op(self.data * other.data, (self, other))
        if out._parents:
            def backward(g, a=self, b=other):
                _accum(a, _unbroadcast(g * b.data, a.shape))
                _accum(b, _unbroadcast(g * a.data, b.shape))
            out._backward = backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = _op(self.data / other.data, (self, other))
        if out._parents:
            def backward(g, a=self, b=other):
                _accum(a, _unbroadcast(g / b.data, a.shape))
                _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))
            out._backward = backward
        return out

    def __rtruediv__(self, other) -> "Tensor":
        return as_tensor(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        if not isinstance(exponent, (int, float)):
            raise TypeError("only constant exponents are supported")
        out = _op(self.data ** exponent, (self,))
        if out._parents:
            def backward(g, a=self, e=float(exponent)):
                _accum(a, g * e * a.data ** (e - 1.0))
            out._backward = backward
        return out

    def matmul(self, other) -> "Tensor":
        """np.matmul semantics for operands with ndim >= 2 (batched ok)."""
        other = as_tensor(other)
        if self.ndim < 2 or other.ndim < 2:
            raise ShapeError("matmul requires operands with ndim >= 2")
        out = _op(np.matmul(self.data, other.data), (self, other))
        if out._parents:
            def backward(g, a=self, b=other):
                _accum(a, _unbroadcast(np.matmul(g, b.data.swapaxes(-1, -2)), a.shape))
                _accum(b, _unbroadcast(np.matmul(a.data.swapaxes(-1, -2), g), b.shape))
            out._backward = backward
        return out

    __matmul__ = matmul

    # -- shape manipulation --------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = _op(self.data.reshape(shape), (self,))
        if out._parents:
            def backward(g, a=self):
                _accum(a, g.reshape(a.shape))
            out._backward = backward
        return out

    def swapaxes(self, axis1: int, axis2: int) -> "Tensor":
        out = _op(self.data.swapaxes(axis1, axis2), (self,))
        if out._parents:
            def backward(g, a=self, i=axis1, j=axis2):
                _accum(a, g.swapaxes(i, j))
            out._backward = backward
        return out

    # -- reductions -----------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = _op(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out._parents:
            def backward(g, a=self, ax=axis, kd=keepdims):
                if ax is None:
                    _accum(a, np.broadcast_to(g, a.shape).copy())
                else:
                    if not kd:
                        g = np.expand_dims(g, ax)
                    _accum(a, np.broadcast_to(g, a.shape).copy())
            out._backward = backward
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.size
        else:
            count = self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- elementwise nonlinearities -------------------------------------------

    def exp(self) -> "Tensor":
        out = _op(np.exp(self.data), (self,))
        if out._parents:
            def backward(g, a=self, y=out.data):
                _accum(a, g * y)
            out._backward = backward
        return out

    def tanh(self) -> "Tensor":
        out = _op(np.tanh(self.data), (self,))
        if out._parents:
            def backward(g, a=self, y=out.data):
                _accum(a, g * (1.0 - y * y))
            out._backward = backward
        return out

    def sqrt(self) -> "Tensor":
        out = _op(np.sqrt(self.data), (self,))
        if out._parents:
            def backward(g, a=self, y=out.data):
                _accum(a, g * 0.5 / y)
            out._backward = backward
        return out


def as_tensor(value) -> Tensor:
    """Wrap arrays/scalars as constant Tensors; pass Tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _op(data: np.ndarray, parents: Sequence[Tensor]) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not (t.requires_grad or t._parents):
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along `axis`."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = _op(y, (x,))
    if out._parents:
        def backward(g, a=x, y=y, ax=axis):
            inner = (g * y).sum(axis=ax, keepdims=True)
            _accum(a, y * (g - inner))
        out._backward = backward
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along `axis`."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DomainError("concat of zero tensors")
    out = _op(np.concatenate([t.data for t in tensors], axis=axis), tensors)
    if out._parents:
        sizes = [t.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def backward(g, parts=tensors, offs=offsets, ax=axis):
            for t, lo, hi in zip(parts, offs[:-1], offs[1:]):
                index = [slice(None)] * g.ndim
                index[ax] = slice(lo, hi)
                _accum(t, g[tuple(index)])
        out._backward = backward
    return out


def huber_elementwise(err: Tensor, delta: float) -> Tensor:
    """Elementwise Huber penalty of an error tensor.

    0.5*e^2 where |e| <= delta, else delta*(|e| - 0.5*delta). The first
    derivative is continuous at |e| == delta.
    """
    err = as_tensor(err)
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    e = err.data
    absr = np.abs(e)
    quad = absr <= delta
    vals = np.where(quad, 0.5 * e * e, delta * (absr - 0.5 * delta))
    out = _op(vals, (err,))
    if out._parents:
        def backward(g, a=err, q=quad, e=e, d=delta):
            _accum(a, g * np.where(q, e, d * np.sign(e)))
        out._backward = backward
    return out
