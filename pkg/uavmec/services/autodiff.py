"""
Reverse-mode differentiation over numpy arrays.

Covers the operators the actor-critic network needs. Every op records its
parents and a closure that pushes the output gradient back to them;
`backward` walks the graph in reverse topological order.
"""
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from uavmec.core.exceptions import InvalidArgumentError

ArrayLike = Union[np.ndarray, float, int]


class Tensor:
    __slots__ = ("value", "grad", "parents", "_backward", "requires_grad")

    def __init__(
        self,
        value: ArrayLike,
        parents: Tuple["Tensor", ...] = (),
        backward: Optional[Callable[[np.ndarray], None]] = None,
        requires_grad: bool = False,
    ):
        self.value = np.asarray(value, dtype=float)
        self.grad: Optional[np.ndarray] = None
        self.parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        grad = _unbroadcast(grad, self.value.shape)
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)


def constant(value: ArrayLike) -> Tensor:
    return Tensor(value)


def parameter(value: ArrayLike) -> Tensor:
    return Tensor(value, requires_grad=True)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _node(value: np.ndarray, parents: Sequence[Tensor], backward: Callable[[np.ndarray], None]) -> Tensor:
    return Tensor(value, tuple(parents), backward)


# ============ Arithmetic ============

def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)

    def backward(g):
        a._accumulate(g)
        b._accumulate(g)
    return _node(a.value + b.value, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)

    def backward(g):
        a._accumulate(g)
        b._accumulate(-g)
    return _node(a.value - b.value, (a, b), backward)


def neg(a) -> Tensor:
    a = _lift(a)
    return _node(-a.value, (a,), lambda g: a._accumulate(-g))


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)

    def backward(g):
        a._accumulate(g * b.value)
        b._accumulate(g * a.value)
    return _node(a.value * b.value, (a, b), backward)


def matmul(a, b) -> Tensor:
    """np.matmul semantics for operands with at least two dimensions."""
    a, b = _lift(a), _lift(b)
    if a.value.ndim < 2 or b.value.ndim < 2:
        raise InvalidArgumentError(f"matmul needs 2-D or batched operands, got {a.shape} @ {b.shape}")

    def backward(g):
        a._accumulate(np.matmul(g, np.swapaxes(b.value, -1, -2)))
        b._accumulate(np.matmul(np.swapaxes(a.value, -1, -2), g))
    return _node(np.matmul(a.value, b.value), (a, b), backward)


# ============ Reductions and shapes ============

def sum_(a, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = _lift(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape))
    return _node(a.value.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    count = a.value.size if axis is None else a.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a, shape: Tuple[int, ...]) -> Tensor:
    a = _lift(a)
    return _node(a.value.reshape(shape), (a,), lambda g: a._accumulate(g.reshape(a.shape)))


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, part in zip(tensors, np.split(g, splits, axis=axis)):
            t._accumulate(part)
    return _node(np.concatenate([t.value for t in tensors], axis=axis), tensors, backward)


def gather(a, index: np.ndarray) -> Tensor:
    """Entries of the flattened tensor at integer positions `index` (any shape)."""
    a = _lift(a)
    index = np.asarray(index, dtype=np.intp)

    def backward(g):
        flat = np.zeros(a.value.size)
        np.add.at(flat, index.reshape(-1), g.reshape(-1))
        a._accumulate(flat.reshape(a.shape))
    return _node(a.value.reshape(-1)[index], (a,), backward)


def unfold_index(batch: int, height: int, width: int, channels: int, kernel: int) -> np.ndarray:
    """im2col positions into a flattened (batch, height, width, channels) array.

    Result shape (batch, out_h * out_w, kernel * kernel * channels) for a valid
    stride-1 convolution; patch entries ordered (di, dj, channel).
    """
    out_h, out_w = height - kernel + 1, width - kernel + 1
    if out_h < 1 or out_w < 1:
        raise InvalidArgumentError(f"Kernel {kernel} does not fit a {height}x{width} input")
    b, i, j, di, dj, c = np.ix_(
        np.arange(batch), np.arange(out_h), np.arange(out_w), np.arange(kernel), np.arange(kernel), np.arange(channels)
    )
    flat = ((b * height + i + di) * width + j + dj) * channels + c
    return flat.reshape(batch, out_h * out_w, kernel * kernel * channels)


def unfold(a, kernel: int) -> Tensor:
    """(batch, H, W, C) -> (batch, out_h * out_w, kernel * kernel * C) patches."""
    a = _lift(a)
    batch, height, width, channels = a.shape
    return gather(a, unfold_index(batch, height, width, channels, kernel))


# ============ Nonlinearities ============

def tanh(a) -> Tensor:
    a = _lift(a)
    out = np.tanh(a.value)
    return _node(out, (a,), lambda g: a._accumulate(g * (1.0 - out * out)))


def leaky_relu(a, slope: float) -> Tensor:
    a = _lift(a)
    factor = np.where(a.value > 0, 1.0, slope)
    return _node(a.value * factor, (a,), lambda g: a._accumulate(g * factor))


def exp(a) -> Tensor:
    a = _lift(a)
    out = np.exp(a.value)
    return _node(out, (a,), lambda g: a._accumulate(g * out))


def log(a) -> Tensor:
    a = _lift(a)
    return _node(np.log(a.value), (a,), lambda g: a._accumulate(g / a.value))


def masked_softmax(a, mask: np.ndarray) -> Tensor:
    """Softmax over the last axis restricted to `mask`; masked entries are exactly 0."""
    a = _lift(a)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
    if not mask.any(axis=-1).all():
        raise InvalidArgumentError("Every softmax row needs at least one unmasked entry")
    shifted = np.where(mask, a.value, -np.inf)
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    weights = np.where(mask, np.exp(shifted), 0.0)
    out = weights / weights.sum(axis=-1, keepdims=True)

    def backward(g):
        a._accumulate(out * (g - (g * out).sum(axis=-1, keepdims=True)))
    return _node(out, (a,), backward)


def log_softmax(a) -> Tensor:
    a = _lift(a)
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(out)

    def backward(g):
        a._accumulate(g - probs * g.sum(axis=-1, keepdims=True))
    return _node(out, (a,), backward)


# ============ Reverse pass ============

def _topological(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(root: Tensor) -> None:
    """Fill `.grad` of every parameter reachable from a scalar root."""
    if root.value.size != 1:
        raise InvalidArgumentError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return
    root.grad = np.ones_like(root.value)
    for node in reversed(_topological(root)):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
