"""A small reverse-mode differentiation engine over float64 numpy arrays.

Operations executed while a :class:`Tape` is active are recorded in call order;
``Tape.gradient`` replays them backwards.  Outside a tape, ops are plain numpy
computations.  Shapes are explicit: the only implicit broadcast is adding a
bias whose shape matches the trailing dimensions of the other operand.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class ContractError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("value", "name", "__weakref__")

    def __init__(self, value, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def values(self) -> np.ndarray:
        """Row-major flat view of the data."""
        return self.value.reshape(-1)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Node:
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


_local = threading.local()


def _active() -> list["Tape"]:
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


class Tape:
    """Records ops for one backward pass.  Use as a context manager."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _active().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _active().remove(self)

    def backward(self, loss: Tensor) -> dict[int, np.ndarray]:
        """Gradients of a scalar ``loss`` keyed by ``id`` of every reached tensor."""
        if loss.value.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            for t, gi in zip(node.inputs, node.backward(g)):
                if gi is None:
                    continue
                prev = grads.get(id(t))
                grads[id(t)] = gi if prev is None else prev + gi
        return grads

    def gradient(self, loss: Tensor, params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
        """Gradient for each named parameter; unreached parameters get zeros."""
        grads = self.backward(loss)
        return {k: grads.get(id(p), np.zeros_like(p.value)) for k, p in params.items()}


def _record(out: Tensor, inputs: tuple[Tensor, ...], backward) -> Tensor:
    for tape in _active():
        tape.nodes.append(_Node(out, inputs, backward))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _bias_compatible(a: tuple, b: tuple) -> bool:
    return len(b) <= len(a) and a[len(a) - len(b):] == b


# --- primitives ----------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and not (_bias_compatible(a.shape, b.shape)
                                   or _bias_compatible(b.shape, a.shape)):
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(a.value + b.value)
    return _record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and not _bias_compatible(a.shape, b.shape):
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(a.value - b.value)
    return _record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    """Elementwise product.  A python scalar operand is treated as a constant."""
    if np.isscalar(a):
        return scale(b, float(a))
    if np.isscalar(b):
        return scale(a, float(b))
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and not (_bias_compatible(a.shape, b.shape)
                                   or _bias_compatible(b.shape, a.shape)):
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    av, bv = a.value, b.value
    out = Tensor(av * bv)
    return _record(out, (a, b), lambda g: (_unbroadcast(g * bv, a.shape),
                                           _unbroadcast(g * av, b.shape)))


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value * c)
    return _record(out, (a,), lambda g: (g * c,))


def matmul(a, b) -> Tensor:
    """``np.matmul`` semantics; leading batch dims may be present on either side."""
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim < 2 or b.value.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.value, b.value
    out = Tensor(np.matmul(av, bv))

    def backward(g):
        ga = np.matmul(g, np.swapaxes(bv, -1, -2))
        gb = np.matmul(np.swapaxes(av, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _record(out, (a, b), backward)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = tuple(as_tensor(t) for t in tensors)
    if not ts:
        raise ShapeError("concat: no inputs")
    nd = ts[0].value.ndim
    ax = axis % nd
    for t in ts:
        if t.value.ndim != nd or t.shape[:ax] + t.shape[ax + 1:] != ts[0].shape[:ax] + ts[0].shape[ax + 1:]:
            raise ShapeError(f"concat: incompatible shapes {[t.shape for t in ts]}")
    out = Tensor(np.concatenate([t.value for t in ts], axis=ax))
    splits = np.cumsum([t.shape[ax] for t in ts])[:-1]
    return _record(out, ts, lambda g: np.split(g, splits, axis=ax))


def slice_last(a, start: int, stop: int) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value[..., start:stop])

    def backward(g):
        full = np.zeros_like(a.value)
        full[..., start:stop] = g
        return (full,)

    return _record(out, (a,), backward)


def index(a, i: int) -> Tensor:
    """``a[i]`` along the leading axis."""
    a = as_tensor(a)
    out = Tensor(a.value[i])

    def backward(g):
        full = np.zeros_like(a.value)
        full[i] = g
        return (full,)

    return _record(out, (a,), backward)


def reduce_sum(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value.sum(axis=axis))

    def backward(g):
        if axis is None:
            return (np.full_like(a.value, float(g)),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _record(out, (a,), backward)


def mean(a) -> Tensor:
    a = as_tensor(a)
    return scale(reduce_sum(a), 1.0 / a.value.size)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.value)
    return _record(Tensor(y), (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # two-branch form avoids overflow in exp for large |x|
    v = a.value
    y = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                 np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    return _record(Tensor(y), (a,), lambda g: (g * y * (1.0 - y),))


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    d = np.where(a.value > 0, 1.0, slope)
    return _record(Tensor(a.value * d), (a,), lambda g: (g * d,))


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value.reshape(shape))
    return _record(out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = Tensor(np.transpose(a.value, axes))
    return _record(out, (a,), lambda g: (np.transpose(g, inverse),))


def take(a, rows) -> Tensor:
    """Gather rows of ``a`` (leading axis); repeated indices accumulate gradient."""
    a = as_tensor(a)
    rows = np.asarray(rows, dtype=np.int64)
    out = Tensor(a.value[rows])

    def backward(g):
        full = np.zeros_like(a.value)
        np.add.at(full, rows, g)
        return (full,)

    return _record(out, (a,), backward)


def scatter_add(a, rows, size: int) -> Tensor:
    """Sum rows of ``a`` into a ``size``-row result at positions ``rows``."""
    a = as_tensor(a)
    rows = np.asarray(rows, dtype=np.int64)
    if len(rows) != a.shape[0]:
        raise ShapeError(f"scatter_add: {len(rows)} indices for {a.shape[0]} rows")
    out = np.zeros((size,) + a.shape[1:])
    np.add.at(out, rows, a.value)
    return _record(Tensor(out), (a,), lambda g: (g[rows],))


def outer_add(a, b) -> Tensor:
    """``out[..., i, j] = a[..., i] + b[..., j]``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[:-1] != b.shape[:-1]:
        raise ShapeError(f"outer_add: batch shapes {a.shape} and {b.shape} differ")
    out = Tensor(a.value[..., :, None] + b.value[..., None, :])
    return _record(out, (a, b), lambda g: (g.sum(axis=-1), g.sum(axis=-2)))


def masked_softmax(a, mask) -> Tensor:
    """Softmax over the last axis restricted to ``mask`` (broadcast over leading dims).

    Masked-out entries are exactly zero.  Every row needs at least one kept entry.
    """
    a = as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape[-mask.ndim:]:
        raise ShapeError(f"masked_softmax: mask {mask.shape} vs input {a.shape}")
    if not mask.any(axis=-1).all():
        raise ShapeError("masked_softmax: a row has no unmasked entries")
    z = np.where(mask, a.value, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _record(Tensor(y), (a,), backward)


def mse_loss(pred, target) -> Tensor:
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: shapes {pred.shape} and {target.shape} differ")
    d = sub(pred, target)
    return mean(mul(d, d))


# --- checking helpers ----------------------------------------------------------

def numeric_gradient(f: Callable[[], float], param: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``f`` with respect to every entry of ``param``."""
    grad = np.zeros_like(param.value)
    flat = param.value.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> float:
    """``||a - b|| / max(||a||, ||b||)`` over the whole array."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / denom)
