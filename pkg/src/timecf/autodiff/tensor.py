"""Reverse-mode automatic differentiation over float64 numpy arrays.

Graphs are built eagerly as operations run and released after ``backward``
unless ``retain_graph=True`` is passed. Node outputs are read-only arrays.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..core import InputError, UsageError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Evaluate operations without recording a graph."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def _readonly(arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.flags.writeable:
        arr = arr.copy() if arr.base is not None else arr
        arr.setflags(write=False)
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = _readonly(np.array(data, dtype=np.float64, copy=True))
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.op = "leaf"
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _not_scalar()

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape})"

    def backward(self, retain_graph: bool = False) -> None:
        """Accumulate d(self)/d(leaf) into ``.grad`` of every reachable leaf."""
        if self.data.size != 1:
            raise UsageError(f"backward needs a scalar loss, got shape {self.shape}")
        order = _topological(self)
        pending = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = pg if key not in pending else pending[key] + pg
        if not retain_graph:
            for node in order:
                if node._backward is not None:
                    node._parents = ()
                    node._backward = None

    # operator sugar
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
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _not_scalar():
    raise UsageError("item() on a non-scalar tensor")


def _topological(root: Tensor) -> list[Tensor]:
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_node(data, parents: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = _readonly(data)
    out.grad = None
    out.name = None
    out.op = op
    out.requires_grad = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise InputError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    return make_node(
        a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    return make_node(
        a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    return make_node(
        a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)), "mul")


def matmul(a, b) -> Tensor:
    """``a`` of shape (..., K) times a matrix ``b`` of shape (K, M)."""
    a, b = as_tensor(a), as_tensor(b)
    if b.data.ndim != 2 or a.data.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise InputError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        ga = g @ b.data.T
        gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, b.shape[1])
        return ga, gb

    return make_node(a.data @ b.data, (a, b), backward, "matmul")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = _sigmoid(x.data)
    return make_node(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)
    return make_node(t, (x,), lambda g: (g * (1.0 - t * t),), "tanh")


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return make_node(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def square(x) -> Tensor:
    x = as_tensor(x)
    return make_node(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,), "square")


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data < 0):
        raise InputError("sqrt of a negative value")
    r = np.sqrt(x.data)
    return make_node(r, (x,), lambda g: (g * 0.5 / r,), "sqrt")


def abs_(x) -> Tensor:
    x = as_tensor(x)
    return make_node(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),), "abs")


def sum_(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_node(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward, "sum")


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return make_node(x.data.mean(axis=axis, keepdims=keepdims), (x,), backward, "mean")


def global_mean_over_time(x) -> Tensor:
    """(B, T, C) -> (B, C)."""
    if as_tensor(x).data.ndim != 3:
        raise InputError("global_mean_over_time expects a (batch, time, channels) tensor")
    return mean(x, axis=1)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


def concat_time(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate (B, T_i, C) tensors along the time axis."""
    parts = [as_tensor(p) for p in parts]
    if not parts or any(p.data.ndim != 3 for p in parts):
        raise InputError("concat_time expects (batch, time, channels) tensors")
    try:
        data = np.concatenate([p.data for p in parts], axis=1)
    except ValueError as exc:
        raise InputError(f"concat_time: {exc}") from None
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])

    def backward(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return make_node(data, parts, backward, "concat_time")


def slice_time(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim != 3 or not 0 <= start < stop <= x.shape[1]:
        raise InputError(f"slice_time [{start}, {stop}) invalid for shape {x.shape}")

    def backward(g):
        full = np.zeros(x.shape)
        full[:, start:stop] = g
        return (full,)

    return make_node(x.data[:, start:stop], (x,), backward, "slice_time")


def conv1d(x, w, b=None) -> Tensor:
    """Valid cross-correlation. x: (B, T, Cin), w: (k, Cin, Cout) -> (B, T-k+1, Cout)."""
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 3 or w.data.ndim != 3 or x.shape[2] != w.shape[1]:
        raise InputError(f"conv1d: incompatible shapes {x.shape} and {w.shape}")
    k = w.shape[0]
    if k > x.shape[1]:
        raise InputError("conv1d: kernel longer than the sequence")
    windows = sliding_window_view(x.data, k, axis=1)  # (B, L, Cin, k)
    out = np.einsum("blck,kco->blo", windows, w.data)
    parents = [x, w]
    if b is not None:
        b = as_tensor(b)
        if b.shape != (w.shape[2],):
            raise InputError("conv1d: bias must have one entry per output channel")
        out = out + b.data
        parents.append(b)
    length = out.shape[1]

    def backward(g):
        gw = np.einsum("blck,blo->kco", windows, g)
        gx = np.zeros(x.shape)
        for j in range(k):
            gx[:, j:j + length] += g @ w.data[j].T
        grads = [gx, gw]
        if b is not None:
            grads.append(g.sum(axis=(0, 1)))
        return tuple(grads)

    return make_node(out, parents, backward, "conv1d")


def mse_loss(pred, target) -> Tensor:
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise InputError(f"mse_loss: shape mismatch {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    n = diff.size

    def backward(g):
        return (2.0 * g * diff / n, -2.0 * g * diff / n)

    return make_node(np.mean(diff * diff), (pred, target), backward, "mse_loss")


def bce_loss(pred, target, from_logits: bool = True) -> Tensor:
    """Mean binary cross-entropy.

    With ``from_logits`` the input is pre-sigmoid and the loss is evaluated in
    the overflow-free form ``max(x, 0) - x*y + log(1 + exp(-|x|))``.
    """
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise InputError(f"bce_loss: shape mismatch {pred.shape} vs {target.shape}")
    x, y = pred.data, target.data
    n = x.size
    if from_logits:
        value = np.mean(np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x))))

        def backward(g):
            return (g * (_sigmoid(x) - y) / n, None)
    else:
        if np.any((x <= 0) | (x >= 1)):
            raise InputError("bce_loss on probabilities needs inputs in (0, 1)")
        value = -np.mean(y * np.log(x) + (1 - y) * np.log1p(-x))

        def backward(g):
            return (g * (x - y) / (x * (1 - x)) / n, None)

    return make_node(value, (pred, target), backward, "bce_loss")
