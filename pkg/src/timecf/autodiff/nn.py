"""Layers built on the autodiff tensor: dense, GRU (composed and fused) and conv1d."""

from __future__ import annotations

from typing import Iterator

import math

import numpy as np
from numba import njit

from ..core import InputError
from .tensor import Tensor, add, as_tensor, conv1d, make_node, matmul, mul, sigmoid, sub, tanh


def uniform_init(rng: np.random.Generator, shape, fan_in: int, name: str) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


class Module:
    """Parameter container; attributes that are tensors or modules are discovered in order."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in self.__dict__.items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + key, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{key}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        if missing:
            raise InputError(f"missing parameters: {sorted(missing)}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise InputError(f"{name}: expected shape {p.shape}, got {arr.shape}")
            p.data = Tensor(arr).data


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        self.W = uniform_init(rng, (n_in, n_out), n_in, "W")
        self.b = uniform_init(rng, (n_out,), n_in, "b")

    def __call__(self, x) -> Tensor:
        return add(matmul(x, self.W), self.b)


class GruCell(Module):
    """Update gate z, reset gate r and candidate h~ weights for input dim I, hidden dim H."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.input_dim, self.hidden_dim = input_dim, hidden_dim
        fan_in = input_dim + hidden_dim
        for gate in ("z", "r", "h"):
            setattr(self, f"W_{gate}", uniform_init(rng, (input_dim, hidden_dim), fan_in, f"W_{gate}"))
            setattr(self, f"U_{gate}", uniform_init(rng, (hidden_dim, hidden_dim), fan_in, f"U_{gate}"))
            setattr(self, f"b_{gate}", uniform_init(rng, (hidden_dim,), fan_in, f"b_{gate}"))


def gru_step(cell: GruCell, x_t, h_prev) -> Tensor:
    """One GRU step from primitive ops; x_t: (B, I), h_prev: (B, H)."""
    if x_t.shape[-1] != cell.input_dim or h_prev.shape[-1] != cell.hidden_dim:
        raise InputError(f"gru_step: shapes {x_t.shape}, {h_prev.shape} do not match cell "
                         f"({cell.input_dim}, {cell.hidden_dim})")
    z = sigmoid(add(add(matmul(x_t, cell.W_z), matmul(h_prev, cell.U_z)), cell.b_z))
    r = sigmoid(add(add(matmul(x_t, cell.W_r), matmul(h_prev, cell.U_r)), cell.b_r))
    cand = tanh(add(add(matmul(x_t, cell.W_h), matmul(mul(r, h_prev), cell.U_h)), cell.b_h))
    return add(mul(sub(1.0, z), h_prev), mul(z, cand))


@njit(cache=True, fastmath=True)
def _gru_forward_loop(pre, Uzr, Uh, hs, zr, cs):
    B, T, H3 = pre.shape
    H = H3 // 3
    rh = np.empty((B, H))
    h = np.zeros((B, H))
    for t in range(T):
        a = np.dot(h, Uzr)
        for b in range(B):
            for j in range(2 * H):
                v = pre[b, t, j] + a[b, j]
                zr[b, t, j] = 0.5 * (1.0 + math.tanh(0.5 * v))
            for j in range(H):
                rh[b, j] = zr[b, t, H + j] * h[b, j]
        a2 = np.dot(rh, Uh)
        for b in range(B):
            for j in range(H):
                c = math.tanh(pre[b, t, 2 * H + j] + a2[b, j])
                cs[b, t, j] = c
                h[b, j] += zr[b, t, j] * (c - h[b, j])
                hs[b, t + 1, j] = h[b, j]


@njit(cache=True)
def _gru_backward_loop(g, hs, zr, cs, UhT, UzrT, d_pre):
    B, T, H = g.shape
    dh = np.zeros((B, H))
    dac = np.empty((B, H))
    dazr = np.empty((B, 2 * H))
    for t in range(T - 1, -1, -1):
        for b in range(B):
            for j in range(H):
                dh[b, j] += g[b, t, j]
                z = zr[b, t, j]
                c = cs[b, t, j]
                v = dh[b, j] * z * (1.0 - c * c)
                dac[b, j] = v
                d_pre[b, t, 2 * H + j] = v
                dazr[b, j] = dh[b, j] * (c - hs[b, t, j]) * z * (1.0 - z)
        drh = np.dot(dac, UhT)
        for b in range(B):
            for j in range(H):
                r = zr[b, t, H + j]
                dazr[b, H + j] = drh[b, j] * hs[b, t, j] * r * (1.0 - r)
                d_pre[b, t, j] = dazr[b, j]
                d_pre[b, t, H + j] = dazr[b, H + j]
        back = np.dot(dazr, UzrT)
        for b in range(B):
            for j in range(H):
                dh[b, j] = dh[b, j] * (1.0 - zr[b, t, j]) + drh[b, j] * zr[b, t, H + j] + back[b, j]


def gru_sequence(cell: GruCell, x) -> Tensor:
    """Run ``cell`` over x: (B, T, I) from a zero state; returns all hidden states (B, T, H).

    Single graph node with hand-written backpropagation through time. Matches
    repeated :func:`gru_step` calls.
    """
    x = as_tensor(x)
    if x.data.ndim != 3 or x.shape[2] != cell.input_dim:
        raise InputError(f"gru_sequence: input shape {x.shape} incompatible with input dim {cell.input_dim}")
    B, T, _ = x.shape
    H = cell.hidden_dim
    Wx = np.concatenate([cell.W_z.data, cell.W_r.data, cell.W_h.data], axis=1)
    Uzr = np.concatenate([cell.U_z.data, cell.U_r.data], axis=1)
    Uh = cell.U_h.data
    bias = np.concatenate([cell.b_z.data, cell.b_r.data, cell.b_h.data])

    pre = x.data @ Wx + bias  # (B, T, 3H)
    hs = np.zeros((B, T + 1, H))  # hs[:, 0] is the zero initial state
    zr = np.empty((B, T, 2 * H))
    cs = np.empty((B, T, H))
    _gru_forward_loop(np.ascontiguousarray(pre), Uzr, np.ascontiguousarray(Uh), hs, zr, cs)
    h_prev = hs[:, :-1]

    def backward(g):
        d_pre = np.empty((B, T, 3 * H))
        _gru_backward_loop(np.ascontiguousarray(g, dtype=np.float64), hs, zr, cs,
                           np.ascontiguousarray(Uh.T), np.ascontiguousarray(Uzr.T), d_pre)
        flat_pre = d_pre.reshape(-1, 3 * H)
        dUzr = h_prev.reshape(-1, H).T @ flat_pre[:, :2 * H]
        dUh = (zr[:, :, H:] * h_prev).reshape(-1, H).T @ flat_pre[:, 2 * H:]
        dWx = x.data.reshape(-1, x.shape[2]).T @ flat_pre
        db = flat_pre.sum(axis=0)
        dx = d_pre @ Wx.T
        return (dx,
                dWx[:, :H], dUzr[:, :H], db[:H],
                dWx[:, H:2 * H], dUzr[:, H:], db[H:2 * H],
                dWx[:, 2 * H:], dUh, db[2 * H:])

    parents = (x, cell.W_z, cell.U_z, cell.b_z, cell.W_r, cell.U_r, cell.b_r, cell.W_h, cell.U_h, cell.b_h)
    return make_node(hs[:, 1:], parents, backward, "gru_sequence")


class RecurrentNet(Module):
    """Stacked GRU followed by a per-step dense projection and optional sigmoid."""

    def __init__(self, input_dim: int, hidden_dim: int, output_dim: int, num_layers: int,
                 rng: np.random.Generator, output_sigmoid: bool = True):
        dims = [input_dim] + [hidden_dim] * num_layers
        self.cells = [GruCell(dims[i], hidden_dim, rng) for i in range(num_layers)]
        self.head = Dense(hidden_dim, output_dim, rng)
        self.output_sigmoid = output_sigmoid

    def __call__(self, x) -> Tensor:
        h = x
        for cell in self.cells:
            h = gru_sequence(cell, h)
        out = self.head(h)
        return sigmoid(out) if self.output_sigmoid else out


class Conv1d(Module):
    def __init__(self, in_channels: int, out_channels: int, width: int, rng: np.random.Generator):
        fan_in = in_channels * width
        self.w = uniform_init(rng, (width, in_channels, out_channels), fan_in, "w")
        self.b = uniform_init(rng, (out_channels,), fan_in, "b")

    def __call__(self, x) -> Tensor:
        return conv1d(x, self.w, self.b)
