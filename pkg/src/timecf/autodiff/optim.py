"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core import InputError
from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray | None]) -> list[np.ndarray]:
    """Return updated copies of ``params``; moment buffers in ``state`` advance by one step."""
    if len(params) != len(grads):
        raise InputError("adam_step: one gradient per parameter required")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(state.m) != len(params):
        raise InputError("adam_step: parameter list changed between steps")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape or state.m[i].shape != p.shape:
            raise InputError(f"adam_step: shape mismatch for parameter {i}: {p.shape} vs {g.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        updated.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return updated


class Adam:
    """Optimizer bound to a fixed list of parameter tensors."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        new = adam_step(self.state, [p.data for p in self.params], [p.grad for p in self.params])
        for p, arr in zip(self.params, new):
            arr.setflags(write=False)
            p.data = arr
