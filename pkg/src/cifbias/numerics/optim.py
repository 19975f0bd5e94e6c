"""Parameter updates over {name: Tensor} stores."""

from __future__ import annotations

import numpy as np

from cifbias.numerics.tensor import Tensor


def zero_grad(params: dict[str, Tensor]) -> None:
    for t in params.values():
        t.grad = None


def sgd_step(params: dict[str, Tensor], lr: float) -> None:
    """Plain gradient descent; parameters without a gradient stay put."""
    for t in params.values():
        if t.grad is not None:
            t.data -= lr * t.grad


class Adam:
    """Adam with bias correction; state keyed by parameter name."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, Tensor], lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in params.items():
            if p.grad is None:
                continue
            g = p.grad
            m = self.m.setdefault(name, np.zeros_like(p.data))
            v = self.v.setdefault(name, np.zeros_like(p.data))
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mh = m / (1 - b1 ** self.t)
            vh = v / (1 - b2 ** self.t)
            p.data -= lr * mh / (np.sqrt(vh) + self.eps)
