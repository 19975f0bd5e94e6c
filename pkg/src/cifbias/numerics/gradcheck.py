"""Central-difference gradient checking for scalar tape functions."""

from __future__ import annotations

import numpy as np

from cifbias.numerics.tensor import GraphError, Tensor

REL_TOL = 1e-4


def grad_check(fn, params: dict[str, np.ndarray], eps: float = 1e-5) -> dict[str, float]:
    """Compare analytic gradients of fn against central finite differences.

    fn maps {name: Tensor(requires_grad=True)} to a scalar Tensor. Returns
    the max relative error per parameter, where the relative error of one
    element is |analytic - fd| / max(|analytic|, |fd|, 1e-8).
    """
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    def run():
        ts = {k: Tensor(v, requires_grad=True, name=k) for k, v in base.items()}
        out = fn(ts)
        if out.data.ndim != 0:
            raise GraphError("grad_check: fn must return a scalar")
        return ts, out

    ts, out = run()
    out.backward()
    analytic = {k: (np.zeros_like(base[k]) if ts[k].grad is None else ts[k].grad) for k in base}

    errs: dict[str, float] = {}
    for k, v in base.items():
        flat = v.reshape(-1)
        fd = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = run()[1].data
            flat[i] = orig - eps
            lo = run()[1].data
            flat[i] = orig
            fd[i] = (hi - lo) / (2.0 * eps)
        an = analytic[k].reshape(-1)
        denom = np.maximum(np.maximum(np.abs(an), np.abs(fd)), 1e-8)
        errs[k] = float(np.max(np.abs(an - fd) / denom)) if flat.size else 0.0
    return errs
