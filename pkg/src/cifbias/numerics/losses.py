"""Differentiable loss heads: label-smoothed cross-entropy and cosine nodes."""

from __future__ import annotations

import numpy as np

from cifbias.numerics.tensor import GraphError, Tensor


def label_smoothed_ce(logits: Tensor, targets, epsilon: float = 0.1, mask=None,
                      name: str = "label_smoothed_ce") -> Tensor:
    """Mean smoothed cross-entropy over the unmasked rows of (N, C) logits.

    The target distribution puts 1 - epsilon on the target class and
    epsilon / (C - 1) on every other class. mask is a boolean keep-vector
    over rows; masking every row is an error.
    """
    if logits.data.ndim != 2:
        raise GraphError(f"{name}: logits must be (N, C), got shape {logits.data.shape}")
    n, c = logits.data.shape
    if n == 0:
        raise GraphError(f"{name}: no positions")
    if c < 2:
        raise GraphError(f"{name}: need at least 2 classes, got {c}")
    if not 0.0 <= epsilon < 1.0:
        raise GraphError(f"{name}: epsilon {epsilon} outside [0, 1)")
    t = np.asarray(targets, dtype=np.int64)
    if t.shape != (n,):
        raise GraphError(f"{name}: targets shape {t.shape} != ({n},)")
    if t.min() < 0 or t.max() >= c:
        raise GraphError(f"{name}: target id out of range for {c} classes")
    keep = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if keep.shape != (n,):
        raise GraphError(f"{name}: mask shape {keep.shape} != ({n},)")
    m = int(keep.sum())
    if m == 0:
        raise GraphError(f"{name}: every position is masked")

    x = logits.data
    mx = x.max(axis=1, keepdims=True)
    lse = mx + np.log(np.exp(x - mx).sum(axis=1, keepdims=True))
    logp = x - lse
    q = np.full((n, c), epsilon / (c - 1), dtype=np.float64)
    q[np.arange(n), t] = 1.0 - epsilon
    per_row = -(q * logp).sum(axis=1)
    val = per_row[keep].mean()

    def bwd(g):
        gx = (np.exp(logp) - q) * (float(g) / m)
        gx[~keep] = 0.0
        return [(logits, gx)]

    return Tensor._node(val, (logits,), bwd, name)


def rows_cosine(a: Tensor, b: Tensor, name: str = "rows_cosine") -> Tensor:
    """Row-wise cosine similarity of two (N, D) tensors -> (N,)."""
    if a.data.ndim != 2 or a.data.shape != b.data.shape:
        raise GraphError(f"{name}: need matching (N, D) inputs, got {a.data.shape} and {b.data.shape}")
    na = np.linalg.norm(a.data, axis=1)
    nb = np.linalg.norm(b.data, axis=1)
    if (na == 0.0).any() or (nb == 0.0).any():
        raise GraphError(f"{name}: zero-norm row")
    c = (a.data * b.data).sum(axis=1) / (na * nb)

    def bwd(g):
        gcol = g[:, None]
        ga = gcol * (b.data / (na * nb)[:, None] - a.data * (c / (na * na))[:, None])
        gb = gcol * (a.data / (na * nb)[:, None] - b.data * (c / (nb * nb))[:, None])
        return [(a, ga), (b, gb)]

    return Tensor._node(c, (a, b), bwd, name)


def cosine(a: Tensor, b: Tensor, name: str = "cosine") -> Tensor:
    """Cosine similarity of two equal-length 1-D tensors, as a scalar node."""
    if a.data.ndim != 1 or a.data.shape != b.data.shape:
        raise GraphError(f"{name}: need matching 1-D inputs, got {a.data.shape} and {b.data.shape}")
    na = float(np.linalg.norm(a.data))
    nb = float(np.linalg.norm(b.data))
    if na == 0.0 or nb == 0.0:
        raise GraphError(f"{name}: zero-norm input")
    c = float(a.data @ b.data) / (na * nb)

    def bwd(g):
        g = float(g)
        ga = g * (b.data / (na * nb) - a.data * (c / (na * na)))
        gb = g * (a.data / (na * nb) - b.data * (c / (nb * nb)))
        return [(a, ga), (b, gb)]

    return Tensor._node(c, (a, b), bwd, name)
