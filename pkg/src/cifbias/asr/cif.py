"""Continuous integrate-and-fire segmentation as one fused tape node.

The integration is evaluated as a sweep over the mass axis: prefix sums of
the per-frame weights and the firing thresholds k*beta jointly cut the axis
into pieces, each piece belonging to exactly one frame and one output token.
A token's embedding is the piece-width weighted sum of frame embeddings.
The fused backward walks the same piece list, which keeps the graph at one
node regardless of sequence length.
"""

from __future__ import annotations

import numpy as np

from cifbias.numerics import GraphError, Tensor


def cif_integrate(alphas: Tensor, embeddings: Tensor, beta: float = 1.0,
                  scale_to: int | None = None) -> tuple[int, Tensor]:
    """Integrate frame embeddings under fire-at-threshold accumulation.

    Free-running mode fires each time the running weight sum crosses beta,
    splitting the crossing frame so every fired embedding carries total
    weight beta; trailing mass below beta is discarded.  With scale_to=N
    the weights are first rescaled by N*beta/sum(alphas) so exactly N
    firings occur, the last boundary closing at the final frame.

    Returns (fired count, embeddings as an (N, D) tape node).
    """
    if beta <= 0.0:
        raise ValueError(f"cif: beta must be positive, got {beta}")
    a_raw = alphas.data
    e_data = embeddings.data
    if a_raw.ndim != 1:
        raise GraphError(f"cif: weights must be 1-D, got shape {a_raw.shape}")
    if e_data.ndim != 2 or e_data.shape[0] != a_raw.shape[0]:
        raise GraphError(
            f"cif: embeddings shape {e_data.shape} does not match {a_raw.shape[0]} weights")
    if a_raw.size and (a_raw.min() < -1e-12 or a_raw.max() > 1.0 + 1e-12):
        raise GraphError("cif: weights outside [0, 1]")
    T = a_raw.shape[0]

    total = float(a_raw.sum())
    if scale_to is None:
        factor = 1.0
        a = a_raw
        interior = None
    else:
        scale_to = int(scale_to)
        if scale_to < 1:
            raise ValueError(f"cif: scale_to must be >= 1, got {scale_to}")
        if total <= 0.0:
            raise GraphError("cif: cannot scale weights that sum to zero")
        factor = scale_to * beta / total
        a = a_raw * factor
        # the last boundary is pinned to the final frame, so only the
        # interior thresholds cut the axis
        interior = scale_to - 1

    prefix = np.cumsum(a)
    # pieces: (token, frame, lo cut frame index or -1, hi cut is a frame cut)
    pieces: list[tuple[int, int, int, bool]] = []
    widths: list[float] = []
    pos = 0.0
    lo_idx = -1
    k = 1
    tok = 0
    for t in range(T):
        hi = float(prefix[t])
        while (interior is None or k <= interior) and k * beta <= hi:
            cut = k * beta
            pieces.append((tok, t, lo_idx, False))
            widths.append(max(cut - pos, 0.0))
            pos = cut
            lo_idx = -1
            k += 1
            tok += 1
        pieces.append((tok, t, lo_idx, True))
        widths.append(max(hi - pos, 0.0))
        pos = hi
        lo_idx = t
    n = scale_to if scale_to is not None else k - 1

    weight_mat = np.zeros((n, T))
    for (token, t, _, _), w in zip(pieces, widths):
        if token < n:
            weight_mat[token, t] += w
    out_data = weight_mat @ e_data

    def bwd(g):
        per_cell = g @ e_data.T
        upper = np.zeros(T)
        lower = np.zeros(T)
        for token, t, lo, hi_is_frame in pieces:
            if token >= n:
                continue
            d = per_cell[token, t]
            if hi_is_frame:
                upper[t] += d
            if lo >= 0:
                lower[lo] += d
        # a piece bounded above by prefix sum S_t depends on every weight
        # up to t, and one bounded below by S_t negatively so
        g_a = np.cumsum((upper - lower)[::-1])[::-1]
        if scale_to is None:
            g_alpha = g_a
        else:
            g_alpha = factor * g_a - (g_a @ a) / total
        return [(alphas, g_alpha), (embeddings, weight_mat.T @ g)]

    return n, Tensor._node(out_data, (alphas, embeddings), bwd, "cif")


def confidence_index(n_hyp: int, n_ref: int) -> float:
    """Closeness of the free-running firing count to the label length,
    1 at an exact match, clamped to 0 once off by the full length."""
    if n_ref < 1:
        raise ValueError(f"confidence_index: n_ref must be >= 1, got {n_ref}")
    return 1.0 - min(abs(n_hyp - n_ref) / n_ref, 1.0)
