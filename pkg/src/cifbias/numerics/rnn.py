"""Fused simple recurrent layer.

The whole sequence recurrence lives in one tape node with a hand-rolled
backward-through-time rule, so a length-T utterance costs one node instead
of a per-frame chain.
"""

from __future__ import annotations

import numpy as np

from cifbias.numerics.tensor import GraphError, Tensor


def rnn_tanh(x: Tensor, wx: Tensor, wh: Tensor, b: Tensor,
             reverse: bool = False, name: str = "rnn") -> Tensor:
    """Run h_t = tanh(x_t wx + h_prev wh + b) over the rows of x.

    With reverse=True the recurrence consumes the sequence from the end,
    so row t of the output summarizes rows t..T-1.  Output rows align to
    input rows in both directions.
    """
    xd, wxd, whd, bd = x.data, wx.data, wh.data, b.data
    if xd.ndim != 2 or wxd.ndim != 2 or whd.ndim != 2:
        raise GraphError(f"{name}: inputs must be 2-D")
    if wxd.shape[0] != xd.shape[1]:
        raise GraphError(f"{name}: wx rows {wxd.shape[0]} != input width {xd.shape[1]}")
    d = wxd.shape[1]
    if whd.shape != (d, d):
        raise GraphError(f"{name}: wh must be ({d}, {d}), got {whd.shape}")
    if bd.shape != (1, d):
        raise GraphError(f"{name}: bias must be (1, {d}), got {bd.shape}")
    steps = xd.shape[0]

    proj = xd @ wxd + bd
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    h = np.zeros((steps, d))
    prev = np.zeros(d)
    for t in order:
        prev = np.tanh(proj[t] + prev @ whd)
        h[t] = prev

    def bwd(g):
        pre = np.zeros((steps, d))
        carry = np.zeros(d)
        for t in reversed(list(order)):
            gh = g[t] + carry
            pre[t] = gh * (1.0 - h[t] * h[t])
            carry = pre[t] @ whd.T
        # h shifted one step toward the recurrence start, zero at the seam
        h_prev = np.zeros((steps, d))
        if reverse:
            h_prev[:-1] = h[1:]
        else:
            h_prev[1:] = h[:-1]
        g_wx = xd.T @ pre
        g_wh = h_prev.T @ pre
        g_b = pre.sum(axis=0, keepdims=True)
        g_x = pre @ wxd.T
        return [(x, g_x), (wx, g_wx), (wh, g_wh), (b, g_b)]

    return Tensor._node(h, (x, wx, wh, b), bwd, name)
