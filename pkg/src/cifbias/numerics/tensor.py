"""Minimal reverse-mode autodiff on an eager tape.

Every operation creates a node tagged with a global sequence id, so creation
order is a topological order and backward visits nodes in exact reverse
creation order. All payloads are float64; every forward result is checked
for finiteness and failures name the offending node.
"""

from __future__ import annotations

import itertools

import numpy as np

_SEQ = itertools.count()


class GraphError(ValueError):
    """Structural or numerical failure in the tape, named after the node."""


def _as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _check_finite(name: str, data: np.ndarray) -> None:
    if not np.all(np.isfinite(data)):
        raise GraphError(f"{name}: non-finite value in forward pass")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """g (broadcast result shape) -> gradient summed down to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tensor:
    """Tape node: float64 payload, parents, and one backward rule."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_bwd", "_seq")

    def __init__(self, data, requires_grad: bool = False, name: str = "tensor"):
        self.data = _as_f64(data)
        _check_finite(name, self.data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._bwd = None
        self._seq = next(_SEQ)

    @classmethod
    def _node(cls, data, parents, bwd, name: str) -> "Tensor":
        out = cls.__new__(cls)
        out.data = _as_f64(data)
        _check_finite(name, out.data)
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out.name = name
        # parents held only when a gradient can flow, so pure inference
        # passes keep no history
        out._parents = tuple(parents) if out.requires_grad else ()
        out._bwd = bwd if out.requires_grad else None
        out._seq = next(_SEQ)
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor({self.name!r}, shape={self.data.shape}, requires_grad={self.requires_grad})"

    def backward(self, seed=None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's .grad.

        Repeated calls keep summing into .grad, which is what per-utterance
        batch accumulation relies on.
        """
        if not self.requires_grad:
            raise GraphError(f"{self.name}: backward on a node with no gradient path")
        if seed is None:
            if self.data.ndim != 0:
                raise GraphError(f"{self.name}: backward on a non-scalar needs a seed gradient")
            seed = np.ones((), dtype=np.float64)
        seed = _as_f64(seed)
        if seed.shape != self.data.shape:
            raise GraphError(f"{self.name}: seed shape {seed.shape} != {self.data.shape}")
        nodes: list[Tensor] = []
        seen: set[int] = set()
        stack: list[Tensor] = [self]
        while stack:
            t = stack.pop()
            if id(t) in seen or not t.requires_grad:
                continue
            seen.add(id(t))
            nodes.append(t)
            stack.extend(t._parents)
        nodes.sort(key=lambda t: t._seq, reverse=True)
        grads: dict[int, np.ndarray] = {id(self): seed}
        for t in nodes:
            g = grads.pop(id(t), None)
            if g is None:
                continue
            if t._bwd is None:
                t.grad = g.copy() if t.grad is None else t.grad + g
            else:
                for p, pg in t._bwd(g):
                    if not p.requires_grad:
                        continue
                    pg = _as_f64(pg)
                    if id(p) in grads:
                        grads[id(p)] = grads[id(p)] + pg
                    else:
                        grads[id(p)] = pg

    # ------------------------------------------------------------------
    # operator sugar
    # ------------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return offset(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return offset(self, -float(other))

    def __rsub__(self, other):
        return offset(scale(self, -1.0), float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        d = self.data[key]

        def bwd(g):
            buf = np.zeros_like(self.data)
            buf[key] += g
            return [(self, buf)]

        return Tensor._node(d, (self,), bwd, "slice")


def constant(data, name: str = "const") -> Tensor:
    return Tensor(data, requires_grad=False, name=name)


def parameter(data, name: str = "param") -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


# ----------------------------------------------------------------------
# primitive operations
# ----------------------------------------------------------------------


def _broadcast_guard(a: Tensor, b: Tensor, name: str) -> None:
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise GraphError(f"{name}: shapes {a.data.shape} and {b.data.shape} do not broadcast") from None


def add(a: Tensor, b: Tensor, name: str = "add") -> Tensor:
    _broadcast_guard(a, b, name)
    d = a.data + b.data

    def bwd(g):
        return [(a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(g, b.data.shape))]

    return Tensor._node(d, (a, b), bwd, name)


def sub(a: Tensor, b: Tensor, name: str = "sub") -> Tensor:
    _broadcast_guard(a, b, name)
    d = a.data - b.data

    def bwd(g):
        return [(a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(-g, b.data.shape))]

    return Tensor._node(d, (a, b), bwd, name)


def mul(a: Tensor, b: Tensor, name: str = "mul") -> Tensor:
    _broadcast_guard(a, b, name)
    d = a.data * b.data

    def bwd(g):
        return [
            (a, _unbroadcast(g * b.data, a.data.shape)),
            (b, _unbroadcast(g * a.data, b.data.shape)),
        ]

    return Tensor._node(d, (a, b), bwd, name)


def scale(a: Tensor, s: float, name: str = "scale") -> Tensor:
    d = a.data * s

    def bwd(g):
        return [(a, g * s)]

    return Tensor._node(d, (a,), bwd, name)


def offset(a: Tensor, s: float, name: str = "offset") -> Tensor:
    d = a.data + s

    def bwd(g):
        return [(a, g)]

    return Tensor._node(d, (a,), bwd, name)


def matmul(a: Tensor, b: Tensor, name: str = "matmul") -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise GraphError(f"{name}: bad shapes {a.data.shape} @ {b.data.shape}")
    d = a.data @ b.data

    def bwd(g):
        return [(a, g @ b.data.T), (b, a.data.T @ g)]

    return Tensor._node(d, (a, b), bwd, name)


def transpose(a: Tensor, name: str = "transpose") -> Tensor:
    if a.data.ndim != 2:
        raise GraphError(f"{name}: needs a 2-D tensor, got shape {a.data.shape}")
    d = a.data.T

    def bwd(g):
        return [(a, g.T)]

    return Tensor._node(d, (a,), bwd, name)


def tanh(a: Tensor, name: str = "tanh") -> Tensor:
    d = np.tanh(a.data)

    def bwd(g):
        return [(a, g * (1.0 - d * d))]

    return Tensor._node(d, (a,), bwd, name)


def sigmoid(a: Tensor, name: str = "sigmoid") -> Tensor:
    x = a.data
    d = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bwd(g):
        return [(a, g * d * (1.0 - d))]

    return Tensor._node(d, (a,), bwd, name)


def relu(a: Tensor, name: str = "relu") -> Tensor:
    d = np.maximum(a.data, 0.0)

    def bwd(g):
        return [(a, g * (a.data > 0))]

    return Tensor._node(d, (a,), bwd, name)


def abs_(a: Tensor, name: str = "abs") -> Tensor:
    d = np.abs(a.data)

    def bwd(g):
        return [(a, g * np.sign(a.data))]

    return Tensor._node(d, (a,), bwd, name)


def softmax(a: Tensor, mask_keep=None, name: str = "softmax") -> Tensor:
    """Softmax over the last axis; a False in mask_keep pins that entry to
    exactly zero probability. A fully masked row is an error."""
    x = a.data
    if x.ndim == 0:
        raise GraphError(f"{name}: needs at least one axis")
    if mask_keep is not None:
        keep = np.broadcast_to(np.asarray(mask_keep, dtype=bool), x.shape)
        if not keep.any(axis=-1).all():
            raise GraphError(f"{name}: a row has every entry masked")
        x = np.where(keep, x, -np.inf)
    m = np.max(x, axis=-1, keepdims=True)
    e = np.exp(x - m)
    p = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * p).sum(axis=-1, keepdims=True)
        return [(a, p * (g - dot))]

    return Tensor._node(p, (a,), bwd, name)


def concat(parts, axis: int = 0, name: str = "concat") -> Tensor:
    ps = list(parts)
    if not ps:
        raise GraphError(f"{name}: empty input list")
    try:
        d = np.concatenate([p.data for p in ps], axis=axis)
    except ValueError as exc:
        raise GraphError(f"{name}: {exc}") from None
    sizes = [p.data.shape[axis] for p in ps]

    def bwd(g):
        outs = []
        off = 0
        for p, n in zip(ps, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(off, off + n)
            outs.append((p, g[tuple(sl)]))
            off += n
        return outs

    return Tensor._node(d, ps, bwd, name)


def embedding(table: Tensor, indices, name: str = "embedding") -> Tensor:
    """Row-select from table (V, D) by a 1-D int sequence -> (len, D)."""
    if table.data.ndim != 2:
        raise GraphError(f"{name}: table must be 2-D, got shape {table.data.shape}")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise GraphError(f"{name}: indices must be 1-D")
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise GraphError(f"{name}: index out of range for table with {table.data.shape[0]} rows")
    d = table.data[idx]

    def bwd(g):
        buf = np.zeros_like(table.data)
        np.add.at(buf, idx, g)
        return [(table, buf)]

    return Tensor._node(d, (table,), bwd, name)


def sum_(a: Tensor, axis=None, keepdims: bool = False, name: str = "sum") -> Tensor:
    d = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None and not keepdims:
            return [(a, np.broadcast_to(g, a.data.shape))]
        gg = g if keepdims else np.expand_dims(g, axis)
        return [(a, np.broadcast_to(gg, a.data.shape))]

    return Tensor._node(d, (a,), bwd, name)


def mean(a: Tensor, axis=None, keepdims: bool = False, name: str = "mean") -> Tensor:
    if a.data.size == 0:
        raise GraphError(f"{name}: mean of an empty tensor")
    n = a.data.size if axis is None else a.data.shape[axis]
    d = a.data.mean(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None and not keepdims:
            return [(a, np.broadcast_to(g / n, a.data.shape))]
        gg = g if keepdims else np.expand_dims(g, axis)
        return [(a, np.broadcast_to(gg / n, a.data.shape))]

    return Tensor._node(d, (a,), bwd, name)
