"""Hotword biasing module: phrase encoder, cross-attention bias decoder,
and the per-position posterior over characters plus a no-bias class.

The encoder turns each hotword phrase into one row of Z through a
bidirectional recurrent layer and a mean pool; a learned no-bias vector
is always appended as the final row.  The decoder runs the query stream
(latent embeddings from the frozen recognizer, or text embeddings from
the codebooks) through two single-head cross-attention blocks against Z
and projects onto n_chars + 1 classes, where class n_chars means "leave
this position alone".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cifbias.numerics import (Tensor, add, concat, constant, embedding,
                              load_params, matmul, mean, rnn_tanh,
                              save_params, scale, softmax, tanh, transpose)

__all__ = ["BiasDecode", "BiasModel", "bias_decode", "bias_encode"]


class BiasModel:
    """Parameters of the hotword encoder and the two-block bias decoder.

    ``dim`` is the attention width and must match the recognizer's latent
    dimension; ``query_dim`` is the width of the incoming query stream
    (equal to ``dim`` for a single latent space, twice that when the two
    spaces are concatenated).
    """

    def __init__(self, n_chars: int, query_dim: int | None = None,
                 dim: int = 32, embed_dim: int = 16, seed: int = 0):
        if n_chars < 1:
            raise ValueError(f"bias model needs n_chars >= 1, got {n_chars}")
        if dim % 2 != 0:
            raise ValueError(f"bias model dim must be even, got {dim}")
        self.n_chars = n_chars
        self.n_classes = n_chars + 1
        self.no_bias_class = n_chars
        self.dim = dim
        self.query_dim = int(query_dim) if query_dim is not None else dim
        self.embed_dim = embed_dim
        half = dim // 2
        rng = np.random.default_rng(seed)
        shapes = {
            "embed": (n_chars, embed_dim),
            "encf.wx": (embed_dim, half), "encf.wh": (half, half),
            "encf.b": (1, half),
            "encb.wx": (embed_dim, half), "encb.wh": (half, half),
            "encb.b": (1, half),
            "nobias": (1, dim),
            "blk1.wq": (self.query_dim, dim), "blk1.wk": (dim, dim),
            "blk1.wv": (dim, dim), "blk1.wo": (dim, dim), "blk1.bo": (1, dim),
            "blk2.wq": (dim, dim), "blk2.wk": (dim, dim),
            "blk2.wv": (dim, dim), "blk2.wo": (dim, dim), "blk2.bo": (1, dim),
            "out.w": (dim, self.n_classes), "out.b": (1, self.n_classes),
        }
        self.params: dict[str, Tensor] = {}
        for name, shape in shapes.items():
            if name.endswith(".b") or name.endswith(".bo"):
                data = np.zeros(shape)
            elif name == "embed":
                # embedding rows are inputs, not matmul operands: unit
                # scale keeps phrase encodings comparable to the query
                # stream instead of fan-in-shrunk toward zero
                data = rng.normal(0.0, 1.0, size=shape)
            elif name == "nobias":
                # match the magnitude of mean-pooled phrase rows so the
                # no-bias key does not dominate attention at init
                data = rng.normal(0.0, 0.5, size=shape)
            else:
                data = rng.normal(0.0, 1.0 / np.sqrt(shape[0]), size=shape)
            self.params[name] = Tensor(data, requires_grad=True, name=name)

    def save(self, path) -> None:
        save_params(path, {name: t.data for name, t in self.params.items()})

    def load(self, path) -> None:
        loaded = load_params(path)
        for name, tensor in self.params.items():
            if name not in loaded:
                raise ValueError(f"checkpoint is missing parameter {name}")
            if loaded[name].shape != tensor.data.shape:
                raise ValueError(
                    f"checkpoint parameter {name} has shape {loaded[name].shape}, "
                    f"expected {tensor.data.shape}")
            tensor.data[:] = loaded[name]


def bias_encode(model: BiasModel, hotwords) -> Tensor:
    """Z with one row per phrase and the learned no-bias row appended."""
    p = model.params
    rows = []
    for phrase in hotwords:
        chars = [int(c) for c in phrase]
        if any(not 0 <= c < model.n_chars for c in chars):
            bad = [c for c in chars if not 0 <= c < model.n_chars][0]
            raise ValueError(f"bias_encode: unknown char {bad} in hotword")
        emb = embedding(p["embed"], chars)
        fwd = rnn_tanh(emb, p["encf.wx"], p["encf.wh"], p["encf.b"], name="encf")
        bwd = rnn_tanh(emb, p["encb.wx"], p["encb.wh"], p["encb.b"],
                       reverse=True, name="encb")
        rows.append(mean(concat([fwd, bwd], axis=1), axis=0, keepdims=True))
    rows.append(p["nobias"])
    return concat(rows, axis=0, name="Z") if len(rows) > 1 else p["nobias"]


@dataclass
class BiasDecode:
    """One pass of the bias decoder over a query stream."""

    logits: Tensor
    posterior: np.ndarray
    h: Tensor
    attentions: tuple[np.ndarray, np.ndarray]
    activity: np.ndarray


def _block(model: BiasModel, tag: str, queries: Tensor, z: Tensor,
           keep) -> tuple[Tensor, np.ndarray]:
    p = model.params
    qp = matmul(queries, p[f"{tag}.wq"])
    kp = matmul(z, p[f"{tag}.wk"])
    vp = matmul(z, p[f"{tag}.wv"])
    scores = scale(matmul(qp, transpose(kp)), 1.0 / np.sqrt(model.dim))
    mask = None
    if keep is not None:
        mask = np.broadcast_to(keep, scores.data.shape)
    att = softmax(scores, mask_keep=mask, name=f"{tag}.att")
    ctx = matmul(att, vp)
    out = tanh(add(matmul(add(qp, ctx), p[f"{tag}.wo"]), p[f"{tag}.bo"]))
    return out, att.data.copy()


def bias_decode(model: BiasModel, queries, z: Tensor,
                key_mask=None) -> BiasDecode:
    """Cross-attend the query stream onto Z twice and read the posterior.

    ``key_mask`` is a boolean keep-vector over all rows of Z; a masked
    hotword receives exactly zero attention in both blocks.  The no-bias
    row must stay unmasked.  The hidden stream ``h`` is the first block's
    output; ``activity`` is each hotword's attention mass averaged over
    query positions and both blocks.
    """
    if not isinstance(queries, Tensor):
        queries = constant(np.asarray(queries, dtype=np.float64), name="queries")
    if queries.data.ndim != 2 or queries.data.shape[0] == 0:
        raise ValueError("bias_decode: queries must be a non-empty (N, D) array")
    if queries.data.shape[1] != model.query_dim:
        raise ValueError(
            f"bias_decode: query width {queries.data.shape[1]} != model "
            f"query_dim {model.query_dim}")
    n_keys = z.data.shape[0]
    if z.data.ndim != 2 or z.data.shape[1] != model.dim:
        raise ValueError(f"bias_decode: Z must be (N_h + 1, {model.dim})")
    keep = None
    if key_mask is not None:
        keep = np.asarray(key_mask, dtype=bool)
        if keep.shape != (n_keys,):
            raise ValueError(
                f"bias_decode: key mask shape {keep.shape} != ({n_keys},)")
        if not keep[-1]:
            raise ValueError("bias_decode: the no-bias row cannot be masked")

    h1, att1 = _block(model, "blk1", queries, z, keep)
    h2, att2 = _block(model, "blk2", h1, z, keep)
    logits = add(matmul(h2, model.params["out.w"]), model.params["out.b"],
                 name="bias_logits")
    posterior = softmax(logits).data.copy()
    n_hot = n_keys - 1
    activity = 0.5 * (att1[:, :n_hot].mean(axis=0) + att2[:, :n_hot].mean(axis=0)) \
        if n_hot > 0 else np.zeros(0)
    return BiasDecode(logits=logits, posterior=posterior, h=h1,
                      attentions=(att1, att2), activity=activity)
