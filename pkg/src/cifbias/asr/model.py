"""Recurrent encoder, integrate-and-fire segmentation, and a feedforward
character decoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cifbias.asr.cif import cif_integrate
from cifbias.numerics import (
    Tensor,
    add,
    constant,
    load_params,
    matmul,
    rnn_tanh,
    save_params,
    sigmoid,
    softmax,
    sum_,
    tanh,
)


class AsrModel:
    """Frame classifier trained on paired data, later frozen as the source
    of per-token latent embeddings.

    Two stacked tanh recurrent layers encode the frames; an affine+sigmoid
    head emits the integration weight per frame; the integrated embeddings
    go through two feedforward layers whose last hidden layer is the
    decoder-side latent space, then an affine projection onto characters.
    """

    def __init__(self, frame_dim: int, n_chars: int, hidden_dim: int = 32,
                 beta: float = 1.0, seed: int = 0):
        self.frame_dim = frame_dim
        self.n_chars = n_chars
        self.hidden_dim = hidden_dim
        self.beta = float(beta)
        rng = np.random.default_rng(seed)
        d = hidden_dim
        shapes = {
            "enc0.wx": (frame_dim, d), "enc0.wh": (d, d), "enc0.b": (1, d),
            "enc1.wx": (d, d), "enc1.wh": (d, d), "enc1.b": (1, d),
            "alpha.w": (d, 1), "alpha.b": (1, 1),
            "dec.w1": (d, d), "dec.b1": (1, d),
            "dec.w2": (d, n_chars), "dec.b2": (1, n_chars),
        }
        self.params: dict[str, Tensor] = {}
        for name, shape in shapes.items():
            if name.endswith(".b") or name.startswith("dec.b") or name == "alpha.b":
                data = np.zeros(shape)
            else:
                data = rng.normal(0.0, 1.0 / np.sqrt(shape[0]), size=shape)
            self.params[name] = Tensor(data, requires_grad=True, name=name)
        # start integration weights low so early training undershoots the
        # firing threshold instead of flooding it
        self.params["alpha.b"].data[:] = -1.0

    def freeze(self) -> None:
        for p in self.params.values():
            p.requires_grad = False

    @property
    def frozen(self) -> bool:
        return not any(p.requires_grad for p in self.params.values())

    def save(self, path) -> None:
        save_params(path, {k: t.data for k, t in self.params.items()})

    def load(self, path) -> None:
        loaded = load_params(path)
        for name, tensor in self.params.items():
            if name not in loaded:
                raise ValueError(f"checkpoint is missing parameter {name!r}")
            if loaded[name].shape != tensor.data.shape:
                raise ValueError(
                    f"checkpoint parameter {name!r} has shape {loaded[name].shape}, "
                    f"expected {tensor.data.shape}")
            tensor.data = loaded[name]


@dataclass
class AsrForward:
    n_fired: int
    alphas: Tensor
    encoded: Tensor
    e_cif: Tensor
    dec_hidden: Tensor
    logits: Tensor
    probs: Tensor
    sum_alpha: Tensor
    hyp: tuple[int, ...]


def asr_forward(model: AsrModel, frames, labels=None) -> AsrForward:
    """Run the full model on one utterance.

    With labels the integration is rescaled to fire exactly len(labels)
    times (teacher forcing); without, it free-runs and the greedy argmax
    over each fired position is the hypothesis.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ValueError("asr_forward: frames must be a non-empty (T, F) array")
    p = model.params
    x = constant(frames, name="frames")
    h0 = rnn_tanh(x, p["enc0.wx"], p["enc0.wh"], p["enc0.b"], name="enc0")
    h1 = rnn_tanh(h0, p["enc1.wx"], p["enc1.wh"], p["enc1.b"], name="enc1")
    alphas = sigmoid(add(matmul(h1, p["alpha.w"]), p["alpha.b"]))[:, 0]
    sum_alpha = sum_(alphas)
    scale_to = None
    if labels is not None:
        scale_to = len(labels)
    n, e_cif = cif_integrate(alphas, h1, model.beta, scale_to)
    dec_hidden = tanh(add(matmul(e_cif, p["dec.w1"]), p["dec.b1"]))
    logits = add(matmul(dec_hidden, p["dec.w2"]), p["dec.b2"])
    probs = softmax(logits)
    hyp = tuple(int(i) for i in np.argmax(logits.data, axis=1))
    return AsrForward(n, alphas, h1, e_cif, dec_hidden, logits, probs, sum_alpha, hyp)
