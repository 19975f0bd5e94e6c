"""Bias training objective: the modality-gap penalty and the composite
three-stream loss."""

from __future__ import annotations

from cifbias.numerics import Tensor, add, mean, offset, rows_cosine, scale

__all__ = ["gap_loss", "total_loss"]


def gap_loss(h_speech, h_text, weights) -> Tensor:
    """Confidence-weighted cosine distance between the two hidden streams.

    Per utterance: the mean over positions of 1 - cos(h_speech_j,
    h_text_j); the batch value is the w-weighted mean of those terms, so
    it lies in [0, 2] and is 0 exactly when every position pair points
    the same way."""
    h_speech = list(h_speech)
    h_text = list(h_text)
    weights = [float(w) for w in weights]
    if not (len(h_speech) == len(h_text) == len(weights)):
        raise ValueError(
            f"gap_loss: got {len(h_speech)} speech streams, {len(h_text)} "
            f"text streams, {len(weights)} weights")
    if not h_speech:
        raise ValueError("gap_loss: empty batch")
    for w in weights:
        if not 0.0 <= w <= 1.0:
            raise ValueError(f"gap_loss: weight {w} outside [0, 1]")
    total_w = sum(weights)
    if total_w <= 0.0:
        raise ValueError("gap_loss: weights sum to zero")
    acc = None
    for hs, ht, w in zip(h_speech, h_text, weights):
        term = mean(offset(scale(rows_cosine(hs, ht), -1.0), 1.0))
        term = scale(term, w)
        acc = term if acc is None else add(acc, term)
    return scale(acc, 1.0 / total_w, name="gap_loss")


def total_loss(l_speech: Tensor, l_ptext: Tensor, l_uptext: Tensor,
               l_gap: Tensor, lam: float = 0.1) -> Tensor:
    """Speech-stream loss plus lambda-scaled text-stream losses plus the
    gap penalty."""
    if lam < 0.0:
        raise ValueError(f"total_loss: lambda {lam} must be >= 0")
    text = scale(add(l_ptext, l_uptext), float(lam))
    return add(add(l_speech, text), l_gap, name="total_loss")
