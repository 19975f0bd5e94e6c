"""Training-time augmentation: speech/text position swapping and the
masked per-position bias targets."""

from __future__ import annotations

import numpy as np

from cifbias.corpus import find_occurrences

__all__ = ["make_bias_targets", "swap_augment"]


def swap_augment(e_speech, e_text, p_swap: float, seed=0):
    """Mix the two aligned streams: each position independently takes the
    text row with probability ``p_swap``.  Returns the mixed stream and
    the boolean mask of swapped positions."""
    e_speech = np.asarray(e_speech, dtype=np.float64)
    e_text = np.asarray(e_text, dtype=np.float64)
    if e_speech.shape != e_text.shape:
        raise ValueError(
            f"swap_augment: stream shapes {e_speech.shape} and {e_text.shape} "
            f"differ")
    if not 0.0 <= float(p_swap) <= 1.0:
        raise ValueError(f"swap_augment: p_swap {p_swap} outside [0, 1]")
    rng = np.random.default_rng(seed)
    mask = rng.random(e_speech.shape[0]) < float(p_swap)
    mixed = np.where(mask[:, None], e_text, e_speech)
    return mixed, mask


def make_bias_targets(labels, hotwords, n_chars: int, spans=None) -> np.ndarray:
    """Per-position class targets: the reference char inside any hotword
    occurrence, the no-bias class (``n_chars``) everywhere else.

    Occurrence spans are found in ``labels`` for every phrase of
    ``hotwords``; pass precomputed ``spans`` ([start, end) pairs) to skip
    the search.  Overlapping spans merge by union."""
    seq = tuple(int(c) for c in labels)
    if spans is None:
        spans = [span for phrase in hotwords
                 for span in find_occurrences(seq, phrase)]
    targets = np.full(len(seq), int(n_chars), dtype=np.int64)
    for start, end in spans:
        if not 0 <= start < end <= len(seq):
            raise ValueError(
                f"make_bias_targets: span [{start}, {end}) outside a length "
                f"{len(seq)} utterance")
        targets[start:end] = seq[start:end]
    return targets
