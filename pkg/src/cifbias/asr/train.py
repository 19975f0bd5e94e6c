"""Training loop for the frame-to-character model."""

from __future__ import annotations

import math

import numpy as np

from cifbias.asr.model import AsrModel, asr_forward
from cifbias.numerics import (Adam, abs_, constant, label_smoothed_ce, mean, mul,
                              relu, sub, zero_grad)


def quantity_loss(sum_alpha, n_ref: int):
    """Absolute gap between total integration mass and the label length;
    zero exactly when the free-running pass would fire n_ref times on
    average mass."""
    return abs_(sub(sum_alpha, constant(float(n_ref))))


def boundary_prior(frames, max_run: int = 5) -> np.ndarray:
    """Self-supervised firing targets derived from the frames alone.

    A frame whose distance to its predecessor exceeds the midpoint of the
    observed distance range is a novelty onset and gets target 1, as does
    the first frame.  Inside an unbroken run, every max_run-th frame also
    gets target 1: a single token never spans more frames than max_run, so
    a longer run must hide at least one boundary even though the frames
    give no local cue for where it falls.  All other targets are 0.
    """
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError("boundary_prior: frames must be a non-empty (T, F) array")
    if frames.shape[0] == 1:
        return np.ones(1)
    d = np.linalg.norm(np.diff(frames, axis=0), axis=1)
    theta = (d.max() + d.min()) / 2.0
    novelty = np.concatenate([[1.0], (d > theta).astype(float)])
    targets = np.zeros(frames.shape[0])
    last = 0
    for j in range(frames.shape[0]):
        if novelty[j] == 1.0 or j - last >= max_run:
            targets[j] = 1.0
            last = j
    return targets


def mass_closure(sum_alpha, n_ref: int, margin: float):
    """One-sided penalty when total mass falls short of the label length
    plus a small margin.  The symmetric quantity term settles with about
    half the utterances just below the final firing threshold, where the
    trailing-mass rule drops the last token; this term lifts the whole
    distribution over the line and costs nothing once it is there."""
    return relu(sub(constant(n_ref * (1.0 + margin)), sum_alpha))


def _batch_terms(model: AsrModel, batch, quantity_weight: float,
                 prior_weight: float, closure_weight: float,
                 closure_margin: float):
    """(optimized loss, plain cross entropy + quantity value) for one batch;
    the plain part is what training curves report."""
    total = None
    ref_total = 0.0
    for utt in batch:
        fwd = asr_forward(model, utt.frames, labels=utt.chars)
        ce = label_smoothed_ce(fwd.logits, np.asarray(utt.chars), epsilon=0.1)
        loss = ce + quantity_loss(fwd.sum_alpha, len(utt.chars)) * quantity_weight
        ref_total += float(loss.data)
        if prior_weight > 0.0:
            gap = sub(fwd.alphas, constant(boundary_prior(utt.frames)))
            loss = loss + mean(mul(gap, gap)) * prior_weight
        if closure_weight > 0.0:
            loss = loss + mass_closure(fwd.sum_alpha, len(utt.chars),
                                       closure_margin) * closure_weight
        total = loss if total is None else total + loss
    return total * (1.0 / len(batch)), ref_total / len(batch)


def batch_loss(model: AsrModel, batch, quantity_weight: float = 1.0):
    """Mean over utterances of smoothed cross entropy plus the weighted
    quantity term."""
    loss, _ = _batch_terms(model, batch, quantity_weight, 0.0, 0.0, 0.0)
    return loss


def asr_train(model: AsrModel, utterances, epochs: int = 110, lr: float = 1e-3,
              batch_size: int = 8, seed: int = 0, quantity_weight: float = 1.0,
              prior_weights: tuple[float, float] = (40.0, 3.0),
              closure: tuple[float, float] = (2.0, 0.03)) -> list[float]:
    """Train in place with Adam over seeded shuffles; returns the per-step
    curve of the cross entropy + quantity loss.  Aborts if the optimized
    loss leaves the finite range.

    Auxiliary terms follow a three-phase schedule over the epochs: a short
    heavy boundary-prior phase (first 6%, rounded up) locks the integration
    weights onto frame-novelty onsets, a long moderate phase holds them
    there while cross entropy shapes the encoder, and in the final phase
    (last 15%) the prior is dropped and the one-sided mass-closure term
    (weight, margin) pushes free-running counts over the firing threshold.
    The learning rate drops to 0.3x for the last 20% of epochs.
    """
    paired = [u for u in utterances if u.frames is not None]
    if not paired:
        raise ValueError("asr_train: no utterances with frames")
    if epochs < 1:
        raise ValueError(f"asr_train: epochs must be >= 1, got {epochs}")
    warm_end = math.ceil(0.06 * epochs)
    release_start = math.floor(0.85 * epochs)
    decay_start = math.floor(0.8 * epochs)
    opt = Adam()
    curve: list[float] = []
    for epoch in range(epochs):
        if epoch < warm_end:
            w_prior, w_close = prior_weights[0], 0.0
        elif epoch < release_start:
            w_prior, w_close = prior_weights[1], 0.0
        else:
            w_prior, w_close = 0.0, closure[0]
        lr_eff = lr * (0.3 if epoch >= decay_start else 1.0)
        order = np.random.default_rng([seed, epoch]).permutation(len(paired))
        for start in range(0, len(paired), batch_size):
            batch = [paired[i] for i in order[start:start + batch_size]]
            loss, ref_loss = _batch_terms(model, batch, quantity_weight, w_prior,
                                          w_close, closure[1])
            if not np.isfinite(loss.data):
                raise FloatingPointError(
                    f"asr_train: loss diverged at step {len(curve)}")
            zero_grad(model.params)
            loss.backward()
            opt.step(model.params, lr_eff)
            curve.append(ref_loss)
    return curve
