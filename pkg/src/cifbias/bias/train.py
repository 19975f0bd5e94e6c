"""Mixed speech/text training loop for the biasing module.

Each batch builds one hotword list from its own utterances (a few
positive n-grams per utterance; everything else in the list acts as a
distractor), then pushes up to three query streams through the bias
decoder: the frozen recognizer's latent vectors, a position-swapped
speech/text mix, and codebook embeddings of text-only sentences.  The
composite objective adds the confidence-weighted modality-gap penalty
and scales the text-stream terms by lambda.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from cifbias.bias.augment import make_bias_targets, swap_augment
from cifbias.bias.losses import gap_loss, total_loss
from cifbias.bias.model import BiasModel, bias_decode, bias_encode
from cifbias.codebook import va_transform
from cifbias.corpus import HotwordList, ngram_hotwords
from cifbias.numerics import (add, constant, label_smoothed_ce, scale,
                              sgd_step, zero_grad)

__all__ = ["BiasTrainConfig", "batch_bias_loss", "bias_train", "text_embed"]

TA_MODES = ("off", "paired", "full")
QUERY_SPACES = ("cif", "dec", "joint")


@dataclass(frozen=True)
class BiasTrainConfig:
    epochs: int = 6
    lr: float = 0.05
    batch_size: int = 8
    seed: int = 0
    lam: float = 0.1
    p_swap: float = 0.5
    va_scheme: str = "none"
    va_ratio: float = 0.0
    ta_mode: str = "full"
    space: str = "cif"
    max_hotwords: int = 50
    max_positive_per_utt: int = 2
    p_positive: float = 0.5
    warmup_frac: float = 0.03


def text_embed(chars, scheme, ratio, lexicon, books, space, seed=0) -> np.ndarray:
    """Codebook embedding of a char sequence in one query space; the
    joint space sums the two single-space embeddings element-wise,
    sharing the variation draw so scheme III replaces the same chars in
    both."""
    if space == "joint":
        left = va_transform(chars, scheme, ratio, lexicon,
                            books[("char", "cif")], books[("pinyin", "cif")],
                            seed=seed)
        right = va_transform(chars, scheme, ratio, lexicon,
                             books[("char", "dec")], books[("pinyin", "dec")],
                             seed=seed)
        return left + right
    return va_transform(chars, scheme, ratio, lexicon, books[("char", space)],
                        books[("pinyin", space)], seed=seed)


def _speech_queries(extract, space: str) -> np.ndarray:
    s_cif = np.asarray(extract.s_cif, dtype=np.float64)
    s_dec = np.asarray(extract.s_dec, dtype=np.float64)
    if space == "cif":
        return s_cif
    if space == "dec":
        return s_dec
    return s_cif + s_dec


def _batch_hotwords(utterances, config: BiasTrainConfig, rng) -> HotwordList:
    """Positive n-grams from a random subset of the batch utterances.

    Each utterance contributes with probability p_positive; the rest
    appear with no own phrase in the list, so their positions carry
    no-bias targets for content the model can transcribe.  That contrast
    is what forces the decoder to consult the keys instead of copying
    the query's character."""
    phrases: list[tuple[int, ...]] = []
    seen = set()
    for utt in utterances:
        gate = rng.random()
        pick_seed = int(rng.integers(2 ** 31))
        if len(utt.chars) < 2 or gate >= config.p_positive:
            continue
        picked = ngram_hotwords(utt.chars, 2, 6, seed=pick_seed,
                                max_count=config.max_positive_per_utt)
        for phrase in picked:
            if phrase not in seen:
                seen.add(phrase)
                phrases.append(phrase)
    return HotwordList(tuple(phrases[:config.max_hotwords]))


def batch_bias_loss(model: BiasModel, batch, books, lexicon,
                    config: BiasTrainConfig, rng):
    """One batch's composite loss.

    ``batch`` is (paired, unpaired): paired items are (utterance,
    extract) pairs, unpaired items are utterances.  Returns the loss
    tensor plus the per-term values for logging."""
    paired, unpaired = batch
    if not paired:
        raise ValueError("batch_bias_loss: batch has no paired utterances")
    pool = [utt for utt, _ in paired]
    if config.ta_mode == "full":
        pool = pool + list(unpaired)
    hotwords = _batch_hotwords(pool, config, rng)
    z = bias_encode(model, hotwords)

    ce_speech = None
    ce_ptext = None
    h_speech, h_text, weights = [], [], []
    for utt, ex in paired:
        queries = _speech_queries(ex, config.space)
        targets = make_bias_targets(utt.chars, hotwords, model.n_chars)
        run_a = bias_decode(model, queries, z)
        ce_a = label_smoothed_ce(run_a.logits, targets, epsilon=0.1)
        ce_speech = ce_a if ce_speech is None else add(ce_speech, ce_a)
        if config.ta_mode == "off":
            continue
        e_text = text_embed(utt.chars, "none", 0.0, lexicon, books,
                            config.space, seed=0)
        mixed, _ = swap_augment(queries, e_text, config.p_swap,
                                seed=int(rng.integers(2 ** 31)))
        run_b = bias_decode(model, mixed, z)
        ce_b = label_smoothed_ce(run_b.logits, targets, epsilon=0.1)
        ce_ptext = ce_b if ce_ptext is None else add(ce_ptext, ce_b)
        run_t = bias_decode(model, e_text, z)
        h_speech.append(run_a.h)
        h_text.append(run_t.h)
        weights.append(ex.w)

    l_speech = scale(ce_speech, 1.0 / len(paired))
    if config.ta_mode == "off":
        zero = constant(0.0)
        return l_speech, {"L_total": float(l_speech.data),
                          "L_ls_speech": float(l_speech.data),
                          "L_ls_ptext": 0.0, "L_ls_uptext": 0.0, "L_gap": 0.0}

    l_ptext = scale(ce_ptext, 1.0 / len(paired))
    l_gap = gap_loss(h_speech, h_text, weights)
    if config.ta_mode == "full":
        if not unpaired:
            raise ValueError("batch_bias_loss: full TA needs unpaired text")
        ce_up = None
        for utt in unpaired:
            e_up = text_embed(utt.chars, config.va_scheme, config.va_ratio,
                              lexicon, books, config.space,
                              seed=int(rng.integers(2 ** 31)))
            run_c = bias_decode(model, e_up, z)
            targets = make_bias_targets(utt.chars, hotwords, model.n_chars)
            ce_c = label_smoothed_ce(run_c.logits, targets, epsilon=0.1)
            ce_up = ce_c if ce_up is None else add(ce_up, ce_c)
        l_uptext = scale(ce_up, 1.0 / len(unpaired))
    else:
        l_uptext = constant(0.0)

    loss = total_loss(l_speech, l_ptext, l_uptext, l_gap, config.lam)
    return loss, {"L_total": float(loss.data),
                  "L_ls_speech": float(l_speech.data),
                  "L_ls_ptext": float(l_ptext.data),
                  "L_ls_uptext": float(l_uptext.data),
                  "L_gap": float(l_gap.data)}


def bias_train(model: BiasModel, extracts, books, paired, unpaired, lexicon,
               config: BiasTrainConfig, csv_path=None) -> list[dict]:
    """Train the bias module over epochs of shuffled paired batches, each
    drawing a fresh slice of the unpaired text pool.  Plain gradient
    descent with a linear warmup over the first 3% of steps.  Returns the
    per-step loss rows and optionally writes them as CSV."""
    if config.ta_mode not in TA_MODES:
        raise ValueError(f"bias_train: unknown ta_mode {config.ta_mode!r}")
    if config.space not in QUERY_SPACES:
        raise ValueError(f"bias_train: unknown space {config.space!r}")
    if config.epochs < 1:
        raise ValueError(f"bias_train: epochs must be >= 1, got {config.epochs}")
    if config.batch_size < 1:
        raise ValueError(
            f"bias_train: batch_size must be >= 1, got {config.batch_size}")
    if model.n_chars != lexicon.n_chars:
        raise ValueError(
            f"bias_train: model covers {model.n_chars} chars, lexicon has "
            f"{lexicon.n_chars}")
    spaces = ("cif", "dec") if config.space == "joint" else (config.space,)
    for space in spaces:
        for unit in ("char", "pinyin"):
            if (unit, space) not in books:
                raise ValueError(f"bias_train: missing codebook ({unit}, {space})")
    width = books[("char", spaces[0])].dim
    if any(books[("char", s)].dim != width for s in spaces):
        raise ValueError("bias_train: codebook spaces have different dims")
    if model.query_dim != width:
        raise ValueError(
            f"bias_train: model query_dim {model.query_dim} != embedding "
            f"width {width} for space {config.space}")

    by_uid = {ex.uid: ex for ex in extracts}
    train_pairs = [(utt, by_uid[utt.uid]) for utt in paired if utt.uid in by_uid]
    if not train_pairs:
        raise ValueError("bias_train: no paired utterances with extracts")
    unpaired = list(unpaired)
    if config.ta_mode == "full" and not unpaired:
        raise ValueError("bias_train: full TA needs unpaired text")

    n_batches = math.ceil(len(train_pairs) / config.batch_size)
    total_steps = config.epochs * n_batches
    warmup = max(1, math.ceil(config.warmup_frac * total_steps))
    rows: list[dict] = []
    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, epoch]).permutation(
            len(train_pairs))
        up_order = None
        if config.ta_mode == "full":
            up_order = np.random.default_rng(
                [config.seed, epoch, 1]).permutation(len(unpaired))
        for b in range(n_batches):
            batch = [train_pairs[i] for i in
                     order[b * config.batch_size:(b + 1) * config.batch_size]]
            up_batch = []
            if config.ta_mode == "full":
                start = (b * config.batch_size) % len(unpaired)
                idx = [up_order[(start + j) % len(unpaired)]
                       for j in range(min(config.batch_size, len(unpaired)))]
                up_batch = [unpaired[i] for i in idx]
            rng = np.random.default_rng([config.seed, epoch, 2, b])
            loss, terms = batch_bias_loss(model, (batch, up_batch), books,
                                          lexicon, config, rng)
            step = len(rows)
            if not np.isfinite(loss.data):
                raise FloatingPointError(
                    f"bias_train: loss diverged at step {step}")
            zero_grad(model.params)
            loss.backward()
            lr_t = config.lr * min(1.0, (step + 1) / warmup)
            sgd_step(model.params, lr_t)
            rows.append({"step": step, **terms})
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=[
                "step", "L_total", "L_ls_speech", "L_ls_ptext",
                "L_ls_uptext", "L_gap"])
            writer.writeheader()
            writer.writerows(rows)
    return rows
