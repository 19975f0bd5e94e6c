"""Character error rate scoring, overall and restricted to hotword spans."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cifbias.corpus.hotwords import HotwordList, find_occurrences


@dataclass(frozen=True)
class EvalReport:
    """Micro-averaged scores for one system on one split."""

    system: str
    split: str
    cer: float
    bcer: float | None
    subs: int
    dels: int
    ins: int
    ref_len: int


def align(reference, hypothesis) -> tuple[tuple[str, int, int], ...]:
    """Levenshtein alignment path as (op, ref_index, hyp_index) steps.

    Ops are "match", "sub", "del" (ref char consumed without a hyp char,
    hyp_index is the position the path had reached) and "ins" (hyp char
    consumed without a ref char, ref_index likewise). Ties prefer the
    diagonal, then insertion, then deletion.
    """
    ref = tuple(int(c) for c in reference)
    hyp = tuple(int(c) for c in hypothesis)
    nr, nh = len(ref), len(hyp)
    d = np.zeros((nr + 1, nh + 1), dtype=np.int64)
    d[:, 0] = np.arange(nr + 1)
    d[0, :] = np.arange(nh + 1)
    for i in range(1, nr + 1):
        row = d[i - 1]
        cost = np.where(np.asarray(hyp) != ref[i - 1], 1, 0) if nh else row[:0]
        for j in range(1, nh + 1):
            d[i, j] = min(row[j - 1] + cost[j - 1], d[i, j - 1] + 1, row[j] + 1)
    path = []
    i, j = nr, nh
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            op = "match" if ref[i - 1] == hyp[j - 1] else "sub"
            i -= 1
            j -= 1
            path.append((op, i, j))
        elif j > 0 and d[i, j] == d[i, j - 1] + 1:
            j -= 1
            path.append(("ins", i, j))
        else:
            i -= 1
            path.append(("del", i, j))
    path.reverse()
    return tuple(path)


def cer(reference, hypothesis) -> tuple[float, int, int, int]:
    """(rate, substitutions, deletions, insertions) with rate = (S+D+I)/len(ref)."""
    ref = tuple(reference)
    if not ref:
        raise ValueError("empty reference")
    s = d = ins = 0
    for op, _, _ in align(ref, hypothesis):
        if op == "sub":
            s += 1
        elif op == "del":
            d += 1
        elif op == "ins":
            ins += 1
    return (s + d + ins) / len(ref), s, d, ins


def span_union(reference, hotwords: HotwordList) -> tuple[tuple[int, int], ...]:
    """Maximal disjoint [start, end) intervals covering every hotword
    occurrence in the reference."""
    covered = np.zeros(len(tuple(reference)), dtype=bool)
    for phrase in hotwords:
        for a, b in find_occurrences(reference, phrase):
            covered[a:b] = True
    spans = []
    start = None
    for i, c in enumerate(covered):
        if c and start is None:
            start = i
        elif not c and start is not None:
            spans.append((start, i))
            start = None
    if start is not None:
        spans.append((start, len(covered)))
    return tuple(spans)


def bcer_counts(reference, hypothesis, hotwords: HotwordList) -> tuple[int, int] | None:
    """(errors, span_ref_chars) for the span-restricted rate, or None when the
    reference contains no hotword occurrence.

    Substitutions and deletions count when the consumed reference position
    lies in a span; an insertion counts only strictly inside a span's
    alignment region, i.e. after the span's first reference char has been
    consumed and before its last one is.
    """
    spans = span_union(reference, hotwords)
    if not spans:
        return None
    denom = sum(b - a for a, b in spans)
    by_pos = {}
    for k, (a, b) in enumerate(spans):
        for i in range(a, b):
            by_pos[i] = k
    consumed = [0] * len(spans)
    sizes = [b - a for a, b in spans]
    errors = 0
    for op, i, _ in align(reference, hypothesis):
        if op in ("match", "sub", "del"):
            k = by_pos.get(i)
            if k is not None:
                if op != "match":
                    errors += 1
                consumed[k] += 1
        else:
            k = by_pos.get(i)
            if k is not None and 0 < consumed[k] < sizes[k]:
                errors += 1
    return errors, denom


def bcer(reference, hypothesis, hotwords: HotwordList) -> float | None:
    """Span-restricted error rate, or None when no hotword occurs in the
    reference (such utterances are excluded from aggregation)."""
    counts = bcer_counts(reference, hypothesis, hotwords)
    if counts is None:
        return None
    errors, denom = counts
    return errors / denom


def score_split(system: str, split: str, references, hypotheses,
                hotwords: HotwordList) -> EvalReport:
    """Micro-averaged CER and B-CER over a split: totals are summed across
    utterances before dividing, and utterances without hotword spans are
    excluded from the B-CER totals only."""
    if len(references) != len(hypotheses):
        raise ValueError("reference and hypothesis counts differ")
    if not references:
        raise ValueError("empty split")
    tot_s = tot_d = tot_i = tot_ref = 0
    b_err = b_ref = 0
    for ref, hyp in zip(references, hypotheses):
        _, s, d, ins = cer(ref, hyp)
        tot_s += s
        tot_d += d
        tot_i += ins
        tot_ref += len(tuple(ref))
        counts = bcer_counts(ref, hyp, hotwords)
        if counts is not None:
            b_err += counts[0]
            b_ref += counts[1]
    return EvalReport(
        system=system,
        split=split,
        cer=(tot_s + tot_d + tot_i) / tot_ref,
        bcer=(b_err / b_ref) if b_ref else None,
        subs=tot_s,
        dels=tot_d,
        ins=tot_i,
        ref_len=tot_ref,
    )
