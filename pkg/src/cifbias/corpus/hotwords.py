"""Hotword phrase lists and n-gram extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HotwordList:
    """Unique char phrases of length 2..6; the no-bias sentinel is implicit
    at index len(phrases) everywhere downstream."""

    phrases: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(set(self.phrases)) != len(self.phrases):
            raise ValueError("hotword phrases must be unique")
        for p in self.phrases:
            if not 2 <= len(p) <= 6:
                raise ValueError(f"hotword length {len(p)} outside [2, 6]")

    def __len__(self) -> int:
        return len(self.phrases)

    def __iter__(self):
        return iter(self.phrases)

    def __getitem__(self, i):
        return self.phrases[i]


def ngram_hotwords(chars, n_min: int = 2, n_max: int = 6, seed=0,
                   max_count: int | None = None) -> HotwordList:
    """Deduplicated contiguous n-grams of `chars`, n in [n_min, n_max],
    enumerated by ascending n then position; a seeded uniform subsample
    of size max_count when there are more."""
    if n_min < 1 or n_max < n_min:
        raise ValueError(f"bad n-gram range [{n_min}, {n_max}]")
    seq = tuple(int(c) for c in chars)
    grams: list[tuple[int, ...]] = []
    seen = set()
    for n in range(n_min, n_max + 1):
        for i in range(len(seq) - n + 1):
            g = seq[i:i + n]
            if g not in seen:
                seen.add(g)
                grams.append(g)
    if max_count is not None and len(grams) > max_count:
        rng = np.random.default_rng(seed)
        keep = sorted(rng.choice(len(grams), size=max_count, replace=False))
        grams = [grams[i] for i in keep]
    return HotwordList(tuple(grams))


def find_occurrences(chars, phrase) -> tuple[tuple[int, int], ...]:
    """Every [start, end) span where phrase occurs in chars, overlaps included."""
    seq = tuple(int(c) for c in chars)
    p = tuple(int(c) for c in phrase)
    if not p:
        return ()
    return tuple((i, i + len(p)) for i in range(len(seq) - len(p) + 1)
                 if seq[i:i + len(p)] == p)
