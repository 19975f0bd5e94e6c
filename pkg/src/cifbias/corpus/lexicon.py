"""Lexicon: characters, syllables, the grapheme-to-syllable table, acoustic
prototypes, and the multi-char word list used by the greedy tokenizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class Lexicon:
    n_chars: int
    n_syllables: int
    frame_dim: int
    g2p_table: tuple[int, ...]
    prototypes: np.ndarray
    words: tuple[tuple[int, ...], ...]
    _word_set: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.g2p_table) != self.n_chars:
            raise ValueError("g2p table must cover every char")
        if set(self.g2p_table) != set(range(self.n_syllables)):
            raise ValueError("g2p table must be surjective onto syllables")
        self._word_set = frozenset(self.words)


def gen_lexicon(seed, n_chars: int = 200, n_syllables: int = 50,
                frame_dim: int = 16, n_words: int = 40) -> Lexicon:
    """Seeded lexicon with surjective g2p and pairwise-distinct prototypes.

    Chars 0..n_syllables-1 map to their own syllable (the dominant char of
    each homophone set); the remaining chars land on random syllables, so
    n_chars > n_syllables forces homophones by pigeonhole.
    """
    if n_syllables < 2:
        raise ValueError(f"need at least 2 syllables, got {n_syllables}")
    if n_chars < n_syllables:
        raise ValueError(f"n_chars {n_chars} < n_syllables {n_syllables}")
    rng = np.random.default_rng(seed)
    table = np.empty(n_chars, dtype=np.int64)
    table[:n_syllables] = np.arange(n_syllables)
    table[n_syllables:] = rng.integers(0, n_syllables, size=n_chars - n_syllables)

    prototypes = rng.normal(size=(n_syllables, frame_dim))
    while True:
        diffs = prototypes[:, None, :] - prototypes[None, :, :]
        d = np.sqrt((diffs ** 2).sum(axis=2))
        np.fill_diagonal(d, np.inf)
        if d.min() > 1e-6:
            break
        prototypes = rng.normal(size=(n_syllables, frame_dim))

    words: list[tuple[int, ...]] = []
    seen = set()
    while len(words) < n_words:
        length = int(rng.integers(2, 5))
        w = tuple(int(c) for c in rng.integers(0, n_chars, size=length))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return Lexicon(n_chars, n_syllables, frame_dim, tuple(int(s) for s in table),
                   prototypes, tuple(words))


def g2p(chars, lexicon: Lexicon):
    """Per-char syllable lookup; a single char maps to a single syllable,
    a sequence to a syllable tuple in order."""
    if isinstance(chars, (int, np.integer)):
        c = int(chars)
        if not 0 <= c < lexicon.n_chars:
            raise ValueError(f"unknown char {c}")
        return lexicon.g2p_table[c]
    out = []
    for c in chars:
        c = int(c)
        if not 0 <= c < lexicon.n_chars:
            raise ValueError(f"unknown char {c}")
        out.append(lexicon.g2p_table[c])
    return tuple(out)


def homophones(lexicon: Lexicon, char: int) -> tuple[int, ...]:
    """All chars sharing the syllable of `char`, ascending, including it."""
    s = g2p(char, lexicon)
    return tuple(c for c in range(lexicon.n_chars) if lexicon.g2p_table[c] == s)


def tokenize(chars, lexicon: Lexicon) -> list[tuple[int, ...]]:
    """Greedy longest-match segmentation against the lexicon word list;
    unmatched chars become singleton segments. Segments concatenate back
    to the input."""
    seq = tuple(int(c) for c in chars)
    out: list[tuple[int, ...]] = []
    i = 0
    n = len(seq)
    while i < n:
        seg = None
        for length in (4, 3, 2):
            cand = seq[i:i + length]
            if len(cand) == length and cand in lexicon._word_set:
                seg = cand
                break
        if seg is None:
            seg = (seq[i],)
        out.append(seg)
        i += len(seg)
    return out
