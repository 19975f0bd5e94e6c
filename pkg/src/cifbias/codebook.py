"""Confidence-weighted embedding codebooks over the frozen latent spaces.

Each codebook maps a token (a character, or its syllable under the
grapheme-to-phoneme table) to the weighted mean of every latent vector
extracted at positions carrying that token, weighted by the utterance
confidence w.  A diagonal variance accumulated with the same weights
rides along so the Gaussian-resampling variation scheme has a spread to
draw from.  Text-only sentences turn into embedding sequences by looking
tokens up char-book first with a pinyin-book fallback, optionally passed
through one of three variation-adaptation schemes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from cifbias.corpus import g2p, homophones

__all__ = [
    "Codebook",
    "CodebookEntry",
    "build_codebook",
    "load_codebook",
    "lookup",
    "save_codebook",
    "va_transform",
]

UNITS = ("char", "pinyin")
SPACES = ("cif", "dec")
VA_SCHEMES = ("none", "I", "II", "III")


@dataclass(frozen=True)
class CodebookEntry:
    """Weighted first and second moments of one token's latent vectors."""

    mean: np.ndarray
    var: np.ndarray
    count: int
    wsum: float


@dataclass(frozen=True)
class Codebook:
    unit: str
    space: str
    dim: int
    entries: dict[int, CodebookEntry]

    def __contains__(self, token: int) -> bool:
        return int(token) in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def _check_unit_space(unit: str, space: str) -> None:
    if unit not in UNITS:
        raise ValueError(f"unknown codebook unit {unit!r}")
    if space not in SPACES:
        raise ValueError(f"unknown codebook space {space!r}")


def build_codebook(extracts, corpus, unit: str, space: str) -> Codebook:
    """Accumulate one codebook from aligned extraction results.

    mean(c) = sum_i w_i sum_j E_ij [u_ij = c] / sum_i w_i sum_j [u_ij = c]
    and var(c) is the identically weighted mean of squared deviations
    from mean(c), elementwise.  Tokens whose weight denominator is zero
    (never seen, or seen only in w = 0 utterances) are omitted.  With
    unit "pinyin" positions are keyed by the syllable of their char.
    """
    _check_unit_space(unit, space)
    extracts = list(extracts)
    if not extracts:
        raise ValueError("build_codebook: no extracts")
    by_uid = {}
    g2p = None
    for utt in corpus:
        by_uid[utt.uid] = utt
    if unit == "pinyin":
        g2p = _corpus_g2p(corpus)

    dim = None
    num: dict[int, np.ndarray] = {}
    den: dict[int, float] = {}
    cnt: dict[int, int] = {}
    samples: dict[int, list[tuple[float, np.ndarray]]] = {}
    for ex in extracts:
        if ex.uid not in by_uid:
            raise ValueError(f"build_codebook: extract {ex.uid} not in corpus")
        utt = by_uid[ex.uid]
        vecs = ex.s_cif if space == "cif" else ex.s_dec
        vecs = np.asarray(vecs, dtype=float)
        if len(utt.chars) != vecs.shape[0]:
            raise ValueError(
                f"build_codebook: extract {ex.uid} has {vecs.shape[0]} vectors "
                f"for {len(utt.chars)} reference tokens")
        if dim is None:
            dim = vecs.shape[1]
        elif vecs.shape[1] != dim:
            raise ValueError(
                f"build_codebook: extract {ex.uid} dimension {vecs.shape[1]} != {dim}")
        w = float(ex.w)
        if w == 0.0:
            continue
        for j, char in enumerate(utt.chars):
            key = int(char) if unit == "char" else int(g2p[int(char)])
            if key not in num:
                num[key] = np.zeros(dim)
                den[key] = 0.0
                cnt[key] = 0
                samples[key] = []
            num[key] += w * vecs[j]
            den[key] += w
            cnt[key] += 1
            samples[key].append((w, vecs[j]))
    entries: dict[int, CodebookEntry] = {}
    for key in sorted(num):
        if den[key] <= 0.0:
            continue
        mean = num[key] / den[key]
        sq = np.zeros(dim)
        for w, vec in samples[key]:
            dev = vec - mean
            sq += w * dev * dev
        var = np.maximum(sq / den[key], 0.0)
        entries[key] = CodebookEntry(mean=mean, var=var, count=cnt[key],
                                     wsum=den[key])
    return Codebook(unit=unit, space=space, dim=int(dim), entries=entries)


def _corpus_g2p(corpus):
    """Char to syllable map recovered from the utterances themselves, so
    codebook construction does not need the lexicon object."""
    mapping: dict[int, int] = {}
    for utt in corpus:
        for char, syll in zip(utt.chars, utt.syllables):
            char, syll = int(char), int(syll)
            prev = mapping.setdefault(char, syll)
            if prev != syll:
                raise ValueError(
                    f"build_codebook: char {char} carries syllable {syll} in "
                    f"utterance {utt.uid} but syllable {prev} elsewhere")
    return mapping


def _check_pair(cb_char: Codebook, cb_pinyin: Codebook) -> None:
    if cb_char.unit != "char" or cb_pinyin.unit != "pinyin":
        raise ValueError("lookup: books must be (char, pinyin) in that order")
    if cb_char.space != cb_pinyin.space:
        raise ValueError(
            f"lookup: codebook spaces differ ({cb_char.space} vs {cb_pinyin.space})")
    if cb_char.dim != cb_pinyin.dim:
        raise ValueError(
            f"lookup: codebook dimensions differ ({cb_char.dim} vs {cb_pinyin.dim})")


def _resolve(token: int, cb_char: Codebook, cb_pinyin: Codebook,
             lexicon) -> tuple[Codebook, int]:
    token = int(token)
    if token in cb_char.entries:
        return cb_char, token
    syll = int(g2p(token, lexicon))
    if syll in cb_pinyin.entries:
        return cb_pinyin, syll
    raise KeyError(
        f"lookup: token {token} absent from the char book and its syllable "
        f"{syll} absent from the pinyin book")


def lookup(token: int, context, cb_char: Codebook, cb_pinyin: Codebook,
           lexicon) -> np.ndarray:
    """Char-book mean when the token is covered, else the pinyin-book mean
    of the token's own syllable.

    The surrounding token sequence is accepted because the fallback is
    defined over a tokenized context; with single-syllable pinyin keys the
    containing word contributes nothing, so the context is not consulted.
    """
    del context
    _check_pair(cb_char, cb_pinyin)
    book, key = _resolve(token, cb_char, cb_pinyin, lexicon)
    return book.entries[key].mean.copy()


def va_transform(chars, scheme: str, ratio: float, lexicon,
                 cb_char: Codebook, cb_pinyin: Codebook, seed=0) -> np.ndarray:
    """Embed a char sequence through the codebooks under one variation
    scheme.

    none: char-first lookup per token.  I: pinyin book for every token.
    II: elementwise Gaussian sample around the looked-up entry, using its
    stored diagonal variance.  III: each char independently replaced with
    probability ``ratio`` by a uniformly drawn homophone (same syllable,
    different char; chars without homophones stay), then plain lookup.
    Draw order for II is one sample vector per position; for III one
    uniform per position, plus one integer draw at replaced positions.
    """
    if scheme not in VA_SCHEMES:
        raise ValueError(f"va_transform: unknown scheme {scheme!r}")
    if not 0.0 <= float(ratio) <= 1.0:
        raise ValueError(f"va_transform: ratio {ratio} outside [0, 1]")
    _check_pair(cb_char, cb_pinyin)
    chars = [int(c) for c in chars]
    rng = np.random.default_rng(seed)

    if scheme == "III":
        if float(ratio) > 0.0 and not any(
                len(homophones(lexicon, c)) > 1 for c in range(lexicon.n_chars)):
            raise ValueError(
                "va_transform: scheme III needs homophones and the lexicon "
                "has none")
        replaced = []
        for c in chars:
            alts = [x for x in homophones(lexicon, c) if x != c]
            if alts and rng.random() < float(ratio):
                c = alts[int(rng.integers(len(alts)))]
            replaced.append(c)
        chars = replaced

    rows = np.zeros((len(chars), cb_char.dim))
    for j, c in enumerate(chars):
        if scheme == "I":
            syll = int(g2p(c, lexicon))
            if syll not in cb_pinyin.entries:
                raise KeyError(
                    f"va_transform: syllable {syll} absent from the pinyin book")
            rows[j] = cb_pinyin.entries[syll].mean
        elif scheme == "II":
            book, key = _resolve(c, cb_char, cb_pinyin, lexicon)
            entry = book.entries[key]
            rows[j] = rng.normal(entry.mean, np.sqrt(entry.var))
        else:
            book, key = _resolve(c, cb_char, cb_pinyin, lexicon)
            rows[j] = book.entries[key].mean
    return rows


def save_codebook(path, codebook: Codebook) -> None:
    """JSON Lines: a header line, then one line per token ascending."""
    lines = [json.dumps({"unit": codebook.unit, "space": codebook.space,
                         "dim": codebook.dim})]
    for token in sorted(codebook.entries):
        e = codebook.entries[token]
        lines.append(json.dumps({
            "token": int(token), "count": int(e.count), "wsum": float(e.wsum),
            "mean": [float(x) for x in e.mean],
            "var": [float(x) for x in e.var]}))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_codebook(path) -> Codebook:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line]
    if not lines:
        raise ValueError(f"{path}: not a codebook file")
    header = json.loads(lines[0])
    if not isinstance(header, dict) or set(header) != {"unit", "space", "dim"}:
        raise ValueError(f"{path}: not a codebook file")
    _check_unit_space(header["unit"], header["space"])
    dim = int(header["dim"])
    entries: dict[int, CodebookEntry] = {}
    for line in lines[1:]:
        rec = json.loads(line)
        mean = np.asarray(rec["mean"], dtype=float)
        var = np.asarray(rec["var"], dtype=float)
        wsum = float(rec["wsum"])
        if mean.shape != (dim,) or var.shape != (dim,):
            raise ValueError(f"{path}: entry {rec['token']} has wrong dimension")
        if wsum <= 0.0 or (var < 0.0).any():
            raise ValueError(f"{path}: entry {rec['token']} violates invariants")
        entries[int(rec["token"])] = CodebookEntry(
            mean=mean, var=var, count=int(rec["count"]), wsum=wsum)
    return Codebook(unit=header["unit"], space=header["space"], dim=dim,
                    entries=entries)
