"""Corpus generation: seeded bigram sentences over syllables, a contextual
char-realization rule that keeps homophone choice predictable from acoustics,
rare entity injection, and frame rendering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cifbias.corpus.hotwords import HotwordList
from cifbias.corpus.lexicon import Lexicon, g2p

N_CONTEXT_CLASSES = 4


@dataclass
class Utterance:
    uid: int
    chars: tuple[int, ...]
    syllables: tuple[int, ...]
    paired: bool
    frames: np.ndarray | None = None


@dataclass(frozen=True)
class RareEntitySpec:
    """How many rare multi-char entities to create and how often they are
    spliced into each split. Paired data never receives one."""

    count: int = 12
    min_len: int = 2
    max_len: int = 4
    unpaired_rate: float = 0.08
    test_rate: float = 0.30


@dataclass
class CorpusSplits:
    paired: list[Utterance]
    unpaired: list[Utterance]
    test: list[Utterance]
    hotwords: HotwordList


def render_frames(chars, lexicon: Lexicon, noise_sigma: float, seed,
                  frames_per_token: tuple[int, int] = (2, 5)) -> np.ndarray:
    """Each token emits d in {2..5} frames of its syllable prototype plus
    iid Gaussian noise, concatenated into a (T, F) float64 matrix."""
    seq = tuple(int(c) for c in chars)
    if not seq:
        raise ValueError("cannot render an empty utterance")
    rng = np.random.default_rng(seed)
    lo, hi = frames_per_token
    durations = rng.integers(lo, hi + 1, size=len(seq))
    rows = []
    for c, d in zip(seq, durations):
        proto = lexicon.prototypes[g2p(c, lexicon)]
        noise = rng.normal(size=(d, lexicon.frame_dim)) * noise_sigma
        rows.append(proto[None, :] + noise)
    return np.concatenate(rows, axis=0)


def _char_rule_table(rng: np.random.Generator, lexicon: Lexicon) -> np.ndarray:
    """(N_CONTEXT_CLASSES, V_s) table mapping a coarse previous-syllable
    class and the current syllable to one char of that syllable's homophone
    set. The dominant char takes two classes, up to two minority chars one
    each, and any further homophones are never emitted by the rule."""
    vs = lexicon.n_syllables
    by_syll: list[list[int]] = [[] for _ in range(vs)]
    for c, s in enumerate(lexicon.g2p_table):
        by_syll[s].append(c)
    table = np.empty((N_CONTEXT_CLASSES, vs), dtype=np.int64)
    for s in range(vs):
        hs = sorted(by_syll[s])
        dom = hs[0]
        picks = [dom, dom, hs[1] if len(hs) > 1 else dom, hs[2] if len(hs) > 2 else dom]
        order = rng.permutation(N_CONTEXT_CLASSES)
        for cls, p in zip(order, picks):
            table[cls, s] = p
    return table


def _sample_syllables(rng: np.random.Generator, start_p: np.ndarray,
                      trans: np.ndarray, length: int) -> list[int]:
    out = [int(rng.choice(len(start_p), p=start_p))]
    while len(out) < length:
        out.append(int(rng.choice(trans.shape[1], p=trans[out[-1]])))
    return out


def _realize_chars(syllables, table: np.ndarray, entity_span=None, entity=None):
    """Apply the context rule per position; entity positions keep their own
    chars and everything else follows the rule given the true left context."""
    chars = []
    prev = -1
    for j, s in enumerate(syllables):
        if entity_span is not None and entity_span[0] <= j < entity_span[1]:
            c = entity[j - entity_span[0]]
        else:
            cls = prev % N_CONTEXT_CLASSES if prev >= 0 else 0
            c = int(table[cls, s])
        chars.append(int(c))
        prev = s
    return tuple(chars)


def _make_entities(rng: np.random.Generator, lexicon: Lexicon,
                   spec: RareEntitySpec, table: np.ndarray) -> list[tuple[int, ...]]:
    """Entities are sequences of minority homophones where every char after
    the first differs from what the context rule would emit in that slot,
    so no entity can arise in rule-generated text. A couple additionally
    carry chars the rule never emits at all, which later exercises the
    syllable-book fallback."""
    minority_by_syll: list[list[int]] = []
    never: list[int] = []
    for s in range(lexicon.n_syllables):
        hs = sorted(c for c in range(lexicon.n_chars) if lexicon.g2p_table[c] == s)
        emitted = set(int(c) for c in table[:, s])
        minority_by_syll.append([c for c in hs[1:] if c in emitted])
        never.extend(c for c in hs[1:] if c not in emitted)
    candidates = [s for s in range(lexicon.n_syllables) if minority_by_syll[s]]
    if not candidates:
        raise ValueError("lexicon has no minority homophones to build entities from")

    entities: list[tuple[int, ...]] = []
    seen = set()
    while len(entities) < spec.count:
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        chars: list[int] = []
        sylls: list[int] = []
        while len(chars) < length:
            s = int(rng.choice(candidates))
            if not chars:
                c = int(rng.choice(minority_by_syll[s]))
            else:
                cls = sylls[-1] % N_CONTEXT_CLASSES
                opts = [c for c in minority_by_syll[s] if c != int(table[cls, s])]
                if not opts:
                    continue
                c = int(rng.choice(opts))
            chars.append(c)
            sylls.append(s)
        if len(entities) < 2 and never:
            chars[-1] = int(rng.choice(never))
        tup = tuple(chars)
        if tup not in seen:
            seen.add(tup)
            entities.append(tup)
    return entities


def gen_corpus(lexicon: Lexicon, seed, n_paired: int = 2000,
               n_unpaired: int = 20000, entity_spec: RareEntitySpec | None = None,
               n_test: int = 500, sentence_len: tuple[int, int] = (5, 20),
               noise_sigma: float = 0.3) -> CorpusSplits:
    """Paired (with frames), unpaired (text only), and test (with frames)
    splits from one seeded bigram model, plus the rare-entity hotword list.

    Entities are spliced into unpaired and test sentences but never into
    paired ones, and every entity occurs in at least one test utterance.
    """
    if lexicon.n_chars == 0 or lexicon.n_syllables == 0:
        raise ValueError("empty lexicon")
    if n_unpaired < n_paired:
        raise ValueError(f"n_unpaired {n_unpaired} < n_paired {n_paired}")
    spec = entity_spec or RareEntitySpec()
    rng = np.random.default_rng(seed)

    vs = lexicon.n_syllables
    ranks = rng.permutation(vs)
    unigram = 1.0 / (ranks + 2.0)
    unigram /= unigram.sum()
    trans = 0.55 * unigram[None, :] + 0.45 * rng.dirichlet(np.full(vs, 0.3), size=vs)
    trans /= trans.sum(axis=1, keepdims=True)

    table = _char_rule_table(rng, lexicon)
    entities = _make_entities(rng, lexicon, spec, table)
    lo, hi = sentence_len

    def build(uid: int, split_rng: np.random.Generator, entity: tuple[int, ...] | None,
              paired: bool, with_frames: bool) -> Utterance:
        length = int(split_rng.integers(lo, hi + 1))
        sylls = _sample_syllables(split_rng, unigram, trans, length)
        span = None
        if entity is not None:
            pos = int(split_rng.integers(0, length + 1))
            sylls = sylls[:pos] + list(g2p(entity, lexicon)) + sylls[pos:]
            span = (pos, pos + len(entity))
        chars = _realize_chars(sylls, table, span, entity)
        frames = None
        if with_frames:
            frames = render_frames(chars, lexicon, noise_sigma, [int(seed), uid])
        return Utterance(uid, chars, tuple(int(s) for s in sylls), paired, frames)

    paired_rng = np.random.default_rng([int(seed), 1])
    unpaired_rng = np.random.default_rng([int(seed), 2])
    test_rng = np.random.default_rng([int(seed), 3])

    paired = [build(i, paired_rng, None, True, True) for i in range(n_paired)]

    unpaired = []
    for i in range(n_unpaired):
        ent = None
        if unpaired_rng.random() < spec.unpaired_rate:
            ent = entities[int(unpaired_rng.integers(0, len(entities)))]
        unpaired.append(build(n_paired + i, unpaired_rng, ent, False, False))

    inject = test_rng.random(n_test) < spec.test_rate
    # guarantee coverage: the first len(entities) injections cycle all entities
    if inject.sum() < len(entities):
        inject[:len(entities)] = True
    test = []
    k = 0
    for i in range(n_test):
        ent = None
        if inject[i]:
            ent = entities[k % len(entities)] if k < len(entities) \
                else entities[int(test_rng.integers(0, len(entities)))]
            k += 1
        test.append(build(n_paired + n_unpaired + i, test_rng, ent, True, True))

    return CorpusSplits(paired, unpaired, test, HotwordList(tuple(entities)))
