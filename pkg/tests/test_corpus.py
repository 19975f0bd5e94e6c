"""Synthetic language tests: lexicon structure, corpus construction, frame
rendering, tokenization, n-gram hotwords, and the corpus file formats."""

import numpy as np
import pytest

from cifbias.corpus import (
    HotwordList,
    Lexicon,
    RareEntitySpec,
    attach_frames,
    find_occurrences,
    g2p,
    gen_corpus,
    gen_lexicon,
    homophones,
    load_frames,
    load_hotwords,
    load_lexicon,
    load_metadata,
    ngram_hotwords,
    render_frames,
    save_frames,
    save_hotwords,
    save_lexicon,
    save_metadata,
    tokenize,
)


@pytest.fixture(scope="module")
def lex():
    return gen_lexicon(1)


@pytest.fixture(scope="module")
def small_splits(lex):
    return gen_corpus(lex, 5, n_paired=120, n_unpaired=1200, n_test=80)


class TestLexicon:
    def test_pigeonhole_forces_homophones(self, lex):
        """200 chars over 50 syllables leave at least one syllable with
        two or more chars."""
        assert any(len(homophones(lex, c)) >= 2 for c in range(lex.n_chars))

    def test_g2p_total_and_surjective(self, lex):
        assert len(lex.g2p_table) == lex.n_chars
        assert set(lex.g2p_table) == set(range(lex.n_syllables))

    def test_deterministic(self):
        a, b = gen_lexicon(1), gen_lexicon(1)
        assert a.g2p_table == b.g2p_table and a.words == b.words
        np.testing.assert_array_equal(a.prototypes, b.prototypes)

    def test_more_syllables_than_chars_rejected(self):
        with pytest.raises(ValueError):
            gen_lexicon(1, n_chars=10, n_syllables=50)

    def test_prototypes_pairwise_distinct(self, lex):
        d = np.linalg.norm(lex.prototypes[:, None] - lex.prototypes[None, :], axis=2)
        np.fill_diagonal(d, np.inf)
        assert d.min() > 1e-6


class TestG2p:
    def test_single_char(self, lex):
        assert g2p(0, lex) == lex.g2p_table[0]

    def test_word_order_preserved(self, lex):
        word = (3, 1, 4)
        assert g2p(word, lex) == tuple(lex.g2p_table[c] for c in word)

    def test_unknown_char_raises(self, lex):
        with pytest.raises(ValueError, match="unknown"):
            g2p(lex.n_chars, lex)


class TestTokenize:
    def test_known_word_emitted_whole(self, lex):
        word = next(w for w in lex.words if len(w) == 3)
        filler = (0, 1)
        segs = tokenize(filler + word + filler, lex)
        assert word in segs

    def test_no_known_words_all_singletons(self):
        bare = Lexicon(5, 5, 2, (0, 1, 2, 3, 4), np.eye(5)[:, :2], ())
        assert tokenize((0, 3, 2), bare) == [(0,), (3,), (2,)]

    def test_empty_input(self, lex):
        assert tokenize((), lex) == []

    def test_round_trip_random(self, lex):
        """Concatenating segments reproduces the input for random strings."""
        rng = np.random.default_rng(11)
        for _ in range(50):
            seq = tuple(int(c) for c in rng.integers(0, lex.n_chars, size=rng.integers(0, 30)))
            flat = tuple(c for seg in tokenize(seq, lex) for c in seg)
            assert flat == seq


class TestRenderFrames:
    def test_zero_noise_gives_exact_prototypes(self, lex):
        chars = (0, 7, 3)
        frames = render_frames(chars, lex, 0.0, seed=2)
        t = 0
        for c in chars:
            proto = lex.prototypes[g2p(c, lex)]
            while t < frames.shape[0] and np.array_equal(frames[t], proto):
                t += 1
        assert t == frames.shape[0]

    def test_duration_bounds(self, lex):
        for seed in range(10):
            frames = render_frames(tuple(range(10)), lex, 0.1, seed=seed)
            assert 20 <= frames.shape[0] <= 50
            assert frames.shape[1] == lex.frame_dim

    def test_same_seed_identical(self, lex):
        a = render_frames((1, 2, 3), lex, 0.5, seed=9)
        b = render_frames((1, 2, 3), lex, 0.5, seed=9)
        np.testing.assert_array_equal(a, b)

    def test_empty_rejected(self, lex):
        with pytest.raises(ValueError, match="empty"):
            render_frames((), lex, 0.1, seed=0)


class TestGenCorpus:
    def test_counts_exact(self, small_splits):
        assert len(small_splits.paired) == 120
        assert len(small_splits.unpaired) == 1200
        assert len(small_splits.test) == 80

    def test_syllables_are_g2p_image(self, lex, small_splits):
        for u in small_splits.paired[:30] + small_splits.unpaired[:30] + small_splits.test[:30]:
            assert u.syllables == g2p(u.chars, lex)

    def test_paired_have_frames_unpaired_do_not(self, small_splits):
        assert all(u.frames is not None for u in small_splits.paired)
        assert all(u.frames is not None for u in small_splits.test)
        assert all(u.frames is None for u in small_splits.unpaired)

    def test_sentence_lengths_in_range(self, small_splits):
        # entity splices may extend a sentence by at most max_len tokens
        for u in small_splits.paired:
            assert 5 <= len(u.chars) <= 20
        for u in small_splits.test:
            assert 5 <= len(u.chars) <= 24

    def test_every_test_hotword_occurs(self, small_splits):
        for e in small_splits.hotwords:
            assert any(find_occurrences(u.chars, e) for u in small_splits.test)

    def test_entities_rare_in_paired(self, small_splits):
        """Entities are built to contradict the char realization rule, so
        they never occur in paired text at all."""
        hits = sum(1 for u in small_splits.paired
                   if any(find_occurrences(u.chars, e) for e in small_splits.hotwords))
        assert hits / len(small_splits.paired) < 0.001

    def test_entities_present_in_unpaired(self, small_splits):
        hits = sum(1 for u in small_splits.unpaired
                   if any(find_occurrences(u.chars, e) for e in small_splits.hotwords))
        assert hits > 0

    def test_ids_globally_unique(self, small_splits):
        ids = [u.uid for u in small_splits.paired + small_splits.unpaired + small_splits.test]
        assert len(set(ids)) == len(ids)

    def test_unpaired_smaller_than_paired_rejected(self, lex):
        with pytest.raises(ValueError):
            gen_corpus(lex, 1, n_paired=100, n_unpaired=50)

    def test_empty_lexicon_rejected(self):
        empty = Lexicon(0, 0, 4, (), np.zeros((0, 4)), ())
        with pytest.raises(ValueError, match="empty"):
            gen_corpus(empty, 1, n_paired=1, n_unpaired=1)

    def test_determinism_byte_identical(self, lex, tmp_path):
        """Same seed serializes to byte-identical corpus files."""
        files = []
        for tag in ("a", "b"):
            s = gen_corpus(lex, 3, n_paired=40, n_unpaired=400, n_test=30)
            meta = tmp_path / f"{tag}.jsonl"
            frames = tmp_path / f"{tag}.cfbf"
            hot = tmp_path / f"{tag}.txt"
            save_metadata(meta, s.paired + s.unpaired + s.test)
            save_frames(frames, s.paired + s.test)
            save_hotwords(hot, s.hotwords)
            files.append((meta.read_bytes(), frames.read_bytes(), hot.read_bytes()))
        assert files[0] == files[1]


class TestNgramHotwords:
    def test_enumeration(self):
        got = ngram_hotwords([7, 8, 9], n_min=2, n_max=3)
        assert set(got) == {(7, 8), (8, 9), (7, 8, 9)}

    def test_single_token_empty(self):
        assert len(ngram_hotwords([5])) == 0

    def test_dedup(self):
        got = ngram_hotwords([7, 8, 7, 8], n_min=2, n_max=2)
        assert sorted(got) == [(7, 8), (8, 7)]

    def test_max_count_seeded_sample(self):
        full = ngram_hotwords(list(range(12)))
        a = ngram_hotwords(list(range(12)), seed=4, max_count=5)
        b = ngram_hotwords(list(range(12)), seed=4, max_count=5)
        assert a.phrases == b.phrases and len(a) == 5
        assert set(a).issubset(set(full))

    def test_output_is_contiguous_substring(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            seq = [int(c) for c in rng.integers(0, 6, size=rng.integers(2, 15))]
            for p in ngram_hotwords(seq):
                assert find_occurrences(seq, p)
                assert 2 <= len(p) <= 6

    def test_bad_range_rejected(self):
        with pytest.raises(ValueError):
            ngram_hotwords([1, 2, 3], n_min=3, n_max=2)


class TestHotwordList:
    def test_duplicates_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            HotwordList(((1, 2), (1, 2)))

    def test_length_bounds_enforced(self):
        with pytest.raises(ValueError, match="length"):
            HotwordList(((1,),))
        with pytest.raises(ValueError, match="length"):
            HotwordList((tuple(range(7)),))

    def test_overlapping_occurrences_found(self):
        assert find_occurrences([1, 1, 1, 1], (1, 1)) == ((0, 2), (1, 3), (2, 4))


class TestCorpusIO:
    def test_metadata_round_trip(self, small_splits, tmp_path):
        path = tmp_path / "meta.jsonl"
        utts = small_splits.paired[:10] + small_splits.unpaired[:10]
        save_metadata(path, utts)
        loaded = load_metadata(path)
        for a, b in zip(utts, loaded):
            assert (a.uid, a.chars, a.syllables, a.paired) == (b.uid, b.chars, b.syllables, b.paired)

    def test_frames_round_trip_f32(self, small_splits, tmp_path):
        path = tmp_path / "frames.cfbf"
        utts = small_splits.paired[:5]
        save_frames(path, utts)
        loaded = load_frames(path)
        for u in utts:
            np.testing.assert_array_equal(loaded[u.uid], u.frames.astype(np.float32).astype(np.float64))

    def test_attach_frames(self, small_splits, tmp_path):
        import dataclasses
        path = tmp_path / "frames.cfbf"
        save_frames(path, small_splits.test[:5])
        fresh = [dataclasses.replace(u, frames=None) for u in small_splits.test[:5]]
        attach_frames(fresh, load_frames(path))
        assert all(u.frames is not None for u in fresh)

    def test_frames_bad_magic(self, tmp_path):
        p = tmp_path / "bad.cfbf"
        p.write_bytes(b"XXXX\x00\x00\x00\x00")
        with pytest.raises(ValueError, match="CFBF"):
            load_frames(p)

    def test_lexicon_round_trip(self, lex, tmp_path):
        path = tmp_path / "lexicon.json"
        save_lexicon(path, lex)
        back = load_lexicon(path)
        assert back.g2p_table == lex.g2p_table and back.words == lex.words
        np.testing.assert_array_equal(back.prototypes, lex.prototypes)

    def test_hotwords_round_trip(self, small_splits, tmp_path):
        path = tmp_path / "hot.txt"
        save_hotwords(path, small_splits.hotwords)
        assert load_hotwords(path).phrases == small_splits.hotwords.phrases
