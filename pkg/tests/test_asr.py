"""Recognizer tests: integrate-and-fire behavior against a naive oracle,
gradients, forward invariants, training smoke runs, and embedding extraction."""

import dataclasses
import warnings

import numpy as np
import pytest

from cifbias.asr import (AsrModel, asr_forward, asr_train, batch_loss, cif_integrate,
                         confidence_index, extract_embeddings, load_extracts,
                         quantity_loss, save_extracts)
from cifbias.corpus import gen_corpus, gen_lexicon
from cifbias.numerics import GraphError, Tensor, constant, grad_check, sum_, zero_grad


def naive_cif(alphas, embeddings, beta=1.0, scale_to=None):
    """While-loop reference: accumulate weight, carve off fired pieces at
    each beta crossing, cap interior firings at scale_to-1 and close the
    final boundary at the last frame when scaling."""
    a = np.asarray(alphas, dtype=float).copy()
    e = np.asarray(embeddings, dtype=float)
    if scale_to is not None:
        a *= scale_to * beta / a.sum()
    rows = []
    cur = np.zeros(e.shape[1])
    acc = 0.0
    fired = 0
    cap = None if scale_to is None else scale_to - 1
    for t in range(len(a)):
        w = a[t]
        while (cap is None or fired < cap) and acc + w >= beta:
            take = beta - acc
            rows.append(cur + take * e[t])
            cur = np.zeros(e.shape[1])
            acc = 0.0
            fired += 1
            w -= take
        cur = cur + w * e[t]
        acc += w
    if scale_to is not None:
        rows.append(cur)
    return np.stack(rows) if rows else np.zeros((0, e.shape[1]))


def safe_alphas(rng, n, beta=1.0, scale_to=None, margin=1e-3):
    """Random weights resampled until every running sum stays clear of the
    firing thresholds, so finite differences never cross a kink."""
    while True:
        a = rng.uniform(0.05, 0.95, size=n)
        s = a * (scale_to * beta / a.sum()) if scale_to is not None else a
        cums = np.cumsum(s)
        if scale_to is not None:
            # the final boundary is pinned to the last frame by
            # construction, only interior crossings are kinks
            cums = cums[:-1]
        k = np.round(cums / beta)
        if np.all(np.abs(cums - k * beta) > margin):
            return a


@pytest.fixture(scope="module")
def tiny_corpus():
    lex = gen_lexicon(1, n_chars=12, n_syllables=5, frame_dim=6, n_words=4)
    return lex, gen_corpus(lex, 3, n_paired=24, n_unpaired=240, n_test=8,
                           sentence_len=(4, 7), noise_sigma=0.2)


@pytest.fixture(scope="module")
def tiny_model(tiny_corpus):
    lex, splits = tiny_corpus
    model = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=0)
    asr_train(model, splits.paired[:16], epochs=2, lr=1e-3, seed=0)
    return model


class TestCifHandTraces:
    def test_two_frames_one_firing(self):
        e = np.array([[1.0, 0.0], [0.0, 1.0]])
        n, out = cif_integrate(constant(np.array([0.6, 0.6])), constant(e))
        assert n == 1
        np.testing.assert_allclose(out.data, [[0.6, 0.4]], atol=1e-12)

    def test_exact_crossing_fires_on_the_frame(self):
        e = np.eye(2)
        n, out = cif_integrate(constant(np.array([1.0, 0.3])), constant(e))
        assert n == 1
        np.testing.assert_allclose(out.data, [[1.0, 0.0]], atol=1e-12)

    def test_scaled_three_frames_to_two_tokens(self):
        e = np.eye(3)
        alphas = constant(np.array([0.5, 0.5, 0.5]))
        n, out = cif_integrate(alphas, constant(e), scale_to=2)
        assert n == 2
        want = np.array([[2 / 3, 1 / 3, 0.0], [0.0, 1 / 3, 2 / 3]])
        np.testing.assert_allclose(out.data, want, atol=1e-12)

    def test_trailing_mass_discarded(self):
        e = np.eye(3)
        n, out = cif_integrate(constant(np.array([0.5, 0.5, 0.4])), constant(e))
        assert n == 1
        assert out.data.shape == (1, 3)

    def test_zero_weights_fire_nothing(self):
        n, out = cif_integrate(constant(np.zeros(4)), constant(np.ones((4, 3))))
        assert n == 0
        assert out.data.shape == (0, 3)

    def test_fired_weights_sum_to_beta(self):
        rng = np.random.default_rng(0)
        for beta in (1.0, 0.7):
            a = rng.uniform(0.1, 0.9, size=12)
            e = np.eye(12)
            n, out = cif_integrate(constant(a), constant(e), beta=beta)
            if n:
                np.testing.assert_allclose(out.data.sum(axis=1), np.full(n, beta),
                                           atol=1e-12)

    def test_scaled_mass_conservation(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(0.1, 0.9, size=10)
        e = np.eye(10)
        for n_ref in (2, 5, 7):
            n, out = cif_integrate(constant(a), constant(e), scale_to=n_ref)
            assert n == n_ref
            assert abs(out.data.sum() - n_ref * 1.0) < 1e-9


class TestCifOracle:
    def test_free_running_thousand_cases(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(1000):
            t = int(rng.integers(1, 21))
            d = int(rng.integers(1, 5))
            a = rng.uniform(0.0, 1.0, size=t)
            e = rng.normal(size=(t, d))
            n, out = cif_integrate(constant(a), constant(e))
            want = naive_cif(a, e)
            assert n == len(want)
            if n:
                worst = max(worst, float(np.abs(out.data - want).max()))
        assert worst <= 1e-9

    def test_scaled_thousand_cases(self):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            t = int(rng.integers(2, 21))
            d = int(rng.integers(1, 5))
            n_ref = int(rng.integers(1, t + 1))
            a = rng.uniform(0.05, 1.0, size=t)
            e = rng.normal(size=(t, d))
            n, out = cif_integrate(constant(a), constant(e), scale_to=n_ref)
            want = naive_cif(a, e, scale_to=n_ref)
            assert n == n_ref
            assert len(want) == n_ref
            np.testing.assert_allclose(out.data, want, atol=1e-9)


class TestCifGradients:
    def check(self, scale_to):
        rng = np.random.default_rng(9)
        for trial in range(6):
            t = 8
            a0 = safe_alphas(np.random.default_rng([9, trial]), t, scale_to=scale_to)
            e0 = rng.normal(size=(t, 3))
            g = rng.normal(size=(scale_to or naive_cif(a0, e0).shape[0], 3))
            if g.shape[0] == 0:
                continue

            def fn(params):
                n, out = cif_integrate(params["a"], params["e"], scale_to=scale_to)
                return sum_(out * constant(g))

            errs = grad_check(fn, {"a": a0, "e": e0})
            assert max(errs.values()) < 1e-6, (trial, errs)

    def test_free_running(self):
        self.check(scale_to=None)

    def test_scaled(self):
        self.check(scale_to=5)


class TestCifValidation:
    def test_beta_must_be_positive(self):
        with pytest.raises(ValueError, match="beta"):
            cif_integrate(constant(np.ones(2)), constant(np.eye(2)), beta=0.0)

    def test_alphas_range_checked(self):
        with pytest.raises(GraphError, match="weight"):
            cif_integrate(constant(np.array([1.5, 0.2])), constant(np.eye(2)))

    def test_length_mismatch(self):
        with pytest.raises(GraphError, match="does not match"):
            cif_integrate(constant(np.ones(3) * 0.5), constant(np.eye(2)))

    def test_scale_to_zero_rejected(self):
        with pytest.raises(ValueError, match="scale_to"):
            cif_integrate(constant(np.ones(2) * 0.5), constant(np.eye(2)), scale_to=0)

    def test_zero_mass_cannot_scale(self):
        with pytest.raises(GraphError, match="sum to zero"):
            cif_integrate(constant(np.zeros(3)), constant(np.eye(3)), scale_to=2)


class TestConfidence:
    def test_exact_match(self):
        assert confidence_index(10, 10) == 1.0

    def test_partial(self):
        assert confidence_index(8, 10) == pytest.approx(0.8)

    def test_clamped_at_zero(self):
        assert confidence_index(25, 10) == 0.0

    def test_symmetric_in_sign_of_error(self):
        assert confidence_index(12, 10) == pytest.approx(confidence_index(8, 10))

    def test_monotone_in_error(self):
        vals = [confidence_index(10 + k, 10) for k in range(0, 11)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError, match="n_ref"):
            confidence_index(3, 0)


class TestForward:
    def test_logit_shape_and_probs(self, tiny_corpus, tiny_model):
        _, splits = tiny_corpus
        u = splits.paired[0]
        fwd = asr_forward(tiny_model, u.frames, labels=u.chars)
        n = len(u.chars)
        assert fwd.logits.data.shape == (n, 12)
        assert fwd.probs.data.shape == (n, 12)
        np.testing.assert_allclose(fwd.probs.data.sum(axis=1), np.ones(n), atol=1e-12)

    def test_teacher_forcing_count(self, tiny_corpus, tiny_model):
        _, splits = tiny_corpus
        u = splits.paired[1]
        fwd = asr_forward(tiny_model, u.frames, labels=u.chars)
        assert fwd.n_fired == len(u.chars)
        assert len(fwd.hyp) == len(u.chars)

    def test_determinism(self, tiny_corpus, tiny_model):
        _, splits = tiny_corpus
        u = splits.paired[2]
        a = asr_forward(tiny_model, u.frames)
        b = asr_forward(tiny_model, u.frames)
        assert a.hyp == b.hyp
        np.testing.assert_array_equal(a.alphas.data, b.alphas.data)

    def test_empty_frames_rejected(self, tiny_model):
        with pytest.raises(ValueError, match="empty"):
            asr_forward(tiny_model, np.zeros((0, 6)))

    def test_quantity_loss_zero_at_reference_mass(self):
        alphas = constant(np.array([0.5, 0.5, 0.5, 0.5]))
        assert quantity_loss(sum_(alphas), 2).data == pytest.approx(0.0)
        assert quantity_loss(sum_(alphas), 3).data == pytest.approx(1.0)


class TestTraining:
    def test_fifty_steps_strictly_decrease(self, tiny_corpus):
        lex, splits = tiny_corpus
        model = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=1)
        curve = asr_train(model, splits.paired[:8], epochs=50, lr=5e-4,
                          batch_size=8, seed=0)
        assert len(curve) == 50
        drops = [a > b for a, b in zip(curve, curve[1:])]
        assert all(drops), f"non-decreasing at steps {[i for i, d in enumerate(drops) if not d]}"

    def test_final_loss_below_initial(self, tiny_corpus):
        _, splits = tiny_corpus
        model = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=2)
        curve = asr_train(model, splits.paired[:8], epochs=8, lr=1e-3, seed=0)
        assert curve[-1] < curve[0]

    def test_divergence_aborts(self, tiny_corpus):
        # the tape guards every forward, so a non-finite model state aborts
        # before the loss value is even formed
        _, splits = tiny_corpus
        model = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=3)
        model.params["dec.w2"].data[0, 0] = np.nan
        with pytest.raises(GraphError, match="non-finite"):
            asr_train(model, splits.paired[:8], epochs=1, lr=1e-3, seed=0)

    def test_training_is_seeded_deterministic(self, tiny_corpus):
        _, splits = tiny_corpus
        curves = []
        for _ in range(2):
            model = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=4)
            curves.append(asr_train(model, splits.paired[:12], epochs=3, lr=1e-3, seed=5))
        np.testing.assert_array_equal(curves[0], curves[1])

    def test_checkpoint_round_trip(self, tiny_corpus, tmp_path):
        _, splits = tiny_corpus
        model = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=5)
        asr_train(model, splits.paired[:12], epochs=2, lr=1e-3, seed=0)
        path = tmp_path / "asr.npz"
        model.save(path)
        twin_a = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=9)
        twin_a.load(path)
        twin_b = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=10)
        twin_b.load(path)
        curve_a = asr_train(twin_a, splits.paired[:12], epochs=2, lr=1e-3, seed=1)
        curve_b = asr_train(twin_b, splits.paired[:12], epochs=2, lr=1e-3, seed=1)
        np.testing.assert_array_equal(curve_a, curve_b)
        for k in model.params:
            np.testing.assert_array_equal(twin_a.params[k].data, twin_b.params[k].data)

    def test_empty_corpus_rejected(self):
        model = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=0)
        with pytest.raises(ValueError, match="frames"):
            asr_train(model, [], epochs=1, lr=1e-3, seed=0)


class TestExtract:
    def test_requires_frozen_model(self, tiny_corpus, tiny_model):
        _, splits = tiny_corpus
        model = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=0)
        with pytest.raises(ValueError, match="frozen"):
            extract_embeddings(model, splits.paired[:2])

    def test_token_counts_and_dims(self, tiny_corpus, tiny_model):
        _, splits = tiny_corpus
        tiny_model.freeze()
        extracts = extract_embeddings(tiny_model, splits.paired[:6])
        for u, ex in zip(splits.paired[:6], extracts):
            assert ex.uid == u.uid
            assert ex.n_ref == len(u.chars)
            assert ex.s_cif.shape == (len(u.chars), 12)
            assert ex.s_dec.shape == (len(u.chars), 12)

    def test_confidence_formula_consistency(self, tiny_corpus, tiny_model):
        _, splits = tiny_corpus
        tiny_model.freeze()
        extracts = extract_embeddings(tiny_model, splits.paired[:10])
        for ex in extracts:
            assert ex.w == pytest.approx(confidence_index(ex.n_hyp, ex.n_ref))

    def test_unpaired_utterances_skipped(self, tiny_corpus, tiny_model):
        _, splits = tiny_corpus
        tiny_model.freeze()
        mixed = [splits.paired[0], splits.unpaired[0], splits.paired[1]]
        extracts = extract_embeddings(tiny_model, mixed)
        assert [e.uid for e in extracts] == [splits.paired[0].uid, splits.paired[1].uid]

    def test_zero_mass_skipped_with_warning(self, tiny_corpus):
        _, splits = tiny_corpus
        model = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=0)
        model.params["alpha.b"].data[:] = -10000.0
        model.freeze()
        with pytest.warns(UserWarning, match="mass"):
            extracts = extract_embeddings(model, splits.paired[:2])
        assert extracts == []

    def test_save_load_round_trip(self, tiny_corpus, tiny_model, tmp_path):
        _, splits = tiny_corpus
        tiny_model.freeze()
        extracts = extract_embeddings(tiny_model, splits.paired[:5])
        path = tmp_path / "emb.bin"
        save_extracts(path, extracts)
        loaded = load_extracts(path)
        assert len(loaded) == len(extracts)
        for a, b in zip(extracts, loaded):
            assert (a.uid, a.n_ref) == (b.uid, b.n_ref)
            assert b.w == pytest.approx(a.w)
            np.testing.assert_allclose(b.s_cif, a.s_cif, atol=1e-6)
            np.testing.assert_allclose(b.s_dec, a.s_dec, atol=1e-6)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValueError, match="CFBE"):
            load_extracts(path)


class TestModelLifecycle:
    def test_save_load_shape_validation(self, tiny_model, tmp_path):
        path = tmp_path / "m.npz"
        tiny_model.save(path)
        other = AsrModel(frame_dim=6, n_chars=12, hidden_dim=8, seed=0)
        with pytest.raises(ValueError, match="shape"):
            other.load(path)

    def test_freeze_marks_model(self):
        model = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=0)
        assert not model.frozen
        model.freeze()
        assert model.frozen

    def test_same_seed_same_init(self):
        a = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=6)
        b = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=6)
        for k in a.params:
            np.testing.assert_array_equal(a.params[k].data, b.params[k].data)

    def test_different_seed_different_init(self):
        a = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=6)
        b = AsrModel(frame_dim=6, n_chars=12, hidden_dim=12, seed=7)
        assert any(not np.array_equal(a.params[k].data, b.params[k].data)
                   for k in a.params)
