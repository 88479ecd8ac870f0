import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import best_paths, posterior_by_enumeration, tally, total_probability
from qoeseq.errors import (
    EmptyInput,
    EmptySequence,
    IndexOutOfRange,
    InvalidModel,
    NegativeAlpha,
    TokenOutOfRange,
    ZeroProbabilitySequence,
)
from qoeseq.hmm import (
    HmmParams,
    LabeledSequence,
    fit_supervised,
    forward_loglik,
    posterior_marginals,
    sample_sequence,
    viterbi_decode,
)

TWO_STATE = HmmParams([0.6, 0.4], [[0.7, 0.3], [0.4, 0.6]], [[0.9, 0.1], [0.2, 0.8]])


def random_model(rng, S, V, sparsity=0.0):
    def rows(n, m):
        x = rng.dirichlet(np.ones(m), size=n)
        if sparsity:
            x = np.where(rng.random(x.shape) < sparsity, 0.0, x)
            x[np.arange(n), rng.integers(m, size=n)] += 1e-3  # keep every row non-empty
            x /= x.sum(axis=1, keepdims=True)
        return x

    return HmmParams(rows(1, S)[0], rows(S, S), rows(S, V))


def as_lists(m):
    return m.pi.tolist(), m.A.tolist(), m.B.tolist()


model_case = st.tuples(st.integers(0, 2 ** 32 - 1), st.integers(1, 4), st.integers(1, 6),
                       st.integers(1, 7), st.sampled_from([0.0, 0.3]))


class TestFitSupervised:
    SEQ = [LabeledSequence([0, 0, 1, 1, 0], [0, 0, 1, 1, 1])]

    def test_unsmoothed(self):
        m = fit_supervised(self.SEQ, 2, 2, alpha=0)
        pi, A, B = tally([([0, 0, 1, 1, 1], [0, 0, 1, 1, 0])], 2, 2, 0)
        np.testing.assert_allclose(m.pi, pi, atol=1e-15)
        np.testing.assert_allclose(m.A, A, atol=1e-15)
        np.testing.assert_allclose(m.B, B, atol=1e-15)
        np.testing.assert_allclose(m.B, [[1, 0], [1 / 3, 2 / 3]], atol=1e-15)

    def test_add_one(self):
        m = fit_supervised(self.SEQ, 2, 2, alpha=1)
        np.testing.assert_allclose(m.pi, [2 / 3, 1 / 3], atol=1e-15)
        np.testing.assert_allclose(m.A, [[0.5, 0.5], [0.25, 0.75]], atol=1e-15)
        np.testing.assert_allclose(m.B, [[0.75, 0.25], [0.4, 0.6]], atol=1e-15)
        assert np.all(m.B > 0) and np.all(m.A > 0)

    def test_single_state(self):
        m = fit_supervised([LabeledSequence([0, 2, 2, 1], [0, 0, 0, 0])], 1, 3, alpha=0)
        assert m.pi.tolist() == [1.0] and m.A.tolist() == [[1.0]]
        np.testing.assert_allclose(m.B, [[0.25, 0.25, 0.5]])

    def test_unseen_rows_fall_back_to_uniform(self):
        m = fit_supervised([LabeledSequence([0], [0])], 3, 2, alpha=0)
        np.testing.assert_array_equal(m.A[1], [1 / 3] * 3)
        np.testing.assert_array_equal(m.B[2], [0.5, 0.5])

    def test_matches_tally_oracle_on_random_data(self):
        rng = np.random.default_rng(8)
        seqs = [(rng.integers(3, size=n).tolist(), rng.integers(5, size=n).tolist())
                for n in rng.integers(1, 30, size=20)]
        for alpha in (0.0, 0.5, 1.0):
            m = fit_supervised([LabeledSequence(t, s) for s, t in seqs], 3, 5, alpha)
            pi, A, B = tally(seqs, 3, 5, alpha)
            np.testing.assert_allclose(m.pi, pi, atol=1e-14)
            np.testing.assert_allclose(m.A, A, atol=1e-14)
            np.testing.assert_allclose(m.B, B, atol=1e-14)

    def test_errors(self):
        with pytest.raises(IndexOutOfRange):
            fit_supervised([LabeledSequence([0], [2])], 2, 2)
        with pytest.raises(IndexOutOfRange):
            fit_supervised([LabeledSequence([5], [0])], 2, 2)
        with pytest.raises(EmptyInput):
            fit_supervised([], 2, 2)
        with pytest.raises(NegativeAlpha):
            fit_supervised(self.SEQ, 2, 2, alpha=-1)


class TestViterbi:
    def test_identity_emissions(self):
        m = HmmParams(np.full(3, 1 / 3), np.full((3, 3), 1 / 3), np.eye(3))
        tokens = [2, 0, 1, 1, 2]
        assert viterbi_decode(m, tokens).states.tolist() == tokens

    def test_two_state_example_against_enumeration(self):
        best, arg = best_paths(*as_lists(TWO_STATE), [0, 0, 1])
        dec = viterbi_decode(TWO_STATE, [0, 0, 1])
        assert arg == [(0, 0, 1)]
        assert dec.states.tolist() == [0, 0, 1]
        assert dec.log_prob == pytest.approx(-2.5053379546605217, abs=1e-12)
        assert dec.log_prob == pytest.approx(best, abs=1e-12)

    def test_uniform_model_ties_to_zero(self):
        m = HmmParams(np.full(4, 0.25), np.full((4, 4), 0.25), np.full((4, 3), 1 / 3))
        assert viterbi_decode(m, [0, 2, 1, 1]).states.tolist() == [0, 0, 0, 0]

    def test_impossible_sequence_is_flagged(self):
        m = HmmParams([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]])
        dec = viterbi_decode(m, [0, 1])
        assert dec.log_prob == -math.inf and not dec.feasible
        assert dec.states.tolist() == [0, 0]

    def test_errors(self):
        with pytest.raises(TokenOutOfRange):
            viterbi_decode(TWO_STATE, [0, 2])
        with pytest.raises(EmptySequence):
            viterbi_decode(TWO_STATE, [])

    @settings(max_examples=150, deadline=None)
    @given(model_case)
    def test_optimality(self, case):
        seed, S, V, T, sparsity = case
        rng = np.random.default_rng(seed)
        m = random_model(rng, S, V, sparsity)
        tokens = rng.integers(V, size=T).tolist()
        best, arg = best_paths(*as_lists(m), tokens)
        dec = viterbi_decode(m, tokens)
        if best == -math.inf:
            assert dec.log_prob == -math.inf
            return
        assert dec.log_prob == pytest.approx(best, abs=1e-9)
        if len(arg) == 1:
            assert tuple(dec.states.tolist()) == arg[0]


class TestForward:
    def test_single_step(self):
        expected = math.log(0.6 * 0.1 + 0.4 * 0.8)
        assert forward_loglik(TWO_STATE, [1]) == pytest.approx(expected, abs=1e-15)

    def test_two_state_example(self):
        expected = math.log(total_probability(*as_lists(TWO_STATE), [0, 0, 1]))
        assert expected == pytest.approx(-1.9934106452041678, abs=1e-12)
        assert forward_loglik(TWO_STATE, [0, 0, 1]) == pytest.approx(expected, abs=1e-12)

    def test_identity_emissions(self):
        rng = np.random.default_rng(2)
        m = HmmParams(rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3), 3), np.eye(3))
        tokens = [1, 2, 2, 0, 1]
        expected = math.log(m.pi[1]) + sum(math.log(m.A[a, b]) for a, b in zip(tokens, tokens[1:]))
        assert forward_loglik(m, tokens) == pytest.approx(expected, abs=1e-12)

    def test_zero_probability(self):
        m = HmmParams([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]])
        assert forward_loglik(m, [0, 1]) == -math.inf

    def test_long_sequence_no_underflow(self):
        rng = np.random.default_rng(0)
        m = random_model(rng, 4, 10)
        tokens = rng.integers(10, size=5000)
        ll = forward_loglik(m, tokens)
        assert np.isfinite(ll) and ll < -1000
        assert ll >= viterbi_decode(m, tokens).log_prob

    @settings(max_examples=150, deadline=None)
    @given(model_case)
    def test_matches_enumeration_and_dominates_viterbi(self, case):
        seed, S, V, T, sparsity = case
        rng = np.random.default_rng(seed)
        m = random_model(rng, S, V, sparsity)
        tokens = rng.integers(V, size=T).tolist()
        total = total_probability(*as_lists(m), tokens)
        ll = forward_loglik(m, tokens)
        if total == 0:
            assert ll == -math.inf
        else:
            assert math.exp(ll) == pytest.approx(total, rel=1e-9)
        assert ll >= viterbi_decode(m, tokens).log_prob


class TestPosterior:
    def test_single_state(self):
        m = HmmParams([1.0], [[1.0]], [[0.3, 0.7]])
        np.testing.assert_array_equal(posterior_marginals(m, [0, 1, 1]), np.ones((3, 1)))

    def test_identity_emissions_one_hot(self):
        m = HmmParams(np.full(3, 1 / 3), np.full((3, 3), 1 / 3), np.eye(3))
        post = posterior_marginals(m, [2, 0, 1])
        np.testing.assert_allclose(post, np.eye(3)[[2, 0, 1]], atol=1e-15)

    def test_two_state_example(self):
        expected = posterior_by_enumeration(*as_lists(TWO_STATE), [0, 0, 1])
        np.testing.assert_allclose(posterior_marginals(TWO_STATE, [0, 0, 1]), expected, atol=1e-12)
        np.testing.assert_allclose(expected[2], [0.20193789914115834, 0.7980621008588417], atol=1e-15)

    def test_zero_probability(self):
        m = HmmParams([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ZeroProbabilitySequence):
            posterior_marginals(m, [0, 1])

    @settings(max_examples=100, deadline=None)
    @given(model_case)
    def test_rows_normalized_and_match_enumeration(self, case):
        seed, S, V, T, _ = case
        rng = np.random.default_rng(seed)
        m = random_model(rng, S, V)
        tokens = rng.integers(V, size=T).tolist()
        post = posterior_marginals(m, tokens)
        assert np.all(np.abs(post.sum(axis=1) - 1.0) <= 1e-12)
        np.testing.assert_allclose(post, posterior_by_enumeration(*as_lists(m), tokens), atol=1e-9)


class TestSampling:
    def test_deterministic_model(self):
        m = HmmParams([0, 1, 0], [[0, 0, 1], [1, 0, 0], [0, 1, 0]], [[0, 1], [1, 0], [0, 1]])
        seq = sample_sequence(m, 6, seed=123)
        assert seq.states.tolist() == [1, 0, 2, 1, 0, 2]
        assert seq.tokens.tolist() == [0, 1, 1, 0, 1, 1]

    def test_single_state_token_frequencies(self):
        b = [0.1, 0.25, 0.05, 0.6]
        m = HmmParams([1.0], [[1.0]], [b])
        seq = sample_sequence(m, 100_000, seed=5)
        assert set(seq.states.tolist()) == {0}
        freq = np.bincount(seq.tokens, minlength=4) / 100_000
        assert np.max(np.abs(freq - b)) < 0.01

    def test_zero_mass_never_drawn(self):
        m = HmmParams([0.5, 0.0, 0.5], [[0.5, 0.0, 0.5]] * 3, [[0.0, 1.0], [1.0, 0.0], [0.3, 0.7]])
        seq = sample_sequence(m, 5000, seed=1)
        assert 1 not in seq.states.tolist()
        assert 0 not in seq.tokens[seq.states == 0].tolist()

    def test_same_seed_identical(self):
        m = random_model(np.random.default_rng(3), 3, 4)
        a, b = sample_sequence(m, 300, 77), sample_sequence(m, 300, 77)
        assert a.states.tobytes() == b.states.tobytes() and a.tokens.tobytes() == b.tokens.tobytes()

    def test_errors(self):
        with pytest.raises(EmptySequence):
            sample_sequence(TWO_STATE, 0, 1)
        with pytest.raises(InvalidModel):
            sample_sequence("not a model", 3, 1)


class TestModelValidation:
    @pytest.mark.parametrize("pi,A,B", [
        ([0.5, 0.6], [[1, 0], [0, 1]], [[1], [1]]),
        ([0.5, 0.5], [[1, 0], [0.5, 0.4]], [[1], [1]]),
        ([0.5, 0.5], [[1, 0], [0, 1]], [[1], [1.1]]),
        ([0.5, 0.5], [[1, 0], [0, 1]], [[1, 0]]),
        ([1.5, -0.5], [[1, 0], [0, 1]], [[1], [1]]),
    ])
    def test_rejects(self, pi, A, B):
        with pytest.raises(InvalidModel):
            HmmParams(pi, A, B)

    def test_params_are_read_only(self):
        with pytest.raises(ValueError):
            TWO_STATE.A[0, 0] = 0.5
