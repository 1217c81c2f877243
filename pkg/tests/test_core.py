import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hybridloss.core import (DimensionError, SparseFeatureVector, argmax_set,
                             argmax_with_tiebreak, as_distribution, dot, log_softmax,
                             logsumexp_rows, margin, runner_up, softmax)

finite_scores = arrays(np.float64, st.integers(2, 8),
                       elements=st.floats(-50, 50, allow_nan=False, allow_infinity=False))


class TestArgmax:
    @pytest.mark.parametrize("scores, expected", [((2, 1, 0), 0), ((0, 0, 0), 0), ((1, 3, 3), 1)])
    def test_examples(self, scores, expected):
        assert argmax_with_tiebreak(scores) == expected

    def test_argmax_set_tolerance(self):
        np.testing.assert_array_equal(argmax_set([1.0, 1.0 - 1e-10, 0.5]), [0, 1])
        np.testing.assert_array_equal(argmax_set([1.0, 1.0 - 1e-6, 0.5]), [0])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            argmax_with_tiebreak([0.0, np.nan])

    @given(finite_scores)
    def test_softmax_preserves_argmax(self, f):
        top = set(argmax_set(f).tolist())
        p = softmax(f)
        # softmax is monotone, so the top label survives unless rounding merges ties
        assert argmax_with_tiebreak(p) in top or np.isclose(p.max(), p[min(top)], rtol=1e-12)

    def test_softmax_argmax_identical_on_random_draws(self, rng):
        for _ in range(200):
            f = rng.normal(scale=3, size=rng.integers(2, 9))
            assert argmax_with_tiebreak(softmax(f)) == argmax_with_tiebreak(f)


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax([0, 0, 0]), [1 / 3] * 3, atol=1e-15)

    def test_log_two(self):
        np.testing.assert_allclose(softmax([np.log(2), 0, 0]), [0.5, 0.25, 0.25], atol=1e-15)

    def test_large_scores_do_not_overflow(self):
        with np.errstate(over="raise"):
            p = softmax([1000.0, 0.0, 0.0])
        np.testing.assert_allclose(p, [1, 0, 0], atol=1e-12)

    @given(finite_scores, st.floats(-100, 100))
    def test_shift_invariance(self, f, c):
        np.testing.assert_allclose(softmax(f + c), softmax(f), atol=1e-12)

    def test_log_softmax_matches(self, rng):
        f = rng.normal(size=6)
        np.testing.assert_allclose(np.exp(log_softmax(f)), softmax(f), rtol=1e-12)

    def test_logsumexp_rows_handles_masked_entries(self):
        A = np.array([[0.0, -np.inf, 1.0], [1000.0, 1000.0, -np.inf]])
        np.testing.assert_allclose(logsumexp_rows(A), [np.log(1 + np.e), 1000 + np.log(2)])


class TestMargin:
    @pytest.mark.parametrize("f, y, expected", [((2, 1, 0), 0, 1.0), ((0, 0, 0), 1, 0.0),
                                                ((0, 2, 0), 0, -2.0)])
    def test_examples(self, f, y, expected):
        assert margin(f, y) == expected

    @given(finite_scores)
    def test_positive_for_exactly_one_label_without_ties(self, f):
        positive = [y for y in range(f.size) if margin(f, y) > 0]
        if len(argmax_set(f, 0.0)) == 1:
            assert positive == [int(np.argmax(f))]
        else:
            assert positive == []

    def test_runner_up_prefers_lowest_id(self):
        assert runner_up([5.0, 1.0, 1.0], 0) == 1
        assert runner_up([1.0, 5.0, 1.0], 1) == 0


class TestDistribution:
    def test_accepts_valid(self):
        np.testing.assert_array_equal(as_distribution([0.25, 0.75]), [0.25, 0.75])

    @pytest.mark.parametrize("bad", [[1.0], [0.5, 0.6], [-0.1, 1.1], [np.nan, 1.0]])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            as_distribution(bad)


class TestSparseFeatureVector:
    def test_dot_examples(self):
        assert dot([1, 2, 3], SparseFeatureVector.from_pairs([(1, 1.0)])) == 2.0
        assert dot(np.arange(5.0), SparseFeatureVector.empty()) == 0.0
        assert dot([0.5, 0.5], SparseFeatureVector.from_pairs([(0, 2.0), (1, -2.0)])) == 0.0

    def test_dot_dimension_error(self):
        with pytest.raises(DimensionError):
            dot([1.0, 2.0], SparseFeatureVector.from_pairs([(2, 1.0)]))

    def test_from_pairs_canonicalizes(self):
        v = SparseFeatureVector.from_pairs([(3, 1.0), (1, 2.0), (3, 0.5), (2, 1.0), (2, -1.0)])
        np.testing.assert_array_equal(v.ids, [1, 3])
        np.testing.assert_array_equal(v.values, [2.0, 1.5])

    @pytest.mark.parametrize("ids, values", [([1, 1], [1.0, 2.0]), ([2, 1], [1.0, 1.0]),
                                             ([0], [0.0]), ([-1], [1.0]), ([0], [np.inf])])
    def test_rejects_non_canonical(self, ids, values):
        with pytest.raises(ValueError):
            SparseFeatureVector(np.array(ids), np.array(values))

    def test_is_immutable(self):
        v = SparseFeatureVector.from_pairs([(0, 1.0)])
        with pytest.raises(ValueError):
            v.values[0] = 2.0

    def test_to_dense_matches_dot(self, rng):
        v = SparseFeatureVector.from_pairs(zip(rng.choice(20, 5, replace=False).tolist(),
                                               rng.normal(size=5)))
        w = rng.normal(size=20)
        assert dot(w, v) == pytest.approx(w @ v.to_dense(20), rel=1e-12)
