import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from isomatch.isotonic import evaluate_step, fit_from_blocks, maxmin_oracle, pava_fit

real_vectors = arrays(
    np.float64,
    st.integers(1, 60),
    elements=st.floats(-100, 100, allow_nan=False, allow_infinity=False),
)
binary_vectors = arrays(np.float64, st.integers(1, 60), elements=st.sampled_from([0.0, 1.0]))
responses = st.one_of(real_vectors, binary_vectors)


def test_pava_monotone_input_unchanged():
    fit = pava_fit([0, 1, 1])
    assert fit.K == 2
    np.testing.assert_array_equal(fit.block_values, [0, 1])
    np.testing.assert_array_equal(fit.fitted(), [0, 1, 1])
    np.testing.assert_array_equal(fit.block_treated_counts, [0, 2])


def test_pava_single_violation():
    fit = pava_fit([1, 0])
    assert fit.K == 1
    np.testing.assert_array_equal(fit.fitted(), [0.5, 0.5])


def test_pava_alternating():
    fit = pava_fit([0, 1, 0, 1])
    assert fit.K == 3
    np.testing.assert_array_equal(fit.block_values, [0, 0.5, 1])
    np.testing.assert_array_equal(fit.fitted(), [0, 0.5, 0.5, 1])
    np.testing.assert_array_equal(fit.block_starts, [0, 1, 3])
    np.testing.assert_array_equal(fit.block_sizes, [1, 2, 1])


def test_pava_single_point():
    fit = pava_fit([3.5])
    assert fit.K == 1 and fit.block_values[0] == 3.5


def test_pava_equal_means_merge():
    fit = pava_fit([0.5, 0.5, 1.0, 0.0, 2.0])
    np.testing.assert_array_equal(fit.block_values, [0.5, 2.0])
    np.testing.assert_array_equal(fit.block_sizes, [4, 1])


@pytest.mark.parametrize(
    "y, i, expected",
    [([0, 1, 1], 0, 0.0), ([1, 0], 1, 0.5), ([0, 1, 0, 1], 3, 1.0), ([0, 1, 0, 1], 1, 0.5)],
)
def test_maxmin_oracle_examples(y, i, expected):
    assert maxmin_oracle(y, i) == expected


@given(responses)
@settings(max_examples=300, deadline=None)
def test_pava_equals_maxmin_oracle(y):
    fitted = pava_fit(y).fitted()
    oracle = np.array([maxmin_oracle(y, i) for i in range(y.size)])
    np.testing.assert_allclose(fitted, oracle, rtol=0, atol=1e-12 * max(1.0, np.abs(y).max()))


@given(responses)
@settings(max_examples=300, deadline=None)
def test_cumulative_sum_characterisation(y):
    fit = pava_fit(y)
    p = fit.fitted()
    scale = max(1.0, np.abs(y).sum())
    gap = np.cumsum(p) - np.cumsum(y)
    assert np.all(gap <= 1e-10 * scale)
    ends = fit.block_starts + fit.block_sizes - 1
    np.testing.assert_allclose(gap[ends], 0.0, atol=1e-10 * scale)


@given(responses)
@settings(max_examples=300, deadline=None)
def test_block_invariants(y):
    fit = pava_fit(y)
    assert np.all(np.diff(fit.block_values) > 0)
    assert fit.block_sizes.sum() == y.size
    np.testing.assert_array_equal(fit.block_starts[1:], (fit.block_starts + fit.block_sizes)[:-1])
    resid = y - fit.fitted()
    sums = np.add.reduceat(resid, fit.block_starts)
    np.testing.assert_allclose(sums, 0.0, atol=1e-10 * max(1.0, np.abs(y).sum()))


@given(binary_vectors)
@settings(max_examples=200, deadline=None)
def test_binary_block_values_are_exact_ratios(w):
    fit = pava_fit(w)
    np.testing.assert_array_equal(fit.block_values, fit.block_treated_counts / fit.block_sizes)


def test_minimality_against_monotone_perturbations():
    rng = np.random.default_rng(5)
    for _ in range(20):
        y = rng.normal(size=rng.integers(2, 40))
        p = pava_fit(y).fitted()
        sse = np.sum((y - p) ** 2)
        for _ in range(200):
            q = p + np.cumsum(np.abs(rng.normal(scale=0.1, size=p.size))) * rng.choice([-1, 1])
            q = np.maximum.accumulate(q)
            assert sse <= np.sum((y - q) ** 2) + 1e-12


@given(real_vectors, st.sampled_from([np.exp, np.arctan, lambda t: t**3 + t]))
@settings(max_examples=100, deadline=None)
def test_fit_depends_on_order_only(y, transform):
    index = np.sort(np.random.default_rng(y.size).uniform(-2, 2, y.size))
    a = pava_fit(y, index)
    b = pava_fit(y, transform(index))
    np.testing.assert_array_equal(a.block_sizes, b.block_sizes)
    np.testing.assert_array_equal(a.block_values, b.block_values)


def _two_block_fit():
    return fit_from_blocks([2, 2], [0.3, 0.3, 0.7, 0.7], index_values=[0.1, 0.2, 0.5, 0.8])


@pytest.mark.parametrize("x, expected", [(0.5, 0.7), (0.9, 0.7), (0.1, 0.3), (0.2, 0.3), (0.2001, 0.7)])
def test_evaluate_step(x, expected):
    assert evaluate_step(_two_block_fit(), x) == pytest.approx(expected)


def test_evaluate_step_vectorised():
    out = evaluate_step(_two_block_fit(), np.array([0.0, 0.2, 0.3, 1.0]))
    np.testing.assert_allclose(out, [0.3, 0.3, 0.7, 0.7])


def test_evaluate_step_requires_index():
    with pytest.raises(ValueError):
        evaluate_step(pava_fit([0, 1]), 0.5)
