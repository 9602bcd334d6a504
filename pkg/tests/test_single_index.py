import numpy as np
import pytest
from scipy.stats import qmc

from isomatch.errors import DimensionMismatch, NonUnitAlpha
from isomatch.matching import EstimateOptions, estimate_ate_univariate
from isomatch.sample import Sample
from isomatch.simulation import ALPHA0, generate_multivariate
from isomatch.single_index import (
    OptimizerConfig,
    angles_to_unit,
    ate_given_alpha,
    estimate_alpha,
    estimate_ate_multivariate,
    link_fit_given_alpha,
    nelder_mead,
    score_objective,
    unit_to_angles,
)
from isomatch.streams import make_rng


def angle(a, b):
    return float(np.arccos(np.clip(np.dot(a, b), -1.0, 1.0)))


def noiseless_step(alpha_star, n):
    x = qmc.Halton(d=alpha_star.size, scramble=False).random(n + 1)[1:] * 2.0 - 1.0
    w = (x @ alpha_star >= 0).astype(float)
    return Sample(np.zeros(n), w, x)


def test_link_fit_monotone_in_first_coordinate():
    s = Sample([0.0, 0.0], [0, 1], [[-1.0, 0.0], [1.0, 0.0]])
    fit = link_fit_given_alpha(s, [1.0, 0.0])
    np.testing.assert_array_equal(fit.block_values, [0.0, 1.0])


def test_link_fit_tied_index_keeps_stable_sequence():
    # equal index values are ordinary consecutive points in original order
    s = Sample([0.0, 0.0], [0, 1], [[-1.0, 0.0], [1.0, 0.0]])
    fit = link_fit_given_alpha(s, [0.0, 1.0])
    np.testing.assert_array_equal(fit.block_sizes, [1, 1])
    np.testing.assert_array_equal(fit.block_values, [0.0, 1.0])


def test_link_fit_noiseless_step_two_blocks():
    a = np.ones(2) / np.sqrt(2.0)
    s = noiseless_step(a, 40)
    fit = link_fit_given_alpha(s, a)
    np.testing.assert_array_equal(fit.block_values, [0.0, 1.0])


def test_link_fit_requires_two_covariates():
    with pytest.raises(DimensionMismatch):
        link_fit_given_alpha(Sample([0.0, 1.0], [0, 1], [0.0, 1.0]), [1.0])


def test_score_objective_examples():
    s = Sample([0.0, 0.0], [1, 0], [[1.0, 0.0], [0.0, 1.0]])
    assert score_objective(s, [1.0, 0.0]) == 0.0
    a = ALPHA0
    assert score_objective(noiseless_step(a, 200), a) == 0.0
    with pytest.raises(NonUnitAlpha):
        score_objective(s, [1.0, 1.0])


def test_score_objective_hand_value():
    # order by x'alpha = (0, 1): w = (1, 0) pools to 0.5, residuals (0.5, -0.5)
    s = Sample([0.0, 0.0], [1, 0], [[0.0, 1.0], [1.0, 0.0]])
    g = (np.array([0.0, 1.0]) * 0.5 + np.array([1.0, 0.0]) * -0.5) / 2
    assert score_objective(s, [1.0, 0.0]) == pytest.approx(float(g @ g), abs=1e-15)


def test_objective_prefers_true_index():
    far = np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)
    wins = 0
    for r in range(100):
        s = generate_multivariate(1000, make_rng(31, r))
        wins += score_objective(s, ALPHA0) < score_objective(s, far)
    assert wins >= 95


def test_angles_roundtrip():
    rng = np.random.default_rng(3)
    for k in (2, 3, 5):
        for _ in range(50):
            v = rng.normal(size=k)
            v /= np.linalg.norm(v)
            np.testing.assert_allclose(angles_to_unit(unit_to_angles(v)), v, atol=1e-12)


def test_nelder_mead_quadratic():
    x, fx, it, ok = nelder_mead(lambda t: float(np.sum((t - [1.0, -2.0]) ** 2)), [0.0, 0.0], 0.5, 1e-8, 2000)
    assert ok
    np.testing.assert_allclose(x, [1.0, -2.0], atol=1e-7)


def test_nelder_mead_flat_objective_collapses():
    x, fx, it, ok = nelder_mead(lambda t: 1.0, [0.3, 0.4], 0.3, 1e-6, 500)
    assert ok and fx == 1.0


def test_recovers_noiseless_index_on_grid():
    fit = estimate_alpha(noiseless_step(ALPHA0, 200))
    assert fit.objective_value == 0.0
    assert angle(fit.alpha, ALPHA0) < 0.05


def test_grid_search_oracle_agrees_on_zero_region():
    # every grid direction with zero objective lies in a small cone around alpha*
    s = noiseless_step(ALPHA0, 200)
    zero = []
    for t1 in np.linspace(0.0, np.pi, 91):
        for t2 in np.linspace(-np.pi, np.pi, 181):
            a = angles_to_unit([t1, t2])
            if score_objective(s, a) == 0.0:
                zero.append(a)
    assert zero
    assert max(angle(a, ALPHA0) for a in zero) < 0.05
    fit = estimate_alpha(s)
    assert min(angle(fit.alpha, a) for a in zero) < 0.05


def test_sign_identified_by_increasing_link():
    rng = np.random.default_rng(8)
    x = rng.uniform(-1, 1, (400, 2))
    w = (rng.uniform(size=400) < 0.5 + 0.4 * x[:, 0]).astype(float)
    fit = estimate_alpha(Sample(np.zeros(400), w, x))
    assert fit.alpha[0] > 0.95 and abs(fit.alpha[1]) < 0.3


def test_estimate_alpha_invariants_and_determinism():
    s = generate_multivariate(500, make_rng(5, 0))
    cfg = OptimizerConfig(seed=9)
    a = estimate_alpha(s, cfg)
    b = estimate_alpha(s, cfg)
    np.testing.assert_array_equal(a.alpha, b.alpha)
    assert abs(np.linalg.norm(a.alpha) - 1.0) <= 1e-10
    assert a.objective_value >= 0.0
    assert abs(score_objective(s, a.alpha) - a.objective_value) <= 1e-12
    assert a.diagnostics["starts"] == 10 and len(a.diagnostics["converged"]) == 10


def test_estimate_alpha_requires_two_covariates():
    with pytest.raises(DimensionMismatch):
        estimate_alpha(Sample([0.0, 1.0], [0, 1], [0.0, 1.0]))


@pytest.mark.slow
def test_alpha_error_scale_on_design():
    errs = [
        np.linalg.norm(estimate_alpha(generate_multivariate(1000, make_rng(77, r))).alpha - ALPHA0)
        for r in range(100)
    ]
    assert np.median(errs) <= 0.12


def test_all_tied_index_single_block():
    x = np.tile([0.5, -0.25], (6, 1))
    y = np.array([3.0, 4.0, 5.0, 1.0, 1.5, 2.0])
    rep = estimate_ate_multivariate(Sample(y, [1, 1, 1, 0, 0, 0], x))
    assert rep.blocks["K"] == 1
    assert rep.tau_matching == pytest.approx(4.0 - 1.5, abs=1e-14)


def test_k1_routes_to_univariate():
    rng = np.random.default_rng(2)
    x = rng.uniform(size=60)
    w = (rng.uniform(size=60) < x).astype(float)
    s = Sample(rng.normal(size=60) + w, w, x)
    a = estimate_ate_multivariate(s)
    b = estimate_ate_univariate(s)
    assert a.alpha == [1.0]
    assert a.tau_matching == b.tau_matching


def test_identity_on_given_alpha():
    rng = np.random.default_rng(4)
    for r in range(200):
        s = generate_multivariate(int(rng.integers(50, 400)), make_rng(13, r))
        a = rng.normal(size=3)
        rep = ate_given_alpha(s, a / np.linalg.norm(a), EstimateOptions(merge_degenerate=True))
        assert rep.equivalence_gap <= 1e-10 * (1 + abs(rep.tau_matching))
        assert rep.method == "single-index"


def test_multivariate_estimate_report():
    s = generate_multivariate(1000, make_rng(21, 0))
    rep = estimate_ate_multivariate(s)
    assert abs(rep.tau_matching - 0.5) < 0.4
    assert rep.equivalence_gap <= 1e-10 * (1 + abs(rep.tau_matching))
    assert abs(np.linalg.norm(rep.alpha) - 1.0) <= 1e-10


@pytest.mark.slow
def test_noise_covariate_matches_univariate_head_to_head():
    multi, uni = [], []
    for r in range(200):
        rng = make_rng(404, r)
        x1 = 0.15 + 0.7 * rng.random(300)
        x2 = rng.random(300)
        w = (x1 >= rng.random(300)).astype(float)
        y = 0.5 * w + 2.0 * x1 + rng.standard_normal(300)
        multi.append(estimate_ate_multivariate(Sample(y, w, np.column_stack([x1, x2]))).tau_matching)
        uni.append(estimate_ate_univariate(Sample(y, w, x1)).tau_matching)
    diff = np.array(multi) - np.array(uni)
    assert abs(diff.mean()) <= 3.0 * diff.std(ddof=1) / np.sqrt(diff.size)
