"""Monotone single-index propensity model and the multivariate ATE pipeline.

The index coefficient is found by minimising the squared norm of the simple
score ``(1/N) sum_i x_i (w_i - p_alpha(x_i' alpha))`` where ``p_alpha`` is the
isotonic fit of ``w`` on ``x' alpha``.  The objective is piecewise constant in
``alpha`` (the isotonic fit only sees the ordering), so the search is a
multi-start Nelder-Mead over hyperspherical angles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .errors import DimensionMismatch, OptimizerFailed
from .isotonic import IsotonicFit, _pava_fitted, pava_fit
from .matching import (
    AteReport,
    EstimateOptions,
    estimate_ate_univariate,
    estimate_on_ordered,
)
from .sample import Sample, check_alpha, order_by_index
from .streams import make_rng


@dataclass(frozen=True)
class OptimizerConfig:
    n_starts: int = 10
    seed: int = 0
    max_iter: int = 500
    xtol: float = 1e-6
    initial_step: float = 0.3


@dataclass(frozen=True)
class IndexFit:
    alpha: np.ndarray
    link: IsotonicFit
    objective_value: float
    diagnostics: dict = field(default_factory=dict)


@numba.njit(cache=True, nogil=True)
def _score_norm_sq(x, w, order):
    n, k = x.shape
    ws = np.empty(n)
    for j in range(n):
        ws[j] = w[order[j]]
    fitted = _pava_fitted(ws)
    g = np.zeros(k)
    for j in range(n):
        r = ws[j] - fitted[j]
        if r != 0.0:
            row = order[j]
            for c in range(k):
                g[c] += x[row, c] * r
    total = 0.0
    for c in range(k):
        total += (g[c] / n) ** 2
    return total


def angles_to_unit(theta) -> np.ndarray:
    """Hyperspherical angles (length k-1) to a unit vector of length k."""
    theta = np.asarray(theta, dtype=float)
    k = theta.size + 1
    out = np.empty(k)
    s = 1.0
    for i in range(k - 1):
        out[i] = s * np.cos(theta[i])
        s *= np.sin(theta[i])
    out[k - 1] = s
    return out / np.linalg.norm(out)


def unit_to_angles(alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=float)
    k = a.size
    theta = np.empty(k - 1)
    for i in range(k - 2):
        theta[i] = np.arctan2(np.linalg.norm(a[i + 1 :]), a[i])
    theta[k - 2] = np.arctan2(a[k - 1], a[k - 2])
    return theta


def link_fit_given_alpha(sample: Sample, alpha) -> IsotonicFit:
    if sample.k < 2:
        raise DimensionMismatch("single-index link fit needs k >= 2")
    ordered = order_by_index(sample, alpha)
    return pava_fit(ordered.w, ordered.index_values)


def _objective(x, w, alpha) -> float:
    order = np.argsort(x @ alpha, kind="stable")
    return float(_score_norm_sq(x, w, order))


def score_objective(sample: Sample, alpha) -> float:
    alpha = check_alpha(alpha, sample.k)
    return _objective(np.ascontiguousarray(sample.x), np.ascontiguousarray(sample.w), alpha)


def nelder_mead(f, x0, step: float, xtol: float, max_iter: int):
    """Plain Nelder-Mead (reflect 1, expand 2, contract 1/2, shrink 1/2).

    Stops when the simplex diameter falls below ``xtol``.  Returns
    ``(x, fx, iterations, converged)``.  An inside contraction must strictly
    improve on the worst vertex, otherwise the simplex shrinks; on flat
    pieces of the objective this collapses the simplex instead of letting
    one vertex oscillate forever.
    """
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    sim = np.vstack([x0] + [x0 + step * e for e in np.eye(d)])
    fs = np.array([f(v) for v in sim])
    it = 0
    converged = False
    while True:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        diam = max(np.linalg.norm(a - b) for i, a in enumerate(sim) for b in sim[i + 1 :])
        if diam < xtol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        centroid = sim[:-1].mean(axis=0)
        xr = centroid + (centroid - sim[-1])
        fr = f(xr)
        if fr < fs[0]:
            xe = centroid + 2.0 * (centroid - sim[-1])
            fe = f(xe)
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (sim[-1] - centroid)
            fc = f(xc)
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
                continue
        for j in range(1, d + 1):
            sim[j] = sim[0] + 0.5 * (sim[j] - sim[0])
            fs[j] = f(sim[j])
    return sim[0].copy(), float(fs[0]), it, converged


def _least_squares_direction(sample: Sample) -> Optional[np.ndarray]:
    design = np.column_stack([np.ones(sample.n), sample.x])
    coef, *_ = np.linalg.lstsq(design, sample.w, rcond=None)
    slope = coef[1:]
    norm = np.linalg.norm(slope)
    if not np.isfinite(norm) or norm == 0.0:
        return None
    return slope / norm


def _start_directions(sample: Sample, config: OptimizerConfig) -> list[np.ndarray]:
    rng = make_rng(config.seed, 0)
    starts = []
    ls = _least_squares_direction(sample)
    if ls is not None:
        starts.append(ls)
    while len(starts) < config.n_starts:
        v = rng.standard_normal(sample.k)
        n = np.linalg.norm(v)
        if n > 0:
            starts.append(v / n)
    return starts[: config.n_starts]


def estimate_alpha(sample: Sample, config: Optional[OptimizerConfig] = None) -> IndexFit:
    """Simple-score estimate of the unit index coefficient.

    The best objective over all starts wins.  When several starts tie at the
    best value, their normalised mean is tried first: a flat piece of the
    objective is a convex cone, so the mean of points on one piece stays on
    it and sits away from its edges.  The mean is kept only if it reproduces
    the best value; otherwise the lexicographically smallest canonical angle
    vector among the tied starts is returned.
    """
    config = config or OptimizerConfig()
    if sample.k < 2:
        raise DimensionMismatch("estimate_alpha needs k >= 2")
    x = np.ascontiguousarray(sample.x)
    w = np.ascontiguousarray(sample.w)

    def f(theta):
        return _objective(x, w, angles_to_unit(theta))

    results = []
    for direction in _start_directions(sample, config):
        theta, fx, its, ok = nelder_mead(
            f, unit_to_angles(direction), config.initial_step, config.xtol, config.max_iter
        )
        alpha = angles_to_unit(theta)
        results.append((fx, tuple(unit_to_angles(alpha)), alpha, its, ok))
    if not any(r[4] for r in results):
        raise OptimizerFailed(
            f"no start reached simplex diameter {config.xtol} within {config.max_iter} iterations"
        )
    best = min(range(len(results)), key=lambda i: (results[i][0], results[i][1]))
    alpha = results[best][2]
    selection = "lexicographic"
    tied = [r[2] for r in results if r[0] == results[best][0]]
    if len(tied) > 1:
        mean = np.sum(tied, axis=0)
        norm = np.linalg.norm(mean)
        if norm > 1e-8:
            mean = mean / norm
            if _objective(x, w, mean) <= results[best][0]:
                alpha = mean
                selection = "tied-mean"
    return IndexFit(
        alpha=alpha,
        link=link_fit_given_alpha(sample, alpha),
        objective_value=score_objective(sample, alpha),
        diagnostics={
            "starts": len(results),
            "best_start": best,
            "iterations": [r[3] for r in results],
            "converged": [r[4] for r in results],
            "objectives": [r[0] for r in results],
            "tied": len(tied),
            "selection": selection,
        },
    )


def ate_given_alpha(sample: Sample, alpha, options: Optional[EstimateOptions] = None) -> AteReport:
    """Multivariate pipeline from the ordering step on, for a fixed index."""
    options = options or EstimateOptions()
    alpha = check_alpha(alpha, sample.k)
    return estimate_on_ordered(order_by_index(sample, alpha), options, "single-index", alpha)


def estimate_ate_multivariate(
    sample: Sample, options: Optional[EstimateOptions] = None
) -> AteReport:
    """UC-iso-index matching estimate for ``k >= 2`` covariates.

    ``k == 1`` is routed to the univariate pipeline with ``alpha = +1``.
    """
    options = options or EstimateOptions()
    if sample.k == 1:
        report = estimate_ate_univariate(sample, options)
        report.alpha = [1.0]
        return report
    config = options.optimizer or OptimizerConfig(seed=options.seed)
    fit = estimate_alpha(sample, config)
    report = ate_given_alpha(sample, fit.alpha, options)
    if options.bootstrap:
        from .bootstrap import bootstrap_distribution

        boot = bootstrap_distribution(
            sample,
            options.bootstrap,
            options.seed,
            method="single-index",
            level=options.level,
            options=options,
        )
        report.bootstrap = boot.to_dict()
        report.warnings.extend(boot.warnings)
    return report
