"""Parametric propensity baselines: logit/probit MLE with 1-NN score matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, expit, log_ndtr

from .errors import RankDeficient, Separation
from .sample import Sample

SEPARATION_NORM = 1e3
_SQRT2 = np.sqrt(2.0)


def normal_cdf(z):
    return 0.5 * erfc(-np.asarray(z, dtype=float) / _SQRT2)


@dataclass(frozen=True)
class ParamScoreFit:
    family: str
    coefficients: np.ndarray
    fitted_scores: np.ndarray
    converged: bool
    iterations: int


def _logit_terms(eta, w):
    p = expit(eta)
    return p, w - p, p * (1.0 - p)


def _probit_terms(eta, w):
    cdf = normal_cdf(eta)
    # inverse Mills ratios in log space so they stay finite in the tails
    log_pdf = -0.5 * eta * eta - 0.5 * np.log(2.0 * np.pi)
    lam1 = np.exp(log_pdf - log_ndtr(eta))
    lam0 = np.exp(log_pdf - log_ndtr(-eta))
    grad = np.where(w == 1.0, lam1, -lam0)
    # minus the second derivative of the per-unit log-likelihood in eta
    curv = np.where(w == 1.0, lam1 * (eta + lam1), lam0 * (lam0 - eta))
    return cdf, grad, curv


def fit_param_score(
    sample: Sample, family: str = "logit", max_iter: int = 100, tol: float = 1e-8
) -> ParamScoreFit:
    """Newton-Raphson MLE for ``P(W=1|x) = F(a + x'b)``, F logistic or normal.

    Converges when the largest score component and the largest Newton step
    are both below ``tol``.  A coefficient norm above 1e3 is reported as
    separation.
    """
    if family not in ("logit", "probit"):
        raise ValueError(f"unknown family {family!r}")
    terms = _logit_terms if family == "logit" else _probit_terms
    design = np.column_stack([np.ones(sample.n), sample.x])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise RankDeficient("design matrix (intercept + covariates) is rank deficient")
    w = sample.w
    beta = np.zeros(design.shape[1])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        _, g_unit, curv = terms(design @ beta, w)
        grad = design.T @ g_unit
        info = design.T @ (design * curv[:, None])
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise Separation("information matrix became singular") from None
        beta = beta + step
        if not np.all(np.isfinite(beta)) or np.linalg.norm(beta) > SEPARATION_NORM:
            raise Separation(f"coefficients diverged after {it} iterations")
        if np.max(np.abs(grad)) < tol and np.max(np.abs(step)) < tol:
            converged = True
            break
    scores = terms(design @ beta, w)[0]
    if np.any((scores <= 0.0) | (scores >= 1.0)):
        raise Separation("fitted scores reached 0 or 1")
    return ParamScoreFit(family, beta, scores, converged, it)


def nearest_opposite(scores, treatments) -> np.ndarray:
    """Index of each unit's nearest opposite-arm unit by ``|score difference|``.

    Matching is with replacement; equal distances go to the smaller original
    index.
    """
    s = np.asarray(scores, dtype=float)
    w = np.asarray(treatments, dtype=float)
    match = np.empty(s.size, dtype=np.int64)
    for arm in (0.0, 1.0):
        units = np.flatnonzero(w == arm)
        pool = np.flatnonzero(w != arm)
        pool = pool[np.argsort(s[pool], kind="stable")]
        vals = s[pool]
        q = s[units]
        right = np.searchsorted(vals, q, side="left")
        has_r = right < vals.size
        has_l = right > 0
        r = np.minimum(right, vals.size - 1)
        left_val = vals[np.maximum(right - 1, 0)]
        l = np.searchsorted(vals, left_val, side="left")
        dr = np.where(has_r, vals[r] - q, np.inf)
        dl = np.where(has_l, q - left_val, np.inf)
        pick_r = (dr < dl) | ((dr == dl) & (pool[r] < pool[l]))
        match[units] = np.where(pick_r, pool[r], pool[l])
    return match


def nn_match_ate(sample: Sample, scores, M: int = 1) -> float:
    """One-to-one nearest-neighbour matching estimate on a scalar score."""
    if M != 1:
        raise ValueError("only M=1 matching is supported")
    s = np.asarray(scores, dtype=float)
    if s.shape != (sample.n,) or not np.all(np.isfinite(s)):
        raise ValueError("scores must be a finite vector with one entry per unit")
    j = nearest_opposite(s, sample.w)
    y, w = sample.y, sample.w
    return float(np.mean((2.0 * w - 1.0) * (y - y[j])))


def estimate_param_ate(sample: Sample, family: str) -> tuple[float, ParamScoreFit]:
    fit = fit_param_score(sample, family)
    return nn_match_ate(sample, fit.fitted_scores), fit
