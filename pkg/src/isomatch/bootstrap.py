"""Nonparametric bootstrap of the full matching pipeline."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import partial
from typing import Optional

import numpy as np

from .errors import AllReplicatesFailed, IsomatchError, TooFewReplicates
from .parallel import indexed_map
from .sample import Sample
from .streams import make_rng

FAILURE_WARN_FRACTION = 0.10
METHODS = ("univariate", "single-index")


@dataclass
class BootstrapSummary:
    B: int
    replicates: np.ndarray
    point: float
    se: float
    ci_lower: float
    ci_upper: float
    level: float
    failed_replicates: int = 0
    failure_reasons: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "point": self.point,
            "se": self.se,
            "ci": [self.ci_lower, self.ci_upper],
            "level": self.level,
            "failures": self.failed_replicates,
            "failure_reasons": dict(self.failure_reasons),
        }


def resample_indices(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, n, size=n)


def resample(sample: Sample, rng: np.random.Generator) -> Sample:
    """Draw N rows with replacement.

    Raises :class:`DegenerateSample` if the draw lost a treatment arm.
    """
    return sample.take(resample_indices(sample.n, rng))


def percentile_ci(replicates, level: float = 0.95) -> tuple[float, float]:
    """Percentile interval with linear interpolation between order statistics.

    ``q_p = x_(h) + (h - floor(h)) (x_(floor(h)+1) - x_(floor(h)))`` with
    ``h = 1 + p (n - 1)`` on the 1-based sorted replicates.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    x = np.sort(np.asarray(replicates, dtype=float))
    n = x.size
    if n < 2:
        raise TooFewReplicates(f"need at least 2 replicates, got {n}")

    def q(p):
        h = 1.0 + p * (n - 1)
        lo = int(math.floor(h))
        if lo >= n:
            return float(x[-1])
        return float(x[lo - 1] + (h - lo) * (x[lo] - x[lo - 1]))

    tail = (1.0 - level) / 2.0
    return q(tail), q(1.0 - tail)


def _point_estimate(sample: Sample, method: str, options) -> float:
    from .matching import EstimateOptions, estimate_ate_univariate
    from .single_index import estimate_ate_multivariate

    inner = EstimateOptions(
        merge_degenerate=options.merge_degenerate if options else False,
        seed=options.seed if options else EstimateOptions().seed,
        optimizer=options.optimizer if options else None,
    )
    if method == "univariate":
        return estimate_ate_univariate(sample, inner).tau_matching
    return estimate_ate_multivariate(sample, inner).tau_matching


def _replicate(r: int, sample: Sample, seed: int, method: str, options):
    rng = make_rng(seed, r)
    try:
        star = resample(sample, rng)
        return _point_estimate(star, method, options), None
    except IsomatchError as exc:
        return None, type(exc).__name__


def bootstrap_distribution(
    sample: Sample,
    B: int,
    seed: int,
    method: str = "univariate",
    level: float = 0.95,
    options=None,
    workers: Optional[int] = None,
) -> BootstrapSummary:
    """Re-run the whole estimator on ``B`` resamples.

    Replicate ``r`` draws from stream ``r`` of ``seed``.  Replicates that hit
    a domain error (typically an empty matched set) are counted by reason and
    left out of the quantiles.
    """
    if B < 1:
        raise ValueError(f"B must be at least 1, got {B}")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if workers is None and options is not None:
        workers = options.workers
    point = _point_estimate(sample, method, options)
    results = indexed_map(
        partial(_replicate, sample=sample, seed=seed, method=method, options=options),
        B,
        workers,
    )
    taus = np.array([t for t, _ in results if t is not None], dtype=float)
    reasons = Counter(reason for _, reason in results if reason is not None)
    failed = sum(reasons.values())
    if taus.size == 0:
        raise AllReplicatesFailed(f"all {B} bootstrap replicates failed: {dict(reasons)}")
    lo, hi = percentile_ci(taus, level)
    notes = []
    if failed > FAILURE_WARN_FRACTION * B:
        notes.append(f"{failed} of {B} bootstrap replicates failed")
    if method == "single-index":
        notes.append("single-index bootstrap (alpha re-estimated per resample) is experimental")
    return BootstrapSummary(
        B=B,
        replicates=taus,
        point=point,
        se=float(taus.std(ddof=1)) if taus.size > 1 else 0.0,
        ci_lower=lo,
        ci_upper=hi,
        level=level,
        failed_replicates=failed,
        failure_reasons=dict(sorted(reasons.items())),
        warnings=notes,
    )
