"""One-to-many matching on isotonic propensity blocks, and its IPW twin."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegeneratePropensity, DimensionMismatch, EmptyMatchedSet
from .isotonic import IsotonicFit, fit_from_blocks
from .sample import OrderedSample, Sample, order_by_index, window_size
from .uc_isotonic import degenerate_blocks, uc_isotonic_fit

DEFAULT_SEED = 20240101
GAP_TOL = 1e-10


@dataclass
class EstimateOptions:
    """Knobs shared by the estimation pipelines.

    ``bootstrap`` is the replicate count B (0 disables).  ``optimizer`` is a
    :class:`isomatch.single_index.OptimizerConfig` for the single-index path.
    """

    merge_degenerate: bool = False
    bootstrap: int = 0
    seed: int = DEFAULT_SEED
    level: float = 0.95
    optimizer: Optional[object] = None
    workers: Optional[int] = None


@dataclass(frozen=True)
class MatchedSets:
    """Implicit matched sets: unit ``i`` matches every opposite-arm unit of its block.

    All arrays are indexed by position in the ordered sample.
    """

    block_ids: np.ndarray
    match_counts: np.ndarray
    treated_per_block: np.ndarray
    control_per_block: np.ndarray
    treatments: np.ndarray

    def members(self, i: int) -> np.ndarray:
        """Explicit J(i) as ordered positions; O(N), for inspection and tests."""
        same = self.block_ids == self.block_ids[i]
        return np.flatnonzero(same & (self.treatments == 1.0 - self.treatments[i]))


@dataclass
class AteReport:
    method: str
    n: int
    k: int
    tau_matching: float
    tau_ipw: Optional[float]
    equivalence_gap: Optional[float]
    blocks: Optional[dict]
    degenerate_blocks: list = field(default_factory=list)
    alpha: Optional[list] = None
    bootstrap: Optional[dict] = None
    warnings: list = field(default_factory=list)
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n": self.n,
            "k": self.k,
            "tau_matching": self.tau_matching,
            "tau_ipw": self.tau_ipw,
            "equivalence_gap": self.equivalence_gap,
            "blocks": self.blocks,
            "degenerate_blocks": list(self.degenerate_blocks),
            "alpha": self.alpha,
            "bootstrap": self.bootstrap,
            "warnings": list(self.warnings),
            "seed": self.seed,
        }


def build_matched_sets(fit: IsotonicFit, treatments) -> MatchedSets:
    w = np.asarray(treatments, dtype=float)
    if fit.n != w.size:
        raise DimensionMismatch(f"fit covers {fit.n} units, got {w.size} treatments")
    ids = fit.block_ids()
    n1 = np.bincount(ids, weights=w, minlength=fit.K).astype(np.int64)
    n0 = fit.block_sizes - n1
    empty = np.flatnonzero((n1 == 0) | (n0 == 0))
    if empty.size:
        raise EmptyMatchedSet(
            f"blocks without both arms: {empty.tolist()}", blocks=empty.tolist()
        )
    counts = np.where(w == 1.0, n0[ids], n1[ids])
    return MatchedSets(ids, counts, n1, n0, w)


def ate_matching(ordered: OrderedSample, sets: MatchedSets) -> float:
    """Matching estimate from block aggregates.

    Each treated unit is compared with its block's control mean and each
    control with its block's treated mean.
    """
    y = ordered.y
    w = sets.treatments
    ids = sets.block_ids
    k = sets.treated_per_block.size
    s1 = np.bincount(ids, weights=w * y, minlength=k)
    s0 = np.bincount(ids, weights=(1.0 - w) * y, minlength=k)
    n1 = sets.treated_per_block.astype(float)
    n0 = sets.control_per_block.astype(float)
    per_block = (s1 - n1 * s0 / n0) + (n0 * s1 / n1 - s0)
    return float(per_block.sum() / y.size)


def ate_ipw(ordered: OrderedSample, fit: IsotonicFit) -> float:
    p = fit.fitted()
    if np.any((p <= 0.0) | (p >= 1.0)):
        bad = degenerate_blocks(fit)
        raise DegeneratePropensity(f"propensity 0 or 1 in blocks {bad}")
    y = ordered.y
    w = ordered.w
    return float(np.sum(w * y / p - (1.0 - w) * y / (1.0 - p)) / y.size)


def merge_degenerate_blocks(fit: IsotonicFit, treatments) -> IsotonicFit:
    """Merge every block with propensity 0 or 1 into its inward neighbour.

    Blocks in the lower half merge upward, the rest downward.  Values are
    recomputed from the combined treatment counts, which keeps them ordered.
    """
    w = np.asarray(treatments, dtype=float)
    sizes = list(fit.block_sizes)
    current = fit
    while True:
        bad = degenerate_blocks(current)
        if not bad:
            return current
        if len(sizes) == 1:
            raise EmptyMatchedSet("single block with only one arm; nothing to merge", [0])
        b = bad[0]
        nb = b + 1 if b < (len(sizes) - 1) / 2 else b - 1
        lo, hi = min(b, nb), max(b, nb)
        sizes[lo : hi + 1] = [sizes[lo] + sizes[hi]]
        current = fit_from_blocks(sizes, w, binary=True)
        if fit.boundary_index_values is not None:
            ends = current.block_starts + current.block_sizes - 1
            # recover per-position index values from the original boundaries
            current = IsotonicFit(
                current.block_starts,
                current.block_sizes,
                current.block_values,
                current.block_sums,
                current.block_treated_counts,
                _index_at(fit, ends),
            )


def _index_at(fit: IsotonicFit, positions: np.ndarray) -> np.ndarray:
    # block ends of a coarsened partition are always ends of original blocks
    orig_ends = fit.block_starts + fit.block_sizes - 1
    return fit.boundary_index_values[np.searchsorted(orig_ends, positions)]


def block_summary(fit: IsotonicFit) -> dict:
    return {
        "K": fit.K,
        "sizes": [int(s) for s in fit.block_sizes],
        "values": [float(v) for v in fit.block_values],
    }


def estimate_on_ordered(
    ordered: OrderedSample,
    options: EstimateOptions,
    method: str,
    alpha=None,
) -> AteReport:
    """Steps shared by both pipelines once the index ordering is fixed."""
    notes = []
    m, capped = window_size(ordered.n)
    if capped:
        notes.append(f"averaging window capped at floor(N/2)={m} for N={ordered.n}")
    fit = uc_isotonic_fit(ordered, m)
    bad = degenerate_blocks(fit)
    if bad and options.merge_degenerate:
        fit = merge_degenerate_blocks(fit, ordered.w)
        notes.append(f"merged degenerate blocks {bad} into inward neighbours")
    sets = build_matched_sets(fit, ordered.w)
    tau_m = ate_matching(ordered, sets)
    tau_w = ate_ipw(ordered, fit)
    return AteReport(
        method=method,
        n=ordered.n,
        k=ordered.base.k,
        tau_matching=tau_m,
        tau_ipw=tau_w,
        equivalence_gap=abs(tau_m - tau_w),
        blocks=block_summary(fit),
        degenerate_blocks=bad,
        alpha=None if alpha is None else [float(a) for a in alpha],
        warnings=notes,
        seed=options.seed,
    )


def estimate_ate_univariate(sample: Sample, options: Optional[EstimateOptions] = None) -> AteReport:
    """Isotonic propensity score matching estimate for a scalar covariate."""
    options = options or EstimateOptions()
    if sample.k != 1:
        raise DimensionMismatch(f"univariate pipeline needs k=1, got k={sample.k}")
    report = estimate_on_ordered(order_by_index(sample), options, "univariate")
    if options.bootstrap:
        from .bootstrap import bootstrap_distribution

        boot = bootstrap_distribution(
            sample,
            options.bootstrap,
            options.seed,
            method="univariate",
            level=options.level,
            options=options,
        )
        report.bootstrap = boot.to_dict()
        report.warnings.extend(boot.warnings)
    return report
