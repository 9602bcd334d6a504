"""Boundary-corrected (uniformly consistent) isotonic propensity fit."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InternalConsistencyError, WindowTooLarge
from .isotonic import IsotonicFit, evaluate_step, fit_from_blocks, pava_fit_grouped
from .sample import OrderedSample, window_size


@dataclass(frozen=True)
class UcTransformedResponses:
    values: np.ndarray
    m: int
    head_mean: float
    tail_mean: float


def endpoint_average_transform(responses, m: int) -> UcTransformedResponses:
    """Replace the first and the last ``m`` ordered responses by their means."""
    w = np.asarray(responses, dtype=float)
    n = w.size
    if m < 1:
        raise ValueError(f"window must be at least 1, got {m}")
    if 2 * m > n:
        raise WindowTooLarge(f"2m = {2 * m} exceeds N = {n}")
    head = float(w[:m].sum()) / m
    tail = float(w[n - m :].sum()) / m
    out = w.copy()
    out[:m] = head
    out[n - m :] = tail
    return UcTransformedResponses(out, m, head, tail)


def uc_isotonic_fit(
    ordered: OrderedSample, m: Optional[int] = None, responses=None
) -> IsotonicFit:
    """UC-isotonic fit on an ordered sample.

    PAVA runs on the endpoint-averaged treatments; the resulting partition is
    kept and each block's value and treated count are recomputed from the
    original treatments.  ``m`` defaults to the capped ``floor(N^(2/3))``.
    """
    w = ordered.w if responses is None else np.asarray(responses, dtype=float)
    n = w.size
    if m is None:
        m, _ = window_size(n)
    if 2 * m > n:
        raise WindowTooLarge(f"2m = {2 * m} exceeds N = {n}")

    # the averaged head/tail runs are passed pooled; see pava_fit_grouped
    head_sum = float(w[:m].sum())
    tail_sum = float(w[n - m :].sum())
    middle = w[m : n - m]
    sums = np.concatenate(([head_sum], middle, [tail_sum]))
    counts = np.concatenate(([m], np.ones(middle.size), [m]))
    binary = bool(np.all((w == 0.0) | (w == 1.0)))
    smooth = pava_fit_grouped(sums, counts, binary)

    fit = fit_from_blocks(smooth.block_sizes, w, ordered.index_values, binary=binary)
    if fit.block_sizes[0] < m or fit.block_sizes[-1] < m:
        raise InternalConsistencyError(
            f"averaging windows not absorbed whole: first={fit.block_sizes[0]}, "
            f"last={fit.block_sizes[-1]}, m={m}"
        )
    return fit


def degenerate_blocks(fit: IsotonicFit) -> list[int]:
    """Blocks whose value is exactly 0 or 1 (one arm missing)."""
    return [int(b) for b in np.flatnonzero((fit.block_values == 0.0) | (fit.block_values == 1.0))]


def sup_error(fit: IsotonicFit, truth: Callable, grid) -> float:
    grid = np.asarray(grid, dtype=float)
    est = np.asarray(evaluate_step(fit, grid), dtype=float)
    return float(np.max(np.abs(est - np.asarray(truth(grid), dtype=float))))
