"""Pool-adjacent-violators isotonic regression with block bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def _pava_merge(sums, counts):
    """Stack PAVA over initial blocks given as (sum, count) pairs.

    Blocks merge while the left mean is >= the right mean, so equal adjacent
    means are pooled and the surviving means strictly increase.  The
    comparison uses the same rounded means that become block values, so the
    strict increase holds in floating point too.

    Returns the merged ``(sums, counts, K)``; only the first ``K`` entries
    of the returned arrays are meaningful.
    """
    n = sums.shape[0]
    out_s = np.empty(n, dtype=np.float64)
    out_c = np.empty(n, dtype=np.float64)
    top = -1
    for i in range(n):
        top += 1
        out_s[top] = sums[i]
        out_c[top] = counts[i]
        while top > 0 and out_s[top - 1] / out_c[top - 1] >= out_s[top] / out_c[top]:
            out_s[top - 1] += out_s[top]
            out_c[top - 1] += out_c[top]
            top -= 1
    return out_s, out_c, top + 1


@numba.njit(cache=True, nogil=True)
def _pava_fitted(y):
    """Fitted vector of the unweighted isotonic regression of ``y``."""
    n = y.shape[0]
    s, c, k = _pava_merge(y, np.ones(n))
    out = np.empty(n, dtype=np.float64)
    pos = 0
    for b in range(k):
        cnt = int(c[b])
        v = s[b] / c[b]
        for j in range(cnt):
            out[pos + j] = v
        pos += cnt
    return out


@dataclass(frozen=True)
class IsotonicFit:
    """Ordered block partition of an isotonic fit.

    Positions are 0-based into the ordered sample.  ``block_sums`` holds the
    per-block sums of the responses the values were computed from, so that
    ``block_values == block_sums / block_sizes``.
    """

    block_starts: np.ndarray
    block_sizes: np.ndarray
    block_values: np.ndarray
    block_sums: np.ndarray
    block_treated_counts: Optional[np.ndarray] = None
    boundary_index_values: Optional[np.ndarray] = None

    @property
    def K(self) -> int:
        return int(self.block_sizes.size)

    @property
    def n(self) -> int:
        return int(self.block_sizes.sum())

    def fitted(self) -> np.ndarray:
        return np.repeat(self.block_values, self.block_sizes)

    def block_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.K), self.block_sizes)

    def with_index_values(self, sorted_index: np.ndarray) -> "IsotonicFit":
        ends = self.block_starts + self.block_sizes - 1
        return IsotonicFit(
            self.block_starts,
            self.block_sizes,
            self.block_values,
            self.block_sums,
            self.block_treated_counts,
            np.asarray(sorted_index, dtype=float)[ends],
        )


def _is_binary(y: np.ndarray) -> bool:
    return bool(np.all((y == 0.0) | (y == 1.0)))


def fit_from_blocks(
    sizes, responses, index_values=None, binary: Optional[bool] = None
) -> IsotonicFit:
    """Build an :class:`IsotonicFit` for a given partition of ordered ``responses``.

    Block values are the block means of ``responses``; no monotonicity is
    imposed.  Used to rebuild block statistics from original treatments.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    responses = np.asarray(responses, dtype=float)
    if sizes.sum() != responses.size or np.any(sizes < 1):
        raise ValueError("block sizes must be positive and sum to the number of responses")
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
    sums = np.add.reduceat(responses, starts)
    if binary is None:
        binary = _is_binary(responses)
    fit = IsotonicFit(
        block_starts=starts,
        block_sizes=sizes,
        block_values=sums / sizes,
        block_sums=sums,
        block_treated_counts=sums.astype(np.int64) if binary else None,
    )
    if index_values is not None:
        fit = fit.with_index_values(index_values)
    return fit


def _from_merged(s, c, k, binary, index_values) -> IsotonicFit:
    sums = s[:k].copy()
    sizes = c[:k].astype(np.int64)
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
    fit = IsotonicFit(
        block_starts=starts,
        block_sizes=sizes,
        block_values=sums / sizes,
        block_sums=sums,
        block_treated_counts=sums.astype(np.int64) if binary else None,
    )
    if index_values is not None:
        fit = fit.with_index_values(index_values)
    return fit


def pava_fit(responses, index_values=None) -> IsotonicFit:
    """Least-squares non-decreasing fit of ``responses`` (already ordered).

    Parameters
    ----------
    responses : array_like
        Finite responses in index order.
    index_values : array_like, optional
        Sorted index values matching ``responses``; stored per block for
        :func:`evaluate_step`.

    Returns
    -------
    IsotonicFit
        Blocks with strictly increasing values.  Treated counts are filled
        when every response is 0 or 1.
    """
    y = np.ascontiguousarray(responses, dtype=np.float64).reshape(-1)
    if y.size == 0:
        raise ValueError("pava_fit needs at least one response")
    s, c, k = _pava_merge(y, np.ones(y.size))
    return _from_merged(s, c, k, _is_binary(y), index_values)


def pava_fit_grouped(sums, counts, binary: bool, index_values=None) -> IsotonicFit:
    """PAVA over pre-pooled runs of equal responses.

    A run of ``c`` consecutive equal responses with total ``s`` is passed as
    one ``(s, c)`` pair.  Because equal neighbours are always pooled, the
    result is the same partition as running :func:`pava_fit` on the expanded
    vector, but with exact integer sums when the responses are averages of
    binary data.
    """
    s, c, k = _pava_merge(
        np.ascontiguousarray(sums, dtype=np.float64),
        np.ascontiguousarray(counts, dtype=np.float64),
    )
    return _from_merged(s, c, k, binary, index_values)


def maxmin_oracle(responses, i: int) -> float:
    """Max over ``s <= i`` of min over ``t >= i`` of the window mean ``y[s..t]``.

    ``i`` is 0-based.  Exhaustive O(N^2); meant as a test oracle.
    """
    y = np.asarray(responses, dtype=float)
    n = y.size
    if not 0 <= i < n:
        raise IndexError(f"position {i} out of range for N={n}")
    csum = np.concatenate(([0.0], np.cumsum(y)))
    s = np.arange(i + 1)[:, None]
    t = np.arange(i, n)[None, :]
    means = (csum[t + 1] - csum[s]) / (t - s + 1)
    return float(means.min(axis=1).max())


def evaluate_step(fit: IsotonicFit, x) -> np.ndarray | float:
    """Evaluate the right-continuous-from-the-left step function at ``x``.

    On ``(X_{i-1}, X_i]`` the value at ``X_i`` applies; above the largest
    index value the last block value is returned and below the smallest the
    first block value.
    """
    if fit.boundary_index_values is None:
        raise ValueError("fit carries no index values; build it with index_values")
    pos = np.searchsorted(fit.boundary_index_values, x, side="left")
    pos = np.minimum(pos, fit.K - 1)
    out = fit.block_values[pos]
    if np.ndim(x) == 0:
        return float(out)
    return out
