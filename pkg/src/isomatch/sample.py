"""Sample container, CSV ingestion, index ordering and the N^(2/3) window."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateSample,
    DimensionMismatch,
    MissingColumn,
    NonBinaryTreatment,
    NonFiniteValue,
    NonUnitAlpha,
)

UNIT_NORM_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Sample:
    """Outcomes ``y``, binary treatments ``w`` and an ``N x k`` covariate matrix ``x``.

    Arrays are copied and made read-only on construction.  A one-dimensional
    ``x`` is promoted to a single column.
    """

    y: np.ndarray
    w: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        w = np.asarray(self.w, dtype=float).reshape(-1)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise DimensionMismatch("covariates must be a vector or an N x k matrix")
        n = y.shape[0]
        if w.shape[0] != n or x.shape[0] != n:
            raise DimensionMismatch(
                f"length mismatch: y={n}, w={w.shape[0]}, x={x.shape[0]}"
            )
        if n < 2:
            raise DegenerateSample(f"need at least 2 records, got {n}")
        if x.shape[1] < 1:
            raise DimensionMismatch("at least one covariate column is required")
        for name, arr in (("y", y), ("w", w), ("x", x)):
            bad = ~np.isfinite(arr)
            if bad.any():
                row = int(np.argwhere(bad)[0][0])
                raise NonFiniteValue(f"non-finite value in {name} at row {row}", row=row)
        off = (w != 0.0) & (w != 1.0)
        if off.any():
            row = int(np.flatnonzero(off)[0])
            raise NonBinaryTreatment(
                f"treatment at row {row} is {w[row]!r}, expected 0 or 1", row=row
            )
        treated = int(w.sum())
        if treated == 0 or treated == n:
            arm = "control" if treated == n else "treated"
            raise DegenerateSample(f"sample has no {arm} units")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "w", _frozen(w))
        object.__setattr__(self, "x", _frozen(x))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[1]

    def take(self, rows: np.ndarray) -> "Sample":
        return Sample(self.y[rows], self.w[rows], self.x[rows])


@dataclass(frozen=True)
class OrderedSample:
    """A sample sorted (stably) by a scalar index.

    ``permutation[j]`` is the original row of the record at sorted position
    ``j``.  ``tie_groups`` lists ``(start, stop)`` position ranges of runs of
    equal index values with length at least two.
    """

    base: Sample
    index_values: np.ndarray
    permutation: np.ndarray
    tie_groups: tuple = field(default=())

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def y(self) -> np.ndarray:
        return self.base.y[self.permutation]

    @property
    def w(self) -> np.ndarray:
        return self.base.w[self.permutation]

    @property
    def x(self) -> np.ndarray:
        return self.base.x[self.permutation]

    def inverse_permutation(self) -> np.ndarray:
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(self.permutation.size)
        return inv


def _tie_runs(sorted_values: np.ndarray) -> tuple:
    if sorted_values.size < 2:
        return ()
    same = sorted_values[1:] == sorted_values[:-1]
    runs = []
    j = 0
    n = sorted_values.size
    while j < n - 1:
        if same[j]:
            start = j
            while j < n - 1 and same[j]:
                j += 1
            runs.append((start, j + 1))
        j += 1
    return tuple(runs)


def check_alpha(alpha, k: int) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.size != k:
        raise DimensionMismatch(f"alpha has length {alpha.size}, covariates have k={k}")
    if abs(math.sqrt(float(alpha @ alpha)) - 1.0) > UNIT_NORM_TOL:
        raise NonUnitAlpha(f"alpha must have unit norm, got {np.linalg.norm(alpha)!r}")
    return alpha


def order_by_index(sample: Sample, alpha=None) -> OrderedSample:
    """Stable sort of ``sample`` by ``x`` (k=1) or by ``x @ alpha``."""
    if alpha is None:
        if sample.k != 1:
            raise DimensionMismatch("alpha is required when k > 1")
        index = sample.x[:, 0]
    else:
        index = sample.x @ check_alpha(alpha, sample.k)
    perm = np.argsort(index, kind="stable")
    sorted_index = _frozen(index[perm])
    perm.setflags(write=False)
    return OrderedSample(sample, sorted_index, perm, _tie_runs(sorted_index))


def _icbrt_floor_square(n: int) -> int:
    target = n * n
    m = int(round(target ** (1.0 / 3.0)))
    while m > 0 and m**3 > target:
        m -= 1
    while (m + 1) ** 3 <= target:
        m += 1
    return m


def window_size(n: int) -> tuple[int, bool]:
    """Return ``(m, capped)`` where ``m = floor(n^(2/3))`` capped at ``n // 2``."""
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    m = _icbrt_floor_square(n)
    if 2 * m > n:
        return n // 2, True
    return m, False


def floor_pow_two_thirds(n: int) -> int:
    """Largest ``m`` with ``m**3 <= n**2``, exact integers, capped at ``n // 2``.

    A warning is emitted when the cap binds, which only happens for n < 8.
    """
    m, capped = window_size(n)
    if capped:
        warnings.warn(
            f"averaging window floor(N^(2/3)) exceeds N/2 at N={n}; capped to {m}",
            RuntimeWarning,
            stacklevel=2,
        )
    return m


def load_csv(
    path: str | Path,
    outcome: str,
    treatment: str,
    covariates: Sequence[str],
) -> Sample:
    """Read a UTF-8 CSV with a header row into a :class:`Sample`.

    Row numbers in error messages count data rows from 0.
    """
    covariates = list(covariates)
    if not covariates:
        raise MissingColumn("at least one covariate column is required")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, no header row") from None
        wanted = [outcome, treatment, *covariates]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise MissingColumn(f"columns not found in header: {', '.join(missing)}")
        cols = [header.index(c) for c in wanted]
        rows = []
        for r, rec in enumerate(reader):
            if not rec or all(not f.strip() for f in rec):
                continue
            vals = []
            for c, name in zip(cols, wanted):
                raw = rec[c].strip() if c < len(rec) else ""
                try:
                    v = float(raw)
                except ValueError:
                    raise NonFiniteValue(
                        f"row {r}: column {name!r} value {raw!r} is missing or not numeric",
                        row=r,
                    ) from None
                if not math.isfinite(v):
                    raise NonFiniteValue(f"row {r}: column {name!r} is non-finite", row=r)
                vals.append(v)
            if vals[1] not in (0.0, 1.0):
                raise NonBinaryTreatment(
                    f"row {r}: treatment {rec[cols[1]].strip()!r} is not 0 or 1", row=r
                )
            rows.append(vals)
    if not rows:
        raise DegenerateSample(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    return Sample(y=data[:, 0], w=data[:, 1], x=data[:, 2:])
