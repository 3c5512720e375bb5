"""Population frames, knot selection and the linear truncated power basis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class PopulationFrame:
    """The finite population: N rows of d auxiliary covariates, optional y."""

    covariates: np.ndarray
    responses: np.ndarray | None = None
    column_names: list[str] | None = None
    ranges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("covariates must be an N x d matrix with N, d >= 1")
        self.covariates = X
        if self.responses is not None:
            self.responses = np.asarray(self.responses, dtype=float)
            if self.responses.shape != (X.shape[0],):
                raise ValueError("responses must have length N")
        if self.column_names is None:
            self.column_names = [f"x{k + 1}" for k in range(X.shape[1])]
        if len(self.column_names) != X.shape[1]:
            raise ValueError("one column name per covariate required")
        self.ranges = np.column_stack([X.min(axis=0), X.max(axis=0)])

    @property
    def size(self) -> int:
        return self.covariates.shape[0]

    @property
    def dim(self) -> int:
        return self.covariates.shape[1]

    @property
    def total(self) -> float:
        return float(self.responses.sum())

    def rescaled(self, columns: Sequence[int] | None = None) -> np.ndarray:
        """Covariates mapped to [0, 1] by the population min and max."""
        cols = list(range(self.dim)) if columns is None else list(columns)
        lo, hi = self.ranges[cols, 0], self.ranges[cols, 1]
        span = np.where(hi > lo, hi - lo, 1.0)
        return (self.covariates[:, cols] - lo) / span


@dataclass(frozen=True, eq=False)
class SplineSpec:
    """Knots (on the rescaled [0, 1] scale) for each covariate in ``columns``.

    ``knots[a]`` belongs to frame column ``columns[a]``. ``J`` is the nominal
    interior knot count; a covariate may carry fewer knots when its sampled
    values do not support J distinct ones.
    """

    columns: tuple[int, ...]
    knots: tuple[np.ndarray, ...]
    J: int

    @property
    def dim(self) -> int:
        return len(self.columns)

    @property
    def size(self) -> int:
        """Basis dimension G = 1 + sum over covariates of (knots + 1)."""
        return 1 + sum(len(k) + 1 for k in self.knots)

    def blocks(self) -> list[slice]:
        """Column slice of the basis owned by each covariate."""
        out, start = [], 1
        for k in self.knots:
            out.append(slice(start, start + len(k) + 1))
            start += len(k) + 1
        return out


# Multiplier c in the knot rule. Smaller than 1 keeps the pilot surface from
# absorbing noise at the sample sizes of interest (50 to 200).
DEFAULT_KNOT_CONSTANT = 0.5


def knot_count(n: int, d: int, c: float = DEFAULT_KNOT_CONSTANT) -> int:
    """Number of interior knots min([c n^{1/4} ln n] + 1, [(n/2 - 1)/d - 1]), floored at 0."""
    if d < 1:
        return 0
    a = math.floor(c * n ** 0.25 * math.log(n)) + 1
    b = math.floor((n / 2 - 1) / d - 1)
    return max(0, min(a, b))


def _place_knots(values: np.ndarray, J: int) -> np.ndarray:
    distinct = np.unique(values)
    if J == 0 or len(distinct) < 2:
        return np.empty(0)
    knots = np.quantile(values, np.arange(1, J + 1) / (J + 1))
    if np.all(np.diff(knots) > 0) and knots[0] > 0 and knots[-1] < 1:
        return knots
    # ties: move each knot to the nearest unused midpoint between distinct values
    mids = 0.5 * (distinct[1:] + distinct[:-1])
    mids = mids[(mids > 0) & (mids < 1)]
    chosen, last = [], -1
    for q in knots:
        free = np.arange(last + 1, len(mids))
        if len(free) == 0:
            break
        last = free[np.argmin(np.abs(mids[free] - q))]
        chosen.append(mids[last])
    return np.array(chosen)


def knots_for(frame: PopulationFrame, sample, J: int, columns: Sequence[int] | None = None) -> SplineSpec:
    """Quantile knots from the sampled, rescaled covariate values."""
    if J < 0:
        raise ValueError("J must be non-negative")
    cols = tuple(range(frame.dim)) if columns is None else tuple(int(c) for c in columns)
    Xs = frame.rescaled(cols)[sample.indices]
    knots = tuple(_place_knots(Xs[:, a], J) for a in range(len(cols)))
    return SplineSpec(cols, knots, J)


def basis_matrix(spec: SplineSpec, X: np.ndarray) -> np.ndarray:
    """Rows [1, x_1, (x_1 - k_11)_+, ..., x_d, (x_d - k_1d)_+, ...] for rescaled X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.empty((X.shape[0], spec.size))
    out[:, 0] = 1.0
    for a, sl in enumerate(spec.blocks()):
        x = X[:, a]
        out[:, sl.start] = x
        if len(spec.knots[a]):
            out[:, sl.start + 1:sl.stop] = np.maximum(x[:, None] - spec.knots[a][None, :], 0.0)
    return out


def basis_row(spec: SplineSpec, x) -> np.ndarray:
    return basis_matrix(spec, np.asarray(x, dtype=float).reshape(1, -1))[0]
