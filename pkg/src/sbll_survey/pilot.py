"""Stage one: HT total, design-weighted spline fit, centred component pilots."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .design import InvalidDesignError, SampleData
from .splinebasis import PopulationFrame, SplineSpec, basis_matrix

RANK_TOL = 1e-10


class RankDeficiencyWarning(RuntimeWarning):
    pass


def ht_total(sample: SampleData) -> float:
    """Horvitz-Thompson total sum_s y_i / pi_i."""
    if sample.n == 0:
        raise ValueError("empty sample")
    if np.any(sample.pi <= 0):
        raise InvalidDesignError("non-positive inclusion probability")
    return float(np.sum(sample.responses / sample.pi))


def weighted_projection(A: np.ndarray, w: np.ndarray, tol: float = RANK_TOL):
    """Minimum-norm weighted least-squares operator.

    Returns ``(P, rank)`` with ``P @ y`` minimising sum_i w_i (y_i - A_i b)^2.
    Singular directions below ``tol`` times the largest are dropped.
    """
    sw = np.sqrt(w)
    U, s, Vt = np.linalg.svd(A * sw[:, None], full_matrices=False)
    keep = s > tol * s[0] if len(s) else s > 0
    P = (Vt[keep].T / s[keep]) @ (U[:, keep].T * sw[None, :])
    return P, int(keep.sum())


@dataclass
class PilotFit:
    """Stage-one spline fit.

    ``projection`` maps sample responses to ``coefficients`` and is kept so
    the fit can be differentiated with respect to y (g-weights).
    """

    coefficients: np.ndarray
    centering: np.ndarray
    spec: SplineSpec
    ht_total: float
    N: int
    projection: np.ndarray
    basis: np.ndarray  # sample basis matrix
    sample_x: np.ndarray  # rescaled sampled covariates, n x d
    weights: np.ndarray
    rank: int

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.spec.size

    def raw_components(self, X: np.ndarray) -> np.ndarray:
        """Uncentred components b_0a x_a + sum_j b_ja (x_a - k_ja)_+ at rescaled X."""
        G = basis_matrix(self.spec, X)
        out = np.empty((G.shape[0], self.spec.dim))
        for a, sl in enumerate(self.spec.blocks()):
            out[:, a] = G[:, sl] @ self.coefficients[sl]
        return out

    def components(self, X: np.ndarray) -> np.ndarray:
        """Centred pilot components at rescaled X, one column per covariate."""
        return self.raw_components(X) - self.centering[None, :]

    def sample_components(self) -> np.ndarray:
        return self.components(self.sample_x)


def fit_pilot(sample: SampleData, frame: PopulationFrame, spec: SplineSpec) -> PilotFit:
    """Design-weighted least squares on the truncated power basis."""
    Xs = frame.rescaled(spec.columns)[sample.indices]
    Gs = basis_matrix(spec, Xs)
    w = sample.weights
    P, rank = weighted_projection(Gs, w)
    if rank < spec.size:
        warnings.warn(
            f"spline Gram matrix has rank {rank} < {spec.size}; using minimum-norm solution",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    coef = P @ sample.responses
    N = sample.N
    fit = PilotFit(coef, np.zeros(spec.dim), spec, ht_total(sample), N, P, Gs, Xs, w, rank)
    raw = fit.raw_components(Xs)
    fit.centering = (w @ raw) / N
    return fit


def component_at(fit: PilotFit, alpha: int, x) -> np.ndarray | float:
    """Centred pilot component ``alpha`` (position in ``spec.columns``) at rescaled x."""
    x = np.asarray(x, dtype=float)
    sl = fit.spec.blocks()[alpha]
    knots = fit.spec.knots[alpha]
    b = fit.coefficients[sl]
    xf = np.atleast_1d(x)
    val = b[0] * xf + np.maximum(xf[:, None] - knots[None, :], 0.0) @ b[1:] - fit.centering[alpha]
    return float(val[0]) if x.ndim == 0 else val


def pseudo_responses(fit: PilotFit, sample: SampleData, alpha: int | None = None) -> np.ndarray:
    """y_i - t_HT/N - sum over other components of the pilot at x_i.

    With ``alpha=None`` returns an n x d matrix, one column per covariate.
    """
    comps = fit.sample_components()
    base = sample.responses - fit.ht_total / fit.N
    total = comps.sum(axis=1)
    Y = base[:, None] - (total[:, None] - comps)
    return Y if alpha is None else Y[:, alpha]


def pilot_fitted(fit: PilotFit, frame: PopulationFrame) -> np.ndarray:
    """Stage-one surface t_HT/N + sum_a m_a(x_ia) over the population."""
    X = frame.rescaled(fit.spec.columns)
    return fit.ht_total / fit.N + fit.components(X).sum(axis=1)
