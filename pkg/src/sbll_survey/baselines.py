"""Comparator estimators: linear regression (GREG) and the one-step spline."""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np

from .design import SampleData
from .pilot import PilotFit, RankDeficiencyWarning, fit_pilot, ht_total, pilot_fitted, weighted_projection
from .sbll import EstimateReport, difference_total, g_residual_variance, ht_variance
from .splinebasis import PopulationFrame, SplineSpec, basis_matrix


def _report(method, fitted, g, sample, diagnostics) -> EstimateReport:
    r = sample.responses - fitted[sample.indices]
    return EstimateReport(
        total=difference_total(fitted, sample),
        variance_ht=ht_variance(r, sample),
        variance_g=g_residual_variance(g, r, sample),
        variance_g_double_sum=ht_variance(g * r, sample),
        ht_total=ht_total(sample),
        n=sample.n,
        N=sample.N,
        method=method,
        diagnostics=diagnostics,
    )


def _corrections(sample: SampleData) -> np.ndarray:
    c = np.ones(sample.N)
    c[sample.indices] -= 1.0 / sample.pi
    return c


def lreg_fit(sample: SampleData, frame: PopulationFrame, columns: Sequence[int] | None = None):
    """Weighted linear fit of y on [1, x]; returns (fitted over U, g-weights, rank)."""
    cols = list(range(frame.dim)) if columns is None else list(columns)
    XU = np.column_stack([np.ones(frame.size), frame.covariates[:, cols]])
    Xs = XU[sample.indices]
    P, rank = weighted_projection(Xs, sample.weights)
    if rank < XU.shape[1]:
        warnings.warn("linear regression design is rank deficient", RankDeficiencyWarning, stacklevel=2)
    fitted = XU @ (P @ sample.responses)
    g = 1.0 + sample.pi * (P.T @ (XU.T @ _corrections(sample)))
    return fitted, g, rank


def lreg_total(sample: SampleData, frame: PopulationFrame, columns: Sequence[int] | None = None) -> EstimateReport:
    """Regression (GREG) estimator with an intercept and all chosen covariates."""
    fitted, g, rank = lreg_fit(sample, frame, columns)
    return _report("lreg", fitted, g, sample, {"rank": rank})


def ls_g_weights(pilot: PilotFit, sample: SampleData, frame: PopulationFrame) -> np.ndarray:
    # m_i = w.y/N + sum_a (Gamma_U,i - w^T Gamma_s / N) D_a P y
    N = sample.N
    GU = basis_matrix(pilot.spec, frame.rescaled(pilot.spec.columns))
    c = _corrections(sample)
    row = c @ GU - c.sum() * (sample.weights @ pilot.basis) / N
    row[0] = 0.0
    return 1.0 + sample.pi * (c.sum() * sample.weights / N + pilot.projection.T @ row)


def ls_total(sample: SampleData, frame: PopulationFrame, spec: SplineSpec) -> EstimateReport:
    """Difference estimator on the stage-one spline surface alone."""
    pilot = fit_pilot(sample, frame, spec)
    fitted = pilot_fitted(pilot, frame)
    g = ls_g_weights(pilot, sample, frame)
    return _report("ls", fitted, g, sample, {"rank": pilot.rank, "basis_size": spec.size})


def ht_report(sample: SampleData) -> EstimateReport:
    """HT estimator wrapped as a report.

    ``variance_ht`` is the HT variance of y itself; ``variance_g`` uses the
    intercept-only residuals y_i - t_HT / N with unit g-weights.
    """
    rep = _report("ht", np.zeros(sample.N), np.ones(sample.n), sample, {})
    r = sample.responses - rep.ht_total / sample.N
    rep.variance_g = g_residual_variance(np.ones(sample.n), r, sample)
    rep.variance_g_double_sum = ht_variance(r, sample)
    return rep
