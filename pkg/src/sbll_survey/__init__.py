"""Spline-backfitted local linear (SBLL) model-assisted estimation of survey totals."""

__version__ = "0.1.0"

from .baselines import ht_report, lreg_total, ls_total
from .design import SampleData, SamplingDesign, SRSDesign, census_design, delta, draw_srs, make_srs
from .estimators import ConfigurationError, default_spec, estimate
from .pilot import component_at, fit_pilot, ht_total, pseudo_responses
from .sbll import (
    EstimateReport,
    KernelSpec,
    SbllFit,
    g_weights,
    local_linear_at,
    plugin_bandwidth,
    rot_bandwidth,
    rot_kernel,
    sbll_fit,
    sbll_total,
    variance_g,
    variance_ht,
)
from .selection import backward_select, bic_for_subset, forward_select
from .splinebasis import DEFAULT_KNOT_CONSTANT, PopulationFrame, SplineSpec, basis_row, knot_count, knots_for

__all__ = [
    "DEFAULT_KNOT_CONSTANT",
    "ConfigurationError", "EstimateReport", "KernelSpec", "PopulationFrame", "SRSDesign", "SampleData",
    "SamplingDesign", "SbllFit", "SplineSpec", "backward_select", "basis_row", "bic_for_subset",
    "census_design", "component_at", "default_spec", "delta", "draw_srs", "estimate", "fit_pilot",
    "forward_select", "g_weights", "ht_report", "ht_total", "knot_count", "knots_for", "local_linear_at",
    "lreg_total", "ls_total", "make_srs", "plugin_bandwidth", "pseudo_responses", "rot_bandwidth", "rot_kernel", "sbll_fit",
    "sbll_total", "variance_g", "variance_ht",
]
