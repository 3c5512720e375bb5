"""One-call estimation with default tuning (knot rule and plug-in bandwidth)."""

from __future__ import annotations

from typing import Sequence

from .baselines import ht_report, lreg_total, ls_total
from .design import SampleData
from .pilot import fit_pilot
from .sbll import (DEFAULT_BANDWIDTH_RULE, DEFAULT_BANDWIDTH_SCALE, EstimateReport, rot_kernel, sbll_fit,
                   sbll_report)
from .splinebasis import DEFAULT_KNOT_CONSTANT, PopulationFrame, SplineSpec, knot_count, knots_for

METHODS = ("ht", "lreg", "ls", "sbll")


class ConfigurationError(ValueError):
    """Tuning or model size incompatible with the sample."""


def default_spec(sample: SampleData, frame: PopulationFrame, columns: Sequence[int] | None = None,
                 knot_constant: float = DEFAULT_KNOT_CONSTANT) -> SplineSpec:
    cols = list(range(frame.dim)) if columns is None else list(columns)
    J = knot_count(sample.n, len(cols), knot_constant) if cols else 0
    spec = knots_for(frame, sample, J, cols)
    if spec.size > sample.n:
        raise ConfigurationError(
            f"basis dimension {spec.size} exceeds sample size {sample.n}; "
            "use fewer covariates or a smaller knot constant"
        )
    return spec


def estimate(sample: SampleData, frame: PopulationFrame, method: str = "sbll",
             columns: Sequence[int] | None = None, knot_constant: float = DEFAULT_KNOT_CONSTANT,
             bandwidth_scale: float = DEFAULT_BANDWIDTH_SCALE,
             bandwidth_rule: str = DEFAULT_BANDWIDTH_RULE) -> EstimateReport:
    method = method.lower()
    if method not in METHODS:
        raise ConfigurationError(f"unknown estimator {method!r}")
    if method == "ht":
        return ht_report(sample)
    if method == "lreg":
        return lreg_total(sample, frame, columns)
    spec = default_spec(sample, frame, columns, knot_constant)
    if method == "ls":
        return ls_total(sample, frame, spec)
    pilot = fit_pilot(sample, frame, spec)
    kernel = rot_kernel(sample, frame, spec, bandwidth_scale, bandwidth_rule, pilot)
    return sbll_report(sbll_fit(sample, frame, spec, kernel, pilot=pilot), sample)
