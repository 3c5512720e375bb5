"""Population-based ("oracle") SBLL fit, its difference total and the AMSE.

The oracle is the sample pipeline run on a census with unit weights, so the
two can never drift apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .design import SampleData, SamplingDesign, census_design
from .sbll import DEFAULT_BANDWIDTH_RULE, DEFAULT_BANDWIDTH_SCALE, KernelSpec, difference_total, rot_kernel, sbll_fit
from .splinebasis import DEFAULT_KNOT_CONSTANT, PopulationFrame, SplineSpec, knot_count, knots_for

GENERAL_AMSE_CAP = 5000


class TooLargeError(ValueError):
    pass


@dataclass
class OracleFit:
    coefficients: np.ndarray
    components: np.ndarray  # centred pilot components over U
    fitted: np.ndarray
    component_fits: np.ndarray
    responses: np.ndarray
    spec: SplineSpec
    kernel: KernelSpec

    @property
    def residuals(self) -> np.ndarray:
        return self.responses - self.fitted


def census_sample(frame: PopulationFrame) -> SampleData:
    if frame.responses is None:
        raise ValueError("oracle fit needs population responses")
    return SampleData(np.arange(frame.size), frame.responses, census_design(frame.size))


def oracle_fit(frame: PopulationFrame, spec: SplineSpec, kernel: KernelSpec) -> OracleFit:
    """Unweighted spline pilot and local linear stage on the whole population."""
    census = census_sample(frame)
    fit = sbll_fit(census, frame, spec, kernel, with_weights=False)
    comps = fit.pilot.components(frame.rescaled(spec.columns))
    return OracleFit(fit.pilot.coefficients, comps, fit.fitted, fit.component_fits,
                     frame.responses.copy(), spec, kernel)


def oracle_for(frame: PopulationFrame, n: int, columns: Sequence[int] | None = None,
               knot_constant: float = DEFAULT_KNOT_CONSTANT,
               bandwidth_scale: float = DEFAULT_BANDWIDTH_SCALE,
               bandwidth_rule: str = DEFAULT_BANDWIDTH_RULE) -> OracleFit:
    """Oracle with the tuning a sample of size ``n`` would get.

    Knots sit at population quantiles. Bandwidths come from the chosen rule
    applied to the census and are moved to the rate n^(-1/5); plug-in
    bandwidths stay capped at the full range.
    """
    cols = list(range(frame.dim)) if columns is None else list(columns)
    census = census_sample(frame)
    spec = knots_for(frame, census, knot_count(n, len(cols), knot_constant) if cols else 0, cols)
    rate = (frame.size / n) ** 0.2
    hs = rot_kernel(census, frame, spec, bandwidth_scale, bandwidth_rule).bandwidths * rate
    if bandwidth_rule == "plugin":
        hs = np.minimum(hs, 1.0)
    return oracle_fit(frame, spec, KernelSpec(hs))


def oracle_total(fit: OracleFit, sample: SampleData) -> float:
    return difference_total(fit.fitted, sample)


def amse(fit: OracleFit, design: SamplingDesign, exact: bool = False) -> float:
    """Anticipated MSE of N^-1 times the total from oracle residuals.

    Under SRS the default is (1 - f) / (n (N - 1)) sum_U r_i^2. With
    ``exact=True`` (or a non-SRS design) the full double sum
    N^-2 sum_{i,j in U} Delta_ij (r_i / pi_i)(r_j / pi_j) is returned; for SRS
    it equals the closed form with r centred at its population mean.
    """
    r = fit.residuals
    N = len(r)
    if design.is_srs:
        f = design.fraction
        n = design.sample_size
        if N == 1:
            return 0.0
        if exact:
            rc = r - r.mean()
            return float((1 - f) / (n * (N - 1)) * np.sum(rc * rc))
        return float((1 - f) / (n * (N - 1)) * np.sum(r * r))
    if N > GENERAL_AMSE_CAP:
        raise TooLargeError(f"double-sum AMSE is O(N^2); N={N} exceeds cap {GENERAL_AMSE_CAP}")
    idx = np.arange(N)
    pi = design.first_order(idx)
    e = r / pi
    Delta = design.joint_matrix(idx) - np.outer(pi, pi)
    return float(e @ Delta @ e / N**2)


def oracle_bic(fit: OracleFit, design: SamplingDesign, n: int | None = None) -> float:
    """log AMSE + (J_r / n) log n with J_r = 1 + sum over covariates of (J + 1)."""
    n = design.sample_size if n is None else n
    Jr = 1 + fit.spec.dim * (fit.spec.J + 1)
    return math.log(max(amse(fit, design), 1e-300)) + Jr / n * math.log(n)
