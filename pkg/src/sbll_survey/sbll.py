"""Stage two: local linear re-smoothing, the SBLL total, g-weights and variances.

Every stage of the estimator is linear in the sample responses, so the
population-summed prediction weights are accumulated while predicting and
turned into g-weights without refitting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import InvalidDesignError, SampleData
from .pilot import PilotFit, fit_pilot, pseudo_responses
from .splinebasis import PopulationFrame, SplineSpec

COND_LIMIT = 1e12
WIDEN = 1.01  # widened windows end just past the point they must reach
MAX_LEVERAGE = 3.0
LEVERAGE_STEP = 1.25
DEFAULT_BANDWIDTH_SCALE = 1.0
BANDWIDTH_RULES = ("plugin", "spread")
DEFAULT_BANDWIDTH_RULE = "plugin"
QUARTIC_CONSTANT = 35.0  # R(K) / mu_2(K)^2 for the biweight kernel
_CHUNK = 1 << 20  # max elements of one prediction block


def quartic(u):
    """Biweight kernel (15/16)(1 - u^2)^2 on [-1, 1]."""
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) < 1.0, 0.9375 * (1.0 - u * u) ** 2, 0.0)


@dataclass
class KernelSpec:
    """Quartic kernel with one bandwidth per covariate (rescaled units)."""

    bandwidths: np.ndarray
    name: str = "quartic"

    def __post_init__(self):
        self.bandwidths = np.atleast_1d(np.asarray(self.bandwidths, dtype=float))
        if np.any(self.bandwidths <= 0):
            raise ValueError("bandwidths must be positive")

    def __call__(self, u):
        return quartic(u)


def _gap_floor(x: np.ndarray) -> float:
    """Smallest h whose window at every sampled value reaches another one."""
    u = np.unique(x)
    gaps = np.diff(u)
    nearest = np.minimum(np.r_[np.inf, gaps], np.r_[gaps, np.inf])
    return float(nearest.max() * (1.0 + 1e-3))


def rot_bandwidth(sample: SampleData, frame: PopulationFrame, column: int,
                  scale: float = DEFAULT_BANDWIDTH_SCALE) -> float:
    """Spread rule scale * sigma_w * n^(-1/5) on the rescaled axis.

    sigma_w is the design-weighted standard deviation of the sampled values.
    The result is widened, if needed, so that the kernel window centred at
    any sampled value covers at least one other distinct sampled value.
    """
    x = frame.rescaled([column])[sample.indices, 0]
    if len(np.unique(x)) < 2:
        return 1.0
    w = sample.weights
    mean = w @ x / w.sum()
    sd = np.sqrt(w @ (x - mean) ** 2 / w.sum())
    return max(scale * sd * sample.n ** -0.2, _gap_floor(x))


def plugin_bandwidth(x: np.ndarray, y: np.ndarray, w: np.ndarray, scale: float = DEFAULT_BANDWIDTH_SCALE) -> float:
    """Plug-in rule of thumb for a local linear fit of y on x in [0, 1].

    A weighted global quartic supplies the residual variance s2 and the mean
    squared second derivative theta; h = scale * (35 s2 / (n theta))^(1/5),
    capped at 1 (the whole rescaled range, i.e. close to a global line).
    """
    n = len(x)
    if len(np.unique(x)) < 6:
        return 1.0
    V = np.vander(x, 5, increasing=True)
    sw = np.sqrt(w)
    beta = np.linalg.lstsq(V * sw[:, None], y * sw, rcond=None)[0]
    r = y - V @ beta
    s2 = (w @ (r * r)) / w.sum() * n / (n - 5)
    m2 = 2 * beta[2] + 6 * beta[3] * x + 12 * beta[4] * x * x
    theta = (w @ (m2 * m2)) / w.sum()
    if not theta > 1e-20 * (w @ (y * y)) / w.sum():  # no curvature beyond rounding
        return 1.0
    return float(min(1.0, scale * (QUARTIC_CONSTANT * s2 / (n * theta)) ** 0.2))


def rot_kernel(sample: SampleData, frame: PopulationFrame, spec: SplineSpec,
               scale: float = DEFAULT_BANDWIDTH_SCALE, rule: str = DEFAULT_BANDWIDTH_RULE,
               pilot: PilotFit | None = None) -> KernelSpec:
    """Bandwidths for every covariate of ``spec``.

    ``rule="plugin"`` applies :func:`plugin_bandwidth` to each component's
    pseudo-responses (fitting the pilot unless one is given); ``"spread"``
    uses :func:`rot_bandwidth`, which ignores y. Both keep the gap floor.
    """
    if rule == "spread":
        return KernelSpec([rot_bandwidth(sample, frame, c, scale) for c in spec.columns])
    if rule != "plugin":
        raise ValueError(f"unknown bandwidth rule {rule!r}")
    pilot = pilot or fit_pilot(sample, frame, spec)
    Y = pseudo_responses(pilot, sample)
    hs = []
    for a in range(spec.dim):
        x = pilot.sample_x[:, a]
        if len(np.unique(x)) < 2:
            hs.append(1.0)
            continue
        hs.append(max(plugin_bandwidth(x, Y[:, a], sample.weights, scale), _gap_floor(x)))
    return KernelSpec(hs)


@dataclass
class SmootherStats:
    points: int = 0
    local_constant: int = 0
    expanded: int = 0

    def add(self, other: "SmootherStats"):
        self.points += other.points
        self.local_constant += other.local_constant
        self.expanded += other.expanded


def _widen(xs, x0, h):
    """Per-point bandwidths reaching at least two distinct sample values."""
    u = np.unique(xs)
    hr = np.full(len(x0), float(h))
    if len(u) < 2:
        return hr, 0
    lo = np.searchsorted(u, x0 - h, side="right")
    hi = np.searchsorted(u, x0 + h, side="left")
    short = np.flatnonzero(hi - lo < 2)
    for k in short:
        second = np.partition(np.abs(u - x0[k]), 1)[1]
        hr[k] = max(h, second * WIDEN)
    return hr, len(short)


def _moments(D, w, hr, kernel):
    U = D / hr[:, None]
    Kw = kernel(U) * (w[None, :] / hr[:, None])
    S0 = Kw.sum(axis=1)
    S1 = (Kw * U).sum(axis=1)
    S2 = (Kw * U * U).sum(axis=1)
    return U, Kw, S0, S1, S2


def _high_leverage(S0, S1, S2):
    # |x0 - weighted window mean| > MAX_LEVERAGE weighted window sds
    with np.errstate(invalid="ignore", divide="ignore"):
        m = S1 / S0
        v = S2 / S0 - m * m
    return (S0 > 0) & (m * m > MAX_LEVERAGE**2 * np.maximum(v, 0.0))


def local_linear_weights(xs, w, h, x0, kernel=quartic):
    """Rows of the weighted local linear smoother.

    Row k holds the weights l_k with l_k @ y equal to the intercept of the
    kernel- and design-weighted line fitted around ``x0[k]``.

    Windows are adapted per point, using the covariate values only: a
    window with fewer than two distinct sample values is widened just past
    the second nearest one, and a window whose centre lies more than
    ``MAX_LEVERAGE`` weighted standard deviations from its weighted mean
    (a line extrapolated from a tight cluster) is widened in steps of
    ``LEVERAGE_STEP``. Lines are therefore reproduced everywhere. A local
    constant is used only if the covariate takes one sampled value or the
    2x2 system is numerically singular.
    """
    xs = np.asarray(xs, dtype=float)
    w = np.asarray(w, dtype=float)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    D = xs[None, :] - x0[:, None]
    hr, widened = _widen(xs, x0, h)
    stats = SmootherStats(points=len(x0), expanded=widened)

    U, Kw, S0, S1, S2 = _moments(D, w, hr, kernel)
    empty = S0 <= 0
    if empty.any():
        # single sampled value: reach the nearest point
        stats.expanded += int(empty.sum())
        hr[empty] = np.abs(D[empty]).min(axis=1) * WIDEN
        U, Kw, S0, S1, S2 = _moments(D, w, hr, kernel)

    span = np.ptp(xs) if len(xs) else 0.0
    rows = np.flatnonzero(_high_leverage(S0, S1, S2))
    if len(rows) and span > 0:
        stats.expanded += len(rows)
        limit = 2.0 * (span + np.abs(x0[rows] - xs.mean()))
        while len(rows):
            hr[rows] = np.minimum(hr[rows] * LEVERAGE_STEP, limit)
            u, kw, s0, s1, s2 = _moments(D[rows], w, hr[rows], kernel)
            U[rows], Kw[rows], S0[rows], S1[rows], S2[rows] = u, kw, s0, s1, s2
            keep = _high_leverage(s0, s1, s2) & (hr[rows] < limit)
            rows, limit = rows[keep], limit[keep]

    inside = Kw > 0
    lo = np.where(inside, xs[None, :], np.inf).min(axis=1)
    hi = np.where(inside, xs[None, :], -np.inf).max(axis=1)
    det = S0 * S2 - S1 * S1
    tr = S0 + S2
    lmax = 0.5 * tr + np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))
    const = (hi <= lo) | (det <= lmax * lmax / COND_LIMIT)
    stats.local_constant = int(const.sum())

    safe_det = np.where(const, 1.0, det)
    L = (S2[:, None] - S1[:, None] * U) * Kw / safe_det[:, None]
    if const.any():
        L[const] = Kw[const] / S0[const, None]
    return L, stats


def local_linear_at(xs, ys, pi, h, x0, kernel=quartic):
    """Design-weighted local linear estimate at ``x0`` (scalar or array)."""
    L, _ = local_linear_weights(xs, 1.0 / np.asarray(pi, dtype=float), h, x0, kernel)
    out = L @ np.asarray(ys, dtype=float)
    return float(out[0]) if np.ndim(x0) == 0 else out


@dataclass
class SbllFit:
    """Two-stage fit with population-wide predictions.

    ``fitted`` and ``component_fits`` cover every population unit;
    ``g_weights`` are aligned to the sample.
    """

    pilot: PilotFit
    kernel: KernelSpec
    fitted: np.ndarray
    component_fits: np.ndarray
    g_weights: np.ndarray | None
    indices: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def sample_fitted(self) -> np.ndarray:
        return self.fitted[self.indices]


def smoother_matrix(sample: SampleData, frame: PopulationFrame, column: int, h: float):
    """Full N x n local linear weight matrix for one covariate, with stats.

    Depends only on the sampled values of that covariate, the design
    weights and h, so it can be shared by every fit that includes it.
    """
    x = frame.rescaled([column])[:, 0]
    return local_linear_weights(x[sample.indices], sample.weights, h, x)


def sbll_fit(sample: SampleData, frame: PopulationFrame, spec: SplineSpec, kernel: KernelSpec,
             with_weights: bool = True, smoothers: dict | None = None,
             pilot: PilotFit | None = None) -> SbllFit:
    """Pilot spline fit, then per-covariate local linear smoothing of the
    pseudo-responses evaluated at every population unit.

    ``smoothers`` optionally caches full smoother matrices keyed by
    ``(column, bandwidth)``; it is filled on first use. A ``pilot`` already
    fitted to this sample and ``spec`` is reused.
    """
    pilot = pilot or fit_pilot(sample, frame, spec)
    N, n, d = sample.N, sample.n, spec.dim
    w = sample.weights
    Yp = pseudo_responses(pilot, sample)
    Xall = frame.rescaled(spec.columns)
    # c_j = 1 - I_j / pi_j
    corr = np.ones(N)
    corr[sample.indices] -= 1.0 / sample.pi

    comps = np.empty((N, d))
    accum = np.zeros((n, d))
    stats = SmootherStats()
    step = max(1, _CHUNK // max(n, 1))
    for a, col in enumerate(spec.columns):
        h = kernel.bandwidths[a]
        if smoothers is not None:
            key = (col, float(h))
            if key not in smoothers:
                smoothers[key] = smoother_matrix(sample, frame, col, h)
            L, st = smoothers[key]
            stats.add(st)
            comps[:, a] = L @ Yp[:, a]
            if with_weights:
                accum[:, a] = corr @ L
            continue
        xs = pilot.sample_x[:, a]
        for start in range(0, N, step):
            rows = slice(start, min(N, start + step))
            L, st = local_linear_weights(xs, w, h, Xall[rows, a], kernel)
            stats.add(st)
            comps[rows, a] = L @ Yp[:, a]
            if with_weights:
                accum[:, a] += corr[rows] @ L

    fitted = pilot.ht_total / N + comps.sum(axis=1)
    g = None
    if with_weights:
        g = _g_from_accumulated(pilot, sample, accum, corr.sum())
    diagnostics = {
        "rank": pilot.rank,
        "basis_size": spec.size,
        "local_constant": stats.local_constant,
        "expanded_windows": stats.expanded,
        "predictions": stats.points,
    }
    return SbllFit(pilot, kernel, fitted, comps, g, sample.indices.copy(), diagnostics)


def _g_from_accumulated(pilot: PilotFit, sample: SampleData, accum: np.ndarray, corr_sum: float) -> np.ndarray:
    # sum_j c_j rho_j = corr_sum * w / N + sum_a Q_a^T v_a, where
    # Q_a = I - 1 w^T / N - sum_{b != a} (I - 1 w^T / N) Gamma_s D_b P
    N = pilot.N
    w = sample.weights
    blocks = pilot.spec.blocks()
    total = corr_sum * w / N
    for a, sl in enumerate(blocks):
        v = accum[:, a]
        vc = v - w * v.sum() / N
        z = pilot.basis.T @ vc
        z[0] = 0.0
        z[sl] = 0.0
        total = total + vc - pilot.projection.T @ z
    return 1.0 + sample.pi * total


def g_weights(fit: SbllFit, sample: SampleData, frame: PopulationFrame | None = None) -> np.ndarray:
    """g-weights with sum_s g_i y_i / pi_i equal to the SBLL total."""
    if fit.g_weights is None:
        if frame is None:
            raise ValueError("frame required to compute g-weights for this fit")
        fit.g_weights = sbll_fit(sample, frame, fit.pilot.spec, fit.kernel).g_weights
    return fit.g_weights


def difference_total(fitted: np.ndarray, sample: SampleData) -> float:
    """sum_U m_i + sum_s (y_i - m_i) / pi_i."""
    return float(fitted.sum() + np.sum((sample.responses - fitted[sample.indices]) / sample.pi))


def sbll_total(fit: SbllFit, sample: SampleData) -> float:
    return difference_total(fit.fitted, sample)


def ht_variance(residuals, sample: SampleData) -> float:
    """N^-2 sum_{i,j in s} (Delta_ij / pi_ij) (r_i / pi_i)(r_j / pi_j)."""
    e = np.asarray(residuals, dtype=float) / sample.pi
    N = sample.N
    design = sample.design
    if design.is_srs:
        pi, pij = design.pi, design.pi_pair
        diag = (1.0 - pi) * np.sum(e * e)
        if sample.n == 1:
            return float(diag / N**2)
        if pij <= 0:
            raise InvalidDesignError("pi_ij = 0 for a sampled pair")
        off = (pij - pi * pi) / pij * (e.sum() ** 2 - np.sum(e * e))
        return float((diag + off) / N**2)
    P = sample.joint_pi()
    if np.any(P <= 0):
        raise InvalidDesignError("pi_ij = 0 for a sampled pair")
    Delta = P - np.outer(sample.pi, sample.pi)
    return float(e @ (Delta / P) @ e / N**2)


def variance_ht(fit: SbllFit, sample: SampleData) -> float:
    return ht_variance(sample.responses - fit.sample_fitted, sample)


def variance_g(fit: SbllFit, sample: SampleData, simplified: bool | None = None) -> float:
    """g-weighted residual variance of N^-1 times the total.

    Under SRS the default is the single-sum form
    (1 - f) / (n (n - 1)) sum_s g_i^2 r_i^2; ``simplified=False`` forces the
    double sum. The two differ by the squared mean of g_i r_i.
    """
    g = g_weights(fit, sample)
    return g_residual_variance(g, sample.responses - fit.sample_fitted, sample, simplified)


def g_residual_variance(g, residuals, sample: SampleData, simplified: bool | None = None) -> float:
    a = np.asarray(g) * np.asarray(residuals)
    if simplified is None:
        simplified = sample.design.is_srs
    if not simplified:
        return ht_variance(a, sample)
    if not sample.design.is_srs:
        raise InvalidDesignError("single-sum variance form requires SRS")
    f = sample.design.fraction
    n = sample.n
    if f >= 1.0:
        return 0.0
    return float((1.0 - f) / (n * (n - 1)) * np.sum(a * a))


@dataclass
class EstimateReport:
    """Point estimate and variance estimates for one sample.

    Variances are for N^-1 times the total; ``se_*`` are on the total scale.
    """

    total: float
    variance_ht: float
    variance_g: float
    ht_total: float
    n: int
    N: int
    method: str
    variance_g_double_sum: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    @property
    def se_ht(self) -> float:
        return self.N * float(np.sqrt(max(self.variance_ht, 0.0)))

    @property
    def se_g(self) -> float:
        return self.N * float(np.sqrt(max(self.variance_g, 0.0)))


def sbll_report(fit: SbllFit, sample: SampleData) -> EstimateReport:
    r = sample.responses - fit.sample_fitted
    g = fit.g_weights
    vg = g_residual_variance(g, r, sample) if g is not None else float("nan")
    vg2 = ht_variance(g * r, sample) if g is not None else float("nan")
    return EstimateReport(
        total=sbll_total(fit, sample),
        variance_ht=ht_variance(r, sample),
        variance_g=vg,
        variance_g_double_sum=vg2,
        ht_total=fit.pilot.ht_total,
        n=sample.n,
        N=sample.N,
        method="sbll",
        diagnostics=dict(fit.diagnostics),
    )
