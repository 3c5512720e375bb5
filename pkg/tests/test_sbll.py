import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from sbll_survey.design import SRSDesign, SampleData, census_design, make_srs
from sbll_survey.estimators import default_spec, estimate
from sbll_survey.oracle import census_sample, oracle_fit
from sbll_survey.pilot import ht_total
from sbll_survey.sbll import (
    KernelSpec, difference_total, g_residual_variance, ht_variance, local_linear_at, local_linear_weights,
    plugin_bandwidth, quartic, rot_bandwidth, rot_kernel, sbll_fit, sbll_report, sbll_total, variance_g, variance_ht,
)
from sbll_survey.splinebasis import PopulationFrame, knots_for

from conftest import linear_population, smooth_population, srs_sample


def _fit(frame, s, J=None):
    spec = default_spec(s, frame) if J is None else knots_for(frame, s, J)
    return sbll_fit(s, frame, spec, rot_kernel(s, frame, spec))


# kernel and smoother -------------------------------------------------------

def test_quartic_kernel_shape():
    u = np.linspace(-1, 1, 200001)
    assert np.trapezoid(quartic(u), u) == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(quartic(u), quartic(-u))
    assert quartic(1.0) == 0.0 and quartic(1.5) == 0.0 and quartic(0.0) == pytest.approx(15 / 16)
    with pytest.raises(ValueError):
        KernelSpec([0.1, 0.0])


@pytest.mark.parametrize("h", [0.15, 0.4, 2.0])
def test_local_linear_reproduces_lines(h):
    rng = np.random.default_rng(0)
    xs = rng.random(40)
    pi = rng.uniform(0.2, 1.0, 40)
    x0 = np.linspace(0, 1, 11)
    assert np.allclose(local_linear_at(xs, 2 * xs, pi, h, x0), 2 * x0, atol=1e-10)
    assert np.allclose(local_linear_at(xs, np.full(40, 3.7), pi, h, x0), 3.7, atol=1e-12)


def test_local_linear_matches_dense_solve():
    xs = np.array([0.1, 0.25, 0.4, 0.6, 0.85])
    ys = np.array([1.0, 2.5, 1.8, 3.1, 2.2])
    pi = np.array([0.5, 0.2, 0.9, 0.4, 0.6])
    h, x0 = 0.5, 0.45
    k = 0.9375 * (1 - ((xs - x0) / h) ** 2) ** 2 * (np.abs(xs - x0) < h) / h
    W = np.diag(k / pi)
    X = np.column_stack([np.ones(5), xs - x0])
    a = np.linalg.solve(X.T @ W @ X, X.T @ W @ ys)
    assert local_linear_at(xs, ys, pi, h, x0) == pytest.approx(a[0], abs=1e-12)


def test_sparse_window_is_widened_not_flattened():
    xs = np.array([0.0, 0.0, 0.3, 1.0])
    ys = 5 - 2 * xs
    L, stats = local_linear_weights(xs, np.ones(4), 0.1, np.array([0.0, 0.65, 1.0]))
    # every window is widened to two distinct values and still reproduces the line
    assert stats.expanded == 3 and stats.local_constant == 0
    assert np.allclose(L @ ys, 5 - 2 * np.array([0.0, 0.65, 1.0]), atol=1e-10)


def test_single_value_falls_back_to_weighted_mean():
    xs = np.array([0.3, 0.3, 0.3])
    ys = np.array([1.0, 2.0, 6.0])
    w = np.array([1.0, 1.0, 2.0])
    L, stats = local_linear_weights(xs, w, 0.05, np.array([0.3, 0.9]))
    assert np.allclose(L @ ys, 15 / 4)
    assert stats.local_constant == 2 and stats.expanded == 1


# bandwidth -----------------------------------------------------------------

def _uniform_sample(n, scale=1.0, N=None):
    x = (np.arange(n) + 0.5) / n
    N = N or n
    frame = PopulationFrame(np.r_[x, np.zeros(N - n) + 0.5][:, None] * scale, np.zeros(N))
    frame.ranges[:] = [[0.0, scale]]
    return frame, SampleData(np.arange(n), np.zeros(n), SRSDesign(N, n) if N > n else census_design(n))


def test_rot_bandwidth_uniform_value():
    frame, s = _uniform_sample(100, N=1000)
    assert rot_bandwidth(s, frame, 0, scale=2.5) == pytest.approx(2.5 * 0.2887 * 100 ** -0.2, rel=2e-3)
    assert rot_bandwidth(s, frame, 0, scale=2.5) == pytest.approx(0.2876, abs=5e-4)


def test_rot_bandwidth_rate_and_rescaling():
    frame, s = _uniform_sample(100, N=1000)
    # same spread, twice the units
    x = np.repeat(frame.covariates[:100, 0], 2)
    frame2 = PopulationFrame(np.r_[x, np.full(800, 0.5)][:, None], np.zeros(1000))
    frame2.ranges[:] = [[0.0, 1.0]]
    s2 = SampleData(np.arange(200), np.zeros(200), SRSDesign(1000, 200))
    assert rot_bandwidth(s2, frame2, 0) / rot_bandwidth(s, frame, 0) == pytest.approx(2 ** -0.2, rel=1e-9)

    rng = np.random.default_rng(0)
    X = rng.random((300, 1))
    a, b = PopulationFrame(X, X[:, 0]), PopulationFrame(2 * X, X[:, 0])
    sa = srs_sample(a, 80)
    assert rot_bandwidth(sa, a, 0) == rot_bandwidth(sa, b, 0)


def test_rot_bandwidth_degenerate_covariate():
    frame = PopulationFrame(np.ones((50, 1)), np.zeros(50))
    assert rot_bandwidth(srs_sample(frame, 10), frame, 0) == 1.0


def test_rot_bandwidth_window_covers_a_neighbour():
    x = np.r_[np.linspace(0, 0.1, 30), 0.9, 1.0]
    frame = PopulationFrame(x[:, None], x)
    s = SampleData(np.arange(32), x, census_design(32))
    h = rot_bandwidth(s, frame, 0, scale=0.01)
    # the isolated pair 0.9, 1.0 forces h past their gap
    assert h > 0.1
    for xi in x:
        assert np.sum((np.abs(x - xi) < h) & (x != xi)) >= 1


def test_plugin_bandwidth_matches_known_curvature():
    # m = 8 (x - 1/2)^2 has m'' = 16 everywhere, so theta = 256
    rng = np.random.default_rng(3)
    n, sigma = 4000, 0.2
    x = rng.random(n)
    y = 8 * (x - 0.5) ** 2 + sigma * rng.standard_normal(n)
    expected = (35 * sigma**2 / (n * 256)) ** 0.2
    assert plugin_bandwidth(x, y, np.ones(n)) == pytest.approx(expected, rel=0.03)
    assert plugin_bandwidth(x, y, np.ones(n), scale=1.5) == pytest.approx(1.5 * expected, rel=0.03)


def test_plugin_bandwidth_grows_with_noise_and_caps_for_lines():
    rng = np.random.default_rng(4)
    x = rng.random(300)
    base = np.sin(2 * np.pi * x)
    e = rng.standard_normal(300)
    w = np.ones(300)
    assert plugin_bandwidth(x, base + 0.4 * e, w) > plugin_bandwidth(x, base + 0.1 * e, w)
    assert plugin_bandwidth(x, 3 - 2 * x, w) == 1.0
    assert plugin_bandwidth(x[:5], x[:5] ** 2, w[:5]) == 1.0


def test_rot_kernel_rules():
    frame = smooth_population(400, 2, seed=5)
    s = srs_sample(frame, 80)
    spec = default_spec(s, frame)
    spread = rot_kernel(s, frame, spec, 1.3, "spread").bandwidths
    assert np.allclose(spread, [rot_bandwidth(s, frame, c, 1.3) for c in spec.columns])
    plug = rot_kernel(s, frame, spec).bandwidths
    assert np.all((plug > 0) & (plug <= 1.0))
    with pytest.raises(ValueError):
        rot_kernel(s, frame, spec, rule="silverman")


# fitted surface and total --------------------------------------------------

def test_linear_population_is_fitted_exactly():
    frame = linear_population(N=400, d=1)
    s = srs_sample(frame, 80)
    fit = _fit(frame, s)
    assert np.allclose(fit.fitted, frame.responses, atol=1e-8)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_linear_population_total_is_exact(d):
    frame = linear_population(N=500, d=d, seed=d)
    for seed in range(5):
        s = srs_sample(frame, 120, seed)
        t = sbll_total(_fit(frame, s), s)
        assert abs(t - frame.total) / abs(frame.total) <= 1e-6


def test_fitted_surface_is_sum_of_components(smooth2):
    frame, s = smooth2
    fit = _fit(frame, s)
    assert np.allclose(fit.fitted, fit.pilot.ht_total / s.N + fit.component_fits.sum(axis=1))


def test_census_total_is_exact():
    frame = smooth_population(N=150)
    s = census_sample(frame)
    fit = _fit(frame, s, J=4)
    assert sbll_total(fit, s) == pytest.approx(frame.total, rel=1e-12)
    assert np.allclose(fit.g_weights, 1.0)


def test_zero_surface_gives_ht(smooth2):
    frame, s = smooth2
    assert difference_total(np.zeros(frame.size), s) == pytest.approx(ht_total(s))


def test_census_pipeline_equals_oracle():
    frame = smooth_population(N=300)
    s = census_sample(frame)
    spec = knots_for(frame, s, 5)
    kernel = rot_kernel(s, frame, spec)
    assert np.allclose(sbll_fit(s, frame, spec, kernel).fitted, oracle_fit(frame, spec, kernel).fitted, atol=1e-8)


def test_model3_fit_error_is_small():
    from sbll_survey.montecarlo import MODELS, gen_population
    frame = gen_population(3, 1000, 0.1, seed=11)
    s = srs_sample(frame, 200, 1)
    spec = default_spec(s, frame, MODELS[3]["active"])
    fit = sbll_fit(s, frame, spec, rot_kernel(s, frame, spec))
    truth = MODELS[3]["mean"](frame.covariates)
    assert np.mean((fit.fitted - truth) ** 2) < 0.05 * np.var(frame.responses)


# g-weights ------------------------------------------------------------------

def test_g_weights_reproduce_total_and_match_probe(smooth2):
    frame, s = smooth2
    spec = default_spec(s, frame)
    kernel = rot_kernel(s, frame, spec)
    fit = sbll_fit(s, frame, spec, kernel)
    t = sbll_total(fit, s)
    assert np.sum(fit.g_weights * s.responses / s.pi) == pytest.approx(t, rel=1e-10)
    # the total is linear in y: probe with unit responses
    for k in (0, 17, 63):
        e = np.zeros(frame.size)
        e[s.indices[k]] = 1.0
        probe = PopulationFrame(frame.covariates, e)
        ps = SampleData(s.indices, e[s.indices], s.design)
        tk = sbll_total(sbll_fit(ps, probe, spec, kernel), ps)
        assert tk == pytest.approx(fit.g_weights[k] / s.pi[k], rel=1e-8, abs=1e-10)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(d=st.integers(1, 3), n=st.integers(30, 120), seed=st.integers(0, 10**6))
def test_calibration_on_auxiliary_totals(d, n, seed):
    frame = smooth_population(N=n * 3, d=d, seed=seed)
    s = srs_sample(frame, n, seed)
    fit = _fit(frame, s)
    X = frame.covariates
    lhs = (fit.g_weights / s.pi) @ X[s.indices]
    assert np.allclose(lhs, X.sum(axis=0), rtol=1e-6)
    assert np.sum(fit.g_weights / s.pi) == pytest.approx(frame.size, rel=1e-6)


# variances ------------------------------------------------------------------

def test_ht_variance_zero_and_constant_residuals(smooth2):
    _, s = smooth2
    assert ht_variance(np.zeros(s.n), s) == 0.0
    assert abs(ht_variance(np.full(s.n, 2.5), s)) < 1e-12


def test_ht_variance_general_form_matches_srs_shortcut(smooth2):
    _, s = smooth2
    r = np.random.default_rng(0).standard_normal(s.n)
    P = s.joint_pi()
    e = r / s.pi
    brute = e @ ((P - np.outer(s.pi, s.pi)) / P) @ e / s.N**2
    assert ht_variance(r, s) == pytest.approx(brute, rel=1e-12)


def test_ht_variance_expectation_equals_design_variance():
    N, n = 6, 3
    r = np.array([1.3, -0.4, 2.2, 0.7, -1.9, 0.5])
    design = make_srs(N, n)
    vals, ests = [], []
    for sub in itertools.combinations(range(N), n):
        s = SampleData(list(sub), r[list(sub)], design)
        ests.append(np.sum(s.responses / s.pi) / N)
        vals.append(ht_variance(s.responses, s))
    assert len(vals) == 20
    assert np.mean(vals) == pytest.approx(np.var(ests), abs=1e-10)


def test_variance_g_closed_form():
    rng = np.random.default_rng(5)
    design = make_srs(100, 20)
    s = SampleData(np.arange(20), rng.random(20), design)
    g, r = rng.uniform(0.5, 1.5, 20), rng.standard_normal(20)
    hand = (1 - 0.2) / (20 * 19) * np.sum(g**2 * r**2)
    assert g_residual_variance(g, r, s) == pytest.approx(hand, rel=1e-12)
    assert g_residual_variance(g, np.zeros(20), s) == 0.0
    # double-sum form differs by the squared mean of g r
    a = g * r
    assert g_residual_variance(g, r, s, simplified=False) == pytest.approx(
        hand - (1 - 0.2) / (20 * 19) * 20 * a.mean() ** 2, rel=1e-10)


def test_variance_g_census_is_zero():
    frame = smooth_population(N=120)
    s = census_sample(frame)
    fit = _fit(frame, s, J=3)
    assert variance_g(fit, s) == 0.0
    assert abs(variance_ht(fit, s)) == 0.0


def test_report_fields(smooth2):
    frame, s = smooth2
    rep = sbll_report(_fit(frame, s), s)
    assert rep.variance_g >= 0 and rep.variance_ht >= 0
    assert rep.se_g == pytest.approx(s.N * np.sqrt(rep.variance_g))
    assert rep.method == "sbll" and rep.n == 100 and rep.N == 400
    assert rep.total == pytest.approx(estimate(s, frame).total)
