import numpy as np
import pytest

from sbll_survey.baselines import ht_report, lreg_fit, lreg_total, ls_g_weights, ls_total
from sbll_survey.estimators import ConfigurationError, default_spec, estimate
from sbll_survey.montecarlo import gen_population
from sbll_survey.oracle import census_sample
from sbll_survey.pilot import fit_pilot, ht_total
from sbll_survey.sbll import rot_kernel, sbll_fit

from conftest import linear_population, smooth_population, srs_sample


def test_lreg_calibrates_on_covariates(smooth2):
    frame, s = smooth2
    _, g, rank = lreg_fit(s, frame)
    assert rank == 3
    X = frame.covariates
    assert np.allclose((g / s.pi) @ X[s.indices], X.sum(axis=0), rtol=1e-10)
    assert np.sum(g / s.pi) == pytest.approx(frame.size)
    rep = lreg_total(s, frame)
    assert np.sum(g * s.responses / s.pi) == pytest.approx(rep.total, rel=1e-10)


@pytest.mark.parametrize("method", ["lreg", "ls", "sbll"])
def test_linear_population_has_no_error(method):
    frame = linear_population(N=400, d=2, seed=9)
    s = srs_sample(frame, 90, 4)
    assert estimate(s, frame, method).total == pytest.approx(frame.total, rel=1e-8)


@pytest.mark.parametrize("method", ["ht", "lreg", "ls", "sbll"])
def test_census_total(method):
    frame = smooth_population(N=100)
    assert estimate(census_sample(frame), frame, method).total == pytest.approx(frame.total, rel=1e-12)


def test_ls_shares_pilot_with_sbll(smooth2):
    frame, s = smooth2
    spec = default_spec(s, frame)
    a = fit_pilot(s, frame, spec)
    b = sbll_fit(s, frame, spec, rot_kernel(s, frame, spec)).pilot
    assert np.array_equal(a.coefficients, b.coefficients)
    assert np.array_equal(a.centering, b.centering)


def test_ls_g_weights_reproduce_total_and_calibrate(smooth2):
    frame, s = smooth2
    spec = default_spec(s, frame)
    g = ls_g_weights(fit_pilot(s, frame, spec), s, frame)
    assert np.sum(g * s.responses / s.pi) == pytest.approx(ls_total(s, frame, spec).total, rel=1e-10)
    assert np.allclose((g / s.pi) @ frame.covariates[s.indices], frame.covariates.sum(axis=0), rtol=1e-8)


def test_ht_report(smooth2):
    _, s = smooth2
    rep = ht_report(s)
    assert rep.total == ht_total(s) == rep.ht_total
    r = s.responses - rep.total / s.N
    f = s.n / s.N
    assert rep.variance_g == pytest.approx((1 - f) / (s.n * (s.n - 1)) * np.sum(r * r))
    # HT variance of y equals that of the centred y under SRS
    assert rep.variance_ht == pytest.approx(rep.variance_g_double_sum, rel=1e-10)


def test_estimate_errors(smooth2):
    frame, s = smooth2
    with pytest.raises(ConfigurationError):
        estimate(s, frame, "greg")
    wide = gen_population(1, 200, 0.1, seed=0)
    tiny = srs_sample(wide, 8, 1)
    with pytest.raises(ConfigurationError, match="basis dimension"):
        estimate(tiny, wide, "sbll")
