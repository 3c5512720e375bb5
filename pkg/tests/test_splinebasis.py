import numpy as np
import pytest

from sbll_survey.design import SRSDesign, SampleData, draw_srs, make_srs
from sbll_survey.splinebasis import PopulationFrame, SplineSpec, basis_matrix, basis_row, knot_count, knots_for


@pytest.mark.parametrize("n,d,expected", [(100, 2, 15), (50, 5, 3), (200, 1, 20)])
def test_knot_count(n, d, expected):
    assert knot_count(n, d, 1.0) == expected


def test_knot_count_never_negative():
    assert knot_count(4, 3) == 0
    assert knot_count(30, 1, c=0.0) == 1


def _spec(knots, J=None):
    knots = tuple(np.asarray(k, dtype=float) for k in knots)
    return SplineSpec(tuple(range(len(knots))), knots, J if J is not None else len(knots[0]))


def test_basis_row_single_covariate():
    assert np.allclose(basis_row(_spec([[0.3, 0.6]]), [0.5]), [1, 0.5, 0.2, 0])


def test_basis_row_at_zero_has_no_active_hinges():
    spec = _spec([[0.2, 0.4], [0.5, 0.7]])
    assert np.allclose(basis_row(spec, [0.0, 0.0]), [1, 0, 0, 0, 0, 0, 0])


def test_basis_row_two_covariates():
    assert np.allclose(basis_row(_spec([[0.5], [0.5]]), [1.0, 1.0]), [1, 1, 0.5, 1, 0.5])


def test_basis_dimension_and_blocks():
    spec = _spec([[0.25, 0.5, 0.75]] * 3)
    assert spec.size == 1 + 4 * 3
    assert [(b.start, b.stop) for b in spec.blocks()] == [(1, 5), (5, 9), (9, 13)]
    assert basis_matrix(spec, np.random.default_rng(0).random((7, 3))).shape == (7, 13)


def _sample(frame, n, seed=0):
    return draw_srs(make_srs(frame.size, n), frame, seed)


def test_zero_knots():
    rng = np.random.default_rng(0)
    frame = PopulationFrame(rng.random((100, 2)), rng.random(100))
    spec = knots_for(frame, _sample(frame, 30), 0)
    assert spec.size == 3
    assert all(len(k) == 0 for k in spec.knots)


def test_uniform_quantile_knots():
    x = np.linspace(0, 1, 2001)
    frame = PopulationFrame(x[:, None], x)
    spec = knots_for(frame, SampleData(np.arange(2001), x, SRSDesign(2001, 2001)), 3)
    assert np.allclose(spec.knots[0], [0.25, 0.5, 0.75], atol=1e-3)

    rng = np.random.default_rng(1)
    frame = PopulationFrame(rng.random((5000, 1)), rng.random(5000))
    spec = knots_for(frame, _sample(frame, 1000, seed=2), 3)
    assert np.allclose(spec.knots[0], [0.25, 0.5, 0.75], atol=0.05)


def test_knots_strictly_increasing_and_interior():
    rng = np.random.default_rng(3)
    X = np.column_stack([rng.random(400), rng.integers(0, 4, 400).astype(float)])
    frame = PopulationFrame(X, rng.random(400))
    spec = knots_for(frame, _sample(frame, 100), 10)
    for k in spec.knots:
        assert np.all(np.diff(k) > 0)
        assert np.all((k > 0) & (k < 1))
    # four distinct levels support at most three knots
    assert len(spec.knots[1]) <= 3


def test_constant_covariate_keeps_only_linear_column():
    rng = np.random.default_rng(4)
    X = np.column_stack([rng.random(200), np.full(200, 3.0)])
    frame = PopulationFrame(X, rng.random(200))
    spec = knots_for(frame, _sample(frame, 60), 5)
    assert len(spec.knots[1]) == 0
    assert spec.blocks()[1].stop - spec.blocks()[1].start == 1


def test_rescaling_maps_to_unit_interval():
    rng = np.random.default_rng(5)
    frame = PopulationFrame(rng.normal(10, 3, (300, 3)))
    Z = frame.rescaled()
    assert Z.min() == 0.0 and Z.max() == 1.0
    assert np.allclose(Z.min(axis=0), 0) and np.allclose(Z.max(axis=0), 1)


def test_frame_validation():
    with pytest.raises(ValueError):
        PopulationFrame(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        PopulationFrame(np.zeros((5, 2)), np.zeros(4))
    with pytest.raises(ValueError):
        PopulationFrame(np.zeros((5, 2)), column_names=["a"])
