import numpy as np
import pytest

from conftest import SQUARE, make_op
from nehari_forge.limitflow import (
    constrained_scaling,
    continuation,
    limit_constraint,
    limit_energy,
    limit_minimize,
    predictor_rhs_defect,
    predictor_w,
    u2logu2,
)
from nehari_forge.spectra import eig_smallest, project_eigenspace


@pytest.fixture(scope="module")
def op():
    return make_op(SQUARE, 16, "-pi^2/4")


@pytest.fixture(scope="module")
def spec(op):
    return eig_smallest(op, 6)


def test_u2logu2_at_zero():
    np.testing.assert_array_equal(u2logu2(np.array([0.0, 1.0, -1.0])), [0.0, 0.0, 0.0])


def test_scaling_meets_constraint(op, rng):
    for _ in range(5):
        t, u = constrained_scaling(op.grid, rng.standard_normal(op.grid.size))
        assert abs(limit_constraint(op.grid, u)) < 1e-8
        assert t > 0


def test_simple_cluster(spec):
    m = limit_minimize(spec, 1)
    g = spec.grid
    assert abs(limit_constraint(g, m.u)) < 1e-8
    assert limit_energy(g, spec[1].value, -m.u) == pytest.approx(m.energy, rel=1e-14)
    # in the eigenspace by construction
    np.testing.assert_allclose(project_eigenspace(spec, 1, m.u), m.u, atol=1e-8)


def test_double_cluster_beats_axis_directions():
    S = eig_smallest(make_op(SQUARE, 16), 6)
    assert S[2].multiplicity == 2
    m = limit_minimize(S, 2)
    lam = S[2].value
    for e in S[2].basis:
        _, u = constrained_scaling(S.grid, e)
        assert m.energy <= limit_energy(S.grid, lam, u) + 1e-12
    assert abs(limit_constraint(S.grid, m.u)) < 1e-8


def test_predictor_residual_and_oddness(op, spec):
    for i in (1, 2):
        u_star = limit_minimize(spec, i).u
        assert predictor_rhs_defect(spec, i, u_star) < 1.0
        w = predictor_w(op, spec, i, u_star)
        wm = predictor_w(op, spec, i, -u_star)
        np.testing.assert_allclose(wm, -w, atol=1e-8 * np.abs(w).max())
        # w is orthogonal to the eigenspace
        assert np.abs(project_eigenspace(spec, i, w)).max() < 1e-6 * np.abs(w).max()


def test_continuation_converges(op, spec):
    res = continuation(op, spec, [3.0, 2.5, 2.2, 2.1, 2.05, 2.02], mode="gs")
    d = [s.eigenspace_distance for s in res.steps]
    assert d[-1] < d[-2] < d[-3]
    assert res.steps[-1].distance_to_limit < 0.05 * res.limit_norm


@pytest.mark.parametrize("factor,trend", [(2.0, -1), (0.5, 1)])
def test_norm_trend(op, spec, factor, trend):
    res = continuation(op, spec, [2.2, 2.1, 2.05], mode="gs", lam_factor=factor)
    norms = [s.norm for s in res.steps]
    assert np.all(trend * np.diff(norms) > 0)


def test_bad_p_list(op, spec):
    with pytest.raises(ValueError):
        continuation(op, spec, [2.5, 3.0])
    with pytest.raises(ValueError):
        continuation(op, spec, [3.0, 2.0])
