import numpy as np
import pytest

from conftest import DISK, RECT, SQUARE, make_op
from nehari_forge.grid import build_grid
from nehari_forge.spectra import eig_smallest
from nehari_forge.symlab import (
    NonConformingGrid,
    applicable_transforms,
    classify,
    make_transform,
    symmetry_report,
)
from nehari_forge.varcalc import ProblemParams, energy


def names(ts):
    return {t.name for t in ts}


def test_square_constant_potential():
    op = make_op(SQUARE, 16, "-pi^2/4")
    assert names(applicable_transforms(op.grid, op.V)) == {
        "reflect-x", "reflect-y", "reflect-diag", "reflect-antidiag", "point-inversion",
    }


def test_rectangle_step_potential():
    op = make_op(RECT, 16, "10*step(x-1)")
    assert names(applicable_transforms(op.grid, op.V)) == {"reflect-x"}


def test_shifted_disk():
    op = make_op(DISK, 16, "1/sqrt((x-0.5)^2+y^2)", "cell_average")
    assert names(applicable_transforms(op.grid, op.V)) == {"reflect-x"}


def test_diagonal_needs_square():
    with pytest.raises(NonConformingGrid):
        make_transform(build_grid(RECT, 8), "reflect-diag")


def test_transforms_are_involutions(rng):
    g = build_grid(DISK, 8)
    u = rng.standard_normal(g.size)
    for name in ("reflect-x", "reflect-y", "reflect-diag", "reflect-antidiag", "point-inversion"):
        t = make_transform(g, name)
        np.testing.assert_array_equal(t.apply(t.apply(u)), u)


def test_reflect_x_mirrors_y():
    g = build_grid(RECT, 8)
    t = make_transform(g, "reflect-x")
    np.testing.assert_array_equal(t.apply(g.y), 1.0 - g.y)
    np.testing.assert_array_equal(t.apply(g.x), g.x)


def test_first_eigenfunction_even():
    op = make_op(SQUARE, 16)
    e1 = eig_smallest(op, 1)[1].basis[0]
    rep = symmetry_report(op, e1)
    assert all(c.label == "even" for c in rep.entries)


def test_odd_by_construction():
    op = make_op(SQUARE, 16)
    g = op.grid
    u = g.x + g.y**3
    c = classify(op, u, make_transform(g, "point-inversion"))
    assert c.label == "odd" and c.odd_score < 1e-12


def test_broken():
    op = make_op(SQUARE, 16)
    g = op.grid
    u = (1 - g.x**2) * (1 - g.y**2) * (1 + g.x)
    c = classify(op, u, make_transform(g, "reflect-y"))
    assert c.label == "broken" and min(c.even_score, c.odd_score) > 0.1


def test_energy_invariance(rng):
    op = make_op(RECT, 16, "10*step(x-1)")
    params = ProblemParams(4.0, 1.0)
    for t in applicable_transforms(op.grid, op.V):
        for _ in range(5):
            u = rng.standard_normal(op.grid.size)
            assert energy(op, params, t.apply(u)) == pytest.approx(energy(op, params, u), rel=1e-12)
