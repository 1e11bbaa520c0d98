import numpy as np
import pytest

from conftest import RECT, SQUARE, make_op
from nehari_forge.contours import contours_csv, contours_svg, extract_contours
from nehari_forge.grid import build_grid
from nehari_forge.mpsolve import SolveConfig, least_energy_nodal
from nehari_forge.varcalc import ProblemParams


def test_zero_field_has_no_curves():
    g = build_grid(RECT, 8)
    (c,) = extract_contours(g, np.zeros(g.size), [1.0])
    assert c.lines == []


def test_linear_field():
    g = build_grid(RECT, 16)
    (c,) = extract_contours(g, g.x.copy(), [1.0])
    assert len(c.lines) == 1
    pts = c.lines[0]
    assert np.abs(pts[:, 0] - 1.0).max() < g.h
    assert pts[:, 1].min() < 2 * g.h and pts[:, 1].max() > 1 - 2 * g.h


def test_circle_is_closed():
    op = make_op(SQUARE, 16)
    g = op.grid
    (c,) = extract_contours(g, g.x**2 + g.y**2, [0.25])
    assert len(c.lines) == 1 and c.closed == [True]
    r = np.hypot(c.lines[0][:, 0], c.lines[0][:, 1])
    assert np.abs(r - 0.5).max() < g.h


def test_nodal_solution_curves_are_point_symmetric():
    op = make_op(SQUARE, 32, "-pi^2/4")
    r = least_energy_nodal(op, SolveConfig(ProblemParams(4.0), "sin(pi*(x+1))*sin(2*pi*(y+1))"))
    cs = {c.level: c for c in extract_contours(op.grid, r.u, [-2.0, -1.0, 1.0, 2.0])}
    for lv in (1.0, 2.0):
        pos = np.vstack(cs[lv].lines)
        neg = np.vstack(cs[-lv].lines)
        assert len(cs[lv].lines) >= 1 and len(cs[-lv].lines) >= 1
        # every point of the positive family has a mirror in the negative one
        d = np.min(np.linalg.norm(pos[:, None, :] + neg[None, :, :], axis=2), axis=1)
        assert d.max() < op.grid.h


def test_svg_and_csv():
    g = build_grid(RECT, 8)
    cs = extract_contours(g, g.x.copy(), [1.0, -1.0])
    svg = contours_svg(g, cs)
    assert svg.startswith("<svg") and "polyline" in svg and "<rect" in svg
    rows = contours_csv(cs).splitlines()
    assert rows[0] == "level,line,x,y" and len(rows) > 2
    assert all(float(r.split(",")[0]) == pytest.approx(1.0) for r in rows[1:])
