"""Domains, masked Cartesian grids, sampling and quadrature.

A :class:`Grid` lays a uniform lattice of spacing ``h = 1/n`` over the
bounding box of the domain and keeps the nodes lying strictly inside.
Boundary and exterior nodes carry the Dirichlet value 0 implicitly, so a
field is just a 1-D float array with one entry per interior node, in
row-major order (``j`` = row along y, ``i`` = column along x).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy import integrate as sp_integrate

from .errors import GridMismatch
from .expr import EvaluationError, Expr, evaluate, parse

log = logging.getLogger(__name__)

_CONFORM_TOL = 1e-9


@dataclass(frozen=True)
class Rectangle:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    @property
    def is_square(self) -> bool:
        return math.isclose(self.x1 - self.x0, self.y1 - self.y0, rel_tol=1e-12)


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)


Domain = Union[Rectangle, Disk]


@dataclass(frozen=True, eq=False)
class Grid:
    """Interior nodes of a domain on a uniform lattice.

    ``mask`` and ``index`` have shape ``(ny, nx)`` over the lattice; lattice
    point ``(j, i)`` sits at ``(xorigin + i*h, yorigin + j*h)``.  ``index``
    holds the linear node number or -1 outside the domain.
    """

    domain: Domain
    h: float
    n: int
    nx: int
    ny: int
    xorigin: float
    yorigin: float
    mask: np.ndarray
    index: np.ndarray
    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.x.shape[0]

    @property
    def full_lattice(self) -> bool:
        return bool(self.mask.all())

    def check(self, *fields: np.ndarray) -> None:
        for f in fields:
            if np.shape(f) != (self.size,):
                raise GridMismatch(
                    f"field of shape {np.shape(f)} does not match grid with {self.size} nodes"
                )

    def to_lattice(self, u: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Scatter a field onto the ``(ny, nx)`` lattice."""
        self.check(u)
        out = np.full(self.mask.shape, fill, dtype=float)
        out[self.mask] = u
        return out

    def from_lattice(self, arr: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(arr[self.mask], dtype=float)


def _intervals(length: float, n: int) -> int:
    m = length * n
    k = int(round(m))
    if abs(m - k) > _CONFORM_TOL * max(1.0, m):
        raise ValueError(f"side length {length} is not a multiple of h = 1/{n}")
    return k


def build_grid(domain: Domain, n: int) -> Grid:
    """Build the interior-node grid with ``n`` intervals per unit length."""
    if n < 1:
        raise ValueError(f"resolution must be a positive integer, got {n}")
    h = 1.0 / n
    if isinstance(domain, Rectangle):
        kx = _intervals(domain.x1 - domain.x0, n)
        ky = _intervals(domain.y1 - domain.y0, n)
        if kx < 2 or ky < 2:
            raise ValueError("grid too coarse: no interior nodes")
        nx, ny = kx - 1, ky - 1
        xorigin, yorigin = domain.x0 + h, domain.y0 + h
        mask = np.ones((ny, nx), dtype=bool)
    elif isinstance(domain, Disk):
        m = int(math.ceil(domain.radius * n)) - 1
        if m < 0:
            raise ValueError("grid too coarse: no interior nodes")
        nx = ny = 2 * m + 1
        xorigin, yorigin = domain.cx - m * h, domain.cy - m * h
        k = np.arange(-m, m + 1, dtype=float) * h
        dx, dy = np.meshgrid(k, k)
        mask = dx * dx + dy * dy < domain.radius**2
    else:
        raise TypeError(f"unknown domain {domain!r}")

    index = np.full((ny, nx), -1, dtype=np.int64)
    index[mask] = np.arange(int(mask.sum()))
    jj, ii = np.nonzero(mask)
    # offsets from the lattice centre so mirror-image nodes are exact negatives
    cx, cy = domain.center
    x =cx + (ii - 0.5 * (nx - 1)) * h
    y = cy + (jj - 0.5 * (ny - 1)) * h
    weights = np.full(x.shape, h * h)
    for arr in (mask, index, x, y, weights):
        arr.setflags(write=False)
    return Grid(domain, h, n, nx, ny, xorigin, yorigin, mask, index, x, y, weights)


@dataclass
class Sample:
    values: np.ndarray
    substituted: list[int]


def _cell_average(expr: Expr, x: float, y: float, h: float) -> float:
    """Mean of ``expr`` over the cell ``[x-h/2, x+h/2] x [y-h/2, y+h/2]``.

    Each quadrant is integrated separately so that a point singularity at
    the node only ever sits on a corner, where the adaptive rule never
    evaluates.
    """
    f = lambda yy, xx: evaluate(expr, xx, yy)  # noqa: E731
    total = 0.0
    half = 0.5 * h
    for ax, bx in ((x - half, x), (x, x + half)):
        for ay, by in ((y - half, y), (y, y + half)):
            val, _ = sp_integrate.dblquad(f, ax, bx, ay, by, epsabs=0.0, epsrel=1e-10)
            total += val
    return total / (h * h)


def sample(
    e: Expr | str,
    g: Grid,
    regularization: str = "offset",
    offset: float = 1e-3,
) -> Sample:
    """Sample an expression at the interior nodes.

    Nodes where evaluation fails (a singular potential sitting on a node)
    are regularised and reported in ``Sample.substituted``:

    - ``"offset"``: evaluate at ``(x + offset*h, y + offset*h)``;
    - ``"cell_average"``: use the mean of the expression over the node's
      cell, which keeps ``sum w V u^2`` close to ``int V u^2`` for
      integrable singularities such as ``1/r``.
    """
    if isinstance(e, str):
        e = parse(e)
    if regularization not in ("offset", "cell_average"):
        raise ValueError(f"unknown regularization {regularization!r}")
    values = np.empty(g.size)
    substituted = []
    for k, (xk, yk) in enumerate(zip(g.x.tolist(), g.y.tolist())):
        try:
            values[k] = evaluate(e, xk, yk)
        except EvaluationError as exc:
            if regularization == "offset":
                eps = offset * g.h
                values[k] = evaluate(e, xk + eps, yk + eps)
            else:
                values[k] = _cell_average(e, xk, yk, g.h)
            substituted.append(k)
            log.info(
                "node %d at (%g, %g): %s; %s value %g used",
                k, xk, yk, exc, regularization, values[k],
            )
    if not np.all(np.isfinite(values)):
        raise EvaluationError("sampled values are not all finite")
    return Sample(values, substituted)


def integrate(g: Grid, f: np.ndarray) -> float:
    g.check(f)
    return float(np.dot(g.weights, f))


def lp_integral(g: Grid, u: np.ndarray, p: float) -> float:
    if not p > 1:
        raise ValueError(f"exponent must exceed 1, got {p}")
    g.check(u)
    return float(np.dot(g.weights, np.abs(u) ** p))


def l2_norm_sq(g: Grid, u: np.ndarray) -> float:
    g.check(u)
    return float(np.dot(g.weights, u * u))


def field_csv_text(g: Grid, u: np.ndarray) -> str:
    """``x,y,value`` rows in node order with round-trip precision."""
    g.check(u)
    lines = ["x,y,value"]
    lines.extend(
        f"{xk!r},{yk!r},{float(vk)!r}"
        for xk, yk, vk in zip(g.x.tolist(), g.y.tolist(), u.tolist())
    )
    return "\n".join(lines) + "\n"


def write_field_csv(path: str | Path, g: Grid, u: np.ndarray) -> None:
    Path(path).write_text(field_csv_text(g, u), encoding="utf-8")


def read_field_csv(path: str | Path, g: Grid | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a field CSV; with ``g`` the coordinates must match its nodes."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [c.strip() for c in header] != ["x", "y", "value"]:
            raise ValueError(f"{path}: expected header x,y,value, got {header}")
        rows = np.array([[float(c) for c in row] for row in reader if row], dtype=float)
    if rows.size == 0:
        rows = rows.reshape(0, 3)
    x, y, v = rows[:, 0], rows[:, 1], rows[:, 2]
    if g is not None:
        if x.shape[0] != g.size or not (
            np.allclose(x, g.x, atol=1e-12) and np.allclose(y, g.y, atol=1e-12)
        ):
            raise GridMismatch(f"{path}: node coordinates do not match the grid")
    return x, y, v


def infer_grid(x: np.ndarray, y: np.ndarray, domain: Domain) -> Grid:
    """Rebuild the grid a field CSV was written on, given its domain."""
    if x.shape[0] < 2:
        raise ValueError("need at least two nodes to infer the spacing")
    spacings = np.diff(np.unique(np.round(x, 12)))
    h = float(spacings.min())
    n = int(round(1.0 / h))
    g = build_grid(domain, n)
    if g.size != x.shape[0] or not np.allclose(g.x, x, atol=1e-9) or not np.allclose(g.y, y, atol=1e-9):
        raise GridMismatch("field nodes are not a grid of the given domain")
    return g
