"""Reflections and point inversion of grid fields, and odd/even classification.

Transforms act as exact permutations of the interior nodes; they are only
offered where the lattice maps onto itself, so no interpolation enters a
symmetry score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Disk, Grid, Rectangle
from .operator import SchrodingerOperator

DEFAULT_THRESHOLD = 1e-3

TRANSFORM_NAMES = ("reflect-x", "reflect-y", "reflect-diag", "reflect-antidiag", "point-inversion")


class NonConformingGrid(ValueError):
    """The requested transform does not map the lattice onto itself."""


@dataclass(frozen=True, eq=False)
class SymmetryTransform:
    """A reflection or point inversion and the node permutation it induces.

    ``reflect-x`` mirrors across the horizontal median (``y ↦ 2c_y - y``),
    ``reflect-y`` across the vertical median (``x ↦ 2c_x - x``).
    ``(u∘g)[k] = u[perm[k]]``.
    """

    name: str
    perm: np.ndarray = field(repr=False)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return u[self.perm]


def _lattice_map(name: str, jj: np.ndarray, ii: np.ndarray, ny: int, nx: int):
    if name == "reflect-x":
        return ny - 1 - jj, ii
    if name == "reflect-y":
        return jj, nx - 1 - ii
    if name == "point-inversion":
        return ny - 1 - jj, nx - 1 - ii
    if name == "reflect-diag":
        return ii, jj
    if name == "reflect-antidiag":
        return nx - 1 - ii, ny - 1 - jj
    raise ValueError(f"unknown transform {name!r}")


def make_transform(g: Grid, name: str) -> SymmetryTransform:
    """Build the node permutation of ``name`` on ``g``."""
    if name not in TRANSFORM_NAMES:
        raise ValueError(f"unknown transform {name!r}; choose from {TRANSFORM_NAMES}")
    if name in ("reflect-diag", "reflect-antidiag"):
        dom = g.domain
        square = isinstance(dom, Disk) or (isinstance(dom, Rectangle) and dom.is_square)
        if not square or g.nx != g.ny:
            raise NonConformingGrid(f"{name} needs a square or disk with equal node counts")
    jj, ii = np.nonzero(g.mask)
    tj, ti = _lattice_map(name, jj, ii, g.ny, g.nx)
    if not np.all(g.mask[tj, ti]):
        raise NonConformingGrid(f"{name} does not map interior nodes onto interior nodes")
    perm = g.index[tj, ti].copy()
    if not np.array_equal(perm[perm], np.arange(g.size)):
        raise NonConformingGrid(f"{name} does not induce an involution on the nodes")
    perm.setflags(write=False)
    return SymmetryTransform(name, perm)


def domain_transforms(g: Grid) -> list[SymmetryTransform]:
    """All transforms leaving the domain and its lattice invariant."""
    out = []
    for name in TRANSFORM_NAMES:
        try:
            out.append(make_transform(g, name))
        except NonConformingGrid:
            continue
    return out


def applicable_transforms(g: Grid, V: np.ndarray, tol: float = 1e-10) -> list[SymmetryTransform]:
    """Transforms under which both the domain and the sampled potential are invariant."""
    g.check(V)
    scale = max(1.0, float(np.abs(V).max()))
    return [t for t in domain_transforms(g) if float(np.abs(t.apply(V) - V).max()) <= tol * scale]


@dataclass(frozen=True)
class Classification:
    transform: str
    even_score: float
    odd_score: float
    label: str

    def as_dict(self) -> dict:
        return {
            "transform": self.transform,
            "even_score": self.even_score,
            "odd_score": self.odd_score,
            "classification": self.label,
        }


def classify(
    op: SchrodingerOperator, u: np.ndarray, t: SymmetryTransform, threshold: float = DEFAULT_THRESHOLD
) -> Classification:
    """Even/odd scores ``||u∘g ∓ u||_H / ||u||_H`` and the resulting label."""
    op.grid.check(u)
    uu = op.h_norm_sq(u)
    ug = t.apply(u)
    if uu <= 0:
        return Classification(t.name, 0.0, 0.0, "even")
    even = math.sqrt(max(op.h_norm_sq(ug - u), 0.0) / uu)
    odd = math.sqrt(max(op.h_norm_sq(ug + u), 0.0) / uu)
    if even < threshold:
        label = "even"
    elif odd < threshold:
        label = "odd"
    else:
        label = "broken"
    return Classification(t.name, even, odd, label)


@dataclass
class SymmetryReport:
    threshold: float
    entries: list[Classification]

    def __getitem__(self, name: str) -> Classification:
        for c in self.entries:
            if c.transform == name:
                return c
        raise KeyError(name)

    def labels(self) -> dict[str, str]:
        return {c.transform: c.label for c in self.entries}

    def best_axis(self) -> Classification | None:
        """The transform with the smallest of its two scores."""
        if not self.entries:
            return None
        return min(self.entries, key=lambda c: min(c.even_score, c.odd_score))

    def short(self) -> str:
        """Compact text such as ``"reflect-x: even; point-inversion: broken"``."""
        return "; ".join(f"{c.transform}: {c.label}" for c in self.entries)

    def as_dict(self) -> dict:
        best = self.best_axis()
        return {
            "threshold": self.threshold,
            "transforms": [c.as_dict() for c in self.entries],
            "best_axis": best.transform if best else None,
        }


def symmetry_report(
    op: SchrodingerOperator,
    u: np.ndarray,
    transforms: list[SymmetryTransform] | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> SymmetryReport:
    """Classify ``u`` under every transform that preserves the domain and ``V``."""
    if transforms is None:
        transforms = applicable_transforms(op.grid, op.V)
    return SymmetryReport(threshold, [classify(op, u, t, threshold) for t in transforms])
