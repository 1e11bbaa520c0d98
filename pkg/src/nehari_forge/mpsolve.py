"""Nehari-projected descent for ground states and least-energy nodal solutions.

For a homogeneous nonlinearity the maximum of the energy along the ray
``{t u}`` is the Nehari point, so the mountain-pass step reduces to a
projection.  Each iteration moves along a descent direction in the H
metric, projects back onto the (nodal) Nehari set and accepts the step
by Armijo backtracking.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import NonConvergence, PartVanished, ZeroField
from .expr import Expr, parse
from .grid import Grid, build_grid, sample
from .operator import SchrodingerOperator, assemble
from .varcalc import (
    MorseResult,
    ProblemParams,
    energy,
    gradient,
    linearized_spectrum,
    nehari_energy,
    nehari_project,
    nodal_nehari_project,
)

log = logging.getLogger(__name__)

MIN_STEP = 1e-12
# relative energy slack for round-off once the decrease is below fp resolution
ENERGY_SLACK = 1e-13


@dataclass(frozen=True)
class SolveConfig:
    """Descent settings.

    ``seed`` is an expression (string or parsed) sampled on the grid, or a
    field.  ``method`` is ``"cg"`` (Polak-Ribiere+ directions in the H
    metric) or ``"steepest"`` (negative gradient with Barzilai-Borwein
    trial steps).  ``coarse_levels`` coarser grids are solved first and
    interpolated up as the starting point.
    """

    params: ProblemParams
    seed: str | Expr | np.ndarray
    step0: float = 1.0
    shrink: float = 0.5
    grad_tol: float = 1e-7
    max_iter: int = 5000
    method: str = "cg"
    max_step: float = 50.0
    armijo: float = 1e-4
    coarse_levels: int = 0
    morse: bool = True
    morse_k: int = 6
    escapes: int = 3
    escape_size: float = 1e-2

    def __post_init__(self):
        if not self.step0 > 0:
            raise ValueError("step0 must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.method not in ("cg", "steepest"):
            raise ValueError(f"unknown descent method {self.method!r}")
        if self.coarse_levels < 0:
            raise ValueError("coarse_levels must be non-negative")


@dataclass
class SolveResult:
    u: np.ndarray
    energy: float
    residual: float
    iterations: int
    morse_index: int | None
    u_min: float
    u_max: float
    trace: list[tuple[float, float]] = field(repr=False)
    mode: str = "gs"
    morse: MorseResult | None = field(default=None, repr=False)
    coarse_iterations: list[int] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def extrema(self) -> tuple[float, float]:
        return self.u_min, self.u_max

    def summary(self) -> dict:
        out = {
            "mode": self.mode,
            "energy": self.energy,
            "residual": self.residual,
            "iterations": self.iterations,
            "coarse_iterations": list(self.coarse_iterations),
            "min": self.u_min,
            "max": self.u_max,
            "morse_index": self.morse_index,
            "seconds": round(self.seconds, 3),
        }
        if self.morse is not None:
            out["linearized_eigenvalues"] = [float(v) for v in self.morse.eigenvalues]
            out["morse_gap"] = self.morse.gap
        return out


def seed_field(g: Grid, seed) -> np.ndarray:
    if isinstance(seed, np.ndarray):
        g.check(seed)
        return np.array(seed, dtype=float)
    e = parse(seed) if isinstance(seed, str) else seed
    return sample(e, g).values


def _descend(
    op: SchrodingerOperator,
    cfg: SolveConfig,
    u0: np.ndarray,
    project: Callable[[SchrodingerOperator, ProblemParams, np.ndarray], np.ndarray],
) -> tuple[np.ndarray, float, float, int, list[tuple[float, float]]]:
    params = cfg.params
    # iterates lie on the Nehari set, where the energy has a cancellation-free form
    E = lambda v: nehari_energy(op, params, v)  # noqa: E731
    u = project(op, params, u0)
    e = E(u)
    trace: list[tuple[float, float]] = []
    z = None
    d = None
    g_old = u_old = None
    gAg_old = 0.0
    s = cfg.step0
    w = op.weight
    res = 1.0
    for k in range(cfg.max_iter + 1):
        # inexact inner solves far from convergence, tight ones near it
        g, z = gradient(op, params, u, tol=min(max(1e-3 * res, 1e-11), 1e-6), x0=z)
        Ag = op.apply(g)
        gAg = float(np.dot(g, Ag))
        uu = op.h_norm_sq(u)
        res = math.sqrt(max(w * gAg, 0.0) / uu)
        trace.append((e, res))
        if res <= cfg.grad_tol:
            g, z = gradient(op, params, u, tol=1e-11, x0=z)
            res = math.sqrt(max(op.h_norm_sq(g), 0.0) / uu)
            if res <= cfg.grad_tol:
                trace[-1] = (e, res)
                return u, energy(op, params, u), res, k, trace
            Ag = op.apply(g)
            gAg = float(np.dot(g, Ag))
        if k == cfg.max_iter:
            break
        if cfg.method == "steepest" or d is None:
            d = -g
        else:
            beta = max(0.0, (gAg - float(np.dot(g_old, Ag))) / gAg_old)
            d = -g + beta * d
            dAd = float(np.dot(d, op.apply(d)))
            if float(np.dot(d, Ag)) >= -1e-3 * math.sqrt(gAg * dAd):
                d = -g
        slope = w * float(np.dot(d, Ag))
        if k > 0:
            if cfg.method == "steepest":
                du, dg = u - u_old, g - g_old
                den = op.h_inner(du, dg)
                s = op.h_norm_sq(du) / den if den > 0 else cfg.step0
            else:
                s = 2.0 * s
            s = min(max(s, 1e-3), cfg.max_step)
        u_old, g_old, gAg_old = u, g, gAg
        slack = ENERGY_SLACK * abs(e)

        def trial(step):
            try:
                with np.errstate(all="ignore"):
                    v = project(op, params, u + step * d)
                ev = E(v)
            except (ZeroField, NonConvergence):
                return None, math.inf
            return v, (ev if np.isfinite(ev) else math.inf)

        while True:
            if s < MIN_STEP:
                if project is nodal_nehari_project:
                    raise PartVanished(
                        f"line search collapsed at step {s:.1e} (iteration {k}, residual {res:.2e})"
                    )
                raise NonConvergence(
                    f"line search collapsed at step {s:.1e} (iteration {k}, residual {res:.2e})"
                )
            v, ev = trial(s)
            # minimiser of the quadratic through e, slope and ev
            curv = (ev - e - slope * s) / (s * s) if math.isfinite(ev) else math.inf
            if curv > 0 and math.isfinite(curv):
                s_q = -slope / (2.0 * curv)
                if ev <= e + cfg.armijo * s * slope + slack:
                    if 0.1 * s < s_q < 10.0 * s and abs(s_q - s) > 1e-3 * s:
                        v2, ev2 = trial(s_q)
                        if ev2 < ev:
                            v, ev, s = v2, ev2, s_q
                    break
                s = max(min(s_q, 0.5 * s), 0.1 * s) if s_q < s else cfg.shrink * s
            elif ev <= e + cfg.armijo * s * slope + slack:
                break
            else:
                s *= cfg.shrink
        u, e = v, ev
    raise NonConvergence(
        f"descent stopped after {cfg.max_iter} iterations at residual {res:.2e} "
        f"(target {cfg.grad_tol:.1e})"
    )


def escape_direction(
    op: SchrodingerOperator, params: ProblemParams, u: np.ndarray, morse: MorseResult, mode: str
) -> np.ndarray | None:
    """A direction of negative curvature tangent to the constraint set, if any.

    The Nehari set removes one unstable direction (two for the nodal set),
    so a critical point with a larger Morse index is a saddle of the
    constrained problem.  Negative eigenvectors of the linearisation are
    projected H-orthogonally off ``span(u)`` (resp. ``span(u⁺, u⁻)``); the
    one with the most negative second variation is returned.
    """
    target = 1 if mode == "gs" else 2
    if morse.vectors is None or morse.index <= target:
        return None
    if mode == "gs":
        span = [u]
    else:
        span = [np.maximum(u, 0.0), np.minimum(u, 0.0)]
    Q, _ = np.linalg.qr(np.column_stack([op.apply(b) for b in span]))
    # H-orthogonal to span <=> Euclidean-orthogonal to A·span
    q = params.lam * (params.p - 1) * np.abs(u) ** (params.p - 2)
    best, best_val = None, 0.0
    for j in range(morse.index):
        v = morse.vectors[:, j]
        v = v - Q @ (Q.T @ v)
        vv = op.h_norm_sq(v)
        if vv <= 0:
            continue
        val = (vv - op.weight * float(np.dot(q * v, v))) / vv
        if val < best_val - 1e-10:
            best, best_val = v, val
    return best


def _escape_step(op, cfg, u, v, e, project):
    """Move from a saddle along ``v`` by the amplitude with the lowest projected energy.

    Amplitudes grow geometrically from ``escape_size`` (relative H-norm)
    while the projected energy keeps dropping.
    """
    v = v * math.sqrt(op.h_norm_sq(u) / op.h_norm_sq(v))
    best, best_e = None, e
    a = cfg.escape_size
    while a <= 2.0:
        try:
            trial = project(op, cfg.params, u + a * v)
        except (ZeroField, NonConvergence):
            break
        et = energy(op, cfg.params, trial)
        if et >= best_e and best is not None:
            break
        if et < best_e or best is None:
            best, best_e = trial, min(et, best_e)
        a *= 2.0
    return best if best is not None else u + cfg.escape_size * v


def coarsen(op: SchrodingerOperator) -> SchrodingerOperator | None:
    """Operator on the grid with twice the spacing, potential by injection."""
    g = op.grid
    if g.n % 2:
        return None
    try:
        gc = build_grid(g.domain, g.n // 2)
    except ValueError:
        return None
    if gc.size < 16:
        return None
    lat = g.to_lattice(op.V)
    # coarse node (jc, ic) is fine lattice node (j, i) at the same point
    cx, cy = g.domain.center
    jj = np.rint((gc.y - cy) / g.h + 0.5 * (g.ny - 1)).astype(int)
    ii = np.rint((gc.x - cx) / g.h + 0.5 * (g.nx - 1)).astype(int)
    if not (
        np.all((0 <= jj) & (jj < g.ny) & (0 <= ii) & (ii < g.nx)) and np.all(g.mask[jj, ii])
    ):
        return None
    return assemble(gc, lat[jj, ii])


def prolong(gc: Grid, uc: np.ndarray, g: Grid) -> np.ndarray:
    """Bilinear interpolation of a coarse field to the fine nodes (zero outside)."""
    lat = np.pad(gc.to_lattice(uc), 1)
    cx, cy = gc.domain.center
    xs = cx + (np.arange(gc.nx + 2) - 0.5 * (gc.nx + 1)) * gc.h
    ys = cy + (np.arange(gc.ny + 2) - 0.5 * (gc.ny + 1)) * gc.h
    f = RegularGridInterpolator((ys, xs), lat, bounds_error=False, fill_value=0.0)
    return f(np.column_stack([g.y, g.x]))


def _solve(op: SchrodingerOperator, cfg: SolveConfig, mode: str) -> SolveResult:
    t0 = time.perf_counter()
    project = nehari_project if mode == "gs" else nodal_nehari_project
    coarse_its: list[int] = []
    u0 = None
    if cfg.coarse_levels > 0 and not isinstance(cfg.seed, np.ndarray):
        opc = coarsen(op)
        if opc is not None:
            sub = SolveConfig(
                **{**cfg.__dict__, "coarse_levels": cfg.coarse_levels - 1, "morse": False}
            )
            rc = _solve(opc, sub, mode)
            coarse_its = rc.coarse_iterations + [rc.iterations]
            u0 = prolong(opc.grid, rc.u, op.grid)
    if u0 is None:
        u0 = seed_field(op.grid, cfg.seed)
    if not np.any(u0):
        raise ZeroField("seed samples to the zero field")
    if mode == "lens" and not (np.any(u0 > 0) and np.any(u0 < 0)):
        raise PartVanished("seed does not change sign")
    u, e, res, its, trace = _descend(op, cfg, u0, project)
    need_morse = cfg.morse or cfg.escapes > 0
    morse = linearized_spectrum(op, cfg.params, u, cfg.morse_k) if need_morse else None
    for _ in range(cfg.escapes):
        v = escape_direction(op, cfg.params, u, morse, mode) if morse else None
        if v is None:
            break
        log.info("%s: leaving a saddle with Morse index %d (E=%.6g)", mode, morse.index, e)
        u = _escape_step(op, cfg, u, v, e, project)
        u, e, res, k2, tr2 = _descend(op, cfg, u, project)
        its += k2
        trace += tr2
        morse = linearized_spectrum(op, cfg.params, u, cfg.morse_k)
    if not cfg.morse:
        morse = None
    log.info("%s: E=%.6g residual=%.2e after %d iterations", mode, e, res, its)
    return SolveResult(
        u=u,
        energy=e,
        residual=res,
        iterations=its,
        morse_index=morse.index if morse else None,
        u_min=float(u.min()),
        u_max=float(u.max()),
        trace=trace,
        mode=mode,
        morse=morse,
        coarse_iterations=coarse_its,
        seconds=time.perf_counter() - t0,
    )


def ground_state(op: SchrodingerOperator, cfg: SolveConfig) -> SolveResult:
    """Minimise the energy on the Nehari set starting from ``cfg.seed``."""
    return _solve(op, cfg, "gs")


def least_energy_nodal(op: SchrodingerOperator, cfg: SolveConfig) -> SolveResult:
    """Minimise the energy on the nodal Nehari set starting from a sign-changing seed."""
    return _solve(op, cfg, "lens")
