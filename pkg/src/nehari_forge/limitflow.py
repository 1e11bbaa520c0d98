"""Behaviour of solutions as p decreases to 2.

With ``λ`` equal to an eigenvalue ``λ_i``, the rescaled solutions
``(λ_i/λ)^{1/(2-p)} u_p`` approach a minimiser ``u*`` of the limit functional

    E*(u) = (λ_i/2) ∫ u² - u² log u²

on the eigenspace ``E_i`` under the constraint ``∫ u² log u² = 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.sparse.linalg import LinearOperator, minres

from .errors import NonConvergence, PartVanished
from .grid import Grid, integrate, l2_norm_sq
from .mpsolve import SolveConfig, SolveResult, ground_state, least_energy_nodal
from .operator import SchrodingerOperator, pcg
from .spectra import Spectrum, project_eigenspace
from .varcalc import ProblemParams

log = logging.getLogger(__name__)

DEFAULT_P_LIST = (3.0, 2.5, 2.2, 2.1, 2.05, 2.02)


def u2logu2(u: np.ndarray) -> np.ndarray:
    """``u² log u²`` with the continuous value 0 at ``u = 0``."""
    out = np.zeros_like(u, dtype=float)
    nz = u != 0
    out[nz] = u[nz] ** 2 * np.log(u[nz] ** 2)
    return out


def limit_constraint(g: Grid, u: np.ndarray) -> float:
    """``∫ u² log u²``; zero on the constraint set of ``E*``."""
    return integrate(g, u2logu2(u))


def limit_energy(g: Grid, lam_i: float, u: np.ndarray) -> float:
    return 0.5 * lam_i * integrate(g, u * u - u2logu2(u))


def constrained_scaling(g: Grid, v: np.ndarray) -> tuple[float, np.ndarray]:
    """Scale ``v`` onto ``∫ u² log u² = 0``.

    For ``∫v² = 1`` the constraint reads ``log t² = -∫ v² log v²``;
    ``v`` is normalised first.  Returns ``(t, t·v̂)``.
    """
    m = l2_norm_sq(g, v)
    if not m > 0:
        raise ValueError("cannot scale the zero field")
    vh = v / math.sqrt(m)
    t = math.exp(-0.5 * limit_constraint(g, vh))
    return t, t * vh


@dataclass
class LimitMinimizer:
    cluster: int
    coefficients: np.ndarray
    scale: float
    u: np.ndarray
    energy: float


def _combine(basis: np.ndarray, c: np.ndarray) -> np.ndarray:
    return c @ basis


def _direction_energy(S: Spectrum, i: int, c: np.ndarray) -> float:
    g = S.grid
    lam_i = S[i].value
    t, u = constrained_scaling(g, _combine(S[i].basis, c))
    # on the constraint set E* reduces to λ_i ∫u² / 2 = λ_i t² / 2
    return 0.5 * lam_i * t * t


def _sphere(d: int, angles: np.ndarray) -> np.ndarray:
    if d == 2:
        return np.array([math.cos(angles[0]), math.sin(angles[0])])
    th, ph = angles
    return np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])


def limit_minimize(S: Spectrum, i: int, n_angles: int = 720) -> LimitMinimizer:
    """Minimise ``E*`` over the constrained directions of eigenspace ``i``.

    A one-dimensional eigenspace has the closed form ``±t e``.  In two
    dimensions the coefficient circle is scanned at ``n_angles`` angles
    and the best one refined by golden-section search; a three-dimensional
    eigenspace uses a latitude-longitude grid refined by Nelder-Mead.
    """
    c = S[i]
    d = c.multiplicity
    f = lambda coef: _direction_energy(S, i, coef)  # noqa: E731
    if d == 1:
        coef = np.array([1.0])
    elif d == 2:
        thetas = np.arange(n_angles) * (2 * math.pi / n_angles)
        vals = np.array([f(_sphere(2, [t])) for t in thetas])
        k = int(np.argmin(vals))
        step = 2 * math.pi / n_angles
        res = minimize_scalar(
            lambda t: f(_sphere(2, [t])),
            bracket=(thetas[k] - step, thetas[k], thetas[k] + step),
            method="golden",
            options={"xtol": 1e-10},
        )
        best = res.x if res.fun <= vals[k] else thetas[k]
        coef = _sphere(2, [best])
    elif d == 3:
        nt = max(n_angles // 8, 45)
        grid_pts = [
            (th, ph)
            for th in np.linspace(0, math.pi / 2, nt)
            for ph in np.linspace(0, 2 * math.pi, 2 * nt, endpoint=False)
        ]
        vals = [f(_sphere(3, a)) for a in grid_pts]
        a0 = grid_pts[int(np.argmin(vals))]
        res = minimize(
            lambda a: f(_sphere(3, a)), a0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14}
        )
        coef = _sphere(3, res.x if res.fun <= min(vals) else a0)
    else:
        raise ValueError(
            f"eigenspace {i} has dimension {d}; the direction search supports at most 3"
        )
    t, u = constrained_scaling(S.grid, _combine(c.basis, coef))
    return LimitMinimizer(i, coef, t, u, limit_energy(S.grid, c.value, u))


def _deflate(basis: np.ndarray, x: np.ndarray) -> np.ndarray:
    # basis rows are mutually orthogonal (L²-orthonormal up to the uniform weight)
    coef = (basis @ x) / np.einsum("ij,ij->i", basis, basis)
    return x - coef @ basis


def predictor_rhs(S: Spectrum, i: int, u_star: np.ndarray) -> np.ndarray:
    lam_i = S[i].value
    out = np.zeros_like(u_star)
    nz = u_star != 0
    out[nz] = lam_i * u_star[nz] * np.log(np.abs(u_star[nz]))
    return out


def predictor_rhs_defect(S: Spectrum, i: int, u_star: np.ndarray) -> float:
    """Relative size of the eigenspace component of the predictor right-hand side."""
    f = predictor_rhs(S, i, u_star)
    nf = math.sqrt(l2_norm_sq(S.grid, f))
    if nf == 0:
        return 0.0
    pf = f - _deflate(S[i].basis, f)
    return math.sqrt(l2_norm_sq(S.grid, pf)) / nf


def predictor_w(
    op: SchrodingerOperator,
    S: Spectrum,
    i: int,
    u_star: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 5000,
) -> np.ndarray:
    """First-order correction ``w`` with ``(A - λ_i) w = λ_i u* log|u*|``, ``w ⊥ E_i``.

    The eigenspace component of the right-hand side is removed first.
    On ``E_1^⊥`` the operator is positive definite and deflated CG is
    used; for higher clusters it is indefinite there and MINRES (with
    the same deflation) is used instead.
    """
    op.grid.check(u_star)
    c = S[i]
    basis = c.basis
    f = _deflate(basis, predictor_rhs(S, i, u_star))
    if not np.any(f):
        return np.zeros_like(f)
    n = op.grid.size
    A = op.matrix
    lam_i = c.value
    M = op.preconditioner
    P = lambda x: _deflate(basis, x)  # noqa: E731
    Aop = LinearOperator((n, n), matvec=lambda x: P(A @ P(x) - lam_i * P(x)), dtype=float)
    if i == 1:
        Mop = lambda r: P(M(P(r)))  # noqa: E731
        w, _ = pcg(Aop, f, Mop, tol=tol, max_iter=max_iter)
    else:
        Mop = LinearOperator((n, n), matvec=lambda r: P(M(P(r))), dtype=float)
        w, info = minres(Aop, f, M=Mop, rtol=tol, maxiter=max_iter)
        if info != 0:
            raise NonConvergence(f"MINRES did not converge (info={info})")
        w = P(w)
        res = np.linalg.norm(Aop @ w - f) / np.linalg.norm(f)
        if res > 10 * tol:
            raise NonConvergence(f"predictor residual {res:.2e} exceeds {tol:.1e}")
    return P(w)


@dataclass
class ContinuationStep:
    p: float
    result: SolveResult
    rescaled: np.ndarray = field(repr=False)
    norm: float
    rescaled_norm: float
    eigenspace_distance: float
    distance_to_limit: float

    def row(self) -> dict:
        return {
            "p": self.p,
            "energy": self.result.energy,
            "h_norm": self.norm,
            "rescaled_h_norm": self.rescaled_norm,
            "eigenspace_distance": self.eigenspace_distance,
            "distance_to_limit": self.distance_to_limit,
            "iterations": self.result.iterations,
        }


@dataclass
class ContinuationResult:
    mode: str
    cluster: int
    lam: float
    lam_i: float
    limit: LimitMinimizer
    limit_norm: float
    steps: list[ContinuationStep]
    skipped: list[float] = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [s.row() for s in self.steps]


def continuation(
    op: SchrodingerOperator,
    S: Spectrum,
    p_list=DEFAULT_P_LIST,
    mode: str = "gs",
    lam: float | None = None,
    lam_factor: float = 1.0,
    use_predictor: bool = True,
    solve_kwargs: dict | None = None,
) -> ContinuationResult:
    """Solve along decreasing ``p`` and compare rescaled solutions with ``u*``.

    ``λ`` defaults to ``lam_factor · λ_i`` with ``i = 1`` for ground states
    and ``i = 2`` for nodal solutions.  Each solve is seeded with the
    previous solution; the first with ``u* + (p-2) w`` when
    ``use_predictor`` is set.
    """
    p_list = [float(p) for p in p_list]
    if any(b >= a for a, b in zip(p_list, p_list[1:])):
        raise ValueError("p values must be strictly decreasing")
    if any(p <= 2 for p in p_list):
        raise ValueError("p values must exceed 2")
    if mode not in ("gs", "lens"):
        raise ValueError(f"mode must be 'gs' or 'lens', got {mode!r}")
    i = 1 if mode == "gs" else 2
    lam_i = S[i].value
    lam = lam_factor * lam_i if lam is None else float(lam)
    lim = limit_minimize(S, i)
    u_star = lim.u
    star_norm = math.sqrt(op.h_norm_sq(u_star))
    w = predictor_w(op, S, i, u_star) if use_predictor else np.zeros_like(u_star)
    solver = ground_state if mode == "gs" else least_energy_nodal
    kwargs = {"morse": False, **(solve_kwargs or {})}
    steps: list[ContinuationStep] = []
    skipped: list[float] = []
    seed = None
    for p in p_list:
        if seed is None:
            seed = u_star + (p - 2.0) * w
        cfg = SolveConfig(ProblemParams(p, lam), seed, **kwargs)
        try:
            r = solver(op, cfg)
        except PartVanished as exc:
            log.warning("p=%g skipped: %s", p, exc)
            skipped.append(p)
            continue
        factor = (lam_i / lam) ** (1.0 / (2.0 - p))
        ut = factor * r.u
        ptu = project_eigenspace(S, i, ut)
        dist_e = math.sqrt(max(op.h_norm_sq(ut - ptu), 0.0))
        dist_star = min(
            math.sqrt(max(op.h_norm_sq(ut - s * u_star), 0.0)) for s in (1.0, -1.0)
        )
        steps.append(
            ContinuationStep(
                p, r, ut, math.sqrt(op.h_norm_sq(r.u)), math.sqrt(op.h_norm_sq(ut)), dist_e, dist_star
            )
        )
        log.info(
            "p=%g: E=%.6g ||u||=%.4g eigenspace distance %.3e (limit norm %.4g)",
            p, r.energy, steps[-1].norm, dist_e, star_norm,
        )
        seed = r.u
    return ContinuationResult(mode, i, lam, lam_i, lim, star_norm, steps, skipped)
