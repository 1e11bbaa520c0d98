"""Energy, gradient, Nehari projections and Morse index for

    -Δu + V u = λ |u|^{p-2} u   (Dirichlet),

with energy ``E_p(u) = ½ ||u||_H² - (λ/p) ∫ |u|^p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence, PartVanished, ZeroField
from .grid import lp_integral
from .operator import FastPoissonPreconditioner, SchrodingerOperator, solve_spd


@dataclass(frozen=True)
class ProblemParams:
    p: float
    lam: float = 1.0

    def __post_init__(self):
        if not self.p > 2:
            raise ValueError(f"exponent p must exceed 2, got {self.p}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")


def energy(op: SchrodingerOperator, params: ProblemParams, u: np.ndarray) -> float:
    return 0.5 * op.h_norm_sq(u) - params.lam / params.p * lp_integral(op.grid, u, params.p)


def nonlinearity(params: ProblemParams, u: np.ndarray) -> np.ndarray:
    """``λ |u|^{p-2} u``."""
    return params.lam * np.abs(u) ** (params.p - 2) * u


def gradient(
    op: SchrodingerOperator,
    params: ProblemParams,
    u: np.ndarray,
    tol: float = 1e-11,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """H-gradient and the intermediate solve ``z = A^{-1}(λ|u|^{p-2}u)``.

    ``z`` is returned so that the next call can warm-start from it.
    """
    op.grid.check(u)
    z = solve_spd(op, nonlinearity(params, u), tol=tol, x0=x0)
    return u - z, z


def grad_H(
    op: SchrodingerOperator, params: ProblemParams, u: np.ndarray, tol: float = 1e-11
) -> np.ndarray:
    """Gradient of the energy in the H inner product.

    ``<grad_H(u), v>_H = dE_p(u)[v]`` for every ``v``.
    """
    return gradient(op, params, u, tol)[0]


def _quad(op: SchrodingerOperator, u: np.ndarray, v: np.ndarray) -> float:
    # Nehari scalings raise ratios of these sums to the power 1/(p-2), which
    # magnifies rounding error as p approaches 2
    return op.h_inner_exact(u, v)


def _lp(op: SchrodingerOperator, u: np.ndarray, p: float) -> float:
    return op.weight * float(np.sum(np.abs(u) ** p))


def nehari_energy(op: SchrodingerOperator, params: ProblemParams, u: np.ndarray) -> float:
    """``(1/2 - 1/p)||u||_H²``, equal to the energy on the Nehari set.

    Unlike the energy itself it involves no cancellation between two
    nearly equal terms.
    """
    return (0.5 - 1.0 / params.p) * _quad(op, u, u)


def nehari_scale(op: SchrodingerOperator, params: ProblemParams, u: np.ndarray) -> float:
    a = _quad(op, u, u)
    b = params.lam * _lp(op, u, params.p)
    if not (a > 0 and b > 0):
        raise ZeroField("cannot project a field without mass onto the Nehari set")
    return (a / b) ** (1.0 / (params.p - 2))


def nehari_project(op: SchrodingerOperator, params: ProblemParams, u: np.ndarray) -> np.ndarray:
    """The unique point ``t u`` (``t > 0``) with ``||tu||_H² = λ ∫|tu|^p``."""
    return nehari_scale(op, params, u) * u


def split_signs(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.maximum(u, 0.0), np.minimum(u, 0.0)


def nodal_scales(
    op: SchrodingerOperator, params: ProblemParams, u: np.ndarray
) -> tuple[float, float]:
    """Scalings ``(s, t)`` maximising ``E_p(s u⁺ + t u⁻)`` over ``s, t > 0``.

    On the grid ``u⁺`` and ``u⁻`` interact through the stencil across the
    nodal line (``c = <u⁺, u⁻>_H > 0``), so the two conditions
    ``dE(w)[w±] = 0`` are coupled:

        s a₊ + t c = s^{p-1} b₊,    t a₋ + s c = t^{p-1} b₋.

    They are solved by damped Newton starting from the uncoupled scalings.
    """
    up, um = split_signs(u)
    p = params.p
    bp = params.lam * _lp(op, up, p)
    bm = params.lam * _lp(op, um, p)
    if not (bp > 0 and bm > 0):
        raise PartVanished("field does not change sign")
    ap = _quad(op, up, up)
    am = _quad(op, um, um)
    c = _quad(op, up, um)
    st = np.array([(ap / bp) ** (1 / (p - 2)), (am / bm) ** (1 / (p - 2))])

    def residual(v):
        s, t = v
        return np.array([s * ap + t * c - s ** (p - 1) * bp, t * am + s * c - t ** (p - 1) * bm])

    F = residual(st)
    scale = max(ap, am) * float(st.max())
    for _ in range(100):
        fn = float(np.abs(F).max())
        if fn <= 1e-15 * scale:
            break
        s, t = st
        J = np.array(
            [[ap - (p - 1) * s ** (p - 2) * bp, c], [c, am - (p - 1) * t ** (p - 2) * bm]]
        )
        step = np.linalg.solve(J, F)
        damp = 1.0
        while damp > 1e-8:
            trial = st - damp * step
            if np.all(trial > 0):
                Ft = residual(trial)
                if float(np.abs(Ft).max()) < fn or damp == 1.0 and fn < 1e-10 * scale:
                    break
            damp *= 0.5
        else:
            break
        if np.allclose(trial, st, rtol=1e-16, atol=0):
            break
        st, F = trial, Ft
    if float(np.abs(F).max()) > 1e-9 * scale:
        raise NonConvergence("nodal Nehari scalings did not converge")
    return float(st[0]), float(st[1])


def nodal_nehari_project(
    op: SchrodingerOperator, params: ProblemParams, u: np.ndarray
) -> np.ndarray:
    """Project a sign-changing field onto the discrete nodal Nehari set.

    Returns ``s u⁺ + t u⁻`` with ``dE_p(w)[w⁺] = dE_p(w)[w⁻] = 0``.
    Raises :class:`PartVanished` if ``u`` is one-signed.
    """
    s, t = nodal_scales(op, params, u)
    up, um = split_signs(u)
    return s * up + t * um


def nehari_defect(op: SchrodingerOperator, params: ProblemParams, u: np.ndarray) -> float:
    """Relative defect ``(||u||² - λ∫|u|^p) / ||u||²``; zero on the Nehari set."""
    a = op.h_norm_sq(u)
    return (a - params.lam * lp_integral(op.grid, u, params.p)) / a


def nodal_defects(op: SchrodingerOperator, params: ProblemParams, u: np.ndarray) -> tuple[float, float]:
    """Relative ``dE_p(u)[u±] / ||u±||_H²`` for both signed parts."""
    out = []
    for part in split_signs(u):
        a = op.h_norm_sq(part)
        d = op.h_inner(u, part) - params.lam * lp_integral(op.grid, part, params.p)
        out.append(d / a)
    return out[0], out[1]


@dataclass
class MorseResult:
    index: int
    eigenvalues: np.ndarray
    threshold: float
    vectors: np.ndarray | None = None  # columns, Euclidean-orthonormal

    @property
    def gap(self) -> float:
        """Distance of the eigenvalue closest to zero from the threshold."""
        return float(np.min(np.abs(self.eigenvalues - self.threshold)))


def linearized_spectrum(
    op: SchrodingerOperator,
    params: ProblemParams,
    u: np.ndarray,
    k: int = 6,
    tol: float = 1e-9,
) -> MorseResult:
    """Lowest ``k`` eigenvalues of ``A - λ(p-1)|u|^{p-2}`` and the Morse count."""
    from .spectra import lowest_eigenpairs

    op.grid.check(u)
    import scipy.sparse as sp

    q = params.lam * (params.p - 1) * np.abs(u) ** (params.p - 2)
    sigma = float(q.max()) if q.size else 0.0
    B = (op.matrix + sp.diags(sigma - q)).tocsr()
    M = FastPoissonPreconditioner(op.grid, float(np.mean(op.V + sigma - q)))
    vals, vecs = lowest_eigenpairs(B, k, M, tol=tol, grid=op.grid)
    mu = vals - sigma
    threshold = -1e-8 * abs(op.lambda_min)
    return MorseResult(int(np.sum(mu < threshold)), mu, threshold, vecs)


def morse_index(
    op: SchrodingerOperator, params: ProblemParams, u: np.ndarray, k: int = 6
) -> int:
    """Number of negative eigenvalues of the linearisation among the lowest ``k``."""
    return linearized_spectrum(op, params, u, k).index


def sobolev_norm_ratio(op: SchrodingerOperator, g: np.ndarray, u: np.ndarray) -> float:
    uu = op.h_norm_sq(u)
    if uu <= 0:
        return math.inf
    return math.sqrt(max(op.h_norm_sq(g), 0.0) / uu)
