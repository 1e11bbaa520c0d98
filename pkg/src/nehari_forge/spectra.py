"""Low eigenpairs of ``-Δ_h + V``, grouped into distinct eigenvalues.

Because the nodal weight is uniform, the generalised problem
``A e = λ W e`` has the spectrum of ``A`` itself.  Eigenvectors are
normalised in the discrete L² sense (``Σ w e² = 1``), so that
``<e_a, e_b>_H = λ δ_ab``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, lobpcg

from .errors import NonConvergence
from .grid import Grid
from .operator import FastPoissonPreconditioner, SchrodingerOperator

log = logging.getLogger(__name__)

SIGN_TOL = 1e-8


def _initial_block(g: Grid, m: int) -> np.ndarray:
    """Low sine modes of the bounding lattice plus a fixed small perturbation."""
    jj, ii = np.nonzero(g.mask)
    Lx, Ly = g.nx + 1, g.ny + 1
    modes = sorted(
        ((a / Lx) ** 2 + (b / Ly) ** 2, a, b) for a in range(1, m + 2) for b in range(1, m + 2)
    )[:m]
    X = np.empty((g.size, m))
    for col, (_, a, b) in enumerate(modes):
        X[:, col] = np.sin(np.pi * a * (ii + 1) / Lx) * np.sin(np.pi * b * (jj + 1) / Ly)
    rng = np.random.default_rng(7)
    X += 1e-2 * rng.standard_normal(X.shape)
    return X


def rayleigh_ritz(A, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ritz pairs of ``A`` on span(X); Ritz vectors are orthonormal and A-orthogonal."""
    Q, _ = np.linalg.qr(X)
    H = Q.T @ (A @ Q)
    H = 0.5 * (H + H.T)
    vals, vecs = sla.eigh(H)
    return vals, Q @ vecs


def lowest_eigenpairs(
    A,
    k: int,
    precond=None,
    tol: float = 1e-9,
    max_iter: int = 2000,
    guard: int | None = None,
    grid: Grid | None = None,
    X0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """The ``k`` algebraically smallest eigenpairs of the symmetric matrix ``A``.

    Block LOBPCG with ``k + guard`` vectors, followed by a Rayleigh-Ritz
    pass so that the returned Euclidean-orthonormal eigenvectors are also
    mutually A-orthogonal to round-off.  ``tol`` is relative to the
    largest diagonal entry ``s`` of ``A`` (a norm estimate):
    ``||A x - θ x|| <= tol * s`` for every returned unit vector.
    """
    n = A.shape[0]
    if guard is None:
        guard = max(2, k // 2)
    m = min(k + guard, n)
    if X0 is None:
        if grid is None:
            rng = np.random.default_rng(7)
            X0 = rng.standard_normal((n, m))
        else:
            X0 = _initial_block(grid, m)
    M = None
    if precond is not None:
        M = LinearOperator((n, n), matvec=precond, matmat=precond, dtype=float)
    if n <= 4 * m + 10:
        # too small for lobpcg; dense fallback
        vals, vecs = sla.eigh(A.toarray() if hasattr(A, "toarray") else np.asarray(A))
        return vals[:k], vecs[:, :k]
    scale = abs(float(A.diagonal().max())) or 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals, vecs = lobpcg(
            A, X0, M=M, tol=0.5 * tol * scale, maxiter=max_iter, largest=False
        )
    vals, vecs = rayleigh_ritz(A, vecs)
    vals, vecs = vals[:k], vecs[:, :k]
    res = np.linalg.norm(A @ vecs - vecs * vals, axis=0)
    if np.any(res > tol * scale):
        raise NonConvergence(
            f"eigensolver residuals {res.max():.2e} exceed tolerance after {max_iter} iterations"
        )
    return vals, vecs


@dataclass
class Cluster:
    """One distinct eigenvalue with an L²-orthonormal basis of its eigenspace."""

    value: float
    members: np.ndarray
    basis: np.ndarray  # shape (d, n)
    principal: bool
    nodal_nodes: int

    @property
    def multiplicity(self) -> int:
        return self.basis.shape[0]


@dataclass
class Spectrum:
    op: SchrodingerOperator
    clusters: list[Cluster]

    @property
    def grid(self) -> Grid:
        return self.op.grid

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([c.members for c in self.clusters])

    def __getitem__(self, i: int) -> Cluster:
        """Cluster ``i`` with 1-based numbering (``S[1]`` holds λ₁)."""
        if not 1 <= i <= len(self.clusters):
            raise IndexError(f"cluster {i} not computed (have {len(self.clusters)})")
        return self.clusters[i - 1]

    @property
    def unique_principal(self) -> bool:
        return is_unique_principal(self)[0]

    def summary(self) -> dict:
        ok, report = is_unique_principal(self)
        return {
            "eigenvalues": [float(c.value) for c in self.clusters],
            "multiplicities": [c.multiplicity for c in self.clusters],
            "members": [[float(v) for v in c.members] for c in self.clusters],
            "principal": [c.principal for c in self.clusters],
            "unique_principal": ok,
            "sign_evidence": report,
        }


def _one_signed(e: np.ndarray) -> bool:
    k = int(np.argmax(np.abs(e)))
    e = e if e[k] > 0 else -e
    return bool(e.min() > -SIGN_TOL * e[k])


def _nodal_count(e: np.ndarray) -> int:
    # nodes whose value is negligible compared to the peak
    return int(np.sum(np.abs(e) <= 1e-6 * np.abs(e).max()))


def cluster_tolerance(h: float) -> float:
    return max(1e-6, 10.0 * h * h)


def eig_smallest(op: SchrodingerOperator, k: int = 6, eig_tol: float = 1e-9) -> Spectrum:
    """Smallest ``k`` eigenpairs of ``-Δ_h + V`` grouped into clusters.

    Eigenvalues closer than ``max(1e-6, 10 h²)`` relative are one cluster.
    Extra vectors are computed so that a cluster is never cut off; the
    returned spectrum holds at least ``k`` eigenvalues in complete clusters.
    """
    if k < 1:
        raise ValueError("k must be positive")
    g = op.grid
    rel = cluster_tolerance(g.h)
    extra = 4
    while True:
        m = min(k + extra, g.size)
        vals, vecs = lowest_eigenpairs(
            op.matrix, m, op.preconditioner, tol=eig_tol, grid=g
        )
        groups: list[list[int]] = []
        for j, v in enumerate(vals):
            if groups and abs(v - vals[groups[-1][0]]) <= rel * abs(vals[groups[-1][0]]):
                groups[-1].append(j)
            else:
                groups.append([j])
        # the last group may continue beyond what was computed
        complete = groups[:-1] if m < g.size else groups
        if sum(len(grp) for grp in complete) >= min(k, g.size) or m == g.size:
            break
        extra *= 2
    scale = 1.0 / np.sqrt(op.weight)
    clusters = []
    count = 0
    for grp in complete:
        if count >= k:
            break
        E = vecs[:, grp] * scale
        basis = E.T.copy()
        d = len(grp)
        principal = d == 1 and _one_signed(basis[0])
        nodal = min(_nodal_count(b) for b in basis)
        clusters.append(
            Cluster(float(np.mean(vals[grp])), vals[grp].copy(), basis, principal, nodal)
        )
        count += d
    return Spectrum(op, clusters)


def project_eigenspace(S: Spectrum, i: int, u: np.ndarray) -> np.ndarray:
    """H-orthogonal projection of ``u`` onto cluster ``i`` (1-based)."""
    c = S[i]
    op = S.op
    out = np.zeros_like(u, dtype=float)
    for e in c.basis:
        out += (op.h_inner(u, e) / op.h_inner(e, e)) * e
    return out


def is_unique_principal(S: Spectrum) -> tuple[bool, list[dict]]:
    """Whether only the first cluster is a principal eigenvalue, with per-cluster evidence."""
    report = []
    for idx, c in enumerate(S.clusters, start=1):
        mins = [float(b.min() if b[np.argmax(np.abs(b))] > 0 else -b.max()) for b in c.basis]
        maxs = [float(np.abs(b).max()) for b in c.basis]
        report.append(
            {
                "cluster": idx,
                "eigenvalue": float(c.value),
                "multiplicity": c.multiplicity,
                "principal": c.principal,
                "min_over_max": min(m / M for m, M in zip(mins, maxs)),
                "near_zero_nodes": c.nodal_nodes,
            }
        )
    ok = bool(S.clusters and S.clusters[0].principal and not any(c.principal for c in S.clusters[1:]))
    return ok, report
