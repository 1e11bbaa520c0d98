"""Grid solvers for ground states and least-energy nodal solutions of
``-Δu + V u = λ|u|^{p-2}u`` with Dirichlet boundary conditions."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    GridMismatch,
    NehariForgeError,
    NonConvergence,
    NotPositiveDefinite,
    PartVanished,
    ZeroField,
)
from .expr import evaluate, parse  # noqa: E402
from .grid import Disk, Grid, Rectangle, build_grid, sample  # noqa: E402
from .mpsolve import SolveConfig, SolveResult, ground_state, least_energy_nodal  # noqa: E402
from .operator import SchrodingerOperator, assemble  # noqa: E402
from .spectra import Spectrum, eig_smallest  # noqa: E402
from .varcalc import ProblemParams  # noqa: E402

__all__ = [
    "ConfigError", "GridMismatch", "NehariForgeError", "NonConvergence", "NotPositiveDefinite",
    "PartVanished", "ZeroField", "evaluate", "parse", "Disk", "Grid", "Rectangle", "build_grid",
    "sample", "SolveConfig", "SolveResult", "ground_state", "least_energy_nodal",
    "SchrodingerOperator", "assemble", "Spectrum", "eig_smallest", "ProblemParams",
]
