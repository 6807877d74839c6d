"""Single-grid multi-level solver for elliptic boundary value problems."""
from .boundary import BoundarySpec, Dirichlet, Neumann
from .cycle import SolveReport, SolverConfig, build_schedule, schedule_work_units, solve
from .grid import Grid, make_grid
from .problems import ProblemSpec

__all__ = [
    "BoundarySpec",
    "Dirichlet",
    "Neumann",
    "Grid",
    "make_grid",
    "ProblemSpec",
    "SolverConfig",
    "SolveReport",
    "build_schedule",
    "schedule_work_units",
    "solve",
]

__version__ = "0.1.0"
