"""Saw-like refining cycle and the residual recurrence that drives it to
machine precision.

One cycle sweeps ``v1 = n-1 .. 0``; every sweep walks the levels from the
coarsest (``n-1``) down to ``v1``, restricting the cycle source and applying
``min(n_r, 2**(n-v1))`` relaxation-interpolation passes per level, and a
final block relaxes the finest level once more.  Later cycles solve for a
correction with the residual of the accumulated solution as source and
homogeneous boundary data.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .kernels import (
    SERIAL,
    Executor,
    KernelError,
    SolveState,
    apply_boundary,
    level_step,
    relaxation_interpolation,
    residual,
    restriction,
    zero_mean_projection,
)

__all__ = [
    "Restrict",
    "Relax",
    "build_schedule",
    "schedule_work_units",
    "SolverConfig",
    "CycleRecord",
    "SolveReport",
    "LevelCache",
    "single_cycle",
    "solve",
    "pure_neumann_pin",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Restrict:
    level: int

    @property
    def work_units(self) -> int:
        # nested passes lam = 1, ..., 2**(level-1)
        return self.level


@dataclass(frozen=True)
class Relax:
    level: int
    count: int

    @property
    def work_units(self) -> int:
        return self.count


Step = Union[Restrict, Relax]


def _relax_count(n: int, n_r: float, v1: int) -> int:
    return int(min(n_r, 2 ** (n - v1)))


def build_schedule(n: int, n_r: float) -> list[Step]:
    """Steps of one cycle.  ``n_r`` may be ``math.inf`` to remove the cap."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not n_r >= 1:
        raise ValueError("n_r must be >= 1")
    steps: list[Step] = []
    for v1 in range(n - 1, -1, -1):
        count = _relax_count(n, n_r, v1)
        for v in range(n - 1, v1 - 1, -1):
            steps.append(Restrict(v))
            steps.append(Relax(v, count))
    steps.append(Relax(0, _relax_count(n, n_r, 0)))
    return steps


def schedule_work_units(n: int, n_r: float) -> int:
    """Closed-form count of full-grid passes in one cycle.

    Sweep ``v1`` visits levels ``v1..n-1``: restrictions cost
    ``sum(v) = (n - 1 + v1) * (n - v1) / 2`` passes and relaxations
    ``(n - v1) * c(v1)``; the final block adds ``c(0)``.
    """
    total = 0
    for v1 in range(n):
        total += (n - 1 + v1) * (n - v1) // 2 + (n - v1) * _relax_count(n, n_r, v1)
    return total + _relax_count(n, n_r, 0)


@dataclass(frozen=True)
class SolverConfig:
    n_r: float = 2
    tol: float = 1e-12
    max_cycles: int = 50
    safety: float = 0.9
    threads: int = 1
    stagnation: int = 3

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.n_r >= 1:
            raise ValueError("n_r must be >= 1")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class CycleRecord:
    cycle: int
    work_units: int
    cycle_units: int
    residual: float
    true_residual: float
    diag_trace: list
    l1_error: Optional[float] = None

    @property
    def diag_residual_min(self) -> float:
        return min((d for _, _, d in self.diag_trace), default=0.0)


@dataclass
class SolveReport:
    records: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    scale: float = 1.0

    @property
    def residuals(self) -> list[float]:
        return [r.residual for r in self.records]

    @property
    def cycles(self) -> int:
        return len(self.records)


class LevelCache:
    """Restricted coefficients and local pseudo-time steps, one entry per level."""

    def __init__(self, problem, safety: float, executor: Executor = SERIAL):
        self.problem = problem
        self.safety = safety
        self.executor = executor
        self._sigma: dict[int, np.ndarray] = {}
        self._dt: dict[int, np.ndarray] = {}

    def sigma(self, level: int) -> np.ndarray:
        if level not in self._sigma:
            self._sigma[level], _ = restriction(self.problem.sigma, level, self.executor)
        return self._sigma[level]

    def dt(self, level: int) -> np.ndarray:
        if level not in self._dt:
            grid = self.problem.grid
            s = self.sigma(level)[grid.level_slices(level)]
            self._dt[level] = level_step(s, 2**level, grid.h, self.safety)
        return self._dt[level]


def single_cycle(problem, state: SolveState, schedule: list[Step], source: np.ndarray,
                 cache: LevelCache, boundary=None, scale: float = 1.0,
                 executor: Executor = SERIAL) -> tuple[SolveState, int, list]:
    """Run one cycle on ``state`` with ``source`` as right-hand side.

    Returns the state, the number of full-grid passes performed and the
    diagnostic trace ``[(level, pass, coarsened residual / scale), ...]``.
    """
    boundary = boundary or problem.boundary
    grid = problem.grid
    units = 0
    trace = []
    dt = None
    for step in schedule:
        if isinstance(step, Restrict):
            state.g, passes = restriction(source, step.level, executor)
            state.sigma_r = cache.sigma(step.level)
            state.level = step.level
            dt = cache.dt(step.level)
            units += passes
        else:
            if state.level != step.level:
                raise ValueError(f"relaxation at level {step.level} without restriction")
            for k in range(step.count):
                d = relaxation_interpolation(state, grid, boundary, problem.a, dt, executor)
                trace.append((step.level, k, d / scale))
                units += 1
    return state, units, trace


def pure_neumann_pin(u: np.ndarray, grid) -> np.ndarray:
    """Zero-mean representative of a pure-Neumann solution (trapezoid mean)."""
    return zero_mean_projection(u, grid)


def solve(problem, config: SolverConfig = SolverConfig(), executor: Optional[Executor] = None):
    """Accumulate corrections ``u = sum(e_i)`` until the normalized residual
    drops below ``config.tol``.

    Cycle ``i`` solves ``L e_i = r_i`` from a null start; the next source is
    ``r_{i+1} = r_i - L e_i``.  Residuals are reported as ``max|r_i| /
    max|r_0|`` with ``r_0`` the residual of the initial guess (zero with the
    Dirichlet values imposed).  The recurrence keeps decreasing below the
    float64 floor of the directly evaluated ``f - L u``, which is recorded as
    ``true_residual``.  Stagnation for ``config.stagnation`` consecutive cycles
    ends the run with ``converged = False``; non-finite values raise
    :class:`~sgml.kernels.KernelError`.
    """
    own = executor is None
    executor = executor or Executor(config.threads)
    try:
        return _solve(problem, config, executor)
    finally:
        if own:
            executor.close()


def _solve(problem, config: SolverConfig, executor: Executor):
    grid = problem.grid
    bnd = problem.boundary
    neumann = bnd.pure_neumann
    f = zero_mean_projection(problem.f, grid) if neumann else np.array(problem.f, dtype=float)
    schedule = build_schedule(grid.n, config.n_r)
    cache = LevelCache(problem, config.safety, executor)
    homogeneous = bnd.homogeneous()

    u = apply_boundary(grid.zeros(), grid, bnd)
    r = residual(u, f, problem.sigma, problem.a, grid, bnd, executor)
    if neumann:
        r = zero_mean_projection(r, grid)
    scale = float(np.max(np.abs(r)))
    report = SolveReport(scale=scale if scale > 0 else 1.0)
    u_total = grid.zeros()
    source = f
    total_units = 0
    best = math.inf
    stalled = 0

    for i in range(config.max_cycles):
        cycle_bnd = bnd if i == 0 else homogeneous
        state = SolveState(u=apply_boundary(grid.zeros(), grid, cycle_bnd))
        state, units, trace = single_cycle(problem, state, schedule, source, cache, cycle_bnd,
                                           report.scale, executor)
        e = state.u
        u_total = u_total + e
        # residual recurrence r_{i+1} = r_i - L(e_i); the true residual is tracked alongside
        r = residual(e, source, problem.sigma, problem.a, grid, cycle_bnd, executor)
        true_r = residual(u_total, f, problem.sigma, problem.a, grid, bnd, executor)
        if neumann:
            u_total = pure_neumann_pin(u_total, grid)
            r = zero_mean_projection(r, grid)
            true_r = zero_mean_projection(true_r, grid)
        res = float(np.max(np.abs(r))) / report.scale
        true_res = float(np.max(np.abs(true_r))) / report.scale
        if not (math.isfinite(res) and math.isfinite(true_res)):
            raise KernelError(f"non-finite residual in cycle {i}")
        total_units += units
        l1 = problem.l1_error(u_total) if problem.exact is not None else None
        report.records.append(CycleRecord(i, total_units, units, res, true_res, trace, l1))
        log.debug("cycle %d: residual %.3e, true residual %.3e (%d passes)", i, res, true_res, units)
        if res <= config.tol:
            report.converged = True
            report.reason = "tolerance reached"
            break
        if res < best:
            best = res
            stalled = 0
        else:
            stalled += 1
            if stalled >= config.stagnation:
                report.reason = f"residual stagnated at {best:.3e}"
                break
        source = r
    else:
        report.reason = "max_cycles reached"
    return u_total, report
