"""Command-line driver: ``sgml convergence|deform|trifoil|capacitor|bench``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .cycle import SolverConfig, build_schedule, schedule_work_units, single_cycle, solve, LevelCache
from .grid import MAX_LEVEL
from .kernels import Executor, KernelError, SolveState, apply_boundary
from .problems import (
    capacitor_problem,
    circle_curve,
    curl,
    deformation_problem,
    gradient,
    integrate_streamline,
    move_nodes,
    poisson2d_problem,
    trifoil_problem,
)

log = logging.getLogger("sgml")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2

REPORT_HEADER = ["cycle", "work_units", "residual", "true_residual", "diag_residual_min", "l1_error"]


class InputError(ValueError):
    pass


def write_report(out: Path, report, prefix: str = "") -> None:
    rows = [[r.cycle, r.work_units, r.residual, r.true_residual, r.diag_residual_min,
             "" if r.l1_error is None else r.l1_error] for r in report.records]
    io.write_csv(out / f"{prefix}report.csv", REPORT_HEADER, rows)
    trace = [[r.cycle, k, level, d] for r in report.records for k, (level, _, d) in enumerate(r.diag_trace)]
    io.write_csv(out / f"{prefix}diag_trace.csv", ["cycle", "pass", "level", "diag_residual"], trace)
    status = "converged" if report.converged else "not converged"
    (out / f"{prefix}status.txt").write_text(f"{status}: {report.reason}\ncycles: {report.cycles}\n")


def _config(args) -> SolverConfig:
    return SolverConfig(n_r=args.nr, tol=args.tol, max_cycles=args.max_cycles, safety=args.safety,
                        threads=args.threads)


def _solve_and_report(problem, args, out: Path, prefix: str = ""):
    u, report = solve(problem, _config(args))
    write_report(out, report, prefix)
    log.info("%s%s: %s after %d cycles (residual %.3e)", prefix, problem.name,
             "converged" if report.converged else "NOT converged", report.cycles,
             report.residuals[-1])
    return u, report


def cmd_convergence(args) -> int:
    out = args.out
    problem = poisson2d_problem(args.n)
    u, report = _solve_and_report(problem, args, out)
    io.write_field_vtk(out / "solution.vtk", problem.grid, {"u": u, "exact": problem.exact_field()})
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_deform(args) -> int:
    out = args.out
    curve = io.read_curve_csv(args.curve, closed=args.closed) if args.curve else circle_curve()
    problem = deformation_problem(curve, args.n, a=args.a)
    u, report = _solve_and_report(problem, args, out)
    grid = problem.grid
    io.write_field_vtk(out / "potential.vtk", grid, {"u": u, "source": problem.f})
    nodes = move_nodes(u, problem, steps=args.steps, t_end=args.t)
    rows = [[i, j, nodes[i, j, 0], nodes[i, j, 1]] for j in range(grid.N) for i in range(grid.N)]
    io.write_csv(out / "deformed_nodes.csv", ["i", "j", "x", "y"], rows)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _default_seeds(curve, h):
    p = curve.points[0]
    return np.array([p + np.array([0.0, 0.0, 3 * h]), [0.5, 0.5, 0.9]])


def cmd_trifoil(args) -> int:
    out = args.out
    problems, curve = trifoil_problem(args.n, r=args.r)
    grid = problems[0].grid
    psi = []
    converged = True
    for c, problem in enumerate(problems):
        u, report = _solve_and_report(problem, args, out, prefix=f"psi{c}_")
        psi.append(u)
        converged &= report.converged
    psi = np.stack(psi)
    v = curl(psi, grid)
    io.write_field_vtk(out / "psi.vtk", grid, {"psi": psi})
    io.write_field_vtk(out / "velocity.vtk", grid, {"v": v, "speed": np.linalg.norm(v, axis=0)})
    io.write_csv(out / "curve.csv", ["x", "y", "z"], curve.points.tolist())
    seeds = io.read_points_csv(args.seeds, 3) if args.seeds else _default_seeds(curve, grid.h)
    vmax = float(np.max(np.linalg.norm(v, axis=0)))
    step = args.step if args.step else 0.5 * grid.h / max(vmax, 1e-300)
    for k, seed in enumerate(seeds):
        if np.any(seed < 0) or np.any(seed > 1):
            raise InputError(f"seed {seed} outside the unit cube")
        pts, reason = integrate_streamline(v, seed, step, args.steps, grid=grid)
        io.write_csv(out / f"streamline_{k}.csv", ["x", "y", "z"], pts.tolist())
        log.info("streamline %d: %d points, stopped by %s", k, len(pts), reason)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_capacitor(args) -> int:
    out = args.out
    problem = capacitor_problem(args.n, args.mode)
    u, report = _solve_and_report(problem, args, out)
    io.write_field_vtk(out / "potential.vtk", problem.grid, {"u": u, "sigma": problem.sigma})
    io.write_field_vtk(out / "force.vtk", problem.grid, {"F": gradient(u, problem.grid)})
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def bench_rows(n_values, n_r, threads: int = 1, safety: float = 0.9):
    """One timed cycle per grid size: nodes, passes, wall time, node updates per second."""
    rows = []
    with Executor(threads) as ex:
        for n in n_values:
            problem = poisson2d_problem(n)
            cache = LevelCache(problem, safety, ex)
            for level in range(n):
                cache.dt(level)
            state = SolveState(u=apply_boundary(problem.grid.zeros(), problem.grid, problem.boundary))
            schedule = build_schedule(n, n_r)
            t0 = time.perf_counter()
            _, units, _ = single_cycle(problem, state, schedule, problem.f, cache, executor=ex)
            wall = time.perf_counter() - t0
            nodes = problem.grid.size
            rows.append([n, nodes, units, schedule_work_units(n, n_r), nodes * units, wall,
                         nodes * units / wall])
    return rows


def cmd_bench(args) -> int:
    lo = args.n_min
    rows = bench_rows(range(lo, args.n + 1), args.nr, args.threads, args.safety)
    io.write_csv(args.out / "bench.csv",
                 ["n", "nodes", "work_units", "work_units_formula", "node_updates", "wall_s",
                  "node_updates_per_s"], rows)
    for row in rows:
        log.info("n=%d nodes=%d units=%d wall=%.4fs", row[0], row[1], row[2], row[5])
    return EXIT_OK


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nr(text):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return _positive_int(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=_positive_int, default=None, help="grid exponent, N = 2**n + 1")
    common.add_argument("--nr", type=_nr, default=2, help="max relaxations per level ('inf' for none)")
    common.add_argument("--tol", type=float, default=1e-12)
    common.add_argument("--max-cycles", type=_positive_int, default=50)
    common.add_argument("--safety", type=float, default=0.9)
    common.add_argument("--threads", type=_positive_int, default=1)
    common.add_argument("--out", type=Path, default=Path("out"))
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sgml", description="Single-grid multi-level elliptic solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convergence", parents=[common], help="2D Poisson convergence study")
    p.set_defaults(func=cmd_convergence, default_n=7)

    p = sub.add_parser("deform", parents=[common], help="grid deformation by a curve source")
    p.add_argument("--curve", type=Path, help="CSV of x,y points (default: circle)")
    p.add_argument("--closed", action="store_true", help="treat the curve as closed")
    p.add_argument("--a", type=float, default=0.1)
    p.add_argument("--t", type=float, default=1.0, help="final pseudo-time of the node motion")
    p.add_argument("--steps", type=_positive_int, default=20)
    p.set_defaults(func=cmd_deform, default_n=6)

    p = sub.add_parser("trifoil", parents=[common], help="trifoil-knot vortex and streamlines")
    p.add_argument("--r", type=float, default=0.14)
    p.add_argument("--seeds", type=Path, help="CSV of x,y,z streamline seeds")
    p.add_argument("--steps", type=_positive_int, default=2000, help="max RK4 steps per streamline")
    p.add_argument("--step", type=float, default=None, help="RK4 step (default: h / (2 max|v|))")
    p.set_defaults(func=cmd_trifoil, default_n=6)

    p = sub.add_parser("capacitor", parents=[common], help="heterogeneous 3D capacitor")
    p.add_argument("--mode", choices=("high", "low"), default="low")
    p.set_defaults(func=cmd_capacitor, default_n=6)

    p = sub.add_parser("bench", parents=[common], help="time one cycle per grid size")
    p.add_argument("--n-min", type=_positive_int, default=5)
    p.set_defaults(func=cmd_bench, default_n=9)
    return parser


def _validate(args):
    if args.n is None:
        args.n = args.default_n
    if args.n > MAX_LEVEL:
        raise InputError(f"--n must be at most {MAX_LEVEL}")
    if not args.tol > 0:
        raise InputError("--tol must be positive")
    if not 0 < args.safety <= 1:
        raise InputError("--safety must lie in (0, 1]")
    if getattr(args, "n_min", 1) > args.n:
        raise InputError("--n-min must not exceed --n")
    if getattr(args, "curve", None) is not None and not args.curve.is_file():
        raise InputError(f"curve file {args.curve} not found")
    if getattr(args, "seeds", None) is not None and not args.seeds.is_file():
        raise InputError(f"seed file {args.seeds} not found")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _validate(args)
        args.out.mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except (InputError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except KernelError as exc:
        log.error("solver failure: %s", exc)
        (args.out / "status.txt").write_text(f"failed: {exc}\n")
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
