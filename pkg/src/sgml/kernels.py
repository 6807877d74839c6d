"""The two full-grid passes of the solver plus residual and boundary handling.

Every pass reads immutable snapshot arrays and writes a fresh output array.
Work is split into slabs along the first axis; each slab is filled by one
worker, so the result is bit-identical for any number of threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .boundary import BoundarySpec
from .grid import Grid
from .stencil import local_sigma_max, radial_operator, stable_step

__all__ = [
    "KernelError",
    "Executor",
    "SolveState",
    "restriction_pass",
    "restriction",
    "level_operator",
    "relaxation_interpolation",
    "interpolate_variation",
    "residual",
    "zero_mean_projection",
    "apply_boundary",
]


class KernelError(RuntimeError):
    """Invalid pseudo-time step or non-finite values produced by a pass."""


class Executor:
    """Runs a row-slab kernel ``fn(lo, hi)`` over ``n_rows`` rows.

    With ``threads > 1`` the rows are cut into equal slabs handled by a thread
    pool (numpy releases the GIL inside ufuncs).  Kernels must write only their
    own slab of the output.
    """

    def __init__(self, threads: int = 1):
        if threads < 1:
            raise ValueError("threads must be >= 1")
        self.threads = threads
        self._pool = ThreadPoolExecutor(threads) if threads > 1 else None

    def run(self, fn: Callable[[int, int], None], n_rows: int) -> None:
        if self._pool is None or n_rows < 2:
            fn(0, n_rows)
            return
        bounds = np.linspace(0, n_rows, min(self.threads, n_rows) + 1).astype(int)
        futures = [self._pool.submit(fn, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        for fut in futures:
            fut.result()

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


SERIAL = Executor(1)


@dataclass
class SolveState:
    """Working arrays of one cycle.

    ``du`` holds the variation of the last relaxation on the subset of level
    ``du_level`` (a level-shaped array) that has not yet reached the nodes
    outside that subset.
    """

    u: np.ndarray
    g: Optional[np.ndarray] = None
    sigma_r: Optional[np.ndarray] = None
    level: Optional[int] = None
    du: Optional[np.ndarray] = None
    du_level: Optional[int] = None
    u_prev: Optional[np.ndarray] = None
    diagnostics: list = field(default_factory=list)


def restriction_pass(f: np.ndarray, lam: int, executor: Executor = SERIAL) -> np.ndarray:
    """One full-grid application of the tensor-hat average at distance ``lam``.

    The 3^dim-point average is a tensor product of the 1D weights (1/4, 1/2,
    1/4), applied axis by axis; out-of-range neighbours are even images.
    """
    out = f
    for ax in range(f.ndim):
        src = np.moveaxis(out, ax, 0)
        pad = np.pad(src, [(lam, lam)] + [(0, 0)] * (f.ndim - 1), mode="reflect")
        res = np.empty_like(src)
        n0 = src.shape[0]

        def kernel(lo, hi, pad=pad, res=res):
            res[lo:hi] = 0.25 * pad[lo:hi] + 0.5 * pad[lo + lam:hi + lam] + 0.25 * pad[lo + 2 * lam:hi + 2 * lam]

        executor.run(kernel, n0)
        out = np.moveaxis(res, 0, ax)
    return np.ascontiguousarray(out)


def restriction(f: np.ndarray, level: int, executor: Executor = SERIAL) -> tuple[np.ndarray, int]:
    """Source representation for ``level`` by nested averaging passes.

    Applies the passes lam = 1, 2, ..., 2**(level-1) in turn, i.e. full
    weighting from the finest grid down to the level subset; level 0 is the
    field itself.  Returns the field and the number of full-grid passes spent.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    g = np.array(f, dtype=float, copy=True)
    for m in range(level):
        g = restriction_pass(g, 2**m, executor)
    return g, level


def level_operator(u_level: np.ndarray, sigma_level: np.ndarray, H: float, boundary: BoundarySpec,
                   executor: Executor = SERIAL) -> np.ndarray:
    """div(sigma grad u) on a level-subset array with node spacing ``H``."""
    u_pad = boundary.pad(u_level)
    s_pad = np.pad(sigma_level, 1, mode="reflect")
    out = np.empty_like(u_level)

    def kernel(lo, hi):
        out[lo:hi] = radial_operator(u_pad, s_pad, H, rows=(lo, hi))

    executor.run(kernel, u_level.shape[0])
    return out


def level_step(sigma_level: np.ndarray, lam: int, h: float, safety: float) -> np.ndarray:
    """Local stable pseudo-time step on a level-subset array."""
    s_pad = np.pad(sigma_level, 1, mode="reflect")
    return stable_step(local_sigma_max(s_pad), lam, h, sigma_level.ndim, safety)


def interpolate_variation(du_level: np.ndarray, lam: int, executor: Executor = SERIAL) -> np.ndarray:
    """Multilinear (tensor hat, support 2*lam*h) spreading of a level array to the full grid."""
    M = du_level.shape[0]
    N = (M - 1) * lam + 1
    i = np.arange(N)
    i0 = np.minimum(i // lam, M - 2) if M > 1 else np.zeros(N, dtype=int)
    t = (i - i0 * lam) / lam
    out = du_level
    for ax in range(du_level.ndim):
        src = np.moveaxis(out, ax, 0)
        res = np.empty((N,) + src.shape[1:])
        shape = (N,) + (1,) * (src.ndim - 1)
        tt = t.reshape(shape)

        def kernel(lo, hi, src=src, res=res, tt=tt):
            res[lo:hi] = (1.0 - tt[lo:hi]) * src[i0[lo:hi]] + tt[lo:hi] * src[i0[lo:hi] + 1]

        executor.run(kernel, N)
        out = np.moveaxis(res, 0, ax)
    return np.ascontiguousarray(out)


def relaxation_interpolation(state: SolveState, grid: Grid, boundary: BoundarySpec, a: float,
                             dt_level: np.ndarray, executor: Executor = SERIAL) -> float:
    """One relaxation-interpolation pass at ``state.level``; updates ``state`` in place.

    The variation left by the previous pass (``state.du`` on the subset of
    ``state.du_level``) is first spread by multilinear interpolation onto the
    nodes outside that subset.  Nodes of the current level subset then take an
    explicit Euler pseudo-time step of du/dtau = div(sigma grad u) + a u - g
    (the ``a u`` term implicit) and record their new variation.  Dirichlet
    nodes keep their values.  Returns max ``|L u - g|`` over the relaxed
    nodes, the coarsened residual of this level.
    """
    level = state.level
    lam = 2**level
    H = lam * grid.h
    sl = grid.level_slices(level)
    if np.any(~(dt_level > 0)):
        raise KernelError("pseudo-time step must be positive")

    u1 = state.u
    if state.du is None:
        u = u1.copy()
    else:
        plam = 2**state.du_level
        psl = grid.level_slices(state.du_level)
        u = u1 + interpolate_variation(state.du, plam, executor)
        u[psl] = u1[psl]

    uc = u[sl].copy()
    g = state.g[sl]
    Lu = level_operator(uc, state.sigma_r[sl], H, boundary, executor)
    fixed = boundary.dirichlet_mask(uc.shape)
    defect = Lu + a * uc - g
    new = (uc + dt_level * (Lu - g)) / (1.0 - dt_level * a)
    new[fixed] = uc[fixed]
    diag = float(np.max(np.abs(defect[~fixed]))) if np.any(~fixed) else 0.0

    u[sl] = new
    full_fixed = boundary.dirichlet_mask(u.shape)
    u[full_fixed] = u1[full_fixed]
    if not np.all(np.isfinite(u)):
        raise KernelError(f"non-finite values after relaxation at level {level}")

    state.u_prev = u1
    state.u = u
    state.du = new - uc
    state.du_level = level
    return diag


def residual(u: np.ndarray, f: np.ndarray, sigma: np.ndarray, a: float, grid: Grid,
             boundary: BoundarySpec, executor: Executor = SERIAL) -> np.ndarray:
    """Fine-grid residual f - (div(sigma grad u) + a u); zero on Dirichlet nodes."""
    r = f - level_operator(u, sigma, grid.h, boundary, executor) - a * u
    r[boundary.dirichlet_mask(u.shape)] = 0.0
    return r


def zero_mean_projection(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Subtract the trapezoid-rule mean so the discrete integral vanishes."""
    return f - grid.integrate(f)


def apply_boundary(u: np.ndarray, grid: Grid, boundary: BoundarySpec, homogeneous: bool = False) -> np.ndarray:
    """Copy of ``u`` with Dirichlet nodes set to their values (or zero when ``homogeneous``)."""
    out = np.array(u, dtype=float, copy=True)
    mask = boundary.dirichlet_mask(out.shape)
    if homogeneous:
        out[mask] = 0.0
    else:
        out[mask] = boundary.dirichlet_values(grid)[mask]
    return out
