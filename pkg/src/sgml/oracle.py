"""Brute-force reference solutions of the discrete system.

The matrix is assembled node by node with plain Python loops over the same
radial stencil the solver uses, without touching the vectorised kernels, so
agreement between the two certifies the multi-level machinery rather than
re-using it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
import scipy.sparse.linalg as spl

from .boundary import BoundarySpec
from .grid import mirror_index
from .stencil import operator_prefactor, stencil_offsets

__all__ = ["AssembledSystem", "assemble", "reference_solve", "damped_jacobi", "DENSE_LIMIT", "SIZE_LIMIT"]

DENSE_LIMIT = 6000
SIZE_LIMIT = 300_000


@dataclass
class AssembledSystem:
    A: sp.csr_matrix
    b: np.ndarray
    unknown: np.ndarray      # bool mask over the grid
    fixed_values: np.ndarray  # Dirichlet values, zero elsewhere
    problem: object

    @property
    def size(self) -> int:
        return self.A.shape[0]

    def scatter(self, x: np.ndarray, base: np.ndarray | None = None) -> np.ndarray:
        """Full grid field from a vector of unknowns (Dirichlet nodes from ``base``)."""
        grid = self.problem.grid
        out = grid.flatten(self.fixed_values if base is None else base).copy()
        out[grid.flatten(self.unknown)] = x
        return grid.unflatten(out)

    def gather(self, field: np.ndarray) -> np.ndarray:
        """Unknowns of ``field`` in the row order of ``A`` (x fastest)."""
        grid = self.problem.grid
        return grid.flatten(field)[grid.flatten(self.unknown)]

    def matvec_field(self, field: np.ndarray) -> np.ndarray:
        """A x for the unknowns of ``field``, scattered back (zero on Dirichlet nodes)."""
        return self.scatter(self.A @ self.gather(field), base=np.zeros(field.shape))


def assemble(problem) -> AssembledSystem:
    """Matrix of div(sigma grad) + a over every non-Dirichlet node."""
    grid = problem.grid
    bnd: BoundarySpec = problem.boundary
    N, dim, h = grid.N, grid.dim, grid.h
    if grid.size > SIZE_LIMIT:
        raise ValueError(f"grid with {grid.size} nodes exceeds the assembly limit {SIZE_LIMIT}")

    dmask = bnd.dirichlet_mask(grid.shape)
    fixed = bnd.dirichlet_values(grid)
    unknown = ~dmask
    # numbering follows the documented linear order (x fastest)
    flat_unknown = grid.flatten(unknown)
    numbers = np.full(grid.size, -1)
    numbers[flat_unknown] = np.arange(int(flat_unknown.sum()))
    number = grid.unflatten(numbers).astype(int)

    pref = operator_prefactor(dim)
    coeffs = [(p, pref / (l * l) / (h * h)) for p, l in stencil_offsets(dim)]
    sigma, a = problem.sigma, float(problem.a)
    rows, cols, vals = [], [], []
    b = np.zeros(int(flat_unknown.sum()))

    for offset in range(grid.size):
        idx = grid.index(offset)
        row = number[idx]
        if row < 0:
            continue
        s_c = sigma[idx]
        diag = a
        rhs = problem.f[idx]
        for p, c in coeffs:
            raw = [i + q for i, q in zip(idx, p)]
            nb = []
            for ax, i in enumerate(raw):
                if (i < 0 or i >= N) and bnd.is_dirichlet(ax, 0 if i < 0 else 1):
                    raise ValueError(f"unknown node {idx} reaches across a Dirichlet face")
                nb.append(mirror_index(i, N))
            nb = tuple(nb)
            w = c * 0.5 * (sigma[nb] + s_c)
            diag -= w
            col = number[nb]
            if col >= 0:
                rows.append(row)
                cols.append(col)
                vals.append(w)
            else:
                rhs -= w * fixed[nb]
        rows.append(row)
        cols.append(row)
        vals.append(diag)
        b[row] = rhs
    n_unk = len(b)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n_unk, n_unk))
    A.sum_duplicates()
    return AssembledSystem(A, b, unknown, fixed, problem)


def _constant_mode_weights(system: AssembledSystem) -> np.ndarray:
    grid = system.problem.grid
    return system.gather(grid.trapezoid_weights())


def reference_solve(system: AssembledSystem, method: str = "auto") -> np.ndarray:
    """Direct solution returned as a full grid field.

    Pure-Neumann systems with ``a = 0`` are singular; they are solved in the
    zero-mean (trapezoid-weighted) subspace through a bordered system.
    """
    A, b = system.A, system.b
    if method == "auto":
        method = "dense" if system.size <= DENSE_LIMIT else "sparse"
    singular = system.problem.boundary.pure_neumann and system.problem.a == 0
    if singular:
        w = _constant_mode_weights(system)
        b = b - w @ b / w.sum()
        A = sp.bmat([[A, sp.csr_matrix(w[:, None])], [sp.csr_matrix(w[None, :]), None]]).tocsr()
        b = np.concatenate([b, [0.0]])
    if method == "dense":
        dense = A.toarray()
        try:
            x = sl.solve(dense, b)
        except sl.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"singular system: {exc}") from exc
    elif method == "sparse":
        x = spl.spsolve(A.tocsc(), b)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("singular system")
    if singular:
        x = x[:-1]
    return system.scatter(x)


def damped_jacobi(system: AssembledSystem, omega: float = 0.8, max_iter: int = 1_000_000,
                  tol: float = 1e-14) -> tuple[np.ndarray, int]:
    """Damped Jacobi iteration from zero; an oracle independent of any factorisation."""
    A, b = system.A, system.b
    d = A.diagonal()
    x = np.zeros_like(b)
    bnorm = np.max(np.abs(b)) or 1.0
    for it in range(1, max_iter + 1):
        r = b - A @ x
        if np.max(np.abs(r)) <= tol * bnorm:
            return system.scatter(x), it
        x = x + omega * r / d
    return system.scatter(x), max_iter
