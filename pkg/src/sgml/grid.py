"""Node lattice on the unit square/cube.

Fields are plain ``numpy`` arrays of shape ``(N,) * dim`` indexed as
``u[i, j]`` or ``u[i, j, k]`` with ``i`` along x.  The documented linear order
is x fastest (offset ``i + N*j + N*N*k``), i.e. Fortran order of the array;
use :meth:`Grid.flatten` / :meth:`Grid.unflatten` whenever a flat vector is
needed so kernels, writers and the oracle agree.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Grid", "make_grid", "in_level_subset", "mirror_index"]

MAX_LEVEL = 13


@dataclass(frozen=True)
class Grid:
    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if not isinstance(self.n, (int, np.integer)) or not 1 <= self.n <= MAX_LEVEL:
            raise ValueError(f"n must be an integer in [1, {MAX_LEVEL}], got {self.n}")

    @property
    def N(self) -> int:
        return 2**self.n + 1

    @property
    def h(self) -> float:
        return 1.0 / (self.N - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def size(self) -> int:
        return self.N**self.dim

    @property
    def levels(self) -> range:
        """Admissible level exponents 0..n-1."""
        return range(self.n)

    @cached_property
    def axis(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays (x, y[, z]) broadcast to the field shape."""
        return np.meshgrid(*([self.axis] * self.dim), indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    def level_shape(self, level: int) -> tuple[int, ...]:
        return (2 ** (self.n - level) + 1,) * self.dim

    def level_slices(self, level: int) -> tuple[slice, ...]:
        """Strided view selecting the level subset of a field."""
        self._check_level(level)
        lam = 2**level
        return (slice(None, None, lam),) * self.dim

    def level_mask(self, level: int) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.level_slices(level)] = True
        return mask

    def offset(self, idx) -> int:
        """Linear storage offset of a node index (x fastest)."""
        idx = tuple(int(i) for i in idx)
        if len(idx) != self.dim or any(not 0 <= i < self.N for i in idx):
            raise IndexError(f"node index {idx} outside grid")
        return int(np.ravel_multi_index(idx, self.shape, order="F"))

    def index(self, offset: int) -> tuple[int, ...]:
        if not 0 <= offset < self.size:
            raise IndexError(f"offset {offset} outside grid")
        return tuple(int(i) for i in np.unravel_index(offset, self.shape, order="F"))

    def flatten(self, field: np.ndarray) -> np.ndarray:
        return np.asarray(field).ravel(order="F")

    def unflatten(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.size != self.size:
            raise ValueError(f"expected {self.size} values, got {values.size}")
        return values.reshape(self.shape, order="F")

    def trapezoid_weights(self) -> np.ndarray:
        """Tensor trapezoid-rule quadrature weights (sum to 1)."""
        w1 = np.full(self.N, self.h)
        w1[[0, -1]] *= 0.5
        w = w1
        for _ in range(self.dim - 1):
            w = np.multiply.outer(w, w1)
        return w

    def integrate(self, field: np.ndarray) -> float:
        return float(np.sum(self.trapezoid_weights() * field))

    def _check_level(self, level: int):
        if not 0 <= level < self.n:
            raise ValueError(f"level {level} outside 0..{self.n - 1}")


def make_grid(dim: int, n: int) -> Grid:
    return Grid(dim, n)


def in_level_subset(idx, level: int) -> bool:
    """True iff every coordinate of ``idx`` is a multiple of ``2**level``."""
    lam = 2**level
    return all(int(i) % lam == 0 for i in idx)


def mirror_index(i: int, N: int) -> int:
    """Even reflection of an out-of-range index about the boundary node."""
    last = N - 1
    if not -last <= i <= 2 * last:
        raise IndexError(f"index {i} cannot be mirrored into [0, {last}]")
    if i < 0:
        return -i
    if i > last:
        return 2 * last - i
    return i
