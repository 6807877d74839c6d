"""Per-face boundary conditions and ghost-value (image) resolution."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .grid import Grid, mirror_index

__all__ = ["Dirichlet", "Neumann", "BoundarySpec"]

FaceValue = Union[float, Callable[..., np.ndarray]]


@dataclass(frozen=True)
class Dirichlet:
    """Prescribed value: a constant or ``value(x, y[, z])`` evaluated on the face."""

    value: FaceValue = 0.0


@dataclass(frozen=True)
class Neumann:
    """Zero normal derivative, realised by even images across the face."""

    derivative: float = 0.0

    def __post_init__(self):
        if self.derivative != 0.0:
            raise NotImplementedError("only homogeneous Neumann faces are supported")


@dataclass(frozen=True)
class BoundarySpec:
    """One condition per face.  Faces are keyed ``(axis, side)`` with side 0 (low) or 1 (high).

    Where a Dirichlet face meets a Neumann face, the shared nodes are Dirichlet.
    """

    dim: int
    faces: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = {(ax, s) for ax in range(self.dim) for s in (0, 1)}
        if set(self.faces) != expected:
            raise ValueError(f"boundary must specify exactly the faces {sorted(expected)}")
        for cond in self.faces.values():
            if not isinstance(cond, (Dirichlet, Neumann)):
                raise TypeError(f"unknown boundary condition {cond!r}")

    @classmethod
    def dirichlet(cls, dim: int, value: FaceValue = 0.0) -> "BoundarySpec":
        return cls(dim, {(ax, s): Dirichlet(value) for ax in range(dim) for s in (0, 1)})

    @classmethod
    def neumann(cls, dim: int) -> "BoundarySpec":
        return cls(dim, {(ax, s): Neumann() for ax in range(dim) for s in (0, 1)})

    @property
    def pure_neumann(self) -> bool:
        return all(isinstance(c, Neumann) for c in self.faces.values())

    def is_dirichlet(self, axis: int, side: int) -> bool:
        return isinstance(self.faces[(axis, side)], Dirichlet)

    def homogeneous(self) -> "BoundarySpec":
        """Same face types with every Dirichlet value set to zero."""
        faces = {k: Dirichlet(0.0) if isinstance(c, Dirichlet) else c for k, c in self.faces.items()}
        return BoundarySpec(self.dim, faces)

    def dirichlet_mask(self, shape: tuple[int, ...]) -> np.ndarray:
        mask = np.zeros(shape, dtype=bool)
        for (ax, side), cond in self.faces.items():
            if isinstance(cond, Dirichlet):
                idx = [slice(None)] * len(shape)
                idx[ax] = 0 if side == 0 else -1
                mask[tuple(idx)] = True
        return mask

    def dirichlet_values(self, grid: Grid) -> np.ndarray:
        """Field holding the prescribed values on Dirichlet nodes, zero elsewhere.

        Faces are written in axis order, so at an edge shared by two Dirichlet
        faces the face with the larger axis wins.
        """
        out = grid.zeros()
        coords = grid.coords()
        for (ax, side), cond in sorted(self.faces.items()):
            if not isinstance(cond, Dirichlet):
                continue
            idx = [slice(None)] * grid.dim
            idx[ax] = 0 if side == 0 else -1
            idx = tuple(idx)
            if callable(cond.value):
                out[idx] = np.broadcast_to(cond.value(*(c[idx] for c in coords)), out[idx].shape)
            else:
                out[idx] = float(cond.value)
        return out

    def pad(self, arr: np.ndarray, width: int = 1) -> np.ndarray:
        """Ghost layer: even images on Neumann faces, odd reflection about the face value on Dirichlet faces."""
        out = arr
        for ax in range(arr.ndim):
            for side in (0, 1):
                p = [(0, 0)] * arr.ndim
                p[ax] = (width, 0) if side == 0 else (0, width)
                kind = "odd" if self.is_dirichlet(ax, side) else "even"
                out = np.pad(out, p, mode="reflect", reflect_type=kind)
        return out

    def value_at(self, field: np.ndarray, idx) -> float:
        """Pointwise read of ``field`` at a possibly out-of-range index, consistent with :meth:`pad`."""
        N = field.shape[0]
        idx = list(int(i) for i in idx)
        for ax, i in enumerate(idx):
            if 0 <= i < N:
                continue
            side = 0 if i < 0 else 1
            image = list(idx)
            image[ax] = mirror_index(i, N)
            if self.is_dirichlet(ax, side):
                face = list(idx)
                face[ax] = 0 if side == 0 else N - 1
                return 2.0 * self.value_at(field, face) - self.value_at(field, image)
            return self.value_at(field, image)
        return float(field[tuple(idx)])
