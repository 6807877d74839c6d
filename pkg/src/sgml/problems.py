"""Experiment definitions and the geometric helpers they need: curve
resampling, delta deposition, derivative fields, node motion and streamline
integration.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.ndimage import map_coordinates

from .boundary import BoundarySpec, Dirichlet, Neumann
from .grid import Grid
from .kernels import zero_mean_projection

__all__ = [
    "ProblemSpec",
    "Curve",
    "poisson2d_problem",
    "poisson2d_exact",
    "poisson2d_source",
    "manufactured3d_problem",
    "l1_error",
    "resample_curve",
    "circle_curve",
    "deposit_delta",
    "deformation_problem",
    "deformation_velocity",
    "move_nodes",
    "trifoil_curve",
    "trifoil_problem",
    "gradient",
    "curl",
    "divergence",
    "sample",
    "integrate_streamline",
    "capacitor_sigma",
    "capacitor_problem",
]


@dataclass
class ProblemSpec:
    """L(u) = f with L = div(sigma grad) + a on the unit square/cube."""

    grid: Grid
    f: np.ndarray
    boundary: BoundarySpec
    sigma: Optional[np.ndarray] = None
    a: float = 0.0
    exact: Optional[Callable[..., np.ndarray]] = None
    name: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sigma is None:
            self.sigma = self.grid.full(1.0)
        if self.f.shape != self.grid.shape or self.sigma.shape != self.grid.shape:
            raise ValueError("source and coefficient must match the grid shape")
        if self.boundary.dim != self.grid.dim:
            raise ValueError("boundary dimension does not match the grid")
        if not np.all(self.sigma > 0):
            raise ValueError("sigma must be positive everywhere")

    def exact_field(self) -> np.ndarray:
        if self.exact is None:
            raise ValueError(f"problem {self.name!r} has no exact solution")
        return self.exact(*self.grid.coords())

    def l1_error(self, v: np.ndarray) -> float:
        return l1_error(v, self.exact_field(), self.grid)


def poisson2d_exact(x, y):
    return -(x**2) * y**2 * (1 - x**2) * (1 - y**2)


def poisson2d_source(x, y):
    return -2 * (y**2 * (1 - 6 * x**2) * (1 - y**2) + x**2 * (1 - 6 * y**2) * (1 - x**2))


def poisson2d_problem(n: int) -> ProblemSpec:
    """Polynomial test case on the unit square, homogeneous Dirichlet."""
    grid = Grid(2, n)
    return ProblemSpec(grid, poisson2d_source(*grid.coords()), BoundarySpec.dirichlet(2),
                       exact=poisson2d_exact, name="poisson2d")


def _sine3(x, y, z):
    return np.sin(np.pi * x) * np.sin(np.pi * y) * np.sin(np.pi * z)


def manufactured3d_problem(n: int) -> ProblemSpec:
    """sin(pi x) sin(pi y) sin(pi z), homogeneous Dirichlet."""
    grid = Grid(3, n)
    f = -3 * np.pi**2 * _sine3(*grid.coords())
    return ProblemSpec(grid, f, BoundarySpec.dirichlet(3), exact=_sine3, name="manufactured3d")


def l1_error(v: np.ndarray, exact: np.ndarray, grid: Grid) -> float:
    """Trapezoid-rule L1 norm of ``exact - v`` relative to that of ``exact``."""
    denom = grid.integrate(np.abs(exact))
    if denom == 0:
        raise ZeroDivisionError("exact solution has zero L1 norm")
    return grid.integrate(np.abs(exact - v)) / denom


# curves ---------------------------------------------------------------------

@dataclass
class Curve:
    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if len(self.points) < 2:
            raise ValueError("a curve needs at least two points")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def _polyline(self) -> np.ndarray:
        return np.vstack([self.points, self.points[:1]]) if self.closed else self.points

    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self._polyline(), axis=0), axis=1)))

    def arc_elements(self) -> np.ndarray:
        """Arc length attributed to each sample (half of each adjacent segment)."""
        seg = np.linalg.norm(np.diff(self._polyline(), axis=0), axis=1)
        ds = np.zeros(len(self.points))
        if self.closed:
            ds += 0.5 * seg
            ds += 0.5 * np.roll(seg, 1)
        else:
            ds[:-1] += 0.5 * seg
            ds[1:] += 0.5 * seg
        return ds

    def tangents(self) -> np.ndarray:
        """Unit tangents by central differences of the polyline."""
        p = self.points
        if self.closed:
            t = np.roll(p, -1, axis=0) - np.roll(p, 1, axis=0)
        else:
            t = np.gradient(p, axis=0)
        return t / np.linalg.norm(t, axis=1, keepdims=True)


def resample_curve(curve: Curve, h: float) -> Curve:
    """Piecewise-linear resampling at the uniform arc spacing closest to ``h``."""
    poly = curve._polyline()
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    if np.any(seg == 0):
        poly = np.vstack([poly[:1], poly[1:][seg > 0]])
        seg = seg[seg > 0]
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if not total > 0:
        raise ValueError("degenerate curve of zero length")
    m = max(1, int(round(total / h)))
    targets = np.linspace(0.0, total, m + 1)
    if curve.closed:
        targets = targets[:-1]
    pts = np.column_stack([np.interp(targets, s, poly[:, d]) for d in range(poly.shape[1])])
    return Curve(pts, curve.closed)


def circle_curve(center=(0.5, 0.5), radius: float = 0.25, samples: int = 200) -> Curve:
    theta = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    pts = np.column_stack([center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)])
    return Curve(pts, closed=True)


def _check_inside(points: np.ndarray):
    if np.any(points < 0) or np.any(points > 1):
        raise ValueError("curve leaves the unit domain")


def deposit_delta(curve: Curve, grid: Grid, payload=None) -> np.ndarray:
    """Line delta of ``curve`` spread to the grid with tensor hat weights.

    ``payload`` is a per-sample strength (scalar, shape ``(m,)`` or ``(m, c)``
    for ``c`` components).  Each sample carries ``payload * ds / h**dim`` and
    shares it among the ``2**dim`` nodes of its cell.  Returns an array of
    shape ``grid.shape`` (scalar payload) or ``(c,) + grid.shape``.
    """
    if curve.dim != grid.dim:
        raise ValueError("curve and grid dimensions differ")
    pts = curve.points
    _check_inside(pts)
    m = len(pts)
    payload = np.ones(m) if payload is None else np.asarray(payload, dtype=float)
    if payload.ndim == 0:
        payload = np.full(m, float(payload))
    scalar = payload.ndim == 1
    pay = payload[:, None] if scalar else payload
    mass = pay * (curve.arc_elements() / grid.h**grid.dim)[:, None]

    out = np.zeros((pay.shape[1],) + grid.shape)
    xi = pts / grid.h
    base = np.minimum(np.floor(xi).astype(int), grid.N - 2)
    frac = xi - base
    for corner in np.ndindex(*(2,) * grid.dim):
        c = np.array(corner)
        w = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
        idx = tuple((base + c).T)
        for comp in range(pay.shape[1]):
            np.add.at(out[comp], idx, w * mass[:, comp])
    return out[0] if scalar else out


# grid deformation -----------------------------------------------------------

def deformation_problem(curve: Curve, n: int, a: float = 0.1) -> ProblemSpec:
    """Helmholtz force potential, pure Neumann, source = zero-mean curve delta.

    The raw deposited source and its integral are kept in ``extra`` for the
    node velocity.
    """
    grid = Grid(2, n)
    curve = resample_curve(curve, grid.h)
    raw = deposit_delta(curve, grid)
    f = zero_mean_projection(raw, grid)
    return ProblemSpec(grid, f, BoundarySpec.neumann(2), a=a, name="deform",
                       extra={"raw_source": raw, "mass": grid.integrate(raw), "curve": curve})


def gradient(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Central differences inside, second-order one-sided at faces; shape ``(dim,) + grid.shape``."""
    return np.stack(np.gradient(u, grid.h, edge_order=2))


def deformation_velocity(u: np.ndarray, raw_source: np.ndarray, mass: float, t: float,
                         grid: Grid) -> np.ndarray:
    """v = -grad u / (t f + integral f), ``f`` being the raw (unprojected) source."""
    denom = t * raw_source + mass
    if np.any(denom == 0):
        raise ZeroDivisionError("vanishing velocity denominator")
    return -gradient(u, grid) / denom


def sample(field: np.ndarray, points: np.ndarray, grid: Grid) -> np.ndarray:
    """Multilinear interpolation of ``field`` (scalar or stacked components) at ``points``."""
    coords = (np.atleast_2d(points) / grid.h).T
    if field.ndim == grid.dim:
        return map_coordinates(field, coords, order=1, mode="nearest")
    return np.stack([map_coordinates(c, coords, order=1, mode="nearest") for c in field], axis=-1)


def move_nodes(u: np.ndarray, problem: ProblemSpec, steps: int = 20, t_end: float = 1.0) -> np.ndarray:
    """Forward Euler motion of every grid node under the deformation velocity.

    The velocity is re-evaluated at the current positions (multilinear
    sampling of grad u and f) with pseudo-time ``t`` running from 0 to
    ``t_end``.  Returns node positions of shape ``grid.shape + (2,)``.
    """
    grid = problem.grid
    raw = problem.extra["raw_source"]
    mass = problem.extra["mass"]
    grad = gradient(u, grid)
    x = np.stack(grid.coords(), axis=-1).reshape(-1, grid.dim)
    dt = t_end / steps
    for k in range(steps):
        t = k * dt
        denom = t * sample(raw, x, grid) + mass
        v = -sample(grad, x, grid) / denom[:, None]
        x = np.clip(x + dt * v, 0.0, 1.0)
    return x.reshape(grid.shape + (grid.dim,))


# trifoil-knot vortex --------------------------------------------------------

def trifoil_curve(r: float = 0.14, samples: int = 2000, center=(0.5, 0.5, 0.5)) -> Curve:
    theta = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    pts = np.column_stack([
        r * (np.sin(theta) + 2 * np.sin(2 * theta)),
        r * (np.cos(theta) - 2 * np.cos(2 * theta)),
        -2 * r * np.sin(3 * theta),
    ]) + np.asarray(center)
    if np.any(pts <= 0) or np.any(pts >= 1):
        raise ValueError(f"trifoil with r={r} does not fit inside the unit cube")
    return Curve(pts, closed=True)


def trifoil_problem(n: int, r: float = 0.14, circulation: float = 1.0):
    """Three Poisson problems lap(psi_c) = -omega_c for a tangential line vortex.

    Returns ``(problems, curve)``; psi vanishes on the boundary.
    """
    grid = Grid(3, n)
    curve = resample_curve(trifoil_curve(r), grid.h)
    omega = deposit_delta(curve, grid, circulation * curve.tangents())
    problems = [ProblemSpec(grid, -omega[c], BoundarySpec.dirichlet(3), name=f"trifoil_psi{c}")
                for c in range(3)]
    return problems, curve


def curl(psi: np.ndarray, grid: Grid) -> np.ndarray:
    """Curl of a stacked 3-component field with the :func:`gradient` differences."""
    d = [np.gradient(c, grid.h, edge_order=2) for c in psi]  # d[c][ax] = d psi_c / d x_ax
    return np.stack([d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]])


def divergence(v: np.ndarray, grid: Grid) -> np.ndarray:
    return sum(np.gradient(v[ax], grid.h, axis=ax, edge_order=2) for ax in range(grid.dim))


def integrate_streamline(velocity, seed, step: float, max_steps: int, grid: Optional[Grid] = None,
                         v_min: float = 1e-12):
    """Classical RK4 streamline from ``seed``.

    ``velocity`` is either a stacked field sampled multilinearly on ``grid``
    or a callable ``v(x)``.  Returns ``(points, reason)`` where ``reason`` is
    ``"exit"``, ``"max_steps"`` or ``"stagnation"``.
    """
    if callable(velocity):
        vel = velocity
    else:
        if grid is None:
            raise ValueError("grid is required for a sampled velocity field")

        def vel(x):
            return sample(velocity, x, grid)[0]

    x = np.asarray(seed, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("seed outside the domain")
    pts = [x.copy()]
    for _ in range(max_steps):
        k1 = vel(x)
        if np.linalg.norm(k1) < v_min:
            return np.array(pts), "stagnation"
        k2 = vel(x + 0.5 * step * k1)
        k3 = vel(x + 0.5 * step * k2)
        k4 = vel(x + step * k3)
        x = x + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.any(x < 0) or np.any(x > 1):
            return np.array(pts), "exit"
        pts.append(x.copy())
    return np.array(pts), "max_steps"


# heterogeneous capacitor ----------------------------------------------------

def capacitor_sigma(x, y, z, mode: str = "low"):
    """Smooth spherical conductivity; ``low`` = weaker inside the sphere."""
    if mode not in ("low", "high"):
        raise ValueError("mode must be 'low' or 'high'")
    r = np.sqrt((x - 0.5) ** 2 + (y - 0.5) ** 2 + (z - 0.5) ** 2)
    sign = 1.0 if mode == "low" else -1.0
    return 0.55 + sign * 0.45 * np.tanh((r - 0.2) / 0.1)


def capacitor_problem(n: int, mode: str = "low") -> ProblemSpec:
    """div(sigma grad u) = 0, u = -1 at z = 0, u = 1 at z = 1, insulated sides."""
    grid = Grid(3, n)
    faces = {(ax, s): Neumann() for ax in (0, 1) for s in (0, 1)}
    faces[(2, 0)] = Dirichlet(-1.0)
    faces[(2, 1)] = Dirichlet(1.0)
    sigma = capacitor_sigma(*grid.coords(), mode=mode)
    return ProblemSpec(grid, grid.zeros(), BoundarySpec(3, faces), sigma=sigma, name=f"capacitor_{mode}")
