"""Pointwise operators: hat functions, restriction weights, the radial
finite-difference discretisation of div(sigma grad u) + a u, and stable
pseudo-time steps.

The radial stencil couples a node with all 8 (2D) or 26 (3D) neighbours.  Each
neighbour at offset ``p`` contributes a flux ``sigma_face * (u_nb - u_c) /
(H * l_p)**2`` where ``l_p`` is the offset length in cells and ``sigma_face``
the arithmetic mean of the two end values.  The prefactors 1/2 (2D) and 3/13
(3D) make the sum reproduce the Laplacian of quadratics exactly.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from scipy.ndimage import maximum_filter

from .boundary import BoundarySpec

__all__ = [
    "hat",
    "stencil_offsets",
    "operator_prefactor",
    "center_weight",
    "restriction_weights",
    "restrict_at",
    "apply_operator",
    "radial_operator",
    "stable_step",
    "local_sigma_max",
]

PREFACTOR = {2: 0.5, 3: 3.0 / 13.0}


def hat(x):
    """Linear interpolation kernel max(0, 1 - |x|)."""
    return np.maximum(0.0, 1.0 - np.abs(x))


@lru_cache(maxsize=None)
def stencil_offsets(dim: int) -> tuple[tuple[tuple[int, ...], float], ...]:
    """Neighbour offsets in {-1,0,1}^dim minus the origin, with their lengths in cells."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    out = []
    for p in itertools.product((-1, 0, 1), repeat=dim):
        if any(p):
            out.append((p, float(np.sqrt(sum(c * c for c in p)))))
    return tuple(out)


def operator_prefactor(dim: int, normalization: str = "consistent") -> float:
    if normalization not in ("consistent", "printed"):
        raise ValueError(f"unknown normalization {normalization!r}")
    return PREFACTOR[dim]


def _neighbour_weights(dim: int, normalization: str) -> list[float]:
    # "printed" keeps a single power of the offset length (diagnostic only;
    # it is a constant multiple of the Laplacian, not the Laplacian itself)
    power = 2 if normalization == "consistent" else 1
    pref = operator_prefactor(dim, normalization)
    return [pref / l**power for _, l in stencil_offsets(dim)]


def center_weight(dim: int, normalization: str = "consistent") -> float:
    """Magnitude of the diagonal entry for sigma = 1 and unit spacing."""
    return float(sum(_neighbour_weights(dim, normalization)))


@lru_cache(maxsize=None)
def restriction_weights(dim: int) -> dict[tuple[int, ...], float]:
    """Tensor-hat averaging weights 2^-dim * prod hat(p/2); they sum to 1."""
    w = {}
    for p in itertools.product((-1, 0, 1), repeat=dim):
        w[p] = float(np.prod([hat(c / 2.0) for c in p])) / 2**dim
    return w


def restrict_at(f: np.ndarray, idx, lam: int, boundary=None) -> float:
    """Weighted average of the neighbours of ``idx`` at distance ``lam`` cells.

    Out-of-range neighbours are even images unless ``boundary`` supplies its own
    :meth:`value_at` policy.
    """
    boundary = boundary or BoundarySpec.neumann(f.ndim)
    total = 0.0
    for p, w in restriction_weights(f.ndim).items():
        nb = [i + lam * c for i, c in zip(idx, p)]
        total += w * boundary.value_at(f, nb)
    return total


def apply_operator(u: np.ndarray, sigma: np.ndarray, a: float, idx, lam: int, h: float,
                   boundary, normalization: str = "consistent") -> float:
    """div(sigma grad u) + a u at one node, with neighbours ``lam`` cells away."""
    dim = u.ndim
    H = lam * h
    images = BoundarySpec.neumann(dim)  # coefficients are always mirrored evenly
    uc = float(u[tuple(idx)])
    sc = float(sigma[tuple(idx)])
    total = 0.0
    for (p, _), w in zip(stencil_offsets(dim), _neighbour_weights(dim, normalization)):
        nb = [i + lam * c for i, c in zip(idx, p)]
        s_face = 0.5 * (images.value_at(sigma, nb) + sc)
        total += w * s_face * (boundary.value_at(u, nb) - uc)
    return total / (H * H) + a * uc


def radial_operator(u_pad: np.ndarray, s_pad: np.ndarray, H: float, rows=None,
                    normalization: str = "consistent") -> np.ndarray:
    """Vectorised div(sigma grad u) on the interior of ghost-padded arrays.

    ``u_pad`` and ``s_pad`` carry one ghost layer on every side.  ``rows``
    restricts the output to a slab ``(lo, hi)`` of the first axis so that
    workers can fill disjoint parts of one output buffer; the arithmetic per
    node does not depend on the slab.
    """
    dim = u_pad.ndim
    n0 = u_pad.shape[0] - 2
    lo, hi = rows if rows is not None else (0, n0)
    core = (slice(lo + 1, hi + 1),) + (slice(1, -1),) * (dim - 1)
    uc = u_pad[core]
    sc = s_pad[core]
    acc = np.zeros(uc.shape)
    for (p, _), w in zip(stencil_offsets(dim), _neighbour_weights(dim, normalization)):
        sl = (slice(lo + 1 + p[0], hi + 1 + p[0]),) + tuple(
            slice(1 + c, s - 1 + c) for c, s in zip(p[1:], u_pad.shape[1:]))
        acc += (w * 0.5) * (s_pad[sl] + sc) * (u_pad[sl] - uc)
    return acc / (H * H)


def local_sigma_max(s_pad: np.ndarray) -> np.ndarray:
    """Maximum of sigma over each node's 3^dim footprint (input ghost-padded)."""
    return maximum_filter(s_pad, size=3, mode="nearest")[(slice(1, -1),) * s_pad.ndim]


def stable_step(sigma_max, lam: int, h: float, dim: int, safety: float = 0.9,
                normalization: str = "consistent"):
    """Explicit Euler pseudo-time step from the Gershgorin bound of the stencil.

    The row sum of the operator at spacing ``lam*h`` is bounded by
    ``2 * c * sigma_max / (lam*h)**2`` with ``c`` the unit centre weight, so
    ``dt = safety * (lam*h)**2 / (c * sigma_max)``.  Works pointwise on arrays.
    """
    if not safety > 0:
        raise ValueError(f"safety must be positive, got {safety}")
    sigma_max = np.asarray(sigma_max, dtype=float)
    if np.any(sigma_max <= 0):
        raise ValueError("sigma must be positive")
    H = lam * h
    dt = safety * H * H / (center_weight(dim, normalization) * sigma_max)
    return float(dt) if dt.ndim == 0 else dt
