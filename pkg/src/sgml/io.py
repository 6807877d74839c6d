"""Plain-text outputs: legacy ASCII VTK structured points and CSV tables."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .grid import Grid

__all__ = ["write_field_vtk", "read_field_vtk", "write_csv", "read_curve_csv", "read_points_csv"]

FMT = "%.17g"


def _fmt(x) -> str:
    return FMT % float(x)


def write_field_vtk(path, grid: Grid, fields: dict, title: str = "sgml field") -> Path:
    """Write scalar fields (``grid.shape``) and vector fields (``(c,) + grid.shape``).

    Values are listed in the documented node order, x fastest.  2D grids are
    written as a single z-layer with unit z spacing; 2-component vectors get
    a zero z component.
    """
    path = Path(path)
    dims = [grid.N] * grid.dim + [1] * (3 - grid.dim)
    spacing = [grid.h] * grid.dim + [1.0] * (3 - grid.dim)
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(str(d) for d in dims),
        "ORIGIN 0 0 0",
        "SPACING " + " ".join(_fmt(s) for s in spacing),
        f"POINT_DATA {grid.size}",
    ]
    for name, values in fields.items():
        values = np.asarray(values, dtype=float)
        if values.shape == grid.shape:
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_fmt(v) for v in grid.flatten(values)]
        elif values.shape[1:] == grid.shape and values.shape[0] in (2, 3):
            comps = [grid.flatten(c) for c in values]
            if len(comps) == 2:
                comps.append(np.zeros(grid.size))
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(_fmt(c[i]) for c in comps) for i in range(grid.size)]
        else:
            raise ValueError(f"field {name!r} has shape {values.shape}, not compatible with {grid.shape}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_field_vtk(path) -> dict:
    """Parse a file written by :func:`write_field_vtk` into ``{name: flat values}``.

    Vector fields come back with shape ``(npoints, 3)``.
    """
    tokens = Path(path).read_text().split("\n")
    out = {}
    header = {}
    i = 0
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith(("DIMENSIONS", "SPACING", "ORIGIN", "POINT_DATA")):
            key, *vals = line.split()
            header[key] = vals
        if line.startswith("SCALARS"):
            name = line.split()[1]
            npts = int(header["POINT_DATA"][0])
            out[name] = np.array([float(v) for v in tokens[i + 2:i + 2 + npts]])
            i += 2 + npts
            continue
        if line.startswith("VECTORS"):
            name = line.split()[1]
            npts = int(header["POINT_DATA"][0])
            out[name] = np.array([[float(v) for v in t.split()] for t in tokens[i + 1:i + 1 + npts]])
            i += 1 + npts
            continue
        i += 1
    out["_header"] = header
    return out


def write_csv(path, header: list, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_points_csv(path, dim=None) -> np.ndarray:
    """Points from a CSV with one ``x,y[,z]`` row per line; a non-numeric header is skipped."""
    rows = []
    with Path(path).open() as fh:
        for k, row in enumerate(csv.reader(fh)):
            row = [c.strip() for c in row if c.strip()]
            if not row:
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if k == 0:
                    continue
                raise ValueError(f"{path}: malformed line {k + 1}: {row}")
    pts = np.array(rows)
    if pts.ndim != 2 or (dim is not None and pts.shape[1] != dim):
        raise ValueError(f"{path}: expected {dim}-column points")
    return pts


def read_curve_csv(path, closed: bool = False):
    from .problems import Curve

    return Curve(read_points_csv(path, 2), closed=closed)
