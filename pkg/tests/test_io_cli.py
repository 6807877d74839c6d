import csv
import math

import numpy as np
import pytest

from sgml import cli, io
from sgml.cycle import schedule_work_units
from sgml.grid import Grid

GOLDEN_3 = """# vtk DataFile Version 3.0
sgml field
ASCII
DATASET STRUCTURED_POINTS
DIMENSIONS 3 3 3
ORIGIN 0 0 0
SPACING 0.5 0.5 0.5
POINT_DATA 27
SCALARS u double 1
LOOKUP_TABLE default
""" + "0.25\n" * 27


def test_vtk_golden(tmp_path):
    g = Grid(3, 1)
    path = io.write_field_vtk(tmp_path / "c.vtk", g, {"u": g.full(0.25)})
    assert path.read_text() == GOLDEN_3


def test_vtk_round_trip_order(tmp_path, rng):
    g = Grid(2, 2)
    u = rng.standard_normal(g.shape)
    v = rng.standard_normal((2,) + g.shape)
    path = io.write_field_vtk(tmp_path / "f.vtk", g, {"u": u, "v": v})
    data = io.read_field_vtk(path)
    assert data["_header"]["DIMENSIONS"] == ["5", "5", "1"]
    np.testing.assert_array_equal(data["u"], g.flatten(u))
    # second value is node (1, 0): x runs fastest
    assert data["u"][1] == u[1, 0]
    np.testing.assert_array_equal(data["v"][:, :2], np.stack([g.flatten(c) for c in v], axis=1))
    assert not data["v"][:, 2].any()
    with pytest.raises(ValueError):
        io.write_field_vtk(tmp_path / "bad.vtk", g, {"u": np.zeros((3, 3))})


def test_points_csv(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("x,y\n0.1,0.2\n0.3,0.4\n")
    np.testing.assert_array_equal(io.read_points_csv(p, 2), [[0.1, 0.2], [0.3, 0.4]])
    p.write_text("0.1,0.2\nfoo,0.4\n")
    with pytest.raises(ValueError):
        io.read_points_csv(p, 2)
    p.write_text("0.1,0.2,0.3\n")
    with pytest.raises(ValueError):
        io.read_points_csv(p, 2)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_cli_convergence(tmp_path):
    out = tmp_path / "conv"
    assert cli.main(["convergence", "--n", "4", "--out", str(out)]) == 0
    rows = _rows(out / "report.csv")
    units = [int(r["work_units"]) for r in rows]
    assert units == [schedule_work_units(4, 2) * (k + 1) for k in range(len(rows))]
    assert float(rows[-1]["residual"]) <= 1e-12
    assert (out / "status.txt").read_text().startswith("converged")
    assert (out / "solution.vtk").exists() and (out / "diag_trace.csv").exists()


def test_cli_loose_tolerance_one_cycle(tmp_path):
    assert cli.main(["convergence", "--n", "4", "--tol", "1", "--out", str(tmp_path)]) == 0
    assert len(_rows(tmp_path / "report.csv")) == 1


def test_cli_reruns_are_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["convergence", "--n", "4", "--threads", "2", "--out", str(tmp_path / d)]) == 0
    for name in ("report.csv", "solution.vtk", "diag_trace.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("argv", [
    ["convergence", "--n", "14"],
    ["convergence", "--tol", "-1"],
    ["convergence", "--safety", "2"],
    ["bench", "--n", "3", "--n-min", "5"],
    ["deform", "--curve", "missing.csv"],
    ["trifoil", "--n", "3", "--seeds", "missing.csv"],
])
def test_cli_input_errors(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 1


def test_cli_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["convergence", "--n", "0"])
    assert exc.value.code == 2


def test_cli_not_converged(tmp_path):
    code = cli.main(["convergence", "--n", "4", "--tol", "1e-30", "--max-cycles", "2", "--out", str(tmp_path)])
    assert code == 2
    assert (tmp_path / "status.txt").read_text().startswith("not converged")


def test_cli_deform_with_curve(tmp_path):
    curve = tmp_path / "c.csv"
    theta = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    curve.write_text("\n".join(f"{0.5 + 0.2 * math.cos(t)},{0.5 + 0.3 * math.sin(t)}" for t in theta))
    assert cli.main(["deform", "--n", "5", "--curve", str(curve), "--closed", "--tol", "1e-10",
                     "--out", str(tmp_path)]) == 0
    nodes = _rows(tmp_path / "deformed_nodes.csv")
    assert len(nodes) == 33 * 33


def test_cli_trifoil_and_capacitor(tmp_path):
    assert cli.main(["trifoil", "--n", "4", "--steps", "50", "--tol", "1e-8", "--out", str(tmp_path / "t")]) == 0
    assert (tmp_path / "t" / "velocity.vtk").exists()
    assert (tmp_path / "t" / "streamline_0.csv").exists()
    assert cli.main(["capacitor", "--n", "4", "--mode", "high", "--tol", "1e-8",
                     "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "force.vtk").exists()


def test_bench_rows():
    rows = cli.bench_rows([3, 4, 5], 2)
    for n, nodes, units, formula, updates, wall, rate in rows:
        assert nodes == (2**n + 1) ** 2
        assert units == formula == schedule_work_units(n, 2)
        assert updates == nodes * units
        assert wall > 0 and rate > 0
