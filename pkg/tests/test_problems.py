import numpy as np
import pytest

from sgml.cycle import SolverConfig, solve
from sgml.grid import Grid
from sgml.problems import (
    Curve,
    capacitor_problem,
    capacitor_sigma,
    circle_curve,
    curl,
    deformation_problem,
    deformation_velocity,
    deposit_delta,
    divergence,
    integrate_streamline,
    l1_error,
    manufactured3d_problem,
    move_nodes,
    poisson2d_exact,
    poisson2d_problem,
    poisson2d_source,
    resample_curve,
    trifoil_curve,
    trifoil_problem,
)


def test_polynomial_case_values():
    assert poisson2d_source(0.5, 0.5) == pytest.approx(0.375)
    assert poisson2d_exact(0.5, 0.5) == pytest.approx(-0.03515625)
    g = Grid(2, 4)
    u = poisson2d_exact(*g.coords())
    assert np.all(u[[0, -1], :] == 0) and np.all(u[:, [0, -1]] == 0)


def test_polynomial_source_is_laplacian():
    # fourth-order finite differences of the exact solution
    g = Grid(2, 6)
    x, y = g.coords()
    h = 1e-3
    lap = sum((-poisson2d_exact(x + 2 * h * e0, y + 2 * h * e1) + 16 * poisson2d_exact(x + h * e0, y + h * e1)
               - 30 * poisson2d_exact(x, y) + 16 * poisson2d_exact(x - h * e0, y - h * e1)
               - poisson2d_exact(x - 2 * h * e0, y - 2 * h * e1)) / (12 * h * h)
              for e0, e1 in ((1, 0), (0, 1)))
    np.testing.assert_allclose(lap, poisson2d_source(x, y), atol=1e-7)


def test_l1_error_examples():
    g = Grid(2, 3)
    exact = g.full(2.0)
    assert l1_error(exact, exact, g) == 0.0
    assert l1_error(g.zeros(), exact, g) == pytest.approx(1.0)
    assert l1_error(g.full(2.5), exact, g) == pytest.approx(0.25)
    with pytest.raises(ZeroDivisionError):
        l1_error(exact, g.zeros(), g)


def test_manufactured_source():
    p = manufactured3d_problem(3)
    np.testing.assert_allclose(p.f, -3 * np.pi**2 * p.exact_field(), atol=1e-14)


def test_resample_open_and_closed():
    seg = Curve(np.array([[0.0, 0.0], [1.0, 0.0]]))
    r = resample_curve(seg, 0.25)
    np.testing.assert_allclose(r.points[:, 0], [0, 0.25, 0.5, 0.75, 1.0])
    circ = resample_curve(circle_curve(radius=0.25, samples=400), 0.2)
    # perimeter ~1.5708 -> 8 intervals, closed curves drop the repeated end
    assert len(circ.points) == 8 and circ.closed
    again = resample_curve(r, 0.25)
    np.testing.assert_allclose(again.points, r.points, atol=1e-15)


def test_deposit_examples():
    g = Grid(2, 3)
    h = g.h
    # a sample on a node puts all its weight there
    seg = Curve(np.array([[2 * h, 3 * h], [2 * h, 4 * h]]))
    d = deposit_delta(seg, g, np.array([1.0, 0.0]))
    assert d[2, 3] == pytest.approx(0.5 * h / h**2)
    assert np.count_nonzero(d) == 1
    # a sample at a cell centre shares equally
    seg = Curve(np.array([[2.5 * h, 3.5 * h], [2.5 * h, 4.5 * h]]))
    d = deposit_delta(seg, g, np.array([1.0, 0.0]))
    np.testing.assert_allclose(d[2:4, 3:5], 0.25 * d[2:4, 3:5].sum())
    # interior curves conserve mass
    c = resample_curve(circle_curve(), g.h)
    assert g.integrate(deposit_delta(c, g)) == pytest.approx(c.length(), rel=1e-12)
    with pytest.raises(ValueError):
        deposit_delta(Curve(np.array([[0.5, 0.5], [1.2, 0.5]])), g)


def test_deformation_source_and_solution():
    prob = deformation_problem(circle_curve(), 5, a=0.1)
    assert abs(prob.grid.integrate(prob.f)) < 1e-13
    assert prob.extra["mass"] == pytest.approx(2 * np.pi * 0.25, rel=1e-2)
    u, report = solve(prob, SolverConfig(tol=1e-10))
    assert report.converged
    nodes = move_nodes(u, prob, steps=20)
    g = prob.grid
    start = np.stack(g.coords(), axis=-1)
    dist0 = np.abs(np.linalg.norm(start - 0.5, axis=-1) - 0.25)
    dist1 = np.abs(np.linalg.norm(nodes - 0.5, axis=-1) - 0.25)
    # nodes gather at the curve: more of them lie within one cell of it
    assert (dist1 < g.h).sum() > (dist0 < g.h).sum()
    assert np.all((nodes >= 0) & (nodes <= 1))


def test_deformation_velocity_example():
    g = Grid(2, 3)
    x, _ = g.coords()
    u = 0.5 * x**2
    v = deformation_velocity(u, g.full(1.0), 2.0, 0.0, g)
    np.testing.assert_allclose(v[0], -x / 2, atol=1e-14)
    np.testing.assert_allclose(v[1], 0.0, atol=1e-14)
    with pytest.raises(ZeroDivisionError):
        deformation_velocity(u, g.full(-2.0), 2.0, 1.0, g)


def test_trifoil_curve():
    c = trifoil_curve(0.14, samples=12)
    np.testing.assert_allclose(c.points[0], [0.5, 0.5 - 0.14, 0.5])
    assert c.closed
    tc = trifoil_curve(0.14)
    # tangent times arc element telescopes to zero around a closed curve
    np.testing.assert_allclose((tc.tangents() * tc.arc_elements()[:, None]).sum(axis=0), 0.0, atol=1e-4)
    with pytest.raises(ValueError):
        trifoil_curve(0.2)


def test_trifoil_sources():
    problems, curve = trifoil_problem(4)
    assert len(problems) == 3
    omega = -np.stack([p.f for p in problems])
    # a closed vortex line carries no net vorticity
    np.testing.assert_allclose([problems[0].grid.integrate(o) for o in omega], 0.0, atol=1e-2)
    assert np.abs(omega).max() > 0


def test_curl_examples(rng):
    g = Grid(3, 3)
    x, y, z = g.coords()
    v = curl(np.stack([g.zeros(), g.zeros(), x]), g)
    np.testing.assert_allclose(v[0], 0, atol=1e-12)
    np.testing.assert_allclose(v[1], -1, atol=1e-12)
    np.testing.assert_allclose(v[2], 0, atol=1e-12)
    psi = rng.standard_normal((3,) + g.shape)
    assert np.abs(divergence(curl(psi, g), g)).max() < 1e-10 * np.abs(psi).max() / g.h**2


def test_streamlines():
    pts, reason = integrate_streamline(lambda x: np.zeros(3), [0.5, 0.5, 0.5], 0.1, 10)
    assert reason == "stagnation" and len(pts) == 1

    def rot(p):
        return np.array([-(p[1] - 0.5), p[0] - 0.5, 0.0])

    step = 2 * np.pi / 1000
    pts, reason = integrate_streamline(rot, [0.75, 0.5, 0.5], step, 1000)
    assert reason == "max_steps"
    np.testing.assert_allclose(pts[-1], [0.75, 0.5, 0.5], atol=1e-10)

    pts, reason = integrate_streamline(lambda p: np.array([1.0, 0, 0]), [0.5, 0.5, 0.5], 0.1, 100)
    assert reason == "exit" and len(pts) == 6

    back, _ = integrate_streamline(lambda p: -rot(p), pts[-1], step, 1)
    fwd, _ = integrate_streamline(rot, [0.6, 0.5, 0.5], step, 50)
    rev, _ = integrate_streamline(lambda p: -rot(p), fwd[-1], step, 50)
    np.testing.assert_allclose(rev[-1], [0.6, 0.5, 0.5], atol=1e-12)
    with pytest.raises(ValueError):
        integrate_streamline(rot, [1.5, 0.5, 0.5], step, 1)


def test_capacitor_sigma():
    assert capacitor_sigma(0.7, 0.5, 0.5) == pytest.approx(0.55)
    assert capacitor_sigma(0.0, 0.0, 0.0, "low") == pytest.approx(1.0, abs=1e-4)
    assert capacitor_sigma(0.0, 0.0, 0.0, "high") == pytest.approx(0.1, abs=1e-4)
    with pytest.raises(ValueError):
        capacitor_sigma(0.5, 0.5, 0.5, "medium")


def test_capacitor_problem_small():
    prob = capacitor_problem(4, "high")
    u, report = solve(prob, SolverConfig(tol=1e-10))
    assert report.converged
    assert u.min() >= -1 - 1e-12 and u.max() <= 1 + 1e-12
    np.testing.assert_allclose(u, -u[:, :, ::-1], atol=1e-9)
