import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import i0, i1

from vortexspec.bvp import (BvpSolution, OdeSystem, RadialMesh, _hermite, augment_with_integrals,
                            evaluate, integrate, solve_bvp)
from vortexspec.errors import MeshLimitExceeded, NewtonDivergence, OutOfDomain

S1 = np.array([[0.0, 0.0], [0.0, -1.0]])


def gaussian_system(L=10.0):
    """u'' + u'/r - u = f with u = exp(-r^2) exact."""
    def rhs(r, y):
        return np.vstack([y[1], y[0] + (4 * r ** 2 - 5) * np.exp(-r ** 2)])
    return OdeSystem(2, rhs, lambda a: a[1:2], lambda b: b[0:1] - np.exp(-L ** 2), L, S1)


def bessel_system(L=5.0, c=1.0):
    def rhs(r, y):
        return np.vstack([y[1], y[0]])
    return OdeSystem(2, rhs, lambda a: a[1:2], lambda b: b[0:1] - c * i0(L), L, S1)


def i0_series(r, terms=60):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    term = np.ones_like(r)
    for k in range(terms):
        out += term
        term = term * (r / 2) ** 2 / (k + 1) ** 2
    return out


@pytest.fixture(scope="module")
def gaussian():
    return solve_bvp(gaussian_system(), None, 0.0, 1e-10)


def test_manufactured_solution_matches(gaussian):
    r = np.linspace(0, 10, 2001)
    assert np.max(np.abs(gaussian(r)[0] - np.exp(-r ** 2))) < 1e-9
    assert gaussian.residual_norm <= 1e-10


def test_evaluate_off_node(gaussian):
    assert abs(evaluate(gaussian, 1.5)[0] - np.exp(-2.25)) < 1e-9


def test_evaluate_at_nodes_is_exact(gaussian):
    np.testing.assert_array_equal(evaluate(gaussian, gaussian.r), gaussian.values)


def test_evaluate_outside_domain(gaussian):
    with pytest.raises(OutOfDomain):
        evaluate(gaussian, 10.5)
    with pytest.raises(OutOfDomain):
        evaluate(gaussian, -1e-3)


def test_zero_problem_gives_zero():
    sys0 = OdeSystem(2, lambda r, y: np.vstack([y[1], y[0]]), lambda a: a[1:2], lambda b: b[0:1], 5.0, S1)
    sol = solve_bvp(sys0, None, 0.0, 1e-10)
    assert not np.any(sol.values)
    assert sol.residual_norm == 0.0
    assert not np.any(evaluate(sol, np.linspace(0, 5, 7)))


@pytest.mark.parametrize("c", [1.0, -0.5])
def test_bessel_i0(c):
    sol = solve_bvp(bessel_system(c=c), None, 0.0, 1e-10)
    np.testing.assert_allclose(sol.values[0], c * i0_series(sol.r), rtol=1e-9, atol=1e-12)


def test_convergence_order_four():
    L = 10.0
    errs = []
    for N in (32, 64, 128, 256):
        sol = solve_bvp(gaussian_system(L), RadialMesh.uniform(L, N), 0.0, 1e-10, refine=False)
        errs.append(np.max(np.abs(sol.values[0] - np.exp(-sol.r ** 2))))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(ratios >= 16.0), ratios


def test_augmentation_polynomial():
    base = bessel_system()
    aug = augment_with_integrals(base, [lambda r, y: r])
    sol = solve_bvp(aug, None, 0.0, 1e-10)
    assert abs(sol.values[2, -1] - 12.5) < 1e-10


def test_augmentation_exponential():
    sys0 = OdeSystem(2, lambda r, y: np.vstack([y[1], y[0]]), lambda a: a[1:2], lambda b: b[0:1], 50.0, S1)
    aug = augment_with_integrals(sys0, [lambda r, y: r * np.exp(-2 * r)])
    sol = solve_bvp(aug, None, 0.0, 1e-10)
    assert abs(sol.values[2, -1] - 0.25) < 1e-10


def test_augmentation_empty_is_identity():
    base = bessel_system()
    assert augment_with_integrals(base, []) is base


def test_augmentation_matches_quadrature():
    tol = 1e-10
    aug = augment_with_integrals(bessel_system(), [lambda r, y: y[0] * r])
    sol = solve_bvp(aug, None, 0.0, tol)
    quad = integrate(sol.restrict([0, 1]), lambda r, y: y[0] * r)
    assert abs(sol.values[2, -1] - quad) < 10 * tol * max(1.0, abs(quad))
    assert abs(quad - 5.0 * i1(5.0)) < 1e-8


def test_mesh_limit():
    with pytest.raises(MeshLimitExceeded):
        solve_bvp(gaussian_system(), None, 0.0, 1e-12, max_nodes=100)


def test_newton_divergence_on_blowup():
    # stiff cubic growth from a zero guess on a coarse mesh with few halvings
    sysb = OdeSystem(2, lambda r, y: np.vstack([y[1], 50 * y[0] ** 3 + 1e3]), lambda a: a[1:2],
                     lambda b: b[0:1] - 1e3, 10.0, S1)
    with pytest.raises(NewtonDivergence):
        solve_bvp(sysb, RadialMesh.uniform(10.0, 8), 0.0, 1e-10, max_newton=5, max_halvings=3, refine=False)


def test_csv_round_trip(tmp_path, gaussian):
    path = gaussian.to_csv(tmp_path / "g.csv", names=["u", "v"])
    back = BvpSolution.from_csv(path)
    np.testing.assert_array_equal(back.r, gaussian.r)
    np.testing.assert_array_equal(back.values, gaussian.values)
    np.testing.assert_array_equal(back.derivative_values, gaussian.derivative_values)
    assert path.read_bytes().split(b"\n")[0] == b"r,u,v,du,dv"


def test_deterministic():
    a = solve_bvp(gaussian_system(), None, 0.0, 1e-10)
    b = solve_bvp(gaussian_system(), None, 0.0, 1e-10)
    np.testing.assert_array_equal(a.values, b.values)


def test_mesh_validation():
    with pytest.raises(ValueError):
        RadialMesh(np.array([0.1, 1.0]))
    with pytest.raises(ValueError):
        RadialMesh(np.array([0.0, 1.0, 1.0]))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(0.0, 1.0))
def test_hermite_reproduces_cubics(coef, t):
    p = np.polynomial.Polynomial(coef)
    x = np.array([0.0, 0.3, 1.1, 2.0])
    r = np.array([t * 2.0])
    val = _hermite(x, p(x)[None, :], p.deriv()(x)[None, :], r)[0, 0]
    assert abs(val - p(r[0])) < 1e-9 * (1 + np.abs(coef).sum())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 9), st.floats(0.5, 4.0))
def test_integrate_exact_for_polynomials(k, L):
    mesh = RadialMesh.uniform(L, 7)
    sol = BvpSolution(mesh, np.zeros((1, mesh.nodes.size)), np.zeros((1, mesh.nodes.size)))
    assert abs(integrate(sol, lambda r, y: r ** k) - L ** (k + 1) / (k + 1)) < 1e-11 * L ** (k + 1)
