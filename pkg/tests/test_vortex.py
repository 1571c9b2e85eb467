import json

import numpy as np
import pytest

from helpers import shooting_vortex, vortex
from vortexspec.bvp import BvpSolution, RadialMesh, evaluate, integrate
from vortexspec.vortex import (VortexProfile, abc_residual, decay_fit, energy, gradient_norm_sq,
                               lambda2_R, lambda2_R_direct, lambda_R, mass, peak_location,
                               radial_mass, solve_vortex)


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_profile_positive_and_regular(m):
    p = vortex(m)
    assert np.all(p.Rt()[:-1] > 0)
    assert abs(p.dRt(0.0)) < 1e-10
    assert p.solution.residual_norm <= 1e-10


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_robin_condition_imposed(m):
    p = vortex(m)
    L = p.r_max
    assert abs(p.dRt(L) + (1 + (2 * m + 1) / (2 * L)) * p.Rt(L)) < 1e-14


@pytest.mark.parametrize("m, lo, hi", [(0, 1.5, 3.0), (1, 0.8, 2.0)])
def test_against_shooting_oracle(m, lo, hi):
    a, M = shooting_vortex(m, lo, hi)
    p = vortex(m)
    assert abs(p.Rt(0.0) / a - 1) < 1e-5
    assert abs(radial_mass(p) / M - 1) < 1e-6


def test_townes_mass():
    assert abs(mass(vortex(0)) - 11.7008) < 2e-4


@pytest.mark.parametrize("m", [1, 2])
def test_mass_quadrature_vs_augmented(m):
    p = vortex(m)
    assert abs(mass(p, "augmented") - mass(p)) < 10 * 1e-10 * mass(p)


def test_mass_domain_robustness():
    assert abs(radial_mass(vortex(1, 40.0)) / radial_mass(vortex(1)) - 1) < 1e-8


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_pohozaev(m):
    p = vortex(m)
    assert abs(energy(p)) / gradient_norm_sq(p) < 1e-5


def _synthetic(m, lam=1.0, L=20.0, n=4001):
    """Profile object around R = r^m lam^{m+1} exp(-(lam r)^2): not a solution."""
    r = np.linspace(0, L, n)
    Rt = lam ** (m + 1) * np.exp(-(lam * r) ** 2)
    dRt = -2 * lam ** 2 * r * Rt
    d2Rt = (4 * lam ** 4 * r ** 2 - 2 * lam ** 2) * Rt
    sol = BvpSolution(RadialMesh(r), np.vstack([Rt, dRt]), np.vstack([dRt, d2Rt]))
    return VortexProfile(m, sol, L, 1e-10)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_energy_scaling(m):
    e1 = energy(_synthetic(m))
    e2 = energy(_synthetic(m, lam=2.0))
    assert abs(e1) > 1e-3
    assert abs(e2 / e1 - 4.0) < 1e-6


def test_zero_profile_quantities():
    r = np.linspace(0, 10, 101)
    z = np.zeros((2, r.size))
    prof = VortexProfile(1, BvpSolution(RadialMesh(r), z, z), 10.0, 1e-10)
    assert mass(prof) == 0.0
    assert energy(prof) == 0.0
    assert not np.any(lambda_R(prof))


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_lambda_at_origin(m):
    p = vortex(m)
    assert lambda_R(p, 0.0) == pytest.approx((m + 1) * p.Rt(0.0), rel=1e-14)
    assert lambda2_R(p, 0.0) == pytest.approx((m + 1) ** 2 * p.Rt(0.0), rel=1e-14)


@pytest.mark.parametrize("m", [1, 2])
def test_lambda_scaling_orthogonality(m):
    # <Lambda R, R> vanishes for the L2-critical scaling generator
    p = vortex(m)
    val = integrate(p.solution, lambda r, y: ((m + 1) * y[0] + r * y[1]) * y[0] * r ** (2 * m + 1))
    assert abs(val) < 1e-9 * radial_mass(p)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_lambda2_two_forms(m):
    p = vortex(m)
    r = np.linspace(0.5, 20, 400)
    h = 1e-4
    d2 = (p.Rt(r + h) - 2 * p.Rt(r) + p.Rt(r - h)) / h ** 2
    direct = lambda2_R_direct(p, r, d2)
    assert np.max(np.abs(direct - lambda2_R(p, r))) < 1e-5 * np.max(np.abs(lambda2_R(p, r)))


@pytest.mark.parametrize("m", [1, 2])
def test_lambda_composition(m):
    p = vortex(m)
    r = np.linspace(1.0, 25.0, 300)
    h = 1e-5
    # Lambda applied to r^m f with f = Lambda-tilde R, by central differences
    f = lambda x: lambda_R(p, x)
    df = (f(r + h) - f(r - h)) / (2 * h)
    twice = (m + 1) * f(r) + r * df
    ref = lambda2_R(p, r)
    assert np.max(np.abs(twice - ref)) < 1e-6 * np.max(np.abs(ref))


@pytest.mark.parametrize("m", [2, 3, 4])
def test_peak_location(m):
    rp = peak_location(vortex(m))
    assert abs(rp - np.sqrt(2) * m) / (np.sqrt(2) * m) < 0.25


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_decay_fit(m):
    assert decay_fit(vortex(m))["max_rel_deviation"] < 0.1


@pytest.mark.parametrize("m", [1, 2, 3])
def test_abc_defect_matches_asymptotics(m):
    # leading defect of the Robin condition is -(4m^2 - 1) / (8 r^2)
    d = float(abc_residual(vortex(m), 25.0))
    pred = -(4 * m * m - 1) / (8 * 25.0 ** 2)
    assert abs(d / pred - 1) < 0.2


def test_monotone_tail():
    p = vortex(3)
    R = p.R()
    k = int(np.argmax(R))
    assert np.all(np.diff(R[k:]) < 0)


def test_m5_converges():
    p = vortex(5)
    assert np.all(p.Rt()[:-1] > 0)
    assert np.max(p.R()) > 1.0


def test_invalid_m():
    with pytest.raises(ValueError):
        solve_vortex(-1)


def test_exports(tmp_path):
    p = vortex(1)
    path = p.to_csv(tmp_path / "v.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "r,R_tilde,dR_tilde,R"
    row = [float(x) for x in lines[5].split(",")]
    assert row[3] == pytest.approx(row[0] * row[1], rel=1e-15)
    meta = json.loads(p.to_json(tmp_path / "v.json").read_text())
    assert {"m", "r_max", "tol", "mass", "energy", "peak_location"} <= set(meta)


def test_evaluate_profile_interpolant():
    p = vortex(1)
    r = p.r[10]
    assert evaluate(p.solution, r)[0] == p.Rt()[10]
