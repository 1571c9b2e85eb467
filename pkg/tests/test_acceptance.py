"""Acceptance criteria 1-11, one PASS/FAIL line each at the stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the terminal summary under "acceptance criteria".
"""

import time

import numpy as np
import pytest
from scipy.special import i0, i1
from scipy.stats import linregress

from helpers import ACCEPTANCE_LINES, REFERENCE_J, REFERENCE_K, record, table, vortex
from vortexspec.bvp import OdeSystem, RadialMesh, augment_with_integrals, integrate, solve_bvp
from vortexspec.index import OperatorSpec, analyze, compute_index_function
from vortexspec.innerprod import (compute_K_table, compute_table, fit_global_scale,
                                  negativity_certificate, perturbation_sweep)
from vortexspec.selfsim import SelfSimilarParams, mass_derivative_dm, solve_selfsim
from vortexspec.vortex import abc_residual, energy, gradient_norm_sq, radial_mass, solve_vortex

MS = (1, 2, 3)


def _rel(a, b):
    return abs(a - b) / abs(b)


def _table_criterion(tables, reference):
    """Fit one global scale on (v1, v2, v3); return it with the worst errors."""
    s = fit_global_scale([t.values for t in tables], [reference[t.m][:3] for t in tables])
    worst_entry, worst_det, signs = 0.0, 0.0, True
    for t in tables:
        ref_m = reference[t.m]
        scaled = t.scaled(s)
        for got, want in zip((scaled.v1, scaled.v2, scaled.v3), ref_m[:3]):
            worst_entry = max(worst_entry, _rel(got, want))
            signs &= np.sign(got) == np.sign(want)
        worst_det = max(worst_det, _rel(scaled.det, ref_m[3]))
        signs &= np.sign(t.det) == np.sign(ref_m[3])
    return s, worst_entry, worst_det, bool(signs)


def test_criterion_01_table_K():
    start = time.perf_counter()
    tables = [compute_K_table(m, profile=solve_vortex(m)) for m in MS]
    elapsed = time.perf_counter() - start
    s, entry, det, signs = _table_criterion(tables, REFERENCE_K)
    ok = entry < 5e-3 and det < 1e-2 and signs and elapsed < 60.0
    record(1, ok, f"K tables m=1..3: scale={s:.6f}, max entry err={entry:.2e} (<5e-3), "
                  f"max det err={det:.2e} (<1e-2), signs exact={signs}, runtime={elapsed:.1f}s (<60s)")
    assert ok


def test_criterion_02_table_J():
    tables = [table(m, "J") for m in MS]
    s, entry, det, signs = _table_criterion(tables, REFERENCE_J)
    worst = max(entry, det)
    ok = worst < 5e-3 and signs
    record(2, ok, f"J tables m=1..3: scale={s:.6f}, max err incl. det={worst:.2e} (<5e-3), signs exact={signs}")
    assert ok


def test_criterion_03_index_counts():
    expected = {"L1": (2, 1.0), "L2": (1, -1.0)}
    rows, ok = [], True
    for m in MS:
        for kind, (count, sign) in expected.items():
            rep = analyze(compute_index_function(OperatorSpec(kind, m, vortex(m))))
            good = rep.zero_count == count and rep.tail_sign_certified and np.sign(rep.c0) == sign
            ok &= good
            rows.append(f"m={m} {kind}: {rep.zero_count} zeros, c0={rep.c0:+.4g}")
    record(3, ok, "; ".join(rows))
    assert ok


def test_criterion_04_negativity():
    certs = {m: negativity_certificate(m, table(m, "K"), table(m, "J")) for m in MS}
    c1 = certs[1]
    ok1 = c1.h1_matrix_negative_definite and _rel(c1.h1_trace, -26.2804) < 1e-2 \
        and _rel(c1.h1_det, 10.8025) < 1e-2
    # the pattern the reference K tables predict
    predicted = {m: REFERENCE_K[m][0] + REFERENCE_K[m][1] < 0 and REFERENCE_K[m][3] > 0 for m in MS}
    pattern = all(certs[m].h1_matrix_negative_definite == predicted[m] for m in MS)
    h2 = all(certs[m].h2_zhat_value < 0 for m in MS)
    ok = ok1 and pattern and h2
    record(4, ok, f"m=1 trace={c1.h1_trace:.6g} det={c1.h1_det:.6g} negdef={c1.h1_matrix_negative_definite}; "
                  f"m=2,3 negdef={[certs[m].h1_matrix_negative_definite for m in (2, 3)]} "
                  f"(predicted {[predicted[m] for m in (2, 3)]}); "
                  f"H2(Zhat,Zhat)={[round(certs[m].h2_zhat_value, 4) for m in MS]}")
    assert ok


def test_criterion_05_mass_asymptotics():
    res = {}
    for m, tol in ((2, 3e-2), (5, 4e-3)):
        M = radial_mass(vortex(m))
        target = 4 * np.sqrt(3) * m
        res[m] = (M, _rel(M, target), tol)
    ok = all(err < tol for _, err, tol in res.values())
    record(5, ok, "; ".join(f"m={m}: mass={M:.6f} vs {4 * np.sqrt(3) * m:.6f}, err={err:.3%} (<{tol:.1%})"
                            for m, (M, err, tol) in res.items()))
    assert ok


def test_criterion_06_pohozaev():
    ratios = {m: abs(energy(vortex(m))) / gradient_norm_sq(vortex(m)) for m in (0, 1, 2, 3)}
    ok = all(v < 1e-5 for v in ratios.values())
    record(6, ok, "|E|/|grad Q|^2: " + ", ".join(f"m={m}: {v:.2e}" for m, v in ratios.items()) + " (<1e-5)")
    assert ok


def test_criterion_07_perturbation_stability():
    deltas = [1e-4, 1e-3, 1e-2]
    rows, ok = [], True
    for m in MS:
        entries, drift = perturbation_sweep(m, deltas, profile=vortex(m))
        same = all(e.indices == entries[0].indices for e in entries)
        worst = max(drift.values())
        ok &= same and worst < 1e-2
        rows.append(f"m={m}: indices {entries[0].indices} unchanged={same}, max drift={worst:.2e}")
    record(7, ok, "; ".join(rows) + " (<1e-2)")
    assert ok


def test_criterion_08_abc_order():
    vortex_ratios, linear_ratios = {}, {}
    for m in MS:
        short, long_ = vortex(m, 50.0), vortex(m, 100.0)
        vortex_ratios[m] = float(abs(abc_residual(short, 25.0)) / abs(abc_residual(long_, 50.0)))
        t50 = compute_table(m, "K", profile=short, r_max=50.0)
        t100 = compute_table(m, "K", profile=long_, r_max=100.0)
        d50 = max(abs(d) for d in t50.bounded_solution_defect(25.0))
        d100 = max(abs(d) for d in t100.bounded_solution_defect(50.0))
        linear_ratios[m] = d50 / d100 if d100 > 0 else float("inf")
    in_range = lambda v: 2.5 <= v <= 6.0  # noqa: E731
    ok_v = all(in_range(v) for v in vortex_ratios.values())
    ok_l = all(in_range(v) for v in linear_ratios.values())
    record(8, ok_v and ok_l,
           "defect ratio r_max 50->100 in [2.5, 6]: vortex "
           + ", ".join(f"m={m}: {v:.3f}" for m, v in vortex_ratios.items())
           + f" ({'ok' if ok_v else 'out of range'}); linear "
           + ", ".join(f"m={m}: {v:.3g}" for m, v in linear_ratios.items())
           + f" ({'ok' if ok_l else 'out of range'})")
    assert ok_v and ok_l


def test_criterion_09_selfsim():
    d_quad, d_fd = mass_derivative_dm(1, profile=vortex(1))
    ok_d = _rel(d_fd, d_quad) < 0.05
    bs = (0.05, 0.08, 0.1, 0.15)
    profs = [solve_selfsim(SelfSimilarParams(1, b), profile=vortex(1)) for b in bs]
    inv_b = 1.0 / np.array(bs)
    fr = linregress(inv_b, np.log([p.residual_norms["total_r0"] for p in profs]))
    fe = linregress(inv_b, np.log([abs(p.energy) for p in profs]))
    ok_fit = all(f.slope < 0 and f.rvalue ** 2 > 0.9 for f in (fr, fe))
    ok = ok_d and ok_fit
    record(9, ok, f"d_1 quad={d_quad:.5g} fd={d_fd:.5g} err={_rel(d_fd, d_quad):.2%} (<5%); "
                  f"log-residual slope={fr.slope:.3g} R2={fr.rvalue ** 2:.4f}; "
                  f"log-energy slope={fe.slope:.3g} R2={fe.rvalue ** 2:.4f} (slope<0, R2>0.9)")
    assert ok


def test_criterion_10_excluded():
    line = "criterion 10: EXCLUDED  blowup-rate reproduction is out of scope at desk scale"
    ACCEPTANCE_LINES.append(line)
    pytest.skip(line)


def _gaussian_system(L):
    S = np.array([[0.0, 0.0], [0.0, -1.0]])

    def rhs(r, y):
        return np.vstack([y[1], y[0] + (4 * r ** 2 - 5) * np.exp(-r ** 2)])
    return OdeSystem(2, rhs, lambda a: a[1:2], lambda b: b[0:1] - np.exp(-L ** 2), L, S)


def test_criterion_11_solver_self_tests():
    L, tol = 10.0, 1e-10
    errs = []
    for N in (32, 64, 128, 256):
        sol = solve_bvp(_gaussian_system(L), RadialMesh.uniform(L, N), 0.0, tol, refine=False)
        errs.append(np.max(np.abs(sol.values[0] - np.exp(-sol.r ** 2))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    S = np.array([[0.0, 0.0], [0.0, -1.0]])
    base = OdeSystem(2, lambda r, y: np.vstack([y[1], y[0]]), lambda a: a[1:2],
                     lambda b: b[0:1] - i0(5.0), 5.0, S)
    sol = solve_bvp(augment_with_integrals(base, [lambda r, y: y[0] * r]), None, 0.0, tol)
    quad = integrate(sol.restrict([0, 1]), lambda r, y: y[0] * r)
    gap = abs(sol.values[2, -1] - quad) / max(1.0, abs(quad))
    exact_gap = abs(quad - 5.0 * i1(5.0)) / abs(quad)
    ok = bool(np.all(orders >= 4.0)) and gap < 10 * tol
    record(11, ok, f"observed orders {np.round(orders, 2).tolist()} (>=4); augmentation vs quadrature "
                   f"{gap:.1e} (<{10 * tol:.0e}); quadrature vs exact {exact_gap:.1e}")
    assert ok
