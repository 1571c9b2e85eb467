"""
Bounded solutions of the linearised problems and their inner-product tables.

For the L1 family we solve ``L1 U1 = R`` and ``L1 U2 = Lambda R`` and form

    K1 = <U1, R>,  K2 = <U2, Lambda R>,  K3 = <U1, Lambda R> = <U2, R>;

for the L2 family ``L2 Z1 = Lambda R``, ``L2 Z2 = Lambda^2 R`` and

    J1 = <Z1, Lambda R>,  J2 = <Z2, Lambda^2 R>,  J3 = <Z1, Lambda^2 R> = <Z2, Lambda R>.

Inner products are radial, ``<f, g> = int_0^inf f g r dr``.  Pass
``angular=True`` to include the ``2 pi`` from the angle integration.

Each family is computed from one coupled first-order system holding the
vortex, both bounded solutions and the four running integrals, so the
profile, the potentials and the quadratures all live on one adapted mesh.
Bounded solutions use the far-field condition ``W' + (2m/r) W = 0``,
which selects the ``r^{-2m}`` branch of the free equation.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bvp import BvpSolution, OdeSystem, RadialMesh, evaluate, integrate, solve_bvp
from .errors import DegenerateMatrix, ProfileDomainTooSmall, ResonanceSuspected
from .index import POTENTIAL_FACTOR, OperatorSpec, index
from .vortex import DEFAULT_RMAX, DEFAULT_TOL, VortexProfile, lambda2_R, lambda_R, solve_vortex

logger = logging.getLogger(__name__)

RHS_KINDS = ("R", "LambdaR", "Lambda2R")
FAMILY_RHS = {"K": ("R", "LambdaR"), "J": ("LambdaR", "Lambda2R")}
FAMILY_OP = {"K": "L1", "J": "L2"}
INTEGRAL_NAMES = ("v1", "v2", "v3a", "v3b")


def _source(kind: str, m: int, r, R, dR):
    """Right-hand side ``g`` and its partials with respect to ``(Rt, Rt')``."""
    if kind == "R":
        return R, np.ones_like(r), np.zeros_like(r)
    if kind == "LambdaR":
        return (m + 1) * R + r * dR, np.full_like(r, m + 1.0), r
    if kind == "Lambda2R":
        w = r ** (2 * m + 2)
        g = ((m + 1) ** 2 + r * r) * R + 2 * r * dR - w * R ** 3
        return g, (m + 1) ** 2 + r * r - 3 * w * R * R, 2 * r
    raise ValueError(f"unknown rhs kind {kind!r}")


def source_values(profile: VortexProfile, kind: str, r=None):
    """Transformed source ``r^{-m} g`` built from the vortex."""
    if kind == "R":
        return profile.Rt(r)
    if kind == "LambdaR":
        return lambda_R(profile, r)
    if kind == "Lambda2R":
        return lambda2_R(profile, r)
    raise ValueError(f"unknown rhs kind {kind!r}")


def far_field_defect(m: int, r, W, dW):
    """Relative defect ``(W' + 2m W / r) / (2m |W| / r)`` of the decaying branch."""
    r = np.asarray(r, dtype=float)
    return (dW + 2 * m * W / r) / (2 * m * np.abs(W) / r)


# single linear problem with a frozen vortex

@dataclass(frozen=True)
class LinearBvp:
    op: OperatorSpec
    rhs_kind: str
    r_max: float = DEFAULT_RMAX
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.rhs_kind not in RHS_KINDS and self.rhs_kind != "zero":
            raise ValueError(f"rhs_kind must be one of {RHS_KINDS} or 'zero'")
        if self.op.profile is None:
            raise ValueError("linear problems need a vortex profile")


@dataclass(frozen=True)
class BoundedSolution:
    bvp: LinearBvp
    solution: BvpSolution
    abc_residual: float

    def far_field_defect(self, r):
        y = evaluate(self.solution, r)
        return far_field_defect(self.bvp.op.m, r, y[0], y[1])


def solve_linear_bvp(bvp: LinearBvp) -> BoundedSolution:
    """Solve ``L W = g`` for the bounded solution on ``[0, r_max]``.

    The vortex enters only through the potential and the source, which are
    interpolated from ``bvp.op.profile``.

    Raises
    ------
    ProfileDomainTooSmall, NewtonDivergence, ResonanceSuspected
    """
    op = bvp.op
    prof = op.profile
    if bvp.r_max > prof.r_max * (1 + 1e-12):
        raise ProfileDomainTooSmall(f"profile covers [0, {prof.r_max}], need {bvp.r_max}")
    m, L = op.m, float(bvp.r_max)
    n = 2 * m + 1

    def coeffs(r):
        y = evaluate(prof.solution, r)
        V = op.potential(r)
        if bvp.rhs_kind == "zero":
            g = np.zeros_like(r)
        else:
            g = _source(bvp.rhs_kind, m, r, y[0], y[1])[0]
        return V, g

    def rhs(r, y):
        V, g = coeffs(r)
        return np.vstack([y[1], V * y[0] - g])

    def jac(r, y):
        V, _ = coeffs(r)
        J = np.zeros((2, 2, r.size))
        J[0, 1] = 1.0
        J[1, 0] = V
        return J

    S = np.array([[0.0, 0.0], [0.0, -float(n)]])
    system = OdeSystem(2, rhs, lambda ya: ya[1:2], lambda yb: yb[1:2] + (2 * m / L) * yb[0:1],
                       L, S, jac)
    mesh_nodes = prof.r[prof.r <= L]
    if mesh_nodes[-1] < L:
        mesh_nodes = np.append(mesh_nodes, L)
    sol = solve_bvp(system, RadialMesh(mesh_nodes), 0.0, bvp.tol)
    g_scale = 0.0 if bvp.rhs_kind == "zero" else float(np.max(np.abs(coeffs(sol.r)[1])))
    w_scale = float(np.max(np.abs(sol.values[0])))
    if w_scale > 0 and w_scale > 1e6 * g_scale:
        raise ResonanceSuspected(f"|W| = {w_scale:.3g} against |g| = {g_scale:.3g}")
    abc = float(sol.values[1][-1] + (2 * m / L) * sol.values[0][-1])
    return BoundedSolution(bvp, sol, abc)


# coupled family system

def family_system(m: int, family: str, r_max: float, delta: float = 0.0) -> OdeSystem:
    """Vortex, two bounded solutions and four running integrals, dimension 10.

    Components: ``Rt, Rt', W1, W1', W2, W2', int W1 h1, int W2 h2,
    int W1 h2, int W2 h1`` with radial weight ``r^{2m+1}``.
    """
    if family not in FAMILY_RHS:
        raise ValueError("family must be K or J")
    c = POTENTIAL_FACTOR[FAMILY_OP[family]]
    k1, k2 = FAMILY_RHS[family]
    n = 2 * m + 1
    L = float(r_max)
    S = np.zeros((10, 10))
    S[1, 1] = S[3, 3] = S[5, 5] = -float(n)
    robin = 1.0 + n / (2.0 * L)

    def parts(r, y):
        R, dR = y[0], y[1]
        r2m = r ** (2 * m)
        V = c * r2m * R * (m * R + r * dR) - delta * np.exp(-r)
        h1 = _source(k1, m, r, R, dR)
        h2 = _source(k2, m, r, R, dR)
        return r2m, V, h1, h2

    def rhs(r, y):
        r2m, V, h1, h2 = parts(r, y)
        w = r ** n
        return np.vstack([
            y[1], y[0] - r2m * y[0] ** 3,
            y[3], V * y[2] - h1[0],
            y[5], V * y[4] - h2[0],
            w * y[2] * h1[0], w * y[4] * h2[0], w * y[2] * h2[0], w * y[4] * h1[0],
        ])

    def jac(r, y):
        r2m, V, h1, h2 = parts(r, y)
        w = r ** n
        dV0 = c * r2m * (2 * m * y[0] + r * y[1])
        dV1 = c * r2m * r * y[0]
        J = np.zeros((10, 10, r.size))
        J[0, 1] = 1.0
        J[1, 0] = 1.0 - 3.0 * r2m * y[0] ** 2
        for row, W, h in ((3, 2, h1), (5, 4, h2)):
            J[row - 1, row] = 1.0
            J[row, W] = V
            J[row, 0] = dV0 * y[W] - h[1]
            J[row, 1] = dV1 * y[W] - h[2]
        for row, W, h in ((6, 2, h1), (7, 4, h2), (8, 2, h2), (9, 4, h1)):
            J[row, W] = w * h[0]
            J[row, 0] = w * y[W] * h[1]
            J[row, 1] = w * y[W] * h[2]
        return J

    def left_bc(ya):
        return np.array([ya[1], ya[3], ya[5], ya[6], ya[7], ya[8], ya[9]])

    def right_bc(yb):
        return np.array([yb[1] + robin * yb[0], yb[3] + (2 * m / L) * yb[2],
                         yb[5] + (2 * m / L) * yb[4]])

    return OdeSystem(10, rhs, left_bc, right_bc, L, S, jac)


@dataclass
class InnerProductTable:
    m: int
    family: str
    v1: float
    v2: float
    v3: float
    v3_pair: tuple
    delta: float = 0.0
    r_max: float = DEFAULT_RMAX
    scale: float = 1.0
    running_integrals: dict = field(default_factory=dict, repr=False, compare=False)
    solution: BvpSolution | None = field(default=None, repr=False, compare=False)

    @property
    def det(self) -> float:
        return self.v1 * self.v2 - self.v3 ** 2

    @property
    def trace(self) -> float:
        return self.v1 + self.v2

    @property
    def values(self) -> np.ndarray:
        return np.array([self.v1, self.v2, self.v3])

    @property
    def symmetry_defect(self) -> float:
        a, b = self.v3_pair
        return abs(a - b) / max(abs(a), abs(b))

    def plateau_variation(self, window: float = 0.25) -> dict:
        """Relative variation of each running integral over the last ``window``."""
        r = self.running_integrals["r"]
        sel = r >= (1.0 - window) * r[-1]
        out = {}
        for name in INTEGRAL_NAMES:
            curve = self.running_integrals[name][sel]
            out[name] = float(np.ptp(curve) / abs(curve[-1]))
        return out

    def scaled(self, s: float) -> "InnerProductTable":
        """Copy with every entry multiplied by ``s``."""
        curves = {k: (v if k == "r" else s * v) for k, v in self.running_integrals.items()}
        return InnerProductTable(self.m, self.family, s * self.v1, s * self.v2, s * self.v3,
                                 (s * self.v3_pair[0], s * self.v3_pair[1]), self.delta,
                                 self.r_max, s * self.scale, curves, self.solution)

    def to_dict(self) -> dict:
        return {"m": self.m, "family": self.family, "delta": self.delta, "r_max": self.r_max,
                "scale": self.scale, "v1": self.v1, "v2": self.v2, "v3": self.v3,
                "v3_pair": list(self.v3_pair), "det": self.det, "trace": self.trace}

    @classmethod
    def from_dict(cls, d: dict) -> "InnerProductTable":
        return cls(int(d["m"]), d["family"], float(d["v1"]), float(d["v2"]), float(d["v3"]),
                   tuple(float(v) for v in d["v3_pair"]), float(d["delta"]), float(d["r_max"]),
                   float(d["scale"]))

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    def curves_to_csv(self, path) -> Path:
        path = Path(path)
        ri = self.running_integrals
        prefix = "k" if self.family == "K" else "j"
        names = [f"{prefix}1", f"{prefix}2", f"{prefix}3a", f"{prefix}3b"]
        with path.open("w") as fh:
            fh.write("r," + ",".join(names) + "\n")
            for row in zip(ri["r"], *(ri[k] for k in INTEGRAL_NAMES)):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        return path

    def bounded_solution_defect(self, r) -> tuple:
        """Far-field defects of both bounded solutions at ``r``."""
        y = evaluate(self.solution, r)
        return (far_field_defect(self.m, r, y[2], y[3]), far_field_defect(self.m, r, y[4], y[5]))


def _family_guess(profile: VortexProfile):
    def guess(r):
        y = np.zeros((10, r.size))
        y[:2] = evaluate(profile.solution, r)
        return y
    return guess


def compute_table(m: int, family: str, delta: float = 0.0, *, profile: VortexProfile | None = None,
                  r_max: float = DEFAULT_RMAX, tol: float = DEFAULT_TOL,
                  angular: bool = False) -> InnerProductTable:
    """Inner-product table of one family from the coupled system."""
    if m < 1:
        raise ValueError("inner-product tables need m >= 1")
    if profile is None:
        profile = solve_vortex(m, r_max, tol)
    if abs(profile.r_max - r_max) > 1e-12 * r_max:
        raise ProfileDomainTooSmall("profile must be solved on the same domain")
    system = family_system(m, family, r_max, delta)
    sol = solve_bvp(system, profile.solution.mesh, _family_guess(profile), tol)
    scale = 2 * np.pi if angular else 1.0
    ends = scale * sol.values[6:, -1]
    curves = {"r": sol.r}
    for k, name in enumerate(INTEGRAL_NAMES):
        curves[name] = scale * sol.values[6 + k]
    v3a, v3b = float(ends[2]), float(ends[3])
    return InnerProductTable(m, family, float(ends[0]), float(ends[1]), 0.5 * (v3a + v3b),
                             (v3a, v3b), float(delta), float(r_max), scale, curves, sol)


def compute_K_table(m: int, delta: float = 0.0, **kwargs) -> InnerProductTable:
    return compute_table(m, "K", delta, **kwargs)


def compute_J_table(m: int, delta: float = 0.0, **kwargs) -> InnerProductTable:
    return compute_table(m, "J", delta, **kwargs)


def quadratic_form_check(table: InnerProductTable, which: int = 1) -> dict:
    """Compare ``<L W, W>`` via the source with direct assembly of the form.

    Integration by parts on ``[0, L]`` gives

        int W g r dr = int (W'^2 + m^2 W^2 / r^2 + V W^2) r dr - L W(L) W'(L)

    in the original variables; the boundary flux is reported separately.
    """
    m = table.m
    c = POTENTIAL_FACTOR[FAMILY_OP[table.family]]
    delta = table.delta
    comp = 2 if which == 1 else 4
    n = 2 * m + 1

    def direct(r, y):
        Wt, dWt = y[comp], y[comp + 1]
        rs = np.where(r > 0, r, 1.0)
        grad = r ** n * dWt ** 2 + 2 * m * r ** (2 * m) * Wt * dWt + 2 * m * m * rs ** (n - 2) * Wt ** 2
        if m == 0:
            grad = r * dWt ** 2
        V = c * r ** (2 * m) * y[0] * (m * y[0] + r * y[1]) - delta * np.exp(-r)
        return grad + V * r ** n * Wt ** 2

    sol = table.solution
    assembled = float(integrate(sol, direct)) * table.scale
    L = sol.r_max
    Wt, dWt = sol.values[comp, -1], sol.values[comp + 1, -1]
    U, dU = L ** m * Wt, m * L ** (m - 1) * Wt + L ** m * dWt
    flux = table.scale * L * U * dU
    via_source = table.v1 if which == 1 else table.v2
    corrected = assembled - flux
    return {"via_source": via_source, "assembled": assembled, "boundary_flux": flux,
            "relative_difference": abs(corrected - via_source) / abs(via_source)}


def fit_global_scale(computed, reference) -> float:
    """Scale ``s`` minimising ``sum(((s c - p) / p)^2)``."""
    c = np.asarray(computed, dtype=float).ravel()
    p = np.asarray(reference, dtype=float).ravel()
    q = c / p
    return float(q.sum() / (q * q).sum())


@dataclass(frozen=True)
class NegativityCertificate:
    m: int
    h1_matrix_negative_definite: bool
    h1_trace: float
    h1_det: float
    h2_zhat_value: float
    zhat_coefficient: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def negativity_certificate(m: int, k: InnerProductTable, j: InnerProductTable) -> NegativityCertificate:
    """Trace/determinant test on the K matrix and ``H2(Zhat, Zhat)`` from J.

    Raises ``DegenerateMatrix`` when either determinant is too close to zero
    relative to the diagonal.
    """
    if k.m != m or j.m != m or k.family != "K" or j.family != "J":
        raise ValueError("need the K and J tables of the same m")
    for t in (k, j):
        if abs(t.det) < 1e-6 * max(t.v1 ** 2, t.v2 ** 2):
            raise DegenerateMatrix(f"{t.family} matrix for m={m} is numerically singular")
    neg = bool(k.trace < 0 and k.det > 0)
    return NegativityCertificate(m, neg, k.trace, k.det, j.det / j.v2, -j.v3 / j.v2)


@dataclass
class SweepEntry:
    delta: float
    K: InnerProductTable
    J: InnerProductTable
    indices: tuple


def perturbation_sweep(m: int, deltas, *, r_max: float = DEFAULT_RMAX, tol: float = DEFAULT_TOL,
                       profile: VortexProfile | None = None):
    """Tables and indices for ``delta = 0`` followed by each of ``deltas``.

    Returns ``(entries, drift)`` where ``drift[name]`` is the largest
    relative change of that table entry from the unperturbed value.
    """
    deltas = [float(d) for d in deltas]
    if any(d <= 0 or d > 0.05 for d in deltas):
        raise ValueError("deltas must lie in (0, 0.05]")
    if profile is None:
        profile = solve_vortex(m, r_max, tol)
    entries = []
    for d in [0.0] + deltas:
        K = compute_K_table(m, d, profile=profile, r_max=r_max, tol=tol)
        J = compute_J_table(m, d, profile=profile, r_max=r_max, tol=tol)
        idx = (index(OperatorSpec("L1", m, profile, d)), index(OperatorSpec("L2", m, profile, d)))
        entries.append(SweepEntry(d, K, J, idx))
    base = entries[0]
    drift = {}
    for fam in ("K", "J"):
        b = getattr(base, fam)
        for name in ("v1", "v2", "v3", "det"):
            ref = getattr(b, name)
            drift[f"{fam}.{name}"] = max((abs(getattr(getattr(e, fam), name) - ref) / abs(ref)
                                          for e in entries[1:]), default=0.0)
    return entries, drift
