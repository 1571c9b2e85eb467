"""
Index of the radial forms H1, H2 by zero counting.

The operators act on spin-``m`` radial functions ``U = r^m Ut`` as

    L Ut = -Ut'' - (2m+1)/r Ut' + (V(r) - delta e^{-r}) Ut,
    V = c r^{2m} Rt (m Rt + r Rt'),   c = 3 (L1) or 1 (L2),

so ``V = c R (r dR/dr)`` in the original variables.  By Sturm oscillation
the number of positive zeros of the solution with ``Ut(0) = 1, Ut'(0) = 0``
equals the number of negative directions of ``<L u, u>``.

The solution is marched from the origin in the variables ``(Ut, p)`` with
``p = r^{2m+1} Ut'``.  In the potential-free far field ``p`` is exactly
constant, which makes the far-field constants of
``Ut ~ c0 + c1 r^{-2m}`` cheap to read off without amplifying round-off.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect

from .bvp import BvpSolution, RadialMesh, evaluate
from .errors import (NoPlateau, ProfileDomainTooSmall, StepFailure, SuspectedTangentialZero,
                     UncertifiedTail)
from .vortex import VortexProfile

POTENTIAL_FACTOR = {"L1": 3.0, "L2": 1.0}
SERIES_RADIUS = 1e-3


@dataclass(frozen=True)
class OperatorSpec:
    """One of the two radial operators; ``profile=None`` drops the potential."""

    kind: str
    m: int
    profile: VortexProfile | None
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in POTENTIAL_FACTOR:
            raise ValueError(f"kind must be L1 or L2, got {self.kind!r}")
        if self.m < 1:
            raise ValueError("index computations need m >= 1")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.profile is not None and self.profile.m != self.m:
            raise ValueError("profile winding number does not match operator")

    @property
    def c(self) -> float:
        return POTENTIAL_FACTOR[self.kind]

    def potential(self, r):
        """``V(r) - delta e^{-r}`` on the regularised scale."""
        r = np.asarray(r, dtype=float)
        out = -self.delta * np.exp(-r)
        if self.profile is not None:
            y = evaluate(self.profile.solution, r)
            m = self.m
            out = out + self.c * r ** (2 * m) * y[0] * (m * y[0] + r * y[1])
        return out


@dataclass(frozen=True)
class IndexFunction:
    op: OperatorSpec
    solution: BvpSolution
    flux: np.ndarray = field(repr=False)

    @property
    def r(self):
        return self.solution.r

    @property
    def r_max(self):
        return self.solution.r_max

    def to_csv(self, path) -> Path:
        rows = np.column_stack([self.r, self.solution.values[0], self.solution.values[1], self.flux])
        return _write_rows(path, "r,U_tilde,dU_tilde,flux", rows)


def _write_rows(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


@dataclass
class IndexReport:
    zero_count: int = 0
    zero_locations: list = field(default_factory=list)
    c0: float = float("nan")
    c1: float = float("nan")
    tail_sign_certified: bool = False
    c0_fluctuation: float = float("nan")
    c1_flatness: float = float("nan")
    root_slopes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def _series_start(op: OperatorSpec, r0: float):
    """Frobenius start ``Ut = 1 + a2 r^2 + a3 r^3 + b r^{2m+2}`` at ``r0``."""
    m, delta = op.m, op.delta
    n = 2 * m + 1
    a2 = -delta / (2.0 * (n + 1))
    a3 = delta / (3.0 * (n + 2))
    b = 0.0
    if op.profile is not None:
        R0 = op.profile.Rt(0.0)
        k = 2 * m + 2
        b = op.c * m * R0 * R0 / (k * (k - 1) + n * k)
    k = 2 * m + 2
    U = 1.0 + a2 * r0 ** 2 + a3 * r0 ** 3 + b * r0 ** k
    dU = 2 * a2 * r0 + 3 * a3 * r0 ** 2 + k * b * r0 ** (k - 1)
    return U, dU


def compute_index_function(op: OperatorSpec, r_max: float | None = None,
                           tol: float = 1e-10, max_step: float = 0.05) -> IndexFunction:
    """March ``L Ut = 0`` from ``Ut(0) = 1``, ``Ut'(0) = 0`` out to ``r_max``.

    Raises ``ProfileDomainTooSmall`` if the vortex does not reach ``r_max``
    and ``StepFailure`` if the integrator aborts.
    """
    if r_max is None:
        r_max = op.profile.r_max if op.profile is not None else 50.0
    if op.profile is not None and r_max > op.profile.r_max * (1 + 1e-12):
        raise ProfileDomainTooSmall(f"profile covers [0, {op.profile.r_max}], need {r_max}")
    m = op.m
    n = 2 * m + 1
    r0 = SERIES_RADIUS
    U0, dU0 = _series_start(op, r0)

    def rhs(r, y):
        return [y[1] / r ** n, r ** n * op.potential(r) * y[0]]

    sol = solve_ivp(rhs, (r0, r_max), [U0, r0 ** n * dU0], method="DOP853",
                    rtol=max(tol, 1e-13), atol=[1e-15, 1e-300], max_step=max_step)
    if sol.status != 0:
        raise StepFailure(sol.message)
    r = np.concatenate([[0.0], sol.t])
    U = np.concatenate([[1.0], sol.y[0]])
    p = np.concatenate([[0.0], sol.y[1]])
    dU = np.concatenate([[0.0], sol.y[1] / sol.t ** n])
    V = op.potential(r)
    d2U = np.empty_like(r)
    d2U[1:] = -n / r[1:] * dU[1:] + V[1:] * U[1:]
    d2U[0] = V[0] / (n + 1)
    solution = BvpSolution(RadialMesh(r), np.vstack([U, dU]), np.vstack([dU, d2U]))
    return IndexFunction(op, solution, p)


def count_zeros(fn: IndexFunction, xtol: float = 1e-8) -> IndexReport:
    """Count and locate sign changes of ``Ut`` on ``(0, r_max]``.

    Roots are refined by bisection on the interpolant.  A near-zero without
    a sign change raises ``SuspectedTangentialZero`` instead of being
    silently dropped.
    """
    r = fn.r
    U = fn.solution.values[0]
    scale = float(np.max(np.abs(U)))
    s = np.sign(U[1:])
    crossings = np.nonzero(s[:-1] * s[1:] < 0)[0] + 1
    roots, slopes = [], []
    for j in crossings:
        a, b = r[j], r[j + 1]
        root = bisect(lambda x: evaluate(fn.solution, x)[0], a, b, xtol=xtol)
        roots.append(float(root))
        slopes.append(float(abs(evaluate(fn.solution, root)[1])))
    exact = np.nonzero(U[1:] == 0.0)[0] + 1
    near = np.nonzero(np.abs(U[1:]) < 1e-9)[0] + 1
    bracketed = set()
    for j in crossings:
        bracketed.update((j, j + 1))
    suspicious = [int(j) for j in np.union1d(near, exact) if j not in bracketed]
    if suspicious:
        raise SuspectedTangentialZero(f"|Ut| < 1e-9 without sign change near r = {r[suspicious[0]]:.6g}")
    for root, slope in zip(roots, slopes):
        if slope <= 1e-4 * scale:
            raise SuspectedTangentialZero(f"root at r = {root:.6g} is not simple (slope {slope:.3g})")
    return IndexReport(zero_count=len(roots), zero_locations=roots, root_slopes=slopes)


def asymptotic_constants(fn: IndexFunction, window: float = 0.25, max_variation: float = 0.05):
    """Far-field constants of ``Ut ~ c0 + c1 r^{-2m}`` over the last ``window``.

    Returns ``(c0, c1, info)`` where ``info`` carries the estimator spread.
    ``NoPlateau`` is raised when the ``c0`` estimator wanders by more than
    ``max_variation`` (relative) across the window.
    """
    m = fn.op.m
    r = fn.r
    sel = r >= (1.0 - window) * fn.r_max
    rr = r[sel]
    U = fn.solution.values[0][sel]
    p = fn.flux[sel]
    c0_est = U + p / (2 * m * rr ** (2 * m))
    c1_est = -p / (2 * m)
    c0 = float(np.median(c0_est))
    c1 = float(np.median(c1_est))
    c0_spread = float(np.ptp(c0_est))
    c1_spread = float(np.ptp(c1_est))
    if c0_spread > max_variation * abs(c0):
        raise NoPlateau(f"c0 estimator varies by {c0_spread:.3g} around {c0:.6g}")
    c1_flatness = c1_spread / abs(c1) if c1 != 0 else c1_spread
    return c0, c1, {"c0_fluctuation": c0_spread, "c1_flatness": c1_flatness}


def analyze(fn: IndexFunction) -> IndexReport:
    """Zero count plus far-field constants and the tail certificate."""
    report = count_zeros(fn)
    c0, c1, info = asymptotic_constants(fn)
    report.c0, report.c1 = c0, c1
    report.c0_fluctuation = info["c0_fluctuation"]
    report.c1_flatness = info["c1_flatness"]
    U_end = fn.solution.values[0][-1]
    report.tail_sign_certified = bool(abs(c0) > 10.0 * report.c0_fluctuation
                                      and np.sign(U_end) == np.sign(c0) and c0 != 0.0)
    return report


def index(op: OperatorSpec, r_max: float | None = None, tol: float = 1e-10) -> int:
    """Index of the form ``<L u, u>`` on spin-``m`` radial functions."""
    report = analyze(compute_index_function(op, r_max, tol))
    if not report.tail_sign_certified:
        raise UncertifiedTail(f"{op.kind}, m={op.m}: c0={report.c0:.4g} does not certify the tail")
    return report.zero_count
