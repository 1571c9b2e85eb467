"""
Truncated self-similar vortex profiles.

The profile ``P = r^m Pt`` solves

    P'' + P'/r - (1 + m^2/r^2 - b^2 r^2 / 4) P + P^3 = 0

on ``[0, (1 - eta) R_b]`` with ``P = 0`` at the right end, where
``R_b = sqrt(2 + 2 sqrt(1 + b^2 m^2)) / b`` is the turning point of the
effective potential.  In ``Pt`` the equation reads

    Pt'' + (2m+1)/r Pt' - (1 - b^2 r^2 / 4) Pt + r^{2m} Pt^3 = 0.

Solutions are reached by homotopy in ``b`` on the fixed target interval,
starting from the vortex (``b = 0``).  The profile is then multiplied by a
smooth cutoff ``phi_b`` that drops from 1 to 0 across the annulus
``(1 - eta)^2 R_b < r < (1 - eta) R_b``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bvp import BvpSolution, OdeSystem, RadialMesh, evaluate, integrate, solve_bvp
from .errors import ContinuationStall, NewtonDivergence, SingularJacobian
from .vortex import DEFAULT_TOL, VortexProfile, solve_vortex

logger = logging.getLogger(__name__)

MAX_INTERVAL = 0.25


def radius_Rb(b: float, m: int) -> float:
    """Turning point of ``1 + m^2/r^2 - b^2 r^2 / 4``."""
    if not b > 0:
        raise ValueError("b must be positive")
    return float(np.sqrt(2.0 + 2.0 * np.sqrt(1.0 + (b * m) ** 2)) / b)


@dataclass(frozen=True)
class SelfSimilarParams:
    m: int
    b: float
    eta: float = 0.1

    def __post_init__(self):
        if self.m < 0 or int(self.m) != self.m:
            raise ValueError("m must be a nonnegative integer")
        if self.b < 0:
            raise ValueError("b must be nonnegative")
        if not 0 < self.eta < 0.5:
            raise ValueError("eta must lie in (0, 0.5)")

    @property
    def R_b(self) -> float:
        return radius_Rb(self.b, self.m) if self.b > 0 else float("inf")

    @property
    def outer(self) -> float:
        return (1.0 - self.eta) * self.R_b

    @property
    def inner(self) -> float:
        return (1.0 - self.eta) ** 2 * self.R_b


def selfsim_system(m: int, b: float, r_end: float) -> OdeSystem:
    n = 2 * m + 1
    S = np.array([[0.0, 0.0], [0.0, -float(n)]])
    q = 0.25 * b * b

    def rhs(r, y):
        return np.vstack([y[1], (1.0 - q * r * r) * y[0] - r ** (2 * m) * y[0] ** 3])

    def jac(r, y):
        J = np.zeros((2, 2, r.size))
        J[0, 1] = 1.0
        J[1, 0] = 1.0 - q * r * r - 3.0 * r ** (2 * m) * y[0] ** 2
        return J

    return OdeSystem(2, rhs, lambda ya: ya[1:2], lambda yb: yb[0:1], float(r_end), S, jac)


def cutoff(params: SelfSimilarParams, r, deriv: int = 0):
    """Quintic smoothstep cutoff and its first two derivatives."""
    r = np.asarray(r, dtype=float)
    if params.b == 0:
        return np.ones_like(r) if deriv == 0 else np.zeros_like(r)
    a, L = params.inner, params.outer
    w = L - a
    t = np.clip((r - a) / w, 0.0, 1.0)
    if deriv == 0:
        return 1.0 - t ** 3 * (10.0 - 15.0 * t + 6.0 * t * t)
    if deriv == 1:
        return -30.0 * t * t * (1.0 - t) ** 2 / w
    if deriv == 2:
        return -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / w ** 2
    raise ValueError("deriv must be 0, 1 or 2")


@dataclass
class SelfSimilarProfile:
    params: SelfSimilarParams
    solution: BvpSolution = field(repr=False)
    mass: float = float("nan")
    energy: float = float("nan")
    residual_norms: dict = field(default_factory=dict)

    @property
    def r_end(self) -> float:
        return self.solution.r_max

    @property
    def r(self):
        return self.solution.r

    def Pt(self, r=None):
        return self.solution.values[0] if r is None else evaluate(self.solution, r)[0]

    def P(self, r=None):
        rr = self.r if r is None else np.asarray(r, dtype=float)
        return rr ** self.params.m * self.Pt(r)

    def diagnostics(self) -> dict:
        p = self.params
        return {"m": p.m, "b": p.b, "eta": p.eta, "R_b": p.R_b if p.b > 0 else None,
                "r_end": self.r_end, "mass": self.mass, "energy": self.energy,
                "residual_norms": dict(self.residual_norms)}

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.diagnostics(), indent=2, sort_keys=True) + "\n")
        return path

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w") as fh:
            fh.write("r,P_tilde,dP_tilde\n")
            for row in zip(self.r, self.solution.values[0], self.solution.values[1]):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        return path


def _solve_at(m, b, r_end, mesh, guess, tol):
    sol = solve_bvp(selfsim_system(m, b, r_end), mesh, guess, tol, max_interval=MAX_INTERVAL)
    if not np.all(sol.values[0][:-1] > 0):
        raise NewtonDivergence(f"lost positivity at b={b:.6g}")
    return sol


def solve_selfsim(params: SelfSimilarParams, tol: float = DEFAULT_TOL, *,
                  r_end: float | None = None, profile: VortexProfile | None = None,
                  first_step: float = 0.05, min_step: float = 1e-5) -> SelfSimilarProfile:
    """Positive solution with ``Pt'(0) = 0`` and ``Pt(r_end) = 0``.

    ``r_end`` defaults to ``(1 - eta) R_b`` and must be given when ``b = 0``.
    The homotopy parameter runs from 0 to ``b`` with the interval held fixed;
    a failed step is halved, a successful one grows by half.

    Raises
    ------
    ContinuationStall
        The step in ``b`` fell below ``min_step``.
    """
    m, b = params.m, float(params.b)
    if r_end is None:
        if b == 0:
            raise ValueError("r_end is required when b = 0")
        r_end = params.outer
    r_end = float(r_end)
    if profile is None or profile.r_max < r_end:
        profile = solve_vortex(m, r_end, tol)
    start = profile.solution
    mesh = RadialMesh(np.append(start.r[start.r < r_end], r_end))

    def vortex_guess(r):
        y = evaluate(start, r)
        return y * np.where(r < r_end, 1.0, 0.0)

    sol = _solve_at(m, 0.0, r_end, mesh, vortex_guess, tol)
    bb, step = 0.0, min(first_step, b)
    while bb < b:
        d = min(step, b - bb)
        try:
            new = _solve_at(m, bb + d, r_end, sol.mesh, sol, tol)
        except (NewtonDivergence, SingularJacobian) as exc:
            step = 0.5 * d
            logger.debug("b-step %.3g failed at b=%.6g: %s", d, bb, exc)
            if step < min_step:
                raise ContinuationStall(f"continuation stalled at b={bb:.6g}") from exc
            continue
        sol, bb = new, bb + d
        step = 1.5 * d
    prof = SelfSimilarProfile(params, sol)
    prof.mass = selfsim_mass(prof)
    prof.energy = selfsim_energy(prof)
    prof.residual_norms = truncation_residual(prof)
    return prof


def _untransformed(prof: SelfSimilarProfile, r):
    """``P``, ``P'`` and ``P''`` with ``P''`` from the numerical second derivative."""
    m = prof.params.m
    y = evaluate(prof.solution, r)
    d2 = evaluate(prof.solution, r, deriv=1)[1]
    rm = r ** m
    rm1 = m * r ** (m - 1) if m > 0 else np.zeros_like(r)
    rm2 = m * (m - 1) * r ** (m - 2) if m > 1 else np.zeros_like(r)
    P = rm * y[0]
    dP = rm1 * y[0] + rm * y[1]
    d2P = rm2 * y[0] + 2 * rm1 * y[1] + rm * d2
    return P, dP, d2P


def truncation_residual(prof: SelfSimilarProfile, samples: int = 4001) -> dict:
    """Sup-norms of ``Psi_b = N[phi P] - phi N[P] + phi E`` on the cutoff annulus.

    ``N`` is the profile operator and ``E`` the pointwise residual of the
    computed ``P``.  The first part is the truncation error proper,
    ``P (phi'' + phi'/r) + 2 phi' P' + (phi^3 - phi) P^3``; the second carries
    the discretisation error.  With ``b = 0`` there is no annulus and the
    norms are taken over the whole interval.
    """
    p = prof.params
    m, q = p.m, 0.25 * p.b ** 2
    lo, hi = (p.inner, min(p.outer, prof.r_end)) if p.b > 0 else (0.0, prof.r_end)
    r = np.linspace(max(lo, 1e-8), hi, samples)
    P, dP, d2P = _untransformed(prof, r)
    phi, dphi, d2phi = (cutoff(p, r, k) for k in range(3))
    E = d2P + dP / r - (1.0 + m * m / r ** 2 - q * r * r) * P + P ** 3
    trunc = P * (d2phi + dphi / r) + 2.0 * dphi * dP + (phi ** 3 - phi) * P ** 3
    total = trunc + phi * E
    out = {}
    for name, f in (("total", total), ("truncation", trunc), ("discretisation", phi * E)):
        for k, w in enumerate((1.0, r, r * r)):
            out[f"{name}_r{k}"] = float(np.max(np.abs(w * f)))
    return out


def selfsim_mass(prof: SelfSimilarProfile) -> float:
    """``||phi P||^2`` in the plane."""
    m = prof.params.m

    def dens(r, y):
        return (cutoff(prof.params, r) * r ** m * y[0]) ** 2 * r

    return float(2 * np.pi * integrate(prof.solution, dens))


def selfsim_energy(prof: SelfSimilarProfile, method: str = "pohozaev") -> float:
    """Energy of ``e^{i m theta} e^{-i b r^2/4} phi P``.

    ``method="direct"`` integrates the energy density.  The default uses
    the identity ``E[P] = pi L^2 P'(L)^2`` for the untruncated profile on
    ``[0, L]`` and integrates only the cutoff correction over the annulus.
    Both integrands are small there, so this keeps relative accuracy when
    the energy is far below the size of its individual terms.
    """
    p = prof.params
    m, q = p.m, 0.25 * p.b ** 2

    def density(r, y, cut=True):
        rr = np.where(r > 0, r, 1.0)
        P = rr ** m * y[0]
        dP = (m * rr ** (m - 1) * y[0] if m > 0 else 0.0) + rr ** m * y[1]
        if cut:
            phi, dphi = cutoff(p, r), cutoff(p, r, 1)
            dP, P = phi * dP + dphi * P, phi * P
        ang = m * m * P * P / rr ** 2 if m > 0 else 0.0
        lin = (dP * dP + ang + q * r * r * P * P) * r
        return 2 * np.pi * lin - np.pi * P ** 4 * r

    if method == "direct":
        return float(integrate(prof.solution, density))
    if method != "pohozaev":
        raise ValueError("method must be 'pohozaev' or 'direct'")
    L = prof.r_end
    _, dPL, _ = _untransformed(prof, np.array([L]))
    flux = float(np.pi * L * L * dPL[0] ** 2)
    if p.b == 0:
        return flux
    a = p.inner

    def correction(r, y):
        return np.where(r > a, density(r, y, True) - density(r, y, False), 0.0)

    return flux + float(integrate(prof.solution, correction))


def mass_derivative_dm(m: int, *, eta: float = 0.1, b1: float = 0.02, b2: float = 0.04,
                       r_max: float = 50.0, tol: float = DEFAULT_TOL,
                       profile: VortexProfile | None = None):
    """``d ||Q_b||^2 / d(b^2)`` at ``b = 0`` two ways.

    Returns ``(d_quadrature, d_finite_difference)`` where the first is
    ``(1/4) int |x|^2 Q^2 dx`` on the vortex and the second a forward
    difference of truncated-profile masses in ``b^2``.
    """
    if profile is None:
        profile = solve_vortex(m, r_max, tol)

    def moment(r, y):
        return r ** (2 * m + 3) * y[0] ** 2

    d_quad = float(0.25 * 2 * np.pi * integrate(profile.solution, moment))
    M1 = solve_selfsim(SelfSimilarParams(m, b1, eta), tol).mass
    M2 = solve_selfsim(SelfSimilarParams(m, b2, eta), tol).mass
    return d_quad, float((M2 - M1) / (b2 ** 2 - b1 ** 2))
