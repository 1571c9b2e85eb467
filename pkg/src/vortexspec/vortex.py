"""
Vortex soliton profiles ``Q = exp(i m theta) R(r)``.

The profile is computed for the regularised unknown ``Rt = r^{-m} R``, which
satisfies

    Rt'' + (2m+1)/r Rt' - Rt + r^{2m} Rt^3 = 0,    Rt'(0) = 0,

truncated at ``r_max`` with the Robin condition that encodes the far-field
decay ``Rt ~ r^{-m-1/2} exp(-r)``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvp import (BvpSolution, OdeSystem, RadialMesh, augment_with_integrals, evaluate,
                  integrate, solve_bvp)
from .errors import ConvergedToZero, NewtonDivergence, SingularJacobian

logger = logging.getLogger(__name__)

DEFAULT_RMAX = 50.0
DEFAULT_TOL = 1e-10
MAX_INTERVAL = 0.25


@dataclass(frozen=True)
class VortexProfile:
    """Regularised vortex profile; ``solution`` carries ``(Rt, Rt')``."""

    m: int
    solution: BvpSolution
    r_max: float
    tol: float = DEFAULT_TOL

    @property
    def r(self) -> np.ndarray:
        return self.solution.r

    def Rt(self, r=None):
        return self.solution.values[0] if r is None else evaluate(self.solution, r)[0]

    def dRt(self, r=None):
        return self.solution.values[1] if r is None else evaluate(self.solution, r)[1]

    def R(self, r=None):
        rr = self.r if r is None else np.asarray(r, dtype=float)
        return rr ** self.m * self.Rt(r)

    def to_csv(self, path) -> Path:
        path = Path(path)
        header = "r,R_tilde,dR_tilde,R\n"
        rows = np.column_stack([self.r, self.Rt(), self.dRt(), self.R()])
        with path.open("w") as fh:
            fh.write(header)
            for row in rows:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        return path

    def metadata(self) -> dict:
        return {"m": self.m, "r_max": self.r_max, "tol": self.tol,
                "mass": mass(self), "radial_mass": radial_mass(self),
                "energy": energy(self), "peak_location": peak_location(self)}

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        return path


def vortex_system(m: int, r_max: float) -> OdeSystem:
    S = np.array([[0.0, 0.0], [0.0, -(2.0 * m + 1.0)]])
    robin = 1.0 + (2 * m + 1) / (2.0 * r_max)

    def rhs(r, y):
        return np.vstack([y[1], y[0] - r ** (2 * m) * y[0] ** 3])

    def jac(r, y):
        J = np.zeros((2, 2, r.size))
        J[0, 1] = 1.0
        J[1, 0] = 1.0 - 3.0 * r ** (2 * m) * y[0] ** 2
        return J

    return OdeSystem(2, rhs, lambda ya: ya[1:2], lambda yb: yb[1:2] + robin * yb[0:1],
                     r_max, S, jac)


def initial_guess(m: int, amplitude: float | None = None):
    """Far-field-informed starting iterate for ``(Rt, Rt')``.

    For ``m >= 1`` the ring sits near ``sqrt(2) m`` with the sech shape of the
    large-m asymptotics; inside the ring ``r^{-m}`` is frozen at its peak
    value so the guess stays regular at the origin.
    """
    if m == 0:
        A = 2.2 if amplitude is None else amplitude

        def guess(r):
            v = A / np.cosh(r)
            return np.vstack([v, -A * np.tanh(r) / np.cosh(r)])
        return guess

    A = np.sqrt(3.0) if amplitude is None else amplitude
    r_peak = np.sqrt(2.0) * m
    k = np.sqrt(1.5)

    def guess(r):
        rc = np.maximum(r, r_peak)
        s = A / np.cosh(k * (r - r_peak))
        v = s * rc ** (-m)
        dv = -k * np.tanh(k * (r - r_peak)) * v - np.where(r > r_peak, m / rc, 0.0) * v
        return np.vstack([v, dv])
    return guess


def solve_vortex(m: int, r_max: float = DEFAULT_RMAX, tol: float = DEFAULT_TOL,
                 max_retries: int = 5) -> VortexProfile:
    """Compute the positive vortex profile of winding ``m`` on ``[0, r_max]``.

    Raises
    ------
    ConvergedToZero
        Every retry (amplitude doubled each time) landed on ``R = 0``.
    NewtonDivergence
    """
    if m < 0 or int(m) != m:
        raise ValueError("m must be a nonnegative integer")
    m = int(m)
    system = vortex_system(m, r_max)
    mesh = RadialMesh.uniform(r_max, 64)
    amplitude = 2.2 if m == 0 else np.sqrt(3.0)
    last_exc: Exception | None = None
    attempts = max_retries + 1 if m <= 4 else 1
    for attempt in range(attempts):
        try:
            sol = solve_bvp(system, mesh, initial_guess(m, amplitude), tol, max_interval=MAX_INTERVAL)
        except (NewtonDivergence, SingularJacobian) as exc:
            last_exc = exc
            logger.info("m=%d attempt %d diverged: %s", m, attempt, exc)
        else:
            last_exc = None
            peak = np.max(np.abs(sol.r ** m * sol.values[0]))
            if peak >= 1e-3 and np.all(sol.values[0][sol.r < r_max] > 0):
                return VortexProfile(m, sol, float(r_max), tol)
            logger.info("m=%d attempt %d converged to the trivial branch", m, attempt)
        amplitude *= 2.0
    if m > 1:
        logger.info("m=%d: falling back to continuation in the winding number", m)
        return _continue_in_m(m, r_max, tol)
    if last_exc is not None:
        raise NewtonDivergence(f"vortex m={m} failed: {last_exc}")
    raise ConvergedToZero(f"vortex m={m}: Newton converged to the trivial solution")


def _continue_in_m(m: int, r_max: float, tol: float, start: int = 3,
                   step: float = 0.25, min_step: float = 1e-3) -> VortexProfile:
    """Walk a real-valued winding number from ``start`` up to ``m``.

    Each step reuses the previous ``R`` and re-regularises it by
    ``max(r, sqrt(2) mu)^{-dmu}``, which keeps the guess finite at the origin.
    """
    start = min(start, m - 1)
    prof = solve_vortex(start, r_max, tol)
    sol, mu = prof.solution, float(start)
    while mu < m:
        d = min(step, m - mu)
        while True:
            target = mu + d
            rc = np.sqrt(2.0) * target

            def guess(r, sol=sol, d=d, rc=rc):
                y = evaluate(sol, r)
                c = np.maximum(r, rc) ** (-d)
                dc = np.where(r > rc, -d / np.maximum(r, rc), 0.0) * c
                return np.vstack([y[0] * c, y[1] * c + y[0] * dc])
            try:
                new = solve_bvp(vortex_system(target, r_max), sol.mesh, guess, tol,
                                max_interval=MAX_INTERVAL)
            except (NewtonDivergence, SingularJacobian):
                d *= 0.5
                if d < min_step:
                    raise NewtonDivergence(f"continuation to m={m} stalled at {mu}")
                continue
            sol, mu = new, target
            break
    if np.max(np.abs(sol.r ** m * sol.values[0])) < 1e-3:
        raise ConvergedToZero(f"vortex m={m}: continuation reached the trivial branch")
    return VortexProfile(m, sol, float(r_max), tol)


def lambda_R(profile: VortexProfile, r=None) -> np.ndarray:
    """``r^{-m} Lambda R = (m+1) Rt + r Rt'`` with ``Lambda = 1 + r d/dr``."""
    rr = profile.r if r is None else np.asarray(r, dtype=float)
    return (profile.m + 1) * profile.Rt(r) + rr * profile.dRt(r)


def lambda2_R(profile: VortexProfile, r=None) -> np.ndarray:
    """``r^{-m} Lambda^2 R`` with ``Rt''`` eliminated through the profile equation."""
    m = profile.m
    rr = profile.r if r is None else np.asarray(r, dtype=float)
    Rt, dRt = profile.Rt(r), profile.dRt(r)
    return ((m + 1) ** 2 + rr ** 2) * Rt + 2 * rr * dRt - rr ** (2 * (m + 1)) * Rt ** 3


def lambda2_R_direct(profile: VortexProfile, r, d2Rt) -> np.ndarray:
    """``r^{-m} Lambda^2 R`` from a supplied second derivative of ``Rt``."""
    m = profile.m
    r = np.asarray(r, dtype=float)
    return (m + 1) ** 2 * profile.Rt(r) + (3 + 2 * m) * r * profile.dRt(r) + r ** 2 * d2Rt


def radial_mass(profile: VortexProfile) -> float:
    """``int_0^rmax R^2 r dr`` (the mass without the angular factor)."""
    m = profile.m
    return integrate(profile.solution, lambda r, y: r ** (2 * m + 1) * y[0] ** 2)


def mass(profile: VortexProfile, method: str = "quadrature") -> float:
    """L2 mass ``2 pi int R^2 r dr`` of ``Q = exp(i m theta) R``.

    ``method="augmented"`` re-solves the profile with the mass integral as an
    extra ODE component; ``"quadrature"`` integrates the interpolant.
    """
    m = profile.m
    if method == "quadrature":
        return 2.0 * np.pi * radial_mass(profile)
    if method == "augmented":
        def g(r, y):
            return 2.0 * np.pi * r ** (2 * m + 1) * y[0] ** 2

        def dg(r, y):
            return np.vstack([4.0 * np.pi * r ** (2 * m + 1) * y[0], np.zeros_like(r)])

        aug = augment_with_integrals(vortex_system(m, profile.r_max), [g], [dg])
        guess = np.vstack([profile.solution.values,
                           integrate(profile.solution, g, cumulative=True)])
        sol = solve_bvp(aug, profile.solution.mesh, guess, profile.tol, max_interval=MAX_INTERVAL)
        return float(sol.values[2, -1])
    raise ValueError(f"unknown method {method!r}")


def _energy_parts(m: int, solution: BvpSolution):
    """Return ``(||grad Q||^2, int |Q|^4)`` for ``Q = exp(i m theta) r^m Rt``."""
    def grad_density(r, y):
        Rt, dRt = y[0], y[1]
        out = r ** (2 * m + 1) * dRt ** 2
        if m > 0:
            out = out + 2 * m * r ** (2 * m) * Rt * dRt + 2 * m * m * r ** (2 * m - 1) * Rt ** 2
        return out

    grad = 2.0 * np.pi * integrate(solution, grad_density)
    quartic = 2.0 * np.pi * integrate(solution, lambda r, y: r ** (4 * m + 1) * y[0] ** 4)
    return grad, quartic


def gradient_norm_sq(profile: VortexProfile) -> float:
    return _energy_parts(profile.m, profile.solution)[0]


def energy(profile: VortexProfile) -> float:
    """``E = ||grad Q||^2 - 1/2 ||Q||_4^4``; vanishes for exact vortices."""
    grad, quartic = _energy_parts(profile.m, profile.solution)
    return grad - 0.5 * quartic


def peak_location(profile: VortexProfile) -> float:
    """Radius of the maximum of ``R``, refined by a parabola through the top node."""
    r = profile.r
    R = profile.R()
    j = int(np.argmax(R))
    if j == 0 or j == r.size - 1:
        return float(r[j])
    fine = np.linspace(r[j - 1], r[j + 1], 2001)
    return float(fine[np.argmax(profile.R(fine))])


def abc_residual(profile: VortexProfile, r) -> np.ndarray:
    """Relative Robin defect ``Rt'/Rt + 1 + (2m+1)/(2r)`` at radius ``r``.

    For the exact profile this behaves like ``-(4m^2-1)/(8 r^2)``.
    """
    r = np.asarray(r, dtype=float)
    return profile.dRt(r) / profile.Rt(r) + 1.0 + (2 * profile.m + 1) / (2.0 * r)


def decay_fit(profile: VortexProfile) -> dict:
    """Fit ``Rt ~ C r^{-m-1/2} exp(-r)`` on the last quarter of the domain.

    Returns the fitted constant and the worst relative deviation from it.
    """
    m = profile.m
    L = profile.r_max
    r = np.linspace(0.75 * L, L, 401)
    C = profile.Rt(r) * r ** (m + 0.5) * np.exp(r)
    C0 = float(np.median(C))
    return {"C": C0, "max_rel_deviation": float(np.max(np.abs(C / C0 - 1.0)))}
