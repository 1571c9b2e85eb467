"""
Collocation solver for radial two-point boundary value problems.

Systems have the form

    dy/dr = S y / r + f(r, y),     0 <= r <= r_max,

with a constant matrix ``S`` carrying the whole ``1/r`` singularity.  The
discretisation is three-point Lobatto IIIA collocation (Hermite-Simpson),
which is fourth order at the nodes and yields a C1 piecewise cubic
interpolant.  At ``r = 0`` the right-hand side is replaced by its regular
limit ``(I - S)^{-1} f(0, y)``; the caller's left boundary conditions must
enforce ``S y(0) = 0``.

Vectorisation convention (same as ``scipy.integrate.solve_bvp``): ``rhs``
takes ``r`` of shape ``(k,)`` and ``y`` of shape ``(n, k)`` and returns an
``(n, k)`` array; an optional ``jac`` returns ``(n, n, k)``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import MeshLimitExceeded, NewtonDivergence, OutOfDomain, SingularJacobian

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps

# interior sample points used for the residual estimate, as fractions of h
_RES_SAMPLES = np.linspace(0.0, 1.0, 7)[1:-1]

# 5-point Gauss-Legendre rule on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class OdeSystem:
    """First-order radial system ``y' = S y / r + rhs(r, y)`` with split BCs.

    ``left_bc(ya)`` and ``right_bc(yb)`` return residual vectors whose
    lengths add up to ``dimension``.
    """

    dimension: int
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray]
    left_bc: Callable[[np.ndarray], np.ndarray]
    right_bc: Callable[[np.ndarray], np.ndarray]
    r_max: float
    singular_matrix: np.ndarray | None = None
    jac: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if self.singular_matrix is not None:
            S = np.asarray(self.singular_matrix, dtype=float)
            if S.shape != (self.dimension, self.dimension):
                raise ValueError("singular_matrix shape does not match dimension")
            object.__setattr__(self, "singular_matrix", S)


@dataclass(frozen=True)
class RadialMesh:
    nodes: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("mesh needs at least two nodes")
        if x[0] != 0.0:
            raise ValueError("mesh must start at r = 0")
        if np.any(np.diff(x) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")
        object.__setattr__(self, "nodes", x)

    @classmethod
    def uniform(cls, r_max: float, intervals: int = 64) -> "RadialMesh":
        return cls(np.linspace(0.0, r_max, intervals + 1))

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    def __len__(self):
        return self.nodes.size


@dataclass(frozen=True)
class BvpSolution:
    """Nodal values plus the C1 cubic Hermite interpolant they define."""

    mesh: RadialMesh
    values: np.ndarray
    derivative_values: np.ndarray
    residual_norm: float = 0.0
    interval_residuals: np.ndarray | None = field(default=None, repr=False)
    newton_iterations: int = 0

    @property
    def r(self) -> np.ndarray:
        return self.mesh.nodes

    @property
    def r_max(self) -> float:
        return self.mesh.r_max

    @property
    def dimension(self) -> int:
        return self.values.shape[0]

    def __call__(self, r):
        return evaluate(self, r)

    def derivative(self, r):
        return evaluate(self, r, deriv=1)

    def restrict(self, components: Sequence[int]) -> "BvpSolution":
        idx = list(components)
        return replace(self, values=self.values[idx], derivative_values=self.derivative_values[idx])

    def to_csv(self, path, names: Sequence[str] | None = None) -> Path:
        """Write columns ``r, y1..yn, dy1..dyn`` at full precision."""
        n = self.dimension
        if names is None:
            names = [f"y{k + 1}" for k in range(n)]
        header = ["r", *names, *[f"d{name}" for name in names]]
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for j, rj in enumerate(self.r):
                row = [rj, *self.values[:, j], *self.derivative_values[:, j]]
                w.writerow([repr(float(v)) for v in row])
        return path

    @classmethod
    def from_csv(cls, path) -> "BvpSolution":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array(rows[1:], dtype=float)
        n = (data.shape[1] - 1) // 2
        return cls(RadialMesh(data[:, 0]), data[:, 1:1 + n].T.copy(), data[:, 1 + n:].T.copy())


def _hermite(x, y, dy, r, deriv=0):
    i = np.clip(np.searchsorted(x, r, side="right") - 1, 0, x.size - 2)
    h = x[i + 1] - x[i]
    t = (r - x[i]) / h
    y0, y1, d0, d1 = y[:, i], y[:, i + 1], dy[:, i], dy[:, i + 1]
    if deriv == 0:
        t2 = t * t
        t3 = t2 * t
        return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * d0
                + (3 * t2 - 2 * t3) * y1 + (t3 - t2) * h * d1)
    if deriv == 1:
        return ((6 * t * t - 6 * t) / h * (y0 - y1) + (3 * t * t - 4 * t + 1) * d0
                + (3 * t * t - 2 * t) * d1)
    if deriv == 2:
        return ((12 * t - 6) / h ** 2 * (y0 - y1) + (6 * t - 4) / h * d0 + (6 * t - 2) / h * d1)
    raise ValueError("deriv must be 0, 1 or 2")


def evaluate(solution: BvpSolution, r, deriv: int = 0) -> np.ndarray:
    """Evaluate the piecewise-cubic interpolant (or a derivative) at ``r``.

    Scalar ``r`` gives a vector of length ``n``; an array gives ``(n, k)``.
    """
    x = solution.mesh.nodes
    r_arr = np.asarray(r, dtype=float)
    scalar = r_arr.ndim == 0
    r_arr = np.atleast_1d(r_arr)
    if np.any(r_arr < x[0]) or np.any(r_arr > x[-1]) or np.any(np.isnan(r_arr)):
        raise OutOfDomain(f"evaluation point outside [0, {x[-1]}]")
    out = _hermite(x, solution.values, solution.derivative_values, r_arr, deriv)
    return out[:, 0] if scalar else out


def integrate(solution: BvpSolution, integrand: Callable, cumulative: bool = False):
    """Composite 5-point Gauss-Legendre quadrature of ``integrand(r, y(r))``.

    The integrand sees the interpolant, so this is an independent route from
    solving the integral as an extra ODE component.  With ``cumulative`` the
    running integral at every mesh node is returned instead of the total.
    """
    x = solution.mesh.nodes
    h = np.diff(x)
    pts = (x[:-1, None] + h[:, None] * _GL_X[None, :]).ravel()
    y = evaluate(solution, pts)
    g = np.asarray(integrand(pts, y), dtype=float).reshape(h.size, _GL_X.size)
    per_interval = h * (g @ _GL_W)
    if cumulative:
        return np.concatenate([[0.0], np.cumsum(per_interval)])
    return float(np.sum(per_interval))


def augment_with_integrals(system: OdeSystem, integrands: Sequence[Callable],
                           integrand_jacs: Sequence[Callable] | None = None) -> OdeSystem:
    """Append running integrals ``w_k' = g_k(r, y)``, ``w_k(0) = 0``.

    After solving, ``w_k(r_max)`` is the integral of ``g_k`` over the domain.
    ``integrand_jacs[k](r, y)`` may supply ``dg_k/dy`` with shape ``(n, k)``.
    """
    if not integrands:
        return system
    n = system.dimension
    q = len(integrands)
    base_rhs, base_jac = system.rhs, system.jac

    def rhs(r, y):
        base = base_rhs(r, y[:n])
        extra = np.vstack([np.broadcast_to(g(r, y[:n]), r.shape) for g in integrands])
        return np.vstack([base, extra])

    def left_bc(ya):
        return np.concatenate([np.atleast_1d(system.left_bc(ya[:n])), ya[n:]])

    def right_bc(yb):
        return np.atleast_1d(system.right_bc(yb[:n]))

    S = None
    if system.singular_matrix is not None:
        S = np.zeros((n + q, n + q))
        S[:n, :n] = system.singular_matrix

    jac = None
    if base_jac is not None and integrand_jacs is not None:
        def jac(r, y):
            J = np.zeros((n + q, n + q, r.size))
            J[:n, :n] = base_jac(r, y[:n])
            for k, dg in enumerate(integrand_jacs):
                J[n + k, :n] = dg(r, y[:n])
            return J

    return OdeSystem(n + q, rhs, left_bc, right_bc, system.r_max, S, jac)


class _Discretization:
    """Collocation residual and Jacobian for a fixed system."""

    def __init__(self, system: OdeSystem):
        self.system = system
        self.n = system.dimension
        S = system.singular_matrix
        self.S = S
        self.D = None if S is None else np.linalg.inv(np.eye(self.n) - S)

    def F(self, x, y):
        f = np.asarray(self.system.rhs(x, y), dtype=float)
        if self.S is None:
            return f
        out = f.copy()
        pos = x > 0
        if np.any(pos):
            out[:, pos] += (self.S @ y[:, pos]) / x[pos]
        if not np.all(pos):
            out[:, ~pos] = self.D @ f[:, ~pos]
        return out

    def jac_f(self, x, y, f0=None):
        if self.system.jac is not None:
            return np.asarray(self.system.jac(x, y), dtype=float)
        if f0 is None:
            f0 = np.asarray(self.system.rhs(x, y), dtype=float)
        n = self.n
        J = np.empty((n, n, x.size))
        for j in range(n):
            step = np.sqrt(EPS) * (1.0 + np.abs(y[j]))
            yp = y.copy()
            yp[j] += step
            J[:, j, :] = (np.asarray(self.system.rhs(x, yp), dtype=float) - f0) / step
        return J

    def jac_F(self, x, y):
        J = self.jac_f(x, y)
        if self.S is None:
            return J
        pos = x > 0
        if np.any(pos):
            J[:, :, pos] += self.S[:, :, None] / x[pos]
        if not np.all(pos):
            J[:, :, ~pos] = np.einsum("ij,jkl->ikl", self.D, J[:, :, ~pos])
        return J

    def bc(self, ya, yb):
        return np.concatenate([np.atleast_1d(self.system.left_bc(ya)),
                               np.atleast_1d(self.system.right_bc(yb))]).astype(float)

    def bc_jac(self, ya, yb):
        n = self.n
        b0 = self.bc(ya, yb)
        Ja = np.empty((b0.size, n))
        Jb = np.empty((b0.size, n))
        for j in range(n):
            step = np.sqrt(EPS) * (1.0 + abs(ya[j]))
            yp = ya.copy()
            yp[j] += step
            Ja[:, j] = (self.bc(yp, yb) - b0) / step
            step = np.sqrt(EPS) * (1.0 + abs(yb[j]))
            yp = yb.copy()
            yp[j] += step
            Jb[:, j] = (self.bc(ya, yp) - b0) / step
        return Ja, Jb

    def residual(self, x, y):
        h = np.diff(x)
        Fy = self.F(x, y)
        x_mid = x[:-1] + 0.5 * h
        y_mid = 0.5 * (y[:, 1:] + y[:, :-1]) - 0.125 * h * (Fy[:, 1:] - Fy[:, :-1])
        F_mid = self.F(x_mid, y_mid)
        col = y[:, 1:] - y[:, :-1] - h / 6.0 * (Fy[:, :-1] + Fy[:, 1:] + 4.0 * F_mid)
        res = np.concatenate([col.ravel(order="F"), self.bc(y[:, 0], y[:, -1])])
        return res, Fy, x_mid, y_mid

    def jacobian(self, x, y, Fy, x_mid, y_mid):
        n = self.n
        N = x.size
        h = np.diff(x)
        J = self.jac_F(x, y)
        Jm = self.jac_F(x_mid, y_mid)
        I = np.eye(n)[:, :, None]
        JmJ0 = np.einsum("ijk,jlk->ilk", Jm, J[:, :, :-1])
        JmJ1 = np.einsum("ijk,jlk->ilk", Jm, J[:, :, 1:])
        A = -I - h / 6.0 * (J[:, :, :-1] + 2.0 * Jm + 0.5 * h * JmJ0)
        B = I - h / 6.0 * (J[:, :, 1:] + 2.0 * Jm - 0.5 * h * JmJ1)

        rows_blk = np.arange(n)[:, None] * np.ones(n, dtype=int)[None, :]
        cols_blk = rows_blk.T
        offs = (np.arange(N - 1) * n)[None, None, :]
        r_idx = rows_blk[:, :, None] + offs
        cA = cols_blk[:, :, None] + offs
        cB = cA + n
        Ja, Jb = self.bc_jac(y[:, 0], y[:, -1])
        m_bc = Ja.shape[0]
        base = n * (N - 1)
        bc_r = base + np.repeat(np.arange(m_bc), n)
        rows = np.concatenate([r_idx.ravel(), r_idx.ravel(), bc_r, bc_r])
        cols = np.concatenate([cA.ravel(), cB.ravel(),
                               np.tile(np.arange(n), m_bc), np.tile(np.arange(n), m_bc) + n * (N - 1)])
        vals = np.concatenate([A.ravel(), B.ravel(), Ja.ravel(), Jb.ravel()])
        return sparse.csc_matrix((vals, (rows, cols)), shape=(n * N, n * N))

    def interval_residuals(self, x, y, Fy):
        """Max scaled residual ``|P' - F(P)| / (1 + max|F_k|)`` per interval.

        Each component is scaled by its own largest slope on the mesh.  A
        pointwise scale would let rounding in ``P'`` (of size eps |y| / h)
        dominate for large-valued components with small local slope, and
        refinement would then make the measured residual worse.
        """
        h = np.diff(x)
        pts = (x[:-1, None] + h[:, None] * _RES_SAMPLES[None, :]).ravel()
        P = _hermite(x, y, Fy, pts)
        dP = _hermite(x, y, Fy, pts, deriv=1)
        Fp = self.F(pts, P)
        scale = 1.0 + np.max(np.abs(Fp), axis=1, keepdims=True)
        scaled = np.abs(dP - Fp) / scale
        return scaled.max(axis=0).reshape(h.size, _RES_SAMPLES.size).max(axis=1)


def _guess_values(guess, x, n):
    if isinstance(guess, BvpSolution):
        y = evaluate(guess, x)
        if y.shape[0] != n:
            raise ValueError(f"guess has dimension {y.shape[0]}, system has {n}")
        return y
    if callable(guess):
        y = np.asarray(guess(x), dtype=float)
    else:
        y = np.asarray(guess, dtype=float)
        if y.ndim <= 1:
            y = np.broadcast_to(np.reshape(y, (-1, 1)) if y.ndim == 1 else y, (n, x.size))
    y = np.array(np.broadcast_to(y, (n, x.size)), dtype=float)
    return y


def _newton(disc: _Discretization, x, y, tol, max_iter, max_halvings, sigma=0.2):
    step_tol = max(1e-2 * tol, 1e-14)
    for it in range(1, max_iter + 1):
        res, Fy, x_mid, y_mid = disc.residual(x, y)
        if not np.all(np.isfinite(res)):
            raise NewtonDivergence("non-finite collocation residual")
        if not np.any(res):
            return y, it - 1
        Jmat = disc.jacobian(x, y, Fy, x_mid, y_mid)
        try:
            lu = splu(Jmat)
        except RuntimeError as exc:
            raise SingularJacobian(str(exc)) from exc
        step = lu.solve(res)
        if not np.all(np.isfinite(step)):
            raise SingularJacobian("collocation Jacobian is numerically singular")
        full = step.reshape(y.shape, order="F")
        if np.max(np.abs(full) / (1.0 + np.abs(y))) < step_tol:
            return y - full, it
        cost = float(step @ step)
        alpha = 1.0
        for k in range(max_halvings + 1):
            y_try = y - alpha * step.reshape(y.shape, order="F")
            res_try = disc.residual(x, y_try)[0]
            if np.all(np.isfinite(res_try)):
                step_try = lu.solve(res_try)
                if float(step_try @ step_try) < (1.0 - 2.0 * alpha * sigma) * cost:
                    break
            if k == max_halvings:
                raise NewtonDivergence(f"no decrease after {max_halvings} halvings (iteration {it})")
            alpha *= 0.5
        y = y_try
        logger.debug("newton it=%d alpha=%g", it, alpha)
    raise NewtonDivergence(f"Newton did not converge in {max_iter} iterations")


def solve_bvp(system: OdeSystem, initial_mesh: RadialMesh | None = None, guess=0.0, tol: float = 1e-10,
              *, max_nodes: int = 200_000, max_interval: float | None = None, refine: bool = True,
              max_newton: int = 50, max_halvings: int = 30, max_split: int = 8) -> BvpSolution:
    """Solve ``system`` by damped-Newton Lobatto collocation with mesh refinement.

    Parameters
    ----------
    system : OdeSystem
    initial_mesh : RadialMesh, optional
        Defaults to 64 uniform intervals on ``[0, r_max]``.
    guess : BvpSolution, callable, array or scalar
        Starting iterate; a callable maps ``r`` to an ``(n, len(r))`` array.
    tol : float
        Bound on the max scaled residual ``|P' - F(P)| / (1 + max|F_k|)``
        sampled at 5 interior points of each interval.
    max_interval : float, optional
        Pre-split any interval longer than this.
    refine : bool
        With ``False`` the mesh is kept fixed and the residual only reported.

    Raises
    ------
    NewtonDivergence, MeshLimitExceeded, SingularJacobian
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    n = system.dimension
    if initial_mesh is None:
        initial_mesh = RadialMesh.uniform(system.r_max)
    x = initial_mesh.nodes
    if not np.isclose(x[-1], system.r_max, rtol=1e-13, atol=0):
        raise ValueError("mesh must end at r_max")
    if max_interval is not None:
        x = _split_long(x, max_interval)
    y = _guess_values(guess, x, n)

    disc = _Discretization(system)
    bc0 = disc.bc(y[:, 0], y[:, -1])
    if bc0.size != n:
        raise ValueError(f"boundary conditions supply {bc0.size} equations for a system of dimension {n}")

    total_it = 0
    while True:
        y, its = _newton(disc, x, y, tol, max_newton, max_halvings)
        total_it += its
        Fy = disc.F(x, y)
        per = disc.interval_residuals(x, y, Fy)
        worst = float(per.max())
        logger.debug("mesh %d nodes, max residual %.3e", x.size, worst)
        if not refine or worst <= tol:
            return BvpSolution(RadialMesh(x), y, Fy, worst, per, total_it)
        bad = per > tol
        pieces = np.ones(per.size, dtype=int)
        pieces[bad] = np.clip(np.ceil(1.2 * (per[bad] / tol) ** (1.0 / 3.0)), 2, max_split).astype(int)
        new_n = int(pieces.sum()) + 1
        if new_n > max_nodes:
            raise MeshLimitExceeded(f"refinement needs {new_n} nodes (limit {max_nodes})")
        x_new = _subdivide(x, pieces)
        y = _hermite(x, y, Fy, x_new)
        x = x_new


def _subdivide(x, pieces):
    pieces = np.asarray(pieces, dtype=int)
    start = np.repeat(np.cumsum(pieces) - pieces, pieces)
    k = np.repeat(pieces, pieces)
    j = np.arange(start.size) - start + 1
    i = np.repeat(np.arange(pieces.size), pieces)
    out = np.concatenate([x[:1], x[i] + (x[i + 1] - x[i]) * j / k])
    out[-1] = x[-1]
    return out


def _split_long(x, max_interval):
    pieces = np.maximum(1, np.ceil(np.diff(x) / max_interval)).astype(int)
    return _subdivide(x, pieces)
