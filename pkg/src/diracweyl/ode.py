"""Integration of ``tau u = z u`` in the normal form ``u' = J (z - Q) u``.

Trajectories are stored in the rescaled variable ``v = u exp(-s(x))`` with
``s(x) = |Im z| |x - x0|``, so values growing like ``exp(|Im z| x)`` remain
representable.  ``scale_exponent(x)`` returns ``s(x)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _si
from scipy.interpolate import CubicHermiteSpline

from .operator import DiracPotential, DomainError


class IntegrationError(RuntimeError):
    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


@dataclass(frozen=True)
class ODETolerance:
    rel: float = 1e-10
    abs: float = 1e-12
    max_step: float = math.inf
    dense_samples: int = 201

    def __post_init__(self):
        if not (self.rel > 0 and self.abs > 0):
            raise ValueError("tolerances must be positive")
        if self.dense_samples < 2:
            raise ValueError("dense_samples must be >= 2")


DEFAULT_TOL = ODETolerance()


def _rhs(pot: DiracPotential, z, gamma, x0, ncols):
    """Right-hand side for the rescaled system, flattened (2*ncols,)."""
    consts = [c.const_value for c in (pot.q_sc, pot.q_el, pot.q_am)]
    if all(v is not None for v in consts):
        sc, el, am = consts
        q11, q12, q22 = el + pot.m + sc, am, el - pot.m - sc
        a11, a12, a21, a22 = -q12, z - q22, q11 - z, q12

        def f(x, y):
            g = gamma if x >= x0 else -gamma
            u1, u2 = y[:ncols], y[ncols:]
            return np.concatenate(((a11 - g) * u1 + a12 * u2, a21 * u1 + (a22 - g) * u2))
        return f

    def f(x, y):
        q11, q12, q22 = (float(v) for v in pot.entries(x))
        g = gamma if x >= x0 else -gamma
        u1, u2 = y[:ncols], y[ncols:]
        return np.concatenate(((-q12 - g) * u1 + (z - q22) * u2,
                               (q11 - z) * u1 + (q12 - g) * u2))
    return f


def _solve(pot, z, x0, Y0, x1, tol, dense):
    if not np.all(np.isfinite(np.asarray(pot.entries(x0), dtype=float))):
        raise DomainError(f"potential is not finite at the initial point x={x0!r}")
    Y0 = np.asarray(Y0, dtype=complex)
    ncols = Y0.shape[1]
    gamma = abs(complex(z).imag)
    f = _rhs(pot, complex(z), gamma, x0, ncols)
    sol = _si.solve_ivp(f, (x0, x1), Y0.reshape(-1), method="DOP853", rtol=tol.rel,
                        atol=tol.abs, max_step=tol.max_step, dense_output=dense)
    if sol.status != 0:
        raise IntegrationError(f"integration stopped at x={sol.t[-1]!r}: {sol.message}",
                               float(sol.t[-1]))
    return sol, gamma


def propagate(pot, z, x0, Y0, x1, tol=DEFAULT_TOL):
    """Values at ``x1`` of the solutions with data ``Y0`` (shape (2,) or (2, k)) at ``x0``.

    Returns ``(V, s)`` with the true value ``V * exp(s)``.
    """
    Y0 = np.asarray(Y0, dtype=complex)
    vec = Y0.ndim == 1
    Y0 = Y0.reshape(2, -1)
    if x1 == x0:
        return (Y0[:, 0] if vec else Y0).copy(), 0.0
    sol, gamma = _solve(pot, z, x0, Y0, x1, tol, dense=False)
    V = sol.y[:, -1].reshape(2, -1)
    return (V[:, 0] if vec else V), gamma * abs(x1 - x0)


class _Piece:
    """One integration run from the base point in one direction."""

    def __init__(self, sol, lo, hi, col, ncols):
        self.sol, self.lo, self.hi, self.col, self.ncols = sol, lo, hi, col, ncols

    def __call__(self, x):
        y = self.sol.sol(x)
        return np.array([y[self.col], y[self.ncols + self.col]])

    def nodes(self):
        t = self.sol.t
        return t, np.array([self.sol.y[self.col], self.sol.y[self.ncols + self.col]])


class _SplinePiece:
    def __init__(self, xs, vals, ders):
        self.lo, self.hi = xs[0], xs[-1]
        self._xs, self._vals = xs, vals
        self.spl = CubicHermiteSpline(xs, vals, ders, axis=1)

    def __call__(self, x):
        return self.spl(x)

    def nodes(self):
        return self._xs, self._vals


class SolutionTrajectory:
    """A solution of ``tau u = z u`` with dense evaluation on ``span``."""

    def __init__(self, pot, z, base_x, base_value, pieces, gamma):
        self.pot = pot
        self.z = complex(z)
        self.base_x = float(base_x)
        self.base_value = np.asarray(base_value, dtype=complex)
        self._pieces = pieces
        self._gamma = gamma
        self.span = (min(p.lo for p in pieces), max(p.hi for p in pieces))

    # -- construction ----------------------------------------------------------
    @classmethod
    def from_samples(cls, pot, z, xs, values, base_x=None):
        """Interpolating trajectory through given (unscaled) samples.

        Derivatives at the nodes are taken from the differential equation, so
        the interpolant is cubic Hermite.
        """
        xs = np.asarray(xs, dtype=float)
        vals = np.asarray(values, dtype=complex)
        if np.any(np.diff(xs) <= 0):
            raise ValueError("sample x-values must be strictly increasing")
        q11, q12, q22 = pot.entries(xs)
        z = complex(z)
        ders = np.array([-q12 * vals[0] + (z - q22) * vals[1],
                         (q11 - z) * vals[0] + q12 * vals[1]])
        bx = xs[0] if base_x is None else base_x
        base = vals[:, int(np.argmin(np.abs(xs - bx)))]
        return cls(pot, z, bx, base, [_SplinePiece(xs, vals, ders)], 0.0)

    # -- evaluation --------------------------------------------------------------
    def _check(self, x):
        lo, hi = self.span
        x = np.asarray(x, dtype=float)
        span_tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any((x < lo - span_tol) | (x > hi + span_tol)):
            raise ValueError(f"x outside trajectory span [{lo}, {hi}]")
        return np.clip(x, lo, hi)

    def scale_exponent(self, x):
        return self._gamma * np.abs(np.asarray(x, dtype=float) - self.base_x)

    def scaled(self, x):
        """Rescaled value ``v(x) = u(x) exp(-scale_exponent(x))``."""
        x = self._check(x)
        scalar = x.ndim == 0
        xa = np.atleast_1d(x)
        out = np.empty((2, xa.size), dtype=complex)
        for piece in self._pieces:
            sel = (xa >= piece.lo) & (xa <= piece.hi)
            if np.any(sel):
                out[:, sel] = piece(xa[sel])
        return out[:, 0] if scalar else out

    def __call__(self, x):
        v = self.scaled(x)
        return v * np.exp(self.scale_exponent(x))

    def derivative(self, x, h=None):
        """``u'(x)`` from Richardson-extrapolated five-point differences of the interpolant."""
        lo, hi = self.span
        if h is None:
            h = min(0.002 / (1.0 + abs(self.z)), (hi - lo) / 8)
        return fd_derivative(self, float(x), lo, hi, h)

    def samples(self):
        """Integrator nodes ``(x, u(x))`` in increasing ``x``."""
        xs, vs = [], []
        for piece in self._pieces:
            t, v = piece.nodes()
            xs.append(t)
            vs.append(v)
        x = np.concatenate(xs)
        v = np.concatenate(vs, axis=1)
        x, idx = np.unique(x, return_index=True)
        v = v[:, idx]
        return x, v * np.exp(self.scale_exponent(x))

    def to_csv(self, path, xs=None):
        if xs is None:
            xs, _ = self.samples()
        xs = np.asarray(xs, dtype=float)
        v = self.scaled(xs).reshape(2, -1)
        s = np.atleast_1d(self.scale_exponent(xs))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "re_u1", "im_u1", "re_u2", "im_u2", "scale_exponent"])
            for k, xk in enumerate(np.atleast_1d(xs)):
                w.writerow(["%.17g" % val for val in (xk, v[0, k].real, v[0, k].imag,
                                                       v[1, k].real, v[1, k].imag, s[k])])


def _fd_weights(x, t):
    # derivative weights at x for the interpolating polynomial through nodes t
    n = len(t)
    V = np.vander(t - x, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)


def fd_derivative(f, x, lo, hi, h):
    """Derivative of a vector function ``f: x -> (2, n)`` at ``x`` within ``[lo, hi]``.

    Five-point stencils at steps ``h`` and ``h/2`` (shifted inside the span
    near its ends) combined by one Richardson step.
    """
    def d(step):
        c = min(max(x, lo + 2 * step), hi - 2 * step)
        t = c + step * np.arange(-2, 3)
        return (f(t) * _fd_weights(x, t)).sum(axis=1)

    return (16 * d(h / 2) - d(h)) / 15


def _trajectories(pot, z, x0, Y0, lo, hi, tol):
    Y0 = np.asarray(Y0, dtype=complex).reshape(2, -1)
    ncols = Y0.shape[1]
    runs = []
    gamma = abs(complex(z).imag)
    for end in (lo, hi):
        if end == x0:
            continue
        sol, gamma = _solve(pot, z, x0, Y0, end, tol, dense=True)
        runs.append((sol, min(x0, end), max(x0, end)))
    if not runs:
        raise ValueError("empty integration span")
    return [SolutionTrajectory(pot, z, x0, Y0[:, k],
                               [_Piece(s, a, b, k, ncols) for s, a, b in runs], gamma)
            for k in range(ncols)]


def integrate(pot: DiracPotential, z: complex, x0: float, u0, x1: float,
              tol: ODETolerance = DEFAULT_TOL) -> SolutionTrajectory:
    """Solve ``u' = J (z - Q) u`` with ``u(x0) = u0`` on the span between x0 and x1."""
    lo, hi = min(x0, x1), max(x0, x1)
    pot.interval.check([lo, hi], closed=True)
    return _trajectories(pot, z, x0, u0, lo, hi, tol)[0]


def integrate_span(pot, z, x0, u0, lo, hi, tol=DEFAULT_TOL):
    """Like :func:`integrate` but covering ``[lo, hi]`` on both sides of ``x0``."""
    pot.interval.check([lo, hi], closed=True)
    if not lo <= x0 <= hi:
        raise ValueError("base point must lie in [lo, hi]")
    return _trajectories(pot, z, x0, u0, lo, hi, tol)[0]


def fundamental_system(pot, z, c, tol=DEFAULT_TOL, span=None):
    """Solutions ``c(z, .)``, ``s(z, .)`` with frames (1, 0) and (0, 1) at ``c``.

    ``span`` defaults to ``[c - 1, c + 1]`` clipped to the interval.
    """
    if span is None:
        a, b = pot.interval.a, pot.interval.b
        lo = max(c - 1.0, a + 1e-3 * min(1.0, c - a)) if math.isfinite(a) else c - 1.0
        hi = min(c + 1.0, b - 1e-3 * min(1.0, b - c)) if math.isfinite(b) else c + 1.0
        span = (lo, hi)
    pot.interval.check([span[0], span[1], c], closed=True)
    return tuple(_trajectories(pot, z, c, np.eye(2), span[0], span[1], tol))


def residual(pot, traj: SolutionTrajectory, x: float, relative=False, h=None) -> float:
    """``||u'(x) - J (z - Q(x)) u(x)||`` with ``u'`` from the interpolant.

    ``traj`` may be any object with ``z``, ``__call__`` and ``derivative(x, h)``.
    """
    u = traj(x)
    du = traj.derivative(x, h)
    q11, q12, q22 = (float(v) for v in pot.entries(x))
    z = traj.z
    rhs = np.array([-q12 * u[0] + (z - q22) * u[1], (q11 - z) * u[0] + q12 * u[1]])
    r = float(np.linalg.norm(du - rhs))
    return r / max(float(np.linalg.norm(u)), 1e-300) if relative else r
