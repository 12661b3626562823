"""Weyl functions, Weyl solutions, Green's function and spectral inversion.

Conventions: ``c(z, .)``, ``s(z, .)`` are the solutions with ``c(c) = (1, 0)``,
``s(c) = (0, 1)`` at a base point ``c``; ``u_-(z) = c - m_-(z) s`` and
``u_+(z) = c + m_+(z) s``.  A frame is a pair ``Theta, Phi`` of real entire
solutions with ``W(Theta, Phi) = 1``; then ``M = -W(Theta, u_+)/W(Phi, u_+)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import legendre as L
from scipy import integrate as _si

from . import radial as R
from ._extrap import ladder_limit, poly_extrapolate_zero, wynn_epsilon
from .ode import DEFAULT_TOL, ODETolerance, fundamental_system, integrate_span, propagate
from .operator import DiracPotential, wronskian


class WeylError(RuntimeError):
    pass


class ExtrapolationError(WeylError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PoleSignal(WeylError):
    """The Wronskian in a denominator vanishes: ``z`` is (numerically) an eigenvalue."""

    def __init__(self, z, value):
        super().__init__(f"vanishing Wronskian {abs(value):.3e} at z={z!r}")
        self.z, self.value = z, value


class HerglotzViolation(WeylError):
    pass


class LimitPointEndpoint(WeylError):
    """Boundary Wronskians do not settle: the endpoint behaves like limit point.

    This is a classification of the problem, not a failure of the code.
    """

    def __init__(self, message, ladder):
        super().__init__(message)
        self.ladder = ladder


# --- truncation ladders -------------------------------------------------------------

@dataclass(frozen=True)
class TruncationScheme:
    """Interior points approaching an endpoint, with a boundary condition at each.

    The condition is ``cos(alpha) u1 + sin(alpha) u2 = 0``; ``alpha = 0`` is
    Dirichlet ``u1 = 0``.  ``order`` caps the number of epsilon columns.
    """

    points: tuple
    order: int = 6
    alpha: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", tuple(float(p) for p in pts))
        if pts.size < 3:
            raise ValueError("a truncation scheme needs at least 3 points")
        d = np.diff(pts)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("truncation points must be strictly monotone")

    @classmethod
    def toward(cls, endpoint, c, z, n=None, alpha=0.0):
        """Default ladder from ``c`` toward ``endpoint`` (finite or infinite)."""
        if n is None:
            n = 10 if math.isinf(endpoint) else 12
        if math.isinf(endpoint):
            step = max(0.5, 2.5 / max(abs(complex(z).imag), 1e-300))
            sign = 1.0 if endpoint > 0 else -1.0
            pts = c + sign * step * np.arange(1, n + 1)
        else:
            pts = endpoint + (c - endpoint) * 0.5 ** np.arange(1, n + 1)
        return cls(tuple(pts), alpha=alpha)


def _bc_ratio(V, alpha):
    ca, sa = math.cos(alpha), math.sin(alpha)
    num = ca * V[0, 0] + sa * V[1, 0]
    den = ca * V[0, 1] + sa * V[1, 1]
    return num, den


def _m_ladder(pot, c, z, scheme, tol):
    Y = np.eye(2, dtype=complex)
    x = c
    vals = []
    for p in scheme.points:
        Y, _ = propagate(pot, z, x, Y, p, tol)
        Y = Y / np.abs(Y).max()
        x = p
        num, den = _bc_ratio(Y, scheme.alpha)
        if den == 0:
            raise PoleSignal(z, den)
        vals.append(num / den)
    return np.array(vals)


def m_function(pot: DiracPotential, c: float, z: complex, side: str = "+",
               scheme: TruncationScheme | None = None, tol: ODETolerance = DEFAULT_TOL,
               accuracy: float = 1e-8, full: bool = False):
    """Weyl function ``m_+`` (``side='+'``, toward b) or ``m_-`` (toward a) at base ``c``.

    Values ``m(b')`` with the scheme's boundary condition at truncation points
    ``b'`` are accelerated to ``b' -> endpoint``.  With ``full`` the ladder
    and error estimate are returned as well.
    """
    z = complex(z)
    if z.imag == 0:
        raise ValueError("m-functions are evaluated off the real axis")
    pot.interval.check(c)
    endpoint = pot.interval.b if side == "+" else pot.interval.a
    if side not in "+-":
        raise ValueError("side must be '+' or '-'")
    scheme = scheme or TruncationScheme.toward(endpoint, c, z)
    pts = np.asarray(scheme.points)
    if side == "+" and not np.all(pts > c) or side == "-" and not np.all(pts < c):
        raise ValueError("truncation points must lie on the requested side of c")
    pot.interval.check(pts)
    ladder = _m_ladder(pot, c, z, scheme, tol)
    # u_+ = c + m s needs m = -num/den; u_- = c - m s needs m = +num/den
    ladder = -ladder if side == "+" else ladder
    if math.isinf(endpoint):
        value, err = wynn_epsilon(ladder, scheme.order)
    else:
        value, err = ladder_limit(pts - endpoint, ladder, scheme.order)
    diag = {"ladder": ladder, "points": pts, "error": err}
    if not err <= accuracy * max(1.0, abs(value)):
        raise ExtrapolationError(
            f"truncation ladder for m_{side} did not converge (error {err:.3e})", diag)
    if not value.imag * z.imag > 0:
        raise HerglotzViolation(f"Im m_{side}(z) Im z <= 0 at z={z!r}: m={value!r}")
    return (value, diag) if full else value


def m_plus(pot, c, z, scheme=None, **kw):
    return m_function(pot, c, z, "+", scheme, **kw)


def m_minus(pot, c, z, scheme=None, **kw):
    return m_function(pot, c, z, "-", scheme, **kw)


def weyl_solution(pot, c, z, side="+", span=None, scheme=None, tol=DEFAULT_TOL):
    """Trajectory of ``u_+ = c + m_+ s`` (or ``u_- = c - m_- s``) on ``span``."""
    m = m_function(pot, c, z, side, scheme, tol)
    sign = 1.0 if side == "+" else -1.0
    if span is None:
        span = (c, c + 1.0) if side == "+" else (c - 1.0, c)
    return integrate_span(pot, z, c, np.array([1.0, sign * m]), span[0], span[1], tol)


def boundary_solution(pot, z, x_end, span, alpha=0.0, tol=DEFAULT_TOL):
    """Solution with ``cos(alpha) u1 + sin(alpha) u2 = 0`` at a regular endpoint ``x_end``."""
    u0 = np.array([-math.sin(alpha), math.cos(alpha)], dtype=complex)
    lo, hi = span
    return integrate_span(pot, z, x_end, u0, min(lo, x_end), max(hi, x_end), tol)


@dataclass
class ClosedFormSolution:
    """A solution given by a formula ``x -> u(x)``; exposes ``z`` and ``span``."""

    fn: Callable
    z: complex
    span: tuple = (0.0, math.inf)

    def __call__(self, x):
        return np.asarray(self.fn(x))


# --- frames -----------------------------------------------------------------------

def _as_fn(v):
    return v if callable(v) else (lambda z, c=v: c)


class SingularFrame:
    """Real entire solutions ``Theta(z, x)``, ``Phi(z, x)`` with ``W(Theta, Phi) = 1``."""

    PROVENANCES = ("radial", "perturbed", "limit-circle", "rescaled")

    def __init__(self, theta, phi, provenance, domain=(0.0, math.inf)):
        if provenance not in self.PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        self._theta, self._phi = theta, phi
        self.provenance = provenance
        self.domain = tuple(domain)

    def Theta(self, z, x):
        return np.asarray(self._theta(complex(z), x))

    def Phi(self, z, x):
        return np.asarray(self._phi(complex(z), x))

    def wronskian_defect(self, z, xs):
        xs = np.asarray(xs, dtype=float)
        return float(np.max(np.abs(wronskian(self.Theta(z, xs), self.Phi(z, xs)) - 1.0)))

    def conjugation_defect(self, z, xs):
        zc = complex(z).conjugate()
        d1 = np.abs(self.Phi(zc, xs) - np.conj(self.Phi(z, xs))).max()
        d2 = np.abs(self.Theta(zc, xs) - np.conj(self.Theta(z, xs))).max()
        return float(max(d1, d2))

    def rescaled(self, g, f=0.0):
        """Frame ``Phi -> e^g Phi``, ``Theta -> e^-g Theta - f Phi`` with ``g, f`` entire."""
        g, f = _as_fn(g), _as_fn(f)

        def phi(z, x):
            return np.exp(g(z)) * self.Phi(z, x)

        def theta(z, x):
            return np.exp(-g(z)) * self.Theta(z, x) - f(z) * self.Phi(z, x)

        return SingularFrame(theta, phi, "rescaled", self.domain)


def rescaled_M(M, z, g, f=0.0):
    """Weyl function of the rescaled frame: ``e^-2g M + e^-g f``."""
    gz, fz = _as_fn(g)(z), _as_fn(f)(z)
    return np.exp(-2 * gz) * M + np.exp(-gz) * fz


def radial_frame(kappa, m=0.0):
    p = R.RadialParams(kappa, m)
    return SingularFrame(lambda z, x: R.Theta_kappa(p, z, x),
                         lambda z, x: R.Phi_kappa(p, z, x), "radial")


def radial_weyl_solution(kappa, m, z):
    """Closed-form ``Psi_kappa(z, .)`` (the solution in L^2 near infinity)."""
    p = R.RadialParams(kappa, m)
    return ClosedFormSolution(lambda x: R.Psi_kappa(p, z, x), complex(z))


class _PerZ:
    """Small per-``z`` cache for frames built from numerical solutions."""

    def __init__(self, make, size=256):
        self._make, self._size, self._data = make, size, {}

    def __call__(self, z):
        if z not in self._data:
            if len(self._data) >= self._size:
                self._data.pop(next(iter(self._data)))
            self._data[z] = self._make(z)
        return self._data[z]


def perturbed_frame(kappa, P, x_max, tol=DEFAULT_TOL):
    """Frame for ``Q_kappa`` plus a perturbation ``P`` on ``(0, x_max]``.

    ``Phi`` comes from the Neumann series.  When ``P`` vanishes on ``(0, x0)``
    ``Theta`` is the continuation of the closed-form ``Theta_kappa`` from
    there, so both frames agree with the unperturbed ones near 0; otherwise
    it is built by reduction of order.
    """
    from . import perturbed as PR

    p = R.RadialParams(kappa, 0.0)
    pot = P.potential(kappa)
    lead = P.support[0] if P.support is not None else 0.0

    def make(z):
        sol = PR.neumann_solve(kappa, P, z, x_max)
        if lead > 0:
            x0 = lead / 2
            th = integrate_span(pot, z, x0, R.Theta_kappa(p, z, x0), x0, x_max, tol)
        else:
            th = PR.second_solution_theta(kappa, P, z, x_max / 2, x_max=x_max)
        return sol, th, x0 if lead > 0 else 0.0

    cache = _PerZ(make)

    def phi(z, x):
        return cache(z)[0](x)

    def theta(z, x):
        sol, th, x0 = cache(z)
        x = np.asarray(x, dtype=float)
        if x0 == 0.0:
            return th(x)
        xa = np.atleast_1d(x)
        out = np.empty((2, xa.size), dtype=complex)
        near = xa <= x0
        out[:, near] = R.Theta_kappa(p, z, xa[near])
        if np.any(~near):
            out[:, ~near] = th(xa[~near])
        return out[:, 0] if x.ndim == 0 else out

    return SingularFrame(theta, phi, "perturbed", (0.0, float(x_max)))


# --- limit circle frames ----------------------------------------------------------

class LimitCircleFrame(SingularFrame):
    """Frame of the limit-circle construction at the left endpoint.

    ``Phi0``, ``Theta0`` are real solutions at ``lambda0`` with
    ``W(Theta0, Phi0) = 1``; boundary Wronskians ``W_a`` are limits of ``W_x``
    along the scheme points.
    """

    def __init__(self, pot, Phi0, Theta0, c, scheme, span, tol=DEFAULT_TOL,
                 accuracy=1e-9):
        self.pot, self.c, self.scheme, self.span = pot, float(c), scheme, tuple(span)
        self.Phi0, self.Theta0 = Phi0, Theta0
        self.tol, self.accuracy = tol, accuracy
        lo, hi = self.span
        pts = np.asarray(scheme.points)
        if np.any(pts < lo) or np.any(pts > hi):
            raise ValueError("scheme points must lie inside the frame span")
        w0 = wronskian(Theta0(self.c), Phi0(self.c))
        if abs(w0 - 1) > 1e-8:
            raise ValueError(f"W(Theta0, Phi0) = {w0!r}, expected 1")
        self._fs = _PerZ(lambda z: fundamental_system(pot, z, self.c, tol, span=self.span))
        self._coef = _PerZ(self._coefficients)
        super().__init__(self._theta_eval, self._phi_eval, "limit-circle", self.span)

    def boundary_wronskian(self, f, g):
        """``W_a(f, g)`` for evaluators ``x -> spinor`` by extrapolation along the ladder."""
        pts = np.asarray(self.scheme.points)
        ladder = wronskian(f(pts), g(pts))
        value, err = ladder_limit(pts - self.pot.interval.a, ladder, self.scheme.order)
        if not err <= self.accuracy * max(1.0, abs(value)):
            raise LimitPointEndpoint(
                f"boundary Wronskian ladder did not settle (error {err:.3e})", ladder)
        return value

    def _coefficients(self, z):
        cz, sz = self._fs(z)
        W = self.boundary_wronskian
        return (W(cz, self.Phi0), W(sz, self.Phi0), W(cz, self.Theta0), W(sz, self.Theta0))

    def _phi_eval(self, z, x):
        cz, sz = self._fs(z)
        wc, ws, _, _ = self._coef(z)
        return wc * sz(x) - ws * cz(x)

    def _theta_eval(self, z, x):
        cz, sz = self._fs(z)
        _, _, wc, ws = self._coef(z)
        return wc * sz(x) - ws * cz(x)

    def m_minus(self, z):
        """``m_-(z) = W_a(Phi0, c(z)) / W_a(Phi0, s(z))``."""
        wc, ws, _, _ = self._coef(complex(z))
        return wc / ws       # both Wronskians flip sign together

    def fundamental(self, z):
        return self._fs(complex(z))


def limit_circle_frame(pot, Phi0, Theta0, c, scheme=None, span=None, lam0=0.0,
                       tol=DEFAULT_TOL, accuracy=1e-9):
    """Build the limit-circle frame; raises :class:`LimitPointEndpoint` if ``W_a`` fails to exist."""
    a, b = pot.interval.a, pot.interval.b
    if scheme is None:
        if math.isinf(a):
            raise ValueError("an infinite endpoint needs an explicit scheme")
        # with the base point on a regular endpoint the ladder starts from the span
        start = c if c > a else (span[1] if span else min(b, a + 1.0))
        scheme = TruncationScheme.toward(a, start, lam0 + 1j, n=12)
    if span is None:
        hi = c + 1.0 if math.isinf(b) else b
        span = (min(scheme.points), hi)
    frame = LimitCircleFrame(pot, Phi0, Theta0, c, scheme, span, tol, accuracy)
    frame.Phi(lam0 + 1j, c)          # probe: classifies the endpoint
    return frame


def regular_frame(pot, span, tol=DEFAULT_TOL):
    """Frame ``Theta = c(z)``, ``Phi = s(z)`` based at the regular left endpoint.

    ``Phi`` satisfies the Dirichlet condition ``Phi1(a) = 0``.
    """
    return RegularFrame(pot, span, tol)


class RegularFrame(SingularFrame):
    """``Theta = c(z)``, ``Phi = s(z)`` based at the left endpoint ``a``."""

    def __init__(self, pot, span, tol=DEFAULT_TOL):
        self.pot, self.tol = pot, tol
        a = pot.interval.a
        fs = _PerZ(lambda z: fundamental_system(pot, z, a, tol, span=tuple(span)))
        self._fs = fs
        super().__init__(lambda z, x: fs(z)[0](x), lambda z, x: fs(z)[1](x),
                         "limit-circle", tuple(span))

    def Phi_point(self, z, x):
        """``Phi(z, x)`` at one point by direct propagation (no dense output)."""
        z = complex(z)
        if z in self._fs._data:
            return self.Phi(z, x)
        V, s = propagate(self.pot, z, self.pot.interval.a, np.array([0.0, 1.0]), float(x), self.tol)
        return V * math.exp(s)


# --- singular Weyl function ---------------------------------------------------------

@dataclass(frozen=True)
class MValue:
    M: complex
    spread: float
    points: tuple


def singular_M(frame: SingularFrame, u_plus, points=None, check_tol=1e-8,
               pole_tol=1e-10, full=False):
    """``M(z) = -W(Theta, u_+) / W(Phi, u_+)`` at three evaluation points.

    The spread over the points is checked against ``check_tol`` (relative
    to ``max(1, |M|)``).  A denominator below ``pole_tol`` times the product
    of norms raises :class:`PoleSignal`.
    """
    z = complex(u_plus.z)
    if points is None:
        lo, hi = u_plus.span
        lo, hi = max(lo, frame.domain[0]), min(hi, frame.domain[1])
        if not math.isfinite(hi):
            hi = lo + 2.0 if lo > 0 else 2.0
        if lo <= 0:
            lo = min(0.1, hi / 4)
        points = lo + (hi - lo) * np.array([0.25, 0.5, 0.75])
    xs = np.asarray(points, dtype=float)
    u = np.asarray(u_plus(xs)).reshape(2, -1)
    phi = frame.Phi(z, xs).reshape(2, -1)
    theta = frame.Theta(z, xs).reshape(2, -1)
    den = wronskian(phi, u)
    scale = np.linalg.norm(phi, axis=0) * np.linalg.norm(u, axis=0)
    if np.any(np.abs(den) < pole_tol * scale):
        raise PoleSignal(z, den[np.argmin(np.abs(den) / scale)])
    Ms = -wronskian(theta, u) / den
    M = complex(Ms[0])
    spread = float(np.abs(Ms - M).max() / max(1.0, abs(M)))
    if spread > check_tol:
        raise WeylError(f"M depends on the evaluation point: spread {spread:.3e}")
    return MValue(M, spread, tuple(xs)) if full else M


def weyl_psi(frame, M, z, x):
    """``Psi = Theta + M Phi``."""
    return frame.Theta(z, x) + M * frame.Phi(z, x)


def greens_function(frame, M, z, x, y):
    """``G(z, x, y)``: ``Psi(x) Phi(y)^T`` for ``y < x``, ``Phi(x) Psi(y)^T`` for ``y > x``.

    On the diagonal the mean of both one-sided limits is returned.
    """
    z = complex(z)
    px, fx = weyl_psi(frame, M, z, x), frame.Phi(z, x)
    py, fy = weyl_psi(frame, M, z, y), frame.Phi(z, y)
    lower = np.outer(px, fy)
    upper = np.outer(fx, py)
    if y < x:
        return lower
    if y > x:
        return upper
    return 0.5 * (lower + upper)


def greens_jump(frame, M, z, x):
    """``G(x, x-0) - G(x, x+0)``; equals ``J`` when ``W(Theta, Phi) = 1``."""
    psi, phi = weyl_psi(frame, M, z, x), frame.Phi(z, x)
    return np.outer(psi, phi) - np.outer(phi, psi)


@dataclass
class GridFunction:
    """Samples ``values`` (shape (2, n)) on an increasing grid ``xs``."""

    xs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.values = np.asarray(self.values).reshape(2, -1)
        if self.values.shape[1] != self.xs.size:
            raise ValueError("grid and values disagree in length")
        if np.any(np.diff(self.xs) <= 0):
            raise ValueError("grid must be strictly increasing")

    def norm(self):
        w = _grid_weights(self.xs)
        return float(np.sqrt(np.sum(w * np.sum(np.abs(self.values) ** 2, axis=0))))


def _grid_weights(xs):
    """Composite trapezoid weights."""
    h = np.diff(xs)
    w = np.zeros(xs.size)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


_GL10 = L.leggauss(10)


def _cell_nodes(edges, order=_GL10):
    t, wt = order
    h = np.diff(edges)
    nodes = edges[:-1, None] + h[:, None] / 2 * (t + 1)
    return nodes, h[:, None] / 2 * wt


def resolvent_apply(frame, M, z, f, xs):
    """``((H - z)^-1 f)(x)`` on the grid ``xs`` for ``f`` vanishing outside ``[xs0, xs-1]``.

    ``f`` is a callable ``x -> (2, n)`` array; the integrals are accumulated
    with 10-point Gauss-Legendre rules on the grid cells.
    """
    z = complex(z)
    xs = np.asarray(xs, dtype=float)
    nodes, w = _cell_nodes(xs)
    y = nodes.ravel()
    fy = np.asarray(f(y)).reshape(2, -1)
    phi = frame.Phi(z, y).reshape(2, -1)
    psi = weyl_psi(frame, M, z, y).reshape(2, -1)
    cell_a = ((phi * fy).sum(axis=0) * w.ravel()).reshape(nodes.shape).sum(axis=1)
    cell_b = ((psi * fy).sum(axis=0) * w.ravel()).reshape(nodes.shape).sum(axis=1)
    A = np.concatenate(([0j], np.cumsum(cell_a)))            # int_{x0}^{x} Phi . f
    B = np.concatenate((np.cumsum(cell_b[::-1])[::-1], [0j]))  # int_x^{xN} Psi . f
    out = weyl_psi(frame, M, z, xs).reshape(2, -1) * A + frame.Phi(z, xs).reshape(2, -1) * B
    return GridFunction(xs, out)


# --- Stieltjes inversion ------------------------------------------------------------

DEFAULT_EPS_LADDER = (1e-1, 3e-2, 1e-2, 3e-3)


@dataclass
class SpectralDensityEstimate:
    lam: np.ndarray
    eps: np.ndarray
    values: np.ndarray          # Im M(lam + i eps)/pi, shape (n_eps, n_lam)
    density: np.ndarray
    error: np.ndarray
    window: tuple
    masses: np.ndarray          # window mass per eps
    mass: float
    mass_error: float
    atom_flags: np.ndarray = field(default=None)   # lam points where eps*Im M does not vanish

    @property
    def consistent(self):
        return bool(np.all(self.density >= -self.error - 1e-12))


def stieltjes_invert(M_eval, lam0, lam1, eps_ladder=DEFAULT_EPS_LADDER, n_lam=21,
                     quad_limit=1000, strict=False, rtol=1e-3):
    """Window mass ``pi^-1 int Im M(lam + i eps) dlam`` and pointwise density, as ``eps -> 0``.

    Each ladder value is extrapolated polynomially in ``eps``.  With
    ``strict`` a mass whose extrapolation error exceeds ``rtol`` raises
    :class:`ExtrapolationError` carrying the ladder.
    """
    eps = np.asarray(eps_ladder, dtype=float)
    if eps.size < 3 or np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise ValueError("eps ladder must be positive, strictly decreasing, length >= 3")
    if not lam1 > lam0:
        raise ValueError("empty lambda window")
    lam = np.linspace(lam0, lam1, n_lam)
    vals = np.array([[complex(M_eval(l + 1j * e)).imag / math.pi for l in lam] for e in eps])
    masses = []
    for e in eps:
        v, _ = _si.quad(lambda l: complex(M_eval(l + 1j * e)).imag, lam0, lam1,
                        limit=quad_limit, epsabs=1e-13, epsrel=1e-11)
        masses.append(v / math.pi)
    masses = np.array(masses)
    density, err = poly_extrapolate_zero(eps, vals)
    mass, merr = poly_extrapolate_zero(eps, masses)
    # an atom makes eps * Im M tend to a positive constant rather than zero
    flags = (eps[-1] * vals[-1] * math.pi) > 0.5 * (eps[-2] * vals[-2] * math.pi) + 1e-3
    est = SpectralDensityEstimate(lam, eps, vals, np.real(density), np.abs(err), (lam0, lam1),
                                  masses, float(np.real(mass)), float(merr), flags)
    if strict and merr > rtol * max(abs(mass), 1.0):
        raise ExtrapolationError("epsilon ladder did not settle",
                                 {"eps": eps, "masses": masses})
    return est


def support_diagnostic(M_eval, lam, eps_ladder=DEFAULT_EPS_LADDER):
    """Per-``lam`` ladder of ``Im M(lam + i eps)`` with a tentative label.

    Labels: ``'atom'`` (grows like 1/eps), ``'gap'`` (tends to 0),
    ``'ac'`` (settles at a positive value), ``'singular?'`` otherwise.
    This is a diagnostic report, not a classification of supports.
    """
    eps = np.asarray(eps_ladder, dtype=float)
    out = []
    for l in np.atleast_1d(lam):
        v = np.array([complex(M_eval(l + 1j * e)).imag for e in eps])
        ratio = v[-1] / v[0] if v[0] != 0 else math.inf
        growth = eps[0] / eps[-1]
        if v[-1] <= 1e-12 * max(1.0, abs(v[0])) or ratio < 2 * eps[-1] / eps[0]:
            label = "gap"
        elif ratio > 0.5 * growth:
            label = "atom"
        elif 0.5 < ratio < 2:
            label = "ac"
        else:
            label = "singular?"
        out.append({"lam": float(l), "im_M": v, "label": label})
    return out


# --- Herglotz identity ------------------------------------------------------------------

def graded_quadrature(a, b, n_cells=64, order=20, grade_a=False, grade_b=False):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``.

    Cells are graded quadratically toward flagged endpoints.
    """
    t = np.linspace(0.0, 1.0, n_cells + 1)
    if grade_a and grade_b:
        t = 0.5 * (1 - np.cos(np.pi * t))
    elif grade_a:
        t = t ** 2
    elif grade_b:
        t = 1 - (1 - t) ** 2
    nodes, w = _cell_nodes(a + (b - a) * t, L.leggauss(order))
    return nodes.ravel(), w.ravel()


def herglotz_residual(frame, M, z, quad):
    """``|Im M - Im z int |Psi|^2| / |Im M|`` with ``quad = (nodes, weights)`` on ``(a, b)``.

    ``M`` may be a number or a callable of ``z``.
    """
    z = complex(z)
    if z.imag == 0:
        raise ValueError("the Herglotz identity is checked off the real axis")
    Mz = complex(M(z)) if callable(M) else complex(M)
    nodes, w = quad
    psi = weyl_psi(frame, Mz, z, np.asarray(nodes)).reshape(2, -1)
    norm2 = float(np.sum(w * np.sum(np.abs(psi) ** 2, axis=0)))
    if not math.isfinite(norm2):
        raise WeylError("divergent norm integral")
    return abs(Mz.imag - z.imag * norm2) / abs(Mz.imag)


# --- Nevanlinna moments ---------------------------------------------------------------

@dataclass(frozen=True)
class DensityMeasure:
    """Absolutely continuous measure ``rho'(lam) = density(lam)`` on the real line."""

    density: Callable


@dataclass
class MomentTest:
    k: int
    passed: bool | None
    k_min: int | None
    exponent: float
    integrals: dict
    indeterminate: bool


def nevanlinna_moment_test(measure, k: int, k_max=8, tail=(1e2, 1e4)):
    """Decide ``int (1 + lam^2)^(-k-1) d rho < inf`` and the smallest such ``k``.

    For a density the tail exponent ``p`` (``rho' ~ |lam|^p``) is fitted on
    ``|lam|`` in ``tail``; the integral is finite iff ``p < 2k + 1``.  A ``p``
    within 0.1 of ``2k + 1`` is indeterminate.  Finite atom lists (objects
    with ``atoms`` and ``weights``) pass for every ``k``.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if hasattr(measure, "atoms"):
        lam = np.asarray(measure.atoms, dtype=float)
        w = np.asarray(measure.weights, dtype=float)
        ints = {j: float(np.sum(w * (1 + lam ** 2) ** (-j - 1))) for j in range(k_max + 1)}
        return MomentTest(k, True, 0, -math.inf, ints, False)
    rs = np.logspace(math.log10(tail[0]), math.log10(tail[1]), 24)
    exps = []
    for sign in (1.0, -1.0):
        d = np.array([float(measure.density(sign * r)) for r in rs])
        if np.all(d > 0):
            exps.append(np.polyfit(np.log(rs), np.log(d), 1)[0])
    p = max(exps) if exps else -math.inf
    ints, verdict = {}, {}
    for j in range(k_max + 1):
        crit = 2 * j + 1
        if abs(p - crit) < 0.1:
            verdict[j] = None
            continue
        verdict[j] = bool(p < crit)
        if verdict[j]:
            f = lambda l, j=j: float(measure.density(l)) * (1 + l * l) ** (-j - 1)
            ints[j] = sum(_si.quad(f, lo, hi, limit=400)[0]
                          for lo, hi in ((-math.inf, -1), (-1, 1), (1, math.inf)))
        else:
            ints[j] = math.inf
    passing = [j for j in range(k_max + 1) if verdict[j]]
    k_min = passing[0] if passing else None
    indet = verdict.get(k) is None or (k_min is not None and
                                       any(verdict[j] is None for j in range(k_min)))
    return MomentTest(k, verdict.get(k), k_min, float(p), ints, indet)
