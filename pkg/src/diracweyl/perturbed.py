"""Perturbed radial Dirac operators ``Q = Q_kappa + P`` (mass zero).

The regular solution solves the Volterra equation

    Phi(z, x) = Phi_kappa(z, x) + int_0^x K(z, x, y) P(y) Phi(z, y) dy

with ``K(z, x, y) = Phi_kappa(x) Psi_kappa(y)^T - Psi_kappa(x) Phi_kappa(y)^T``.
Because ``W(Psi_kappa, Phi_kappa) = 1`` this equals the ``Theta``-form of the
kernel, but each term is bounded by ``exp(|Im z| (x - y))`` so the separable
accumulation below stays free of cancellation for large ``|Im z|``.  All
arrays are carried scaled: ``Phi * exp(-s x)`` and ``Psi * exp(+s x)`` with
``s = |Im z|``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import legendre as L
from scipy import integrate

from . import radial as R
from .ode import fd_derivative
from .operator import Coefficient, DiracPotential, Interval, dalembert_second


class IntegrabilityError(ValueError):
    """The perturbation is not integrable in the class required near 0."""


class NeumannDivergence(RuntimeError):
    pass


# --- perturbations ---------------------------------------------------------------

def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Perturbation:
    """Real symmetric ``P(x) = [[p11, p12], [p12, p22]]``.

    ``log_weighted`` declares integrability of ``(1 + |log x|) P``, the class
    needed when ``kappa = 1/2``.
    """

    p11: Callable = _zero
    p12: Callable = _zero
    p22: Callable = _zero
    log_weighted: bool = False
    support: tuple | None = None
    is_zero: bool = False

    def entries(self, x):
        x = np.asarray(x, dtype=float)
        return (np.asarray(self.p11(x), dtype=float) * np.ones_like(x),
                np.asarray(self.p12(x), dtype=float) * np.ones_like(x),
                np.asarray(self.p22(x), dtype=float) * np.ones_like(x))

    def norm(self, x):
        """Operator (spectral) norm of ``P(x)``."""
        a, b, d = self.entries(x)
        return np.abs((a + d) / 2) + np.hypot((a - d) / 2, b)

    @classmethod
    def zero(cls):
        return cls(is_zero=True)

    @classmethod
    def am_bump(cls, amplitude=1.0, a=0.2, b=0.4):
        """Smooth compactly supported bump ``amplitude * exp(1 - 1/(1 - u^2))`` in the
        anomalous-magnetic channel, ``u`` mapping ``[a, b]`` onto ``[-1, 1]``."""
        c, w = (a + b) / 2, (b - a) / 2

        def p12(x):
            u = (np.asarray(x, dtype=float) - c) / w
            inside = np.abs(u) < 1
            with np.errstate(divide="ignore", over="ignore"):
                v = np.exp(1 - 1 / np.where(inside, 1 - u * u, 1.0))
            return np.where(inside, amplitude * v, 0.0)

        return cls(p12=p12, support=(a, b))

    @classmethod
    def from_channels(cls, q_sc=None, q_el=None, q_am=None, **kw):
        """Build from the scalar channels: ``P = q_el 1 + q_am sigma_1 + q_sc sigma_3``."""
        sc = q_sc or _zero
        el = q_el or _zero
        am = q_am or _zero
        return cls(lambda x: el(x) + sc(x), am, lambda x: el(x) - sc(x), **kw)

    def potential(self, kappa, b=math.inf):
        """The full ``Q_kappa + P`` as a :class:`DiracPotential` on ``(0, b)``."""
        kappa = float(kappa)
        s = self
        q_sc = Coefficient(lambda x: (s.entries(x)[0] - s.entries(x)[2]) / 2, "L1loc")
        q_el = Coefficient(lambda x: (s.entries(x)[0] + s.entries(x)[2]) / 2, "L1loc")
        q_am = Coefficient(lambda x: kappa / np.asarray(x, dtype=float) + s.entries(x)[1],
                           "L1loc")
        return DiracPotential(Interval(0.0, b), 0.0, q_sc, q_el, q_am)


def weight_integral(P: Perturbation, kappa, x):
    """``I(x) = int_0^x ||P(r)|| w(r) dr`` with ``w = 1 - log r`` when kappa = 1/2."""
    logw = abs(kappa - 0.5) < 1e-12
    if logw and not P.log_weighted and not P.is_zero and P.support is None:
        warnings.warn("kappa = 1/2 needs a log-weighted integrable perturbation", stacklevel=2)

    def f(r):
        w = (1 - math.log(r)) if logw else 1.0
        return float(P.norm(r)) * w

    pts = [p for p in (P.support or ()) if 0 < p < x]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, 0.0, x, points=pts or None, limit=400)
        except integrate.IntegrationWarning as exc:
            raise IntegrabilityError(f"int_0^{x} ||P|| did not converge: {exc}") from None
    if not math.isfinite(val):
        raise IntegrabilityError(f"int_0^{x} ||P|| is not finite")
    return val


# --- kernels -------------------------------------------------------------------

def _use_psi(zeta, x):
    return complex(zeta) != 0 and abs(np.sqrt(complex(zeta)).imag) * np.max(x) >= 1.0


def kernel_K_l(l, zeta, x, y, scaled=False):
    """``phi_l(x) theta_l(y) - phi_l(y) theta_l(x)``; ``K_{-1-l}`` for ``l < -1/2``.

    The reflected branch carries a plus sign: with ``theta`` normalized by
    ``W(theta_l, phi_l) = 1`` this is the sign for which the matrix kernel
    entries ``z K_{kappa-1}`` and ``a_kappa(x) K_{kappa-1}`` agree with the
    variation-of-constants kernel when ``kappa < 1/2``.

    With ``scaled=True`` the value is multiplied by ``exp(-|Im sqrt(zeta)| (x - y))``.
    """
    if l < -1.0 - 1e-12:
        raise ValueError("need l >= -1")
    if l < -0.5 - 1e-12:
        return kernel_K_l(-1.0 - l, zeta, x, y, scaled)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y > x * (1 + 1e-14)) or np.any(y <= 0):
        raise ValueError("kernel needs 0 < y <= x")
    zeta = complex(zeta)
    s = abs(np.sqrt(zeta).imag)
    if _use_psi(zeta, x):
        fx, fy = R.phi_l(l, zeta, x, True), R.phi_l(l, zeta, y, True)
        px, py = R.psi_l(l, zeta, x, True), R.psi_l(l, zeta, y, True)
        val = fx * py - fy * px * np.exp(-2 * s * (x - y))
        return val if scaled else val * np.exp(s * (x - y))
    val = R.phi_l(l, zeta, x) * R.theta_l(l, zeta, y) - R.phi_l(l, zeta, y) * R.theta_l(l, zeta, x)
    return val * np.exp(-s * (x - y)) if scaled else val


def dkernel_K_l_dx(l, zeta, x, y, scaled=False):
    """``d/dx K_l(zeta, x, y)`` from closed-form derivatives."""
    if l < -0.5 - 1e-12:
        return dkernel_K_l_dx(-1.0 - l, zeta, x, y, scaled)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    zeta = complex(zeta)
    s = abs(np.sqrt(zeta).imag)
    if _use_psi(zeta, x):
        dfx, fy = R.dphi_l(l, zeta, x, True), R.phi_l(l, zeta, y, True)
        py = R.psi_l(l, zeta, y, True)
        dpx = R.astar_psi_l(l, zeta, x, True) - l / x * R.psi_l(l, zeta, x, True)
        val = dfx * py - fy * dpx * np.exp(-2 * s * (x - y))
        return val if scaled else val * np.exp(s * (x - y))
    val = (R.dphi_l(l, zeta, x) * R.theta_l(l, zeta, y)
           - R.phi_l(l, zeta, y) * R.dtheta_l(l, zeta, x))
    return val * np.exp(-s * (x - y)) if scaled else val


def kernel_K(kappa, z, x, y, scaled=False):
    """2x2 Volterra kernel (mass zero); trailing axes broadcast over ``x, y``.

    Entries: ``z K_kappa``, ``a*_kappa(y) K_kappa``, ``a*_kappa(x) K_kappa``,
    ``z K_{kappa-1}``.
    """
    p = R.RadialParams(kappa, 0.0)
    z = complex(z)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = abs(z.imag)
    if z != 0 and s * float(np.max(x)) >= 1.0:
        Fx, Fy = R.Phi_kappa(p, z, x, True), R.Phi_kappa(p, z, y, True)
        Px, Py = R.Psi_kappa(p, z, x, True), R.Psi_kappa(p, z, y, True)
        damp = np.exp(-2 * s * (x - y))
        K = Fx[:, None] * Py[None, :] - Px[:, None] * Fy[None, :] * damp
        return K if scaled else K * np.exp(s * (x - y))
    Fx, Fy = R.Phi_kappa(p, z, x), R.Phi_kappa(p, z, y)
    Tx, Ty = R.Theta_kappa(p, z, x), R.Theta_kappa(p, z, y)
    K = Fx[:, None] * Ty[None, :] - Tx[:, None] * Fy[None, :]
    return K * np.exp(-s * (x - y)) if scaled else K


def kernel_cross_residuals(kappa, z, x, y):
    """Relative defects of the two cross identities for the off-diagonal entries.

    ``K12 = a_kappa(x) K_{kappa-1}`` and ``K21 = a_kappa(y) K_{kappa-1}``, where
    ``a_kappa = -d/dx + kappa/x``; the right-hand sides are computed from the
    scalar kernel of index ``kappa - 1`` and its derivatives, independently of
    the matrix assembly.
    """
    z = complex(z)
    zeta = z * z
    l = kappa - 1.0
    K = kernel_K(kappa, z, x, y)
    Kl = kernel_K_l(l, zeta, x, y)
    rhs12 = -dkernel_K_l_dx(l, zeta, x, y) + kappa / x * Kl
    # d/dy K_l(x, y) = -d/dy K_l(y, x) evaluated through the symmetric formula
    rhs21 = -_dK_dy(l, zeta, x, y) + kappa / y * Kl
    scale = max(abs(K).max(), 1e-300)
    return abs(K[0, 1] - rhs12) / scale, abs(K[1, 0] - rhs21) / scale


def _dK_dy(l, zeta, x, y):
    if l < -0.5 - 1e-12:
        return _dK_dy(-1.0 - l, zeta, x, y)
    return (R.phi_l(l, zeta, x) * R.dtheta_l(l, zeta, y)
            - R.dphi_l(l, zeta, y) * R.theta_l(l, zeta, x))


# --- kernel estimates ------------------------------------------------------------

def _estimate_grid(n):
    # nested under n -> 2n - 1
    r = np.logspace(-1, 2, n)
    th = np.linspace(0, np.pi, n)
    xs = np.logspace(-3, 0, n)
    ts = np.logspace(-3, 0, n)
    return r, th, xs, ts


def kernel_estimate_constants(l, n=9):
    """Smallest constants making the Bessel-kernel estimates hold on a grid.

    Returns a dict mapping estimate name to ``max(lhs / rhs)`` over the grid
    ``|z| in [0.1, 100]``, ``arg z in [0, pi]``, ``x in [1e-3, 1]``,
    ``y = t x`` with ``t in [1e-3, 1]``.  For ``l = -1/2`` the two kernel
    estimates carry the ``1 - log y`` weight.
    """
    r, th, xs, ts = _estimate_grid(n)
    half = abs(l + 0.5) < 1e-12
    out = {"phi": 0.0, "dphi": 0.0, "K": 0.0, "dK": 0.0}
    for rr in r:
        for t in th:
            z = rr * np.exp(1j * t)
            zeta = z * z
            az = abs(z)
            rho_x = xs / (1 + az * xs)
            # scaled=True divides out exp(|Im z| x) since |Im sqrt(z^2)| = |Im z|
            out["phi"] = max(out["phi"], float(np.max(
                np.abs(R.phi_l(l, zeta, xs, True)) / rho_x ** (l + 1))))
            out["dphi"] = max(out["dphi"], float(np.max(
                np.abs(R.dphi_l(l, zeta, xs, True)) / rho_x**l)))
            for x in xs:
                y = ts * x
                rx = x / (1 + az * x)
                ry = y / (1 + az * y)
                K = np.abs(kernel_K_l(l, zeta, np.full_like(y, x), y, scaled=True))
                dK = np.abs(dkernel_K_l_dx(l, zeta, np.full_like(y, x), y, scaled=True))
                if half:
                    w = 1 - np.log(y)
                    bK = rx**0.5 * ry**0.5 * w
                    bdK = rx**-0.5 * ry**0.5 * w
                else:
                    bK = rx ** (l + 1) * ry ** (-l)
                    bdK = rx**l * ry ** (-l)
                out["K"] = max(out["K"], float(np.max(K / bK)))
                out["dK"] = max(out["dK"], float(np.max(dK / bdK)))
    return out


# --- Neumann series ----------------------------------------------------------------

_ORDER = 8
_GL_T, _GL_W = L.leggauss(_ORDER)
# column k holds the Legendre coefficients of the antiderivative (from -1) of
# the k-th Lagrange basis polynomial on the Gauss nodes
_INT_COEF = np.stack([L.legint(c, lbnd=-1)
                      for c in np.linalg.inv(L.legvander(_GL_T, _ORDER - 1)).T], axis=1)


def _integration_rows(t):
    """Rows ``r(t)`` with ``r @ f = int_{-1}^{t} p`` for the node interpolant ``p`` of ``f``."""
    return L.legvander(np.atleast_1d(t), _ORDER) @ _INT_COEF


_SPEC = _integration_rows(_GL_T)


def graded_mesh(x_max, z, n_graded=24, width_factor=0.5, support=None, support_panels=24):
    """Panel breakpoints on ``[0, x_max]``.

    Starts from ``x_max (j/n)^2`` (clustered at 0), then subdivides so each
    width is at most ``width_factor / (|z| + 2|Im z| + 1)`` and, inside the
    perturbation's support ``(a, b)``, at most ``(b - a) / support_panels``.
    """
    z = complex(z)
    cap = width_factor / (abs(z) + 2 * abs(z.imag) + 1)
    g = set((x_max * (np.arange(n_graded + 1) / n_graded) ** 2).tolist())
    if support is not None:
        g.update(q for q in support if 0 < q < x_max)
    g = np.array(sorted(g))
    pts = [0.0]
    for a, b in zip(g[:-1], g[1:]):
        c = cap
        if support is not None and a < support[1] and b > support[0]:
            c = min(c, (support[1] - support[0]) / support_panels)
        k = max(1, math.ceil((b - a) / c))
        pts.extend(a + (b - a) * np.arange(1, k + 1) / k)
    return np.array(pts)


@dataclass
class NeumannSolution:
    """Converged Neumann series for the regular solution on ``(0, x_max]``."""

    kappa: float
    z: complex
    P: Perturbation
    x_max: float
    breaks: np.ndarray
    nodes: np.ndarray
    values: np.ndarray          # scaled Phi at nodes, shape (2, N)
    increments: list            # sup-norms of scaled Phi^n, n = 0, 1, ...
    n_terms: int
    tail_estimate: float
    I_xmax: float
    fitted_C: float
    _A: np.ndarray = field(repr=False, default=None)     # cumulative integrals at breaks
    _C: np.ndarray = field(repr=False, default=None)
    _f1: np.ndarray = field(repr=False, default=None)
    _f2: np.ndarray = field(repr=False, default=None)
    _psi_form: bool = True

    @property
    def span(self):
        return (1e-300, float(self.x_max))

    @property
    def s(self):
        return abs(complex(self.z).imag)

    def scaled(self, x):
        """``Phi(z, x) exp(-|Im z| x)`` at arbitrary ``0 < x <= x_max``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x <= 0) or np.any(x > self.x_max * (1 + 1e-12)):
            raise ValueError("x outside (0, x_max]")
        p = R.RadialParams(self.kappa, 0.0)
        F = R.Phi_kappa(p, self.z, x, True)
        if self.P.is_zero:
            return F
        G = R.Psi_kappa(p, self.z, x, True) if self._psi_form else R.Theta_kappa(p, self.z, x, True)
        j = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, len(self.breaks) - 2)
        a = self.breaks[j]
        h = self.breaks[j + 1] - a
        rows = _integration_rows(2 * (x - a) / h - 1) * (h[:, None] / 2)
        idx = j[:, None] * _ORDER + np.arange(_ORDER)[None, :]
        A = self._A[j] + (rows * self._f1[idx]).sum(axis=1)
        if self._psi_form:
            s = self.s
            ys = self.nodes[idx]
            C = np.exp(-2 * s * (x - a)) * self._C[j] + \
                (rows * np.exp(-2 * s * (x[:, None] - ys)) * self._f2[idx]).sum(axis=1)
        else:
            C = self._C[j] + (rows * self._f2[idx]).sum(axis=1)
        return F * (1 + A) - G * C

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self.scaled(x) * np.exp(self.s * np.atleast_1d(x))
        return out[:, 0] if x.ndim == 0 else out

    def derivative(self, x, h=None):
        x = float(x)
        if h is None:
            h = min(0.002 / (1.0 + abs(self.z)), x / 8)
        return fd_derivative(self, x, 1e-300, self.x_max, h)

    def potential(self):
        return self.P.potential(self.kappa)

    def volterra_residuals(self, points=20, order=20):
        """Relative defect of the integral equation at ``points`` locations.

        The integral is recomputed against the closed-form kernel with a
        composite ``order``-point Gauss-Legendre rule on its own uniform mesh
        (split at the support endpoints), independent of the solver's panels.
        """
        xs = np.linspace(self.x_max / points, self.x_max, points)
        p = R.RadialParams(self.kappa, 0.0)
        t, w = L.leggauss(order)
        z = complex(self.z)
        width = 0.35 / (abs(z) + 2 * abs(z.imag) + 1)
        if self.P.support is not None:
            width = min(width, (self.P.support[1] - self.P.support[0]) / 40)
        out = []
        for x in xs:
            cuts = sorted({0.0, x, *[q for q in (self.P.support or ()) if 0 < q < x]})
            ys, ws = [], []
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                n = max(1, math.ceil((hi - lo) / width))
                e = lo + (hi - lo) * np.arange(n + 1) / n
                hh = np.diff(e)
                ys.append((e[:-1, None] + hh[:, None] / 2 * (t + 1)).ravel())
                ws.append((hh[:, None] / 2 * w).ravel())
            ys = np.concatenate(ys)
            ws = np.concatenate(ws)
            K = kernel_K(self.kappa, z, np.full_like(ys, x), ys, scaled=True)   # (2, 2, n)
            a, b, d = self.P.entries(ys)
            U = self.scaled(ys)
            PU = np.array([a * U[0] + b * U[1], b * U[0] + d * U[1]])
            # kernel scaled by exp(-s(x-y)) and Phi(y) by exp(-s y): product scaled by exp(-s x)
            val = np.einsum("ijn,jn,n->i", K, PU, ws)
            lhs = self.scaled(x)[:, 0]
            rhs = R.Phi_kappa(p, z, x, True) + val
            out.append(float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1e-300)))
        return xs, np.array(out)


def neumann_solve(kappa, P: Perturbation, z, x_max, tol=1e-12, max_terms=200):
    """Sum the Neumann series of the regular-solution Volterra equation.

    Iterates ``Phi^n = int_0^x K P Phi^(n-1)`` until the factorial tail bound
    ``sum_{k>n} (C I)^k / k!`` (``I = int_0^x_max ||P||``, ``C`` fitted from
    the computed increments) falls below ``tol``.
    """
    z = complex(z)
    p = R.RadialParams(kappa, 0.0)
    s = abs(z.imag)
    I = weight_integral(P, kappa, x_max) if not P.is_zero else 0.0
    breaks = graded_mesh(x_max, z, support=P.support)
    h = np.diff(breaks)
    nodes = (breaks[:-1, None] + (h[:, None] / 2) * (_GL_T[None, :] + 1)).reshape(-1)
    F = R.Phi_kappa(p, z, nodes, True)
    norm0 = float(np.abs(F).max())
    if P.is_zero or I == 0.0:
        sol = NeumannSolution(kappa, z, P, x_max, breaks, nodes, F, [norm0], 0, 0.0, I, 0.0)
        return sol

    psi_form = z != 0 and s * x_max >= 1.0
    G = R.Psi_kappa(p, z, nodes, True) if psi_form else R.Theta_kappa(p, z, nodes, True)
    a, b, d = P.entries(nodes)
    npan = len(h)

    def integrals(f1, f2):
        f1p = f1.reshape(npan, _ORDER)
        f2p = f2.reshape(npan, _ORDER)
        ysp = nodes.reshape(npan, _ORDER)
        inner1 = (f1p @ _SPEC.T) * (h[:, None] / 2)
        tot1 = (f1p @ _GL_W) * h / 2
        A_br = np.concatenate(([0j], np.cumsum(tot1)))
        A_nodes = A_br[:-1, None] + inner1
        if psi_form:
            tn = ysp                                # evaluation points t_i
            decay = np.exp(-2 * s * (tn[:, :, None] - ysp[:, None, :]))   # (pan, i, k)
            inner2 = np.einsum("ik,pik,pk->pi", _SPEC, decay, f2p) * (h[:, None] / 2)
            end_decay = np.exp(-2 * s * (breaks[1:, None] - ysp))
            tot2 = (f2p * end_decay) @ _GL_W * h / 2
            C_br = np.empty(npan + 1, dtype=complex)
            C_br[0] = 0
            e = np.exp(-2 * s * h)
            for j in range(npan):
                C_br[j + 1] = e[j] * C_br[j] + tot2[j]
            C_nodes = np.exp(-2 * s * (ysp - breaks[:-1, None])) * C_br[:-1, None] + inner2
        else:
            inner2 = (f2p @ _SPEC.T) * (h[:, None] / 2)
            C_br = np.concatenate(([0j], np.cumsum((f2p @ _GL_W) * h / 2)))
            C_nodes = C_br[:-1, None] + inner2
        return A_br, C_br, A_nodes.reshape(-1), C_nodes.reshape(-1)

    # theta-form: both scaled factors grow, so the integrands carry exp(2 s y)
    wgt = 1.0 if psi_form else np.exp(2 * s * nodes)

    def forms(U):
        PU = np.array([a * U[0] + b * U[1], b * U[0] + d * U[1]]) * wgt
        return G[0] * PU[0] + G[1] * PU[1], F[0] * PU[0] + F[1] * PU[1]

    total = F.copy()
    term = F.copy()
    incs = [norm0]
    C_fit = 0.0
    tail = math.inf
    n = 0
    for n in range(1, max_terms + 1):
        f1, f2 = forms(term)
        _, _, An, Cn = integrals(f1, f2)
        term = F * An - G * Cn
        inc = float(np.abs(term).max())
        incs.append(inc)
        total += term
        if inc == 0.0:
            tail = 0.0
            break
        C_fit = max(C_fit, (math.lgamma(n + 1) + math.log(inc / norm0)) / n - math.log(I))
        CI = math.exp(C_fit) * I
        # tail of the exponential series beyond n, relative to the leading term
        tail = norm0 * _exp_tail(CI, n)
        if tail <= tol * max(norm0, float(np.abs(total).max())):
            break
    else:
        raise NeumannDivergence(f"Neumann series not converged after {max_terms} terms "
                                f"(last increment {incs[-1]:.3e})")

    f1, f2 = forms(total)
    A_br, C_br, _, _ = integrals(f1, f2)
    return NeumannSolution(kappa, z, P, x_max, breaks, nodes, total, incs, n, tail, I,
                           math.exp(C_fit), A_br, C_br, f1, f2, psi_form)


def _exp_tail(a, n):
    # sum_{k > n} a^k / k!
    term = math.exp((n + 1) * math.log(a) - math.lgamma(n + 2)) if a > 0 else 0.0
    total = 0.0
    k = n + 1
    while term > 1e-300 and (total == 0.0 or term > 1e-17 * total):
        total += term
        k += 1
        term *= a / k
    return total


def factorial_decay_ok(sol: NeumannSolution, slack=1.0):
    """Increments obey ``inc_n <= inc_0 (C I)^n / n!`` with the fitted constant."""
    if sol.n_terms == 0:
        return True
    CI = sol.fitted_C * sol.I_xmax
    for n, inc in enumerate(sol.increments):
        bound = sol.increments[0] * math.exp(n * math.log(CI) - math.lgamma(n + 1)) if CI > 0 else 0
        if inc > bound * (1 + 1e-9) * slack + 1e-300:
            return False
    return True


def asymptotics_check(kappa, P, x, ray=1j, radii=(10, 20, 50, 100, 200)):
    """``|Phi - Phi_kappa| |z|^kappa exp(-|Im z| x)`` along ``z = r * ray``.

    Returns a dict with the per-radius defects, componentwise ratios
    ``Phi / Phi_kappa`` and whether the defects decrease monotonically.
    """
    ray = complex(ray) / abs(complex(ray))
    if ray.imag == 0:
        raise ValueError("ray must be nonreal")
    p = R.RadialParams(kappa, 0.0)
    defects, ratios = [], []
    for r in radii:
        z = r * ray
        sol = neumann_solve(kappa, P, z, x)
        phi = sol.scaled(x)[:, 0]
        phik = R.Phi_kappa(p, z, x, True)
        defects.append(float(np.linalg.norm(phi - phik)) * abs(z) ** kappa)
        ratios.append(phi / phik)
    defects = np.array(defects)
    return {
        "radii": list(radii),
        "defect": defects,
        "ratio": np.array(ratios),
        "decreasing": bool(np.all(np.diff(defects) <= 1e-15)),
        "max_defect": float(defects.max()),
    }


def second_solution_theta(kappa, P, z, x_ref, xs=None, x_max=None, variant=None):
    """A second solution ``Theta`` with ``W(Theta, Phi) = 1`` by d'Alembert reduction."""
    if x_max is None:
        x_max = 2 * x_ref
    sol = neumann_solve(kappa, P, z, x_max)
    if xs is None:
        xs = np.linspace(x_ref / 2, x_max, 201)
    u = _Sampled(sol)
    if variant is None:
        vals = sol(np.asarray(xs))
        variant = "first" if np.abs(vals[0]).min() >= np.abs(vals[1]).min() else "second"
    return dalembert_second(sol.potential(), z, u, x_ref, variant, xs=xs)


class _Sampled:
    def __init__(self, sol):
        self.sol = sol
        self.span = (sol.x_max * 1e-3, sol.x_max)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        v = self.sol(np.atleast_1d(x))
        return v[:, 0] if x.ndim == 0 else v
