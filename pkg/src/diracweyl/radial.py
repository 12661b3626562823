"""Closed forms for the unperturbed radial Dirac operator.

``Q_kappa(x) = m sigma_3 + (kappa/x) sigma_1`` on ``(0, inf)`` reduces to the
Bessel equation ``-u'' + l(l+1)/x^2 u = zeta u`` with ``zeta = z^2 - m^2``.
Everything here is expressed through two entire building blocks (``nu = l + 1/2``):

    g(mu, zeta, x) = zeta^(-mu/2) sqrt(pi x/2) J_mu(sqrt(zeta) x)
    h(n, zeta, x)  = zeta^(n/2) sqrt(pi x/2) [Y_n(sqrt(zeta) x) - log(zeta)/pi J_n(sqrt(zeta) x)]

Both are entire in ``zeta``; near ``sqrt(zeta) x = 0`` they are summed from
their power series, elsewhere from library Bessel values.  Passing
``scaled=True`` multiplies growing quantities by ``exp(-|Im sqrt(zeta)| x)``
and the decaying Weyl solution by ``exp(+|Im sqrt(zeta)| x)``.

The integer case of ``m_l`` uses ``zeta^(l+1/2) log(-zeta)``; this is the
reading consistent with the Hankel form of the Weyl solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from .special import BranchError, _is_integer, _principal_pow, clog, cpow

SERIES_RADIUS = 1.0   # |sqrt(zeta) x| below which the power series is summed
_NTERMS = 40


def _norm_zeta(zeta):
    # drop a negative zero imaginary part so sqrt and log agree on the cut
    zeta = complex(zeta)
    return complex(zeta.real, zeta.imag + 0.0)


def _prep(zeta, x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("radial solutions need x > 0")
    zeta = _norm_zeta(zeta)
    r = np.sqrt(zeta)
    return zeta, r, x, abs(r.imag) * x


def _series_g(mu, zeta, x):
    t = -zeta * x * x / 4.0
    k = np.arange(_NTERMS)
    coef = sp.rgamma(mu + k + 1) / sp.factorial(k)  # 1/(k! Gamma(mu+k+1))
    tk = t[..., None] ** k
    return np.sqrt(np.pi * x / 2) * (x / 2) ** mu * (tk * coef).sum(axis=-1)


def g_entire(mu, zeta, x, scaled=False):
    """``zeta^(-mu/2) sqrt(pi x/2) J_mu(sqrt(zeta) x)``, entire in zeta."""
    zeta, r, x, s = _prep(zeta, x)
    w = r * x
    small = np.abs(w) <= SERIES_RADIUS
    out = np.empty(x.shape, dtype=complex)
    if np.any(small):
        val = _series_g(mu, zeta, x[small])
        out[small] = val * np.exp(-s[small]) if scaled else val
    big = ~small
    if np.any(big):
        jv = sp.jve(mu, w[big]) if scaled else sp.jv(mu, w[big])
        out[big] = _principal_pow(r, -mu) * np.sqrt(np.pi * x[big] / 2) * jv
    return complex(out) if out.ndim == 0 else out


def _series_h(n, zeta, x):
    x2 = x / 2
    t = zeta * x * x / 4.0
    out = np.zeros(x.shape, dtype=complex)
    for k in range(n):
        out -= math.factorial(n - k - 1) / math.factorial(k) * t**k * x2 ** (-n) / np.pi
    k = np.arange(_NTERMS)
    fac = 1.0 / (sp.factorial(k) * sp.factorial(n + k))
    tk = (-t)[..., None] ** k
    sj = (tk * fac).sum(axis=-1)
    sp_ = (tk * fac * (sp.digamma(k + 1) + sp.digamma(n + k + 1))).sum(axis=-1)
    lead = zeta**n * x2**n
    out += (2 / np.pi) * np.log(x2) * lead * sj - lead * sp_ / np.pi
    return np.sqrt(np.pi * x / 2) * out


def h_entire(n, zeta, x, scaled=False):
    """``zeta^(n/2) sqrt(pi x/2) [Y_n - log(zeta)/pi J_n](sqrt(zeta) x)`` for integer n >= 0."""
    n = int(round(n))
    if n < 0:
        raise ValueError("h_entire needs n >= 0")
    zeta, r, x, s = _prep(zeta, x)
    w = r * x
    small = np.abs(w) <= SERIES_RADIUS
    out = np.empty(x.shape, dtype=complex)
    if np.any(small):
        val = _series_h(n, zeta, x[small])
        out[small] = val * np.exp(-s[small]) if scaled else val
    big = ~small
    if np.any(big):
        if scaled:
            jv, yv = sp.jve(n, w[big]), sp.yve(n, w[big])
        else:
            jv, yv = sp.jv(n, w[big]), sp.yv(n, w[big])
        out[big] = r**n * np.sqrt(np.pi * x[big] / 2) * (yv - clog(zeta) / np.pi * jv)
    return complex(out) if out.ndim == 0 else out


def _nu(l):
    nu = l + 0.5
    if nu < -1e-12:
        raise ValueError("need l >= -1/2")
    return nu


# --- Schrödinger level ----------------------------------------------------------

def phi_l(l, zeta, x, scaled=False):
    """Regular entire solution ``phi_l``, ``phi_l ~ C x^(l+1)`` at 0."""
    return g_entire(_nu(l), zeta, x, scaled)


def astar_phi_l(l, zeta, x, scaled=False):
    """``(d/dx + l/x) phi_l``."""
    return g_entire(_nu(l) - 1, zeta, x, scaled)


def dphi_l(l, zeta, x, scaled=False):
    x = np.asarray(x, dtype=float)
    return astar_phi_l(l, zeta, x, scaled) - l / x * phi_l(l, zeta, x, scaled)


def theta_l(l, zeta, x, scaled=False):
    """Singular entire solution ``theta_l`` with ``W(theta_l, phi_l) = 1``."""
    nu = _nu(l)
    if _is_integer(nu):
        return -np.asarray(h_entire(round(nu), zeta, x, scaled))[()]
    return np.asarray(g_entire(-nu, zeta, x, scaled))[()] / math.sin(nu * math.pi)


def astar_theta_l(l, zeta, x, scaled=False):
    """``(d/dx + l/x) theta_l``."""
    nu = _nu(l)
    zeta = _norm_zeta(zeta)
    if _is_integer(nu):
        n = round(nu)
        if n == 0:
            return np.asarray(h_entire(1, zeta, x, scaled))[()]
        return -zeta * np.asarray(h_entire(n - 1, zeta, x, scaled))[()]
    return -zeta * np.asarray(g_entire(1 - nu, zeta, x, scaled))[()] / math.sin(nu * math.pi)


def dtheta_l(l, zeta, x, scaled=False):
    x = np.asarray(x, dtype=float)
    return astar_theta_l(l, zeta, x, scaled) - l / x * theta_l(l, zeta, x, scaled)


def _k(zeta):
    zeta = complex(zeta)
    k = 1j * np.sqrt(-zeta)
    if k.imag < 0:
        raise BranchError("Weyl solution needs Im sqrt(-zeta) >= 0 branch")
    if k == 0:
        raise BranchError("Weyl solution undefined at zeta = 0")
    return k


def psi_l(l, zeta, x, scaled=False):
    """Weyl solution ``theta_l + m_l phi_l`` (square integrable at infinity).

    Signed zeros in ``zeta`` select the side of the cut ``[0, inf)``.
    """
    nu = _nu(l)
    k = _k(zeta)
    x = np.asarray(x, dtype=float)
    w = k * x
    h = sp.hankel1e(nu, w) * np.exp(1j * k.real * x) if scaled else sp.hankel1(nu, w)
    return (1j * np.sqrt(np.pi * x / 2) * _principal_pow(k, nu) * h)[()]


def astar_psi_l(l, zeta, x, scaled=False):
    nu = _nu(l)
    k = _k(zeta)
    x = np.asarray(x, dtype=float)
    w = k * x
    h = sp.hankel1e(nu - 1, w) * np.exp(1j * k.real * x) if scaled else sp.hankel1(nu - 1, w)
    return (1j * np.sqrt(np.pi * x / 2) * _principal_pow(k, nu + 1) * h)[()]


def m_l(l, zeta):
    """Singular Weyl function of the Bessel operator, analytic off ``[0, inf)``."""
    nu = _nu(l)
    zeta = complex(zeta)
    if zeta.imag == 0 and zeta.real >= 0:
        raise BranchError("m_l is evaluated off the cut [0, inf)")
    if _is_integer(nu):
        return -(zeta ** round(nu)) * clog(-zeta) / math.pi
    return -cpow(-zeta, nu) / math.sin(nu * math.pi)


# --- Dirac level --------------------------------------------------------------

@dataclass(frozen=True)
class RadialParams:
    kappa: float = 0.0
    m: float = 0.0

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa < 0 is reduced to -kappa by the sigma_1 gauge")
        if self.m < 0:
            raise ValueError("mass must be nonnegative")

    def zeta(self, z):
        return complex(z) ** 2 - self.m**2


def _params(p):
    return p if isinstance(p, RadialParams) else RadialParams(*p)


def Phi_kappa(p, z, x, scaled=False):
    """Regular radial solution ``((z+m) phi_kappa, a*_kappa phi_kappa)``, shape (2, ...)."""
    p = _params(p)
    zeta = p.zeta(z)
    nu = p.kappa + 0.5
    f1 = (complex(z) + p.m) * np.asarray(g_entire(nu, zeta, x, scaled))
    f2 = np.asarray(g_entire(nu - 1, zeta, x, scaled))
    return np.array([f1, f2])


def _bhat(nu, zeta, x, scaled):
    # a*_kappa theta_kappa / zeta, written so that z = -m needs no division
    if _is_integer(nu):
        n = round(nu)
        return -np.asarray(h_entire(n - 1, zeta, x, scaled))
    return -np.asarray(g_entire(1 - nu, zeta, x, scaled)) / math.sin(nu * math.pi)


def Theta_kappa(p, z, x, scaled=False):
    """Singular radial solution with ``W(Theta_kappa, Phi_kappa) = 1``."""
    p = _params(p)
    zeta = p.zeta(z)
    nu = p.kappa + 0.5
    f1 = np.asarray(theta_l(p.kappa, zeta, x, scaled))
    f2 = (complex(z) - p.m) * _bhat(nu, zeta, x, scaled)
    return np.array([f1, f2])


def Psi_kappa(p, z, x, scaled=False):
    """Weyl solution ``Theta_kappa + M_kappa Phi_kappa``, square integrable near infinity."""
    p = _params(p)
    zeta = p.zeta(z)
    f1 = np.asarray(psi_l(p.kappa, zeta, x, scaled))
    f2 = np.asarray(astar_psi_l(p.kappa, zeta, x, scaled)) / (complex(z) + p.m)
    return np.array([f1, f2])


def M_kappa(p, z):
    """``m_kappa(z^2 - m^2)/(z + m)`` for ``z`` off the spectrum."""
    p = _params(p)
    z = complex(z)
    if z.imag == 0 and abs(z.real) >= p.m:
        raise BranchError("M_kappa is evaluated off (-inf, -m] and [m, inf)")
    if z == -p.m:
        raise BranchError("M_kappa has a pole at z = -m")
    return m_l(p.kappa, p.zeta(z)) / (z + p.m)


def rho_kappa_density(p, lam):
    """Density of the spectral measure of ``M_kappa`` (vectorized in ``lam``)."""
    p = _params(p)
    lam = np.asarray(lam, dtype=float)
    if p.m == 0:
        out = np.abs(lam) ** (2 * p.kappa) / np.pi
    else:
        on = np.abs(lam) >= p.m
        d = np.abs(lam**2 - p.m**2) ** (p.kappa + 0.5) / ((np.abs(lam) + p.m) * np.pi)
        out = np.where(on, d, 0.0)
    return float(out) if out.ndim == 0 else out


def nevanlinna_index(p) -> int:
    """Number of negative squares of ``M_kappa``'s kernel: ``floor(kappa + 1/2)``."""
    p = _params(p)
    return int(math.floor(p.kappa + 0.5 + 1e-12))


class RadialClosedForm:
    """Bundle of closed-form evaluators for fixed ``(kappa, m)``."""

    def __init__(self, kappa=0.0, m=0.0):
        self.params = RadialParams(kappa, m)

    @property
    def kappa(self):
        return self.params.kappa

    @property
    def m(self):
        return self.params.m

    def Phi(self, z, x, scaled=False):
        return Phi_kappa(self.params, z, x, scaled)

    def Theta(self, z, x, scaled=False):
        return Theta_kappa(self.params, z, x, scaled)

    def Psi(self, z, x, scaled=False):
        return Psi_kappa(self.params, z, x, scaled)

    def M(self, z):
        return M_kappa(self.params, z)

    def density(self, lam):
        return rho_kappa_density(self.params, lam)

    def potential(self, b=math.inf):
        from .operator import radial_potential
        return radial_potential(self.kappa, self.m, b)
