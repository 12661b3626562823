"""Gamma, Bessel and Hankel functions of real order and complex argument.

All branch cuts lie along the negative real axis; logarithms are principal
with ``Im log(w)`` in ``(-pi, pi]``.  Bessel values come from the AMOS
routines wrapped by :mod:`scipy.special`; the half-integer closed forms in
this module are kept separate so they can serve as an independent check.

Every Bessel entry point accepts ``scaled=True``.  ``J`` and ``Y`` are then
returned multiplied by ``exp(-|Im w|)`` and ``H^(1)`` by ``exp(-i w)``, so
that values whose magnitude would overflow stay representable.
"""
from __future__ import annotations

import numpy as np
from scipy import special as sp


class BranchError(ValueError):
    """Argument lies on a branch cut where the principal value is undefined."""


class PoleError(ValueError):
    """Argument hits a pole."""


def _is_integer(p, tol=1e-12):
    return abs(p - round(p)) <= tol


def gamma(x):
    """Euler Gamma function for real ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0) & (np.abs(x - np.round(x)) == 0)):
        raise PoleError("Gamma has poles at the nonpositive integers")
    out = sp.gamma(x)
    return float(out) if out.ndim == 0 else out


def rgamma(x):
    """Reciprocal Gamma, entire (zero at the poles of Gamma)."""
    return sp.rgamma(x)


def clog(w):
    """Principal logarithm with ``Im clog(w)`` in ``(-pi, pi]``.

    ``numpy.log`` maps ``-1 - 0j`` to ``-i pi``; here the negative real axis
    always gets ``+i pi``.
    """
    w = np.asarray(w, dtype=complex)
    if np.any(w == 0):
        raise BranchError("log(0) is undefined")
    arg = np.angle(w)
    arg = np.where(arg <= -np.pi, np.pi, arg)
    out = np.log(np.abs(w)) + 1j * arg
    return complex(out) if out.ndim == 0 else out


def _on_cut(w):
    w = np.asarray(w, dtype=complex)
    return (w.imag == 0) & (w.real < 0)


def cpow(w, p):
    """Principal power ``exp(p * clog(w))``.

    Raises :class:`BranchError` when ``w`` lies on the closed negative real
    axis and ``p`` is not an integer.
    """
    w = np.asarray(w, dtype=complex)
    if _is_integer(p):
        out = w ** int(round(p))
        return complex(out) if out.ndim == 0 else out
    if np.any(_on_cut(w)):
        raise BranchError(f"w^{p} evaluated on the negative real axis")
    zero = w == 0
    if np.any(zero) and p < 0:
        raise PoleError(f"0^{p}")
    safe = np.where(zero, 1.0, w)
    out = np.where(zero, 0.0, np.exp(p * clog(safe)))
    return complex(out) if out.ndim == 0 else out


def _principal_pow(w, p):
    # cut bookkeeping is the caller's job
    w = np.asarray(w, dtype=complex)
    arg = np.angle(w)
    arg = np.where(arg <= -np.pi, np.pi, arg)
    return np.exp(p * (np.log(np.abs(w)) + 1j * arg))


def _check_arg(nu, w, allow_zero):
    w = np.asarray(w, dtype=complex)
    if not allow_zero and np.any(w == 0):
        raise PoleError("Bessel function of the second kind is singular at 0")
    if not _is_integer(nu) and np.any(_on_cut(w)):
        raise BranchError(f"order {nu}: argument on the negative real axis")
    return w


def _ret(out):
    return complex(out) if np.ndim(out) == 0 else out


def bessel_j(nu, w, scaled=False):
    """Bessel function ``J_nu(w)``, principal branch."""
    w = _check_arg(nu, w, allow_zero=nu >= 0 or _is_integer(nu))
    return _ret(sp.jve(nu, w) if scaled else sp.jv(nu, w))


def bessel_y(nu, w, scaled=False):
    """Neumann function ``Y_nu(w)``, principal branch."""
    w = _check_arg(nu, w, allow_zero=False)
    return _ret(sp.yve(nu, w) if scaled else sp.yv(nu, w))


def hankel1(nu, w, scaled=False):
    """Hankel function ``H^(1)_nu(w) = J_nu(w) + i Y_nu(w)``."""
    w = _check_arg(nu, w, allow_zero=False)
    return _ret(sp.hankel1e(nu, w) if scaled else sp.hankel1(nu, w))


def bessel_pair(nu, w):
    """Return ``(J_nu, J_nu', Y_nu, Y_nu')`` at ``w`` using the order recurrences."""
    j, y = bessel_j(nu, w), bessel_y(nu, w)
    jm, ym = bessel_j(nu - 1, w), bessel_y(nu - 1, w)
    w = np.asarray(w, dtype=complex)
    return j, jm - nu / w * j, y, ym - nu / w * y


# --- half-integer closed forms -------------------------------------------------

def _spherical_coeffs(n):
    # j_n(w) = [P_n(1/w) sin w + Q_n(1/w) cos w] / w, from the Rayleigh recurrence
    # j_{n+1} = (2n+1)/w j_n - j_{n-1} with j_0 = sin/w, j_{-1} = cos/w.
    prev = (np.poly1d([0.0]), np.poly1d([1.0]))   # j_{-1}: cos w / w
    cur = (np.poly1d([1.0]), np.poly1d([0.0]))    # j_0:  sin w / w
    if n == -1:
        return prev
    r = np.poly1d([1.0, 0.0])                     # the variable 1/w
    for k in range(n):
        nxt = ((2 * k + 1) * r * cur[0] - prev[0], (2 * k + 1) * r * cur[1] - prev[1])
        prev, cur = cur, nxt
    return cur


def _spherical_j_series(n, w, terms=60):
    # j_n(w) = w^n / (2n+1)!! * sum_k (-w^2/2)^k / (k! (2n+3)(2n+5)...(2n+2k+1))
    lead = np.prod(np.arange(1, 2 * n + 2, 2, dtype=float))
    term = np.ones_like(w)
    total = term.copy()
    h = -w * w / 2
    for k in range(1, terms):
        term = term * h / (k * (2 * n + 2 * k + 1))
        total = total + term
    return w ** n / lead * total


def half_integer_j(n, w):
    """Closed form of ``J_{n+1/2}(w)`` for integer ``n >= -1`` (trigonometric sums).

    For ``n >= 1`` and ``|w| < n + 2`` the trigonometric sum cancels, so the
    ascending series of the same function is summed instead.
    """
    w = np.asarray(w, dtype=complex)
    p, q = _spherical_coeffs(n)
    with np.errstate(all="ignore"):
        jn = (p(1 / w) * np.sin(w) + q(1 / w) * np.cos(w)) / w
    if n >= 1:
        small = np.abs(w) < n + 2
        if np.any(small):
            jn = np.where(small, _spherical_j_series(n, np.where(small, w, 0)), jn)
    return _ret(np.sqrt(2 * w / np.pi) * jn)


def _upward(n, w, seed_m1, seed_0):
    # f_{k+1} = (2k+1)/w f_k - f_{k-1}: stable for the dominant spherical solutions
    prev, cur = seed_m1, seed_0
    if n == -1:
        return prev
    for k in range(n):
        prev, cur = cur, (2 * k + 1) / w * cur - prev
    return cur


def half_integer_y(n, w):
    """Closed form of ``Y_{n+1/2}(w) = (-1)^(n+1) J_{-n-1/2}(w)``.

    ``y_{-1} = sin w / w`` and ``y_0 = -cos w / w`` are carried upward by the
    spherical recurrence.
    """
    w = np.asarray(w, dtype=complex)
    yn = _upward(n, w, np.sin(w) / w, -np.cos(w) / w)
    return _ret(np.sqrt(2 * w / np.pi) * yn)


def half_integer_hankel1(n, w):
    """Closed form of ``H^(1)_{n+1/2}(w)`` from ``h_{-1} = e^{iw}/w``, ``h_0 = -i e^{iw}/w``.

    Carried upward directly rather than formed as ``J + iY``, which cancels
    for ``Im w > 0``.
    """
    w = np.asarray(w, dtype=complex)
    e = np.exp(1j * w) / w
    return _ret(np.sqrt(2 * w / np.pi) * _upward(n, w, e, -1j * e))


__all__ = [
    "BranchError", "PoleError", "gamma", "rgamma", "clog", "cpow",
    "bessel_j", "bessel_y", "hankel1", "bessel_pair",
    "half_integer_j", "half_integer_y", "half_integer_hankel1",
]
