"""Eigenvalues, norming constants and the spectral transform for discrete spectra."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .ode import DEFAULT_TOL
from .operator import reflect, wronskian
from .weyl import (GridFunction, SingularFrame, boundary_solution, graded_quadrature,
                   greens_function, regular_frame, singular_M, weyl_psi)

SIGMA3 = np.array([1.0, -1.0])


@dataclass(frozen=True)
class EigenPair:
    n: int
    lam: float
    gamma_sq: float

    def __post_init__(self):
        if not self.gamma_sq > 0:
            raise ValueError("norming constants are positive")


@dataclass
class DiscreteSpectralMeasure:
    """``rho = sum_n gamma_n^-2 delta_{lambda_n}``."""

    pairs: list

    def __post_init__(self):
        self.pairs = sorted(self.pairs, key=lambda p: p.lam)
        lam = self.atoms
        if np.any(np.diff(lam) <= 0):
            raise ValueError("atoms must be distinct")

    @property
    def atoms(self):
        return np.array([p.lam for p in self.pairs])

    @property
    def gamma_sq(self):
        return np.array([p.gamma_sq for p in self.pairs])

    @property
    def weights(self):
        return 1.0 / self.gamma_sq

    def __len__(self):
        return len(self.pairs)

    def rescaled(self, g):
        """Measure of the frame ``Phi -> e^g Phi``: weights times ``e^-2g(lambda_n)``."""
        return DiscreteSpectralMeasure([
            EigenPair(p.n, p.lam, p.gamma_sq * math.exp(2 * g(p.lam))) for p in self.pairs])

    @classmethod
    def from_arrays(cls, lam, gamma_sq):
        return cls([EigenPair(i, float(l), float(g)) for i, (l, g) in enumerate(zip(lam, gamma_sq))])


# --- the solution near b ---------------------------------------------------------

def right_solution(pot, make_frame):
    """``Pi(lam, x)`` lying in the domain near ``b``, by reflecting ``x -> a + b - x``.

    ``make_frame(reflected_pot)`` must return a frame whose ``Phi`` satisfies
    the boundary condition at the left end of the reflected problem.
    """
    a, b = pot.interval.a, pot.interval.b
    mirror = make_frame(reflect(pot))

    def Pi(lam, x):
        x = np.asarray(x, dtype=float)
        v = _phi_at(mirror, lam, a + b - x)
        return SIGMA3.reshape((2,) + (1,) * x.ndim) * v

    return Pi


def _phi_at(frame, lam, x):
    point = getattr(frame, "Phi_point", None)
    if point is not None and np.ndim(x) == 0:
        return point(lam, x)
    return frame.Phi(lam, x)


def shooting_wronskian(frame: SingularFrame, Pi, x0):
    """``lam -> W(Phi(lam, x0), Pi(lam, x0))``, real on the real axis."""

    def W(lam):
        w = complex(wronskian(_phi_at(frame, lam, x0), Pi(lam, x0)))
        return w.real

    return W


# --- eigenvalues -------------------------------------------------------------------

@dataclass
class EigenvalueScan:
    eigenvalues: np.ndarray
    double_root_candidates: list
    grid_points: int
    suspected_missed: bool
    gap_ratio: float = field(default=math.nan)


def eigenvalues(W, window, grid=128, xtol=1e-10, max_doublings=4, double_tol=1e-6):
    """Zeros of ``W`` in ``window`` by sign-change bracketing and Brent's method.

    The scan grid doubles until two successive root counts agree.  Points
    where ``|W|`` has a small local minimum without a sign change are
    reported as double-root candidates.  ``suspected_missed`` is set when the
    count never stabilized or a spacing exceeds 1.8 times both neighbours.
    """
    lo, hi = map(float, window)
    if not hi > lo:
        raise ValueError("empty window")
    cache = {}

    def f(l):
        if l not in cache:
            cache[l] = W(l)
        return cache[l]

    def scan(n):
        ls = np.linspace(lo, hi, n + 1)
        vals = np.array([f(l) for l in ls])
        return ls, vals

    n = int(grid)
    prev = None
    stable = False
    for _ in range(max_doublings + 1):
        ls, vals = scan(n)
        sign = np.sign(vals)
        idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
        exact = ls[vals == 0.0]
        count = idx.size + exact.size
        if prev is not None and count == prev:
            stable = True
            break
        prev = count
        n *= 2
    roots = [brentq(f, ls[i], ls[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)
             for i in idx]
    roots = np.sort(np.concatenate((np.array(roots), exact)))
    scale = np.abs(vals).max()
    av = np.abs(vals)
    doubles = [float(ls[i]) for i in range(1, av.size - 1)
               if av[i] <= av[i - 1] and av[i] <= av[i + 1] and av[i] < double_tol * scale
               and sign[i - 1] == sign[i + 1] and vals[i] != 0]
    gap_ratio = math.nan
    missed = not stable
    if roots.size >= 3:
        g = np.diff(roots)
        r = g[1:-1] / np.maximum(g[:-2], g[2:]) if g.size >= 3 else np.array([])
        gap_ratio = float(r.max()) if r.size else math.nan
        missed = missed or bool(r.size and gap_ratio > 1.8)
    return EigenvalueScan(roots, doubles, n + 1, missed, gap_ratio)


# --- norming constants and transforms ------------------------------------------------

def _quad(frame, quad):
    if quad is None:
        a, b = frame.domain
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError("an explicit quadrature is needed on unbounded domains")
        return graded_quadrature(a, b, n_cells=64, order=20, grade_a=True, grade_b=True)
    return quad


def norming_constant(frame, lam, quad=None):
    """``gamma^2 = int |Phi(lam, x)|^2 dx``."""
    nodes, w = _quad(frame, quad)
    phi = frame.Phi(lam, nodes).reshape(2, -1)
    g = float(np.sum(w * np.sum(np.abs(phi) ** 2, axis=0)))
    if not (math.isfinite(g) and g > 0):
        raise ValueError(f"norm integral at lam={lam!r} is not finite and positive")
    return g


def spectral_measure(frame, eigs, quad=None):
    return DiscreteSpectralMeasure([EigenPair(i, float(l), norming_constant(frame, l, quad))
                                    for i, l in enumerate(eigs)])


def _phi_table(frame, measure, nodes):
    return np.array([frame.Phi(l, nodes).reshape(2, -1).real for l in measure.atoms])  # (N, 2, n)


def forward_transform(frame, measure, f, quad=None):
    """``f_hat(lam_n) = int Phi(lam_n, x) . f(x) dx`` for a callable ``f``."""
    nodes, w = _quad(frame, quad)
    fv = np.asarray(f(nodes)).reshape(2, -1)
    table = _phi_table(frame, measure, nodes)
    return np.einsum("kin,in,n->k", table, fv, w)


def inverse_transform(frame, measure, fhat, xs):
    """``sum_n Phi(lam_n, x) f_hat_n gamma_n^-2`` on ``xs``."""
    xs = np.asarray(xs, dtype=float)
    table = _phi_table(frame, measure, xs)
    vals = np.einsum("kin,k->in", table, np.asarray(fhat) * measure.weights)
    return GridFunction(xs, vals)


def parseval_defect(frame, measure, f, quad=None):
    """``| ||f||^2 - sum |f_hat|^2 gamma^-2 | / ||f||^2``."""
    nodes, w = _quad(frame, quad)
    fv = np.asarray(f(nodes)).reshape(2, -1)
    norm2 = float(np.sum(w * np.sum(np.abs(fv) ** 2, axis=0)))
    fhat = forward_transform(frame, measure, f, (nodes, w))
    return abs(norm2 - float(np.sum(np.abs(fhat) ** 2 * measure.weights))) / norm2


def roundtrip_defect(frame, measure, f, quad=None):
    """``||U^-1 U f - f|| / ||f||`` on the quadrature nodes."""
    nodes, w = _quad(frame, quad)
    fv = np.asarray(f(nodes)).reshape(2, -1)
    fhat = forward_transform(frame, measure, f, (nodes, w))
    back = inverse_transform(frame, measure, fhat, nodes).values
    err = np.sum(w * np.sum(np.abs(back - fv) ** 2, axis=0))
    return float(np.sqrt(err / np.sum(w * np.sum(np.abs(fv) ** 2, axis=0))))


# --- Green's function identities -----------------------------------------------------

def _split_quad(a, b, x, n_cells=48, order=20):
    n1 = max(4, int(round(n_cells * (x - a) / (b - a))))
    q1 = graded_quadrature(a, x, n1, order, grade_a=True)
    q2 = graded_quadrature(x, b, max(4, n_cells - n1), order, grade_b=True)
    return np.concatenate((q1[0], q2[0])), np.concatenate((q1[1], q2[1]))


def _green_rows(frame, M_eval, z, x, ys):
    """``G_i(z, x, y)`` for ``i = 1, 2`` as an array (2, 2, n): row index, component, y."""
    M = complex(M_eval(z))
    psi_x, phi_x = weyl_psi(frame, M, z, x), frame.Phi(z, x)
    psi_y = weyl_psi(frame, M, z, ys).reshape(2, -1)
    phi_y = frame.Phi(z, ys).reshape(2, -1)
    lower = ys < x
    G = np.where(lower[None, None, :], psi_x[:, None, None] * phi_y[None, :, :],
                 phi_x[:, None, None] * psi_y[None, :, :])
    return G


def _dz_green_rows(frame, M_eval, z, x, ys, r, n_circle=16):
    # Cauchy integral on a circle of radius r around z
    theta = 2 * np.pi * np.arange(n_circle) / n_circle
    acc = 0
    for t in theta:
        e = np.exp(1j * t)
        acc = acc + _green_rows(frame, M_eval, z + r * e, x, ys) / e
    return acc / (n_circle * r)


def green_transform_check(frame, measure, M_eval, z, x, k=0, radius=None, n_cells=48):
    """``max_{n,i} |U(d_z^k G_i(z, x, .))(lam_n) - k! Phi_i(lam_n, x)/(lam_n - z)^(k+1)|``.

    ``d_z G`` is a Cauchy-circle derivative of radius ``radius`` (default
    ``Im z / 4``).
    """
    z = complex(z)
    if z.imag == 0:
        raise ValueError("z must be nonreal")
    if k not in (0, 1):
        raise ValueError("derivative order must be 0 or 1")
    a, b = frame.domain
    nodes, w = _split_quad(a, b, x, n_cells)
    if k == 0:
        G = _green_rows(frame, M_eval, z, x, nodes)
    else:
        G = _dz_green_rows(frame, M_eval, z, x, nodes, radius or abs(z.imag) / 4)
    table = _phi_table(frame, measure, nodes)              # (N, 2, n)
    U = np.einsum("kjn,ijn,n->ki", table, G, w)             # (N, 2)
    lam = measure.atoms
    phix = np.array([frame.Phi(l, x).real for l in lam])   # (N, 2)
    target = math.factorial(k) * phix / ((lam - z) ** (k + 1))[:, None]
    return float(np.abs(U - target).max())


def resolvent_green_check(frame, M_eval, z, x, y):
    """Symmetry defect ``|G(z, x, y) - G(z, y, x)^T|``."""
    M = complex(M_eval(z))
    return float(np.abs(greens_function(frame, M, z, x, y) - greens_function(frame, M, z, y, x).T).max())


# --- Weyl function from the atoms ---------------------------------------------------

def _tail_correction(lam, wts, z):
    """Midpoint-rule tail of ``sum (1/(l - z) - l/(1 + l^2)) w`` beyond both ends.

    Uses the spacing and weight of the outermost atoms on each side.
    """
    tail = 0j
    if lam.size >= 4:
        d_hi, w_hi = lam[-1] - lam[-2], wts[-1]
        L = lam[-1] + d_hi / 2
        if lam[-1] > 0:
            tail += w_hi / d_hi * (0.5 * np.log1p(L * L) - np.log(L - z))
        d_lo, w_lo = lam[1] - lam[0], wts[0]
        L = -(lam[0] - d_lo / 2)
        if lam[0] < 0:
            tail += w_lo / d_lo * (np.log(L + z) - 0.5 * np.log1p(L * L))
    return tail


def discrete_weyl_representation_check(M_eval, measure, z, tail=True):
    """Defect of ``M(z) = Re M(i) + sum (1/(lam_n - z) - lam_n/(1 + lam_n^2)) gamma_n^-2``.

    Returns ``(defect, tail_correction)``; the correction is included in the
    defect when ``tail`` is true.
    """
    z = complex(z)
    lam, wts = measure.atoms, measure.weights
    s = np.sum((1.0 / (lam - z) - lam / (1 + lam ** 2)) * wts)
    corr = _tail_correction(lam, wts, z)
    rhs = complex(M_eval(1j)).real + s + (corr if tail else 0)
    return abs(complex(M_eval(z)) - rhs), corr


# --- two-point Dirichlet problems --------------------------------------------------

class RegularProblem:
    """Dirichlet conditions ``u1 = 0`` at both ends of a finite interval.

    Bundles the left frame, the reflected right solution, the shooting
    Wronskian and ``M`` built from the solution satisfying the condition at ``b``.
    """

    def __init__(self, pot, tol=DEFAULT_TOL):
        a, b = pot.interval.a, pot.interval.b
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError("a regular problem needs a finite interval")
        self.pot, self.tol, self.span = pot, tol, (a, b)
        self.frame = regular_frame(pot, self.span, tol)
        self.Pi = right_solution(pot, lambda q: regular_frame(q, self.span, tol))
        self.W = shooting_wronskian(self.frame, self.Pi, 0.5 * (a + b))

    def M(self, z):
        u = boundary_solution(self.pot, z, self.span[1], self.span, tol=self.tol)
        return singular_M(self.frame, u)

    def spectrum(self, window, **kw) -> EigenvalueScan:
        return eigenvalues(self.W, window, **kw)

    def measure(self, eigs, quad=None) -> DiscreteSpectralMeasure:
        return spectral_measure(self.frame, eigs, quad)


# --- counting exponent --------------------------------------------------------------

def convergence_exponent_estimate(eigs, fit_fraction=0.75):
    """Exponent ``s`` in ``N(r) = #{|lam_n| <= r} ~ C r^s`` by a log-log fit.

    Only the largest ``fit_fraction`` of the moduli enter the fit.
    """
    r = np.sort(np.abs(np.asarray(eigs, dtype=float)))
    if r.size < 20:
        raise ValueError("need at least 20 eigenvalues")
    N = np.arange(1, r.size + 1)
    start = int(r.size * (1 - fit_fraction))
    rr, NN = r[start:], N[start:]
    keep = rr > 0
    if np.ptp(np.log(rr[keep])) < 1e-8:
        raise ValueError("eigenvalue moduli do not spread; exponent undefined")
    return float(np.polyfit(np.log(rr[keep]), np.log(NN[keep]), 1)[0])
