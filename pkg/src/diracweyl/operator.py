"""Dirac operator model: intervals, potentials, Pauli algebra, Wronskians.

The differential expression is ``tau = (1/i) sigma_2 d/dx + Q(x)`` with

    Q(x) = q_el(x) 1 + q_am(x) sigma_1 + (m + q_sc(x)) sigma_3.

``tau u = z u`` is integrated in the normal form ``u' = J (z - Q) u`` with
``J = [[0, 1], [-1, 0]]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate

from ._expr import compile_expression

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)
J = np.array([[0.0, 1.0], [-1.0, 0.0]])

# real-coefficient form of (1/i) sigma_2
D_MATRIX = np.array([[0.0, -1.0], [1.0, 0.0]])


class DomainError(ValueError):
    """Evaluation point outside the open interval (or outside tabulated data)."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class SingularReductionError(RuntimeError):
    """d'Alembert reduction hit a zero of the dividing component."""


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"interval needs a < b, got ({self.a}, {self.b})")

    @property
    def a_finite(self):
        return math.isfinite(self.a)

    @property
    def b_finite(self):
        return math.isfinite(self.b)

    def contains(self, x, closed=False):
        """Membership in the open interval, or with ``closed`` its closure in R."""
        x = np.asarray(x, dtype=float)
        if closed:
            return (x >= self.a) & (x <= self.b) & np.isfinite(x)
        return (x > self.a) & (x < self.b)

    def check(self, x, closed=False):
        if not np.all(self.contains(x, closed)):
            kind = "closed" if closed else "open"
            raise DomainError(f"x outside the {kind} interval ({self.a}, {self.b})")

    @property
    def length(self):
        return self.b - self.a


REGULARITIES = ("L1loc", "L1loc-log", "smooth")


@dataclass(frozen=True)
class Coefficient:
    """Real coefficient function ``x -> q(x)``.

    ``doc`` holds the JSON description when the coefficient came from (or can
    be written to) a problem file; coefficients built from arbitrary Python
    callables carry ``doc=None``.
    """

    fn: Callable = field(compare=False)
    regularity: str = "smooth"
    doc: dict | None = None
    is_zero: bool = False

    def __call__(self, x):
        return self.fn(x)

    @classmethod
    def zero(cls):
        return cls(lambda x: np.zeros_like(np.asarray(x, dtype=float)), "smooth",
                   {"kind": "zero"}, True)

    @classmethod
    def const(cls, value):
        value = float(value)
        if value == 0.0:
            return cls.zero()
        return cls(lambda x: np.full_like(np.asarray(x, dtype=float), value), "smooth",
                   {"kind": "const", "value": value})

    @classmethod
    def expr(cls, text, regularity="smooth"):
        return cls(compile_expression(text), regularity, {"kind": "expr", "expr": text})

    @classmethod
    def table(cls, xs, ys, regularity="L1loc"):
        xs = np.array(xs, dtype=float)
        ys = np.array(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("table needs matching 1-d x and y arrays with >= 2 entries")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("table x must be strictly increasing")
        xs.setflags(write=False)
        ys.setflags(write=False)
        lo, hi = xs[0], xs[-1]

        def fn(x):
            x = np.asarray(x, dtype=float)
            if np.any((x < lo) | (x > hi)):
                raise DomainError(f"table covers [{lo}, {hi}] only")
            return np.interp(x, xs, ys)

        return cls(fn, regularity, {"kind": "table", "x": xs.tolist(), "y": ys.tolist()})

    @classmethod
    def from_callable(cls, fn, regularity="smooth"):
        return cls(lambda x: np.asarray(fn(np.asarray(x, dtype=float)), dtype=float) *
                   np.ones_like(np.asarray(x, dtype=float)), regularity, None)

    @property
    def const_value(self):
        if self.is_zero:
            return 0.0
        if self.doc is not None and self.doc.get("kind") == "const":
            return self.doc["value"]
        return None


def _coef(c):
    if isinstance(c, Coefficient):
        return c
    if c is None or (np.isscalar(c) and c == 0):
        return Coefficient.zero()
    if np.isscalar(c):
        return Coefficient.const(c)
    if isinstance(c, str):
        return Coefficient.expr(c)
    return Coefficient.from_callable(c)


@dataclass(frozen=True)
class DiracPotential:
    """Coefficients ``(m, q_sc, q_el, q_am)`` on an interval.

    Coefficients may be given as :class:`Coefficient`, numbers, expression
    strings or callables; they are normalized on construction.
    """

    interval: Interval
    m: float = 0.0
    q_sc: Coefficient = field(default_factory=Coefficient.zero)
    q_el: Coefficient = field(default_factory=Coefficient.zero)
    q_am: Coefficient = field(default_factory=Coefficient.zero)

    def __post_init__(self):
        if not isinstance(self.interval, Interval):
            object.__setattr__(self, "interval", Interval(*self.interval))
        if self.m < 0:
            raise ValueError("mass must be nonnegative")
        object.__setattr__(self, "m", float(self.m))
        for name in ("q_sc", "q_el", "q_am"):
            object.__setattr__(self, name, _coef(getattr(self, name)))

    def entries(self, x):
        """Return ``(Q11, Q12, Q22)`` at ``x`` without the domain check."""
        x = np.asarray(x, dtype=float)
        el = self.q_el(x)
        mass = self.m + self.q_sc(x)
        return el + mass, self.q_am(x), el - mass

    def Q(self, x):
        return evaluate_Q(self, x)

    def with_(self, **kw):
        return replace(self, **kw)


def free_potential(a=0.0, b=math.inf, m=0.0):
    return DiracPotential(Interval(a, b), m)


def radial_potential(kappa, m=0.0, b=math.inf, perturbation=None):
    """``Q_kappa(x) = m sigma_3 + (kappa/x) sigma_1`` on ``(0, b)``.

    ``perturbation`` may be a callable ``x -> q`` added to ``q_am``.
    """
    kappa = float(kappa)
    if perturbation is None:
        if kappa == 0.0:
            q_am = Coefficient.zero()
        else:
            q_am = Coefficient(lambda x: kappa / np.asarray(x, dtype=float), "L1loc",
                               {"kind": "expr", "expr": f"{kappa!r}/x"})
    else:
        q_am = Coefficient.from_callable(
            lambda x: kappa / x + perturbation(x), "L1loc")
    return DiracPotential(Interval(0.0, b), m, q_am=q_am)


def evaluate_Q(pot: DiracPotential, x: float) -> np.ndarray:
    """Potential matrix ``Q(x)`` (real symmetric 2x2) at an interior point."""
    pot.interval.check(x)
    q11, q12, q22 = (float(v) for v in pot.entries(x))
    return np.array([[q11, q12], [q12, q22]])


def wronskian(f, g):
    """``W(f, g) = f1 g2 - f2 g1``; arrays broadcast over trailing axes."""
    f = np.asarray(f)
    g = np.asarray(g)
    return f[0] * g[1] - f[1] * g[0]


def apply_tau(pot, f, df, x):
    """``(tau f)(x)`` from samples of ``f`` and ``f'`` (shape ``(2, ...)``)."""
    q11, q12, q22 = pot.entries(x)
    f = np.asarray(f)
    df = np.asarray(df)
    return np.array([-df[1] + q11 * f[0] + q12 * f[1], df[0] + q12 * f[0] + q22 * f[1]])


# --- gauge transformations --------------------------------------------------------

def _antiderivative(q: Coefficient, x_ref, abstol=1e-10):
    c = q.const_value
    if c is not None:
        return lambda x: c * (np.asarray(x, dtype=float) - x_ref)

    def one(x):
        val, err = integrate.quad(q.fn, x_ref, x, epsabs=abstol, epsrel=1e-12, limit=200)
        if not math.isfinite(val) or err > 10 * max(abstol, 1e-12 * abs(val)):
            raise QuadratureError(f"integral of coefficient from {x_ref} to {x} failed "
                                  f"(estimate {val}, error {err})")
        return val

    def phase(x):
        x = np.asarray(x, dtype=float)
        return np.vectorize(one, otypes=[float])(x)

    return phase


def gauge_eliminate_electrostatic(pot: DiracPotential, x_ref: float) -> DiracPotential:
    """Rotate away ``q_el`` with ``phi(x) = int_{x_ref}^x q_el``.

    The result has ``q_el = 0`` and ``m = 0`` with the mass folded into ``q_sc``.
    """
    mass_c = pot.q_sc.const_value
    if pot.q_el.is_zero:
        if pot.m == 0.0:
            return pot
        if mass_c is not None:
            q_sc = Coefficient.const(pot.m + mass_c)
        else:
            q_sc = Coefficient(lambda x: pot.m + pot.q_sc(x), pot.q_sc.regularity)
        return replace(pot, m=0.0, q_sc=q_sc)

    phi = _antiderivative(pot.q_el, x_ref)

    def new_am(x):
        t = 2 * phi(x)
        return pot.q_am(x) * np.cos(t) - (pot.m + pot.q_sc(x)) * np.sin(t)

    def new_sc(x):
        t = 2 * phi(x)
        return (pot.m + pot.q_sc(x)) * np.cos(t) + pot.q_am(x) * np.sin(t)

    reg = "smooth" if all(c.regularity == "smooth" for c in (pot.q_sc, pot.q_el, pot.q_am)) \
        else "L1loc"
    return DiracPotential(pot.interval, 0.0, Coefficient(new_sc, reg), Coefficient.zero(),
                          Coefficient(new_am, reg))


def gauge_eliminate_magnetic(q_mg, x_ref: float):
    """Phase ``x -> exp(-i int_{x_ref}^x q_mg)`` conjugating away a magnetic term."""
    phi = _antiderivative(_coef(q_mg), x_ref)
    return lambda x: np.exp(-1j * phi(x))


def electrostatic_rotation(phi):
    """The rotation matrix used by :func:`gauge_eliminate_electrostatic`."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def reflect(pot: DiracPotential) -> DiracPotential:
    """Mirror ``x -> a + b - x``; solutions map as ``u -> sigma_3 u(a + b - x)``.

    Conjugating by ``sigma_3`` restores the sign of the derivative term, which
    flips the sign of ``q_am``.
    """
    a, b = pot.interval.a, pot.interval.b
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("reflection needs a bounded interval")
    s = a + b

    def mirror(c: Coefficient, sign=1.0):
        if c.is_zero:
            return c
        if c.const_value is not None:
            return Coefficient.const(sign * c.const_value)
        return Coefficient(lambda x: sign * c(s - np.asarray(x, dtype=float)), c.regularity)

    return DiracPotential(pot.interval, pot.m, mirror(pot.q_sc), mirror(pot.q_el),
                          mirror(pot.q_am, -1.0))


# --- JSON ----------------------------------------------------------------------

def _endpoint(v):
    if v is None:
        return None
    if isinstance(v, str):
        v = v.strip().lower()
        if v in ("inf", "+inf", "infinity"):
            return math.inf
        if v in ("-inf", "-infinity"):
            return -math.inf
        return float(v)
    return float(v)


def coefficient_from_json(doc) -> Coefficient:
    if doc is None:
        return Coefficient.zero()
    if isinstance(doc, (int, float)):
        return Coefficient.const(doc)
    kind = doc.get("kind")
    reg = doc.get("regularity")
    if kind == "zero":
        return Coefficient.zero()
    if kind == "const":
        return Coefficient.const(doc["value"])
    if kind == "expr":
        return Coefficient.expr(doc["expr"], reg or "smooth")
    if kind == "table":
        return Coefficient.table(doc["x"], doc["y"], reg or "L1loc")
    raise ValueError(f"unknown coefficient kind {kind!r}")


def potential_from_json(doc: dict) -> DiracPotential:
    a, b = doc["interval"]
    a = _endpoint(a) if a is not None else -math.inf
    b = _endpoint(b) if b is not None else math.inf
    return DiracPotential(
        Interval(a, b),
        float(doc.get("m", 0.0)),
        coefficient_from_json(doc.get("q_sc")),
        coefficient_from_json(doc.get("q_el")),
        coefficient_from_json(doc.get("q_am")),
    )


def _json_num(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def potential_to_json(pot: DiracPotential) -> dict:
    out = {"interval": [_json_num(pot.interval.a), _json_num(pot.interval.b)], "m": pot.m}
    for name in ("q_sc", "q_el", "q_am"):
        c = getattr(pot, name)
        if c.doc is None:
            raise ValueError(f"{name} was built from a Python callable and has no JSON form")
        out[name] = dict(c.doc)
    return out


# --- d'Alembert reduction -----------------------------------------------------------

def dalembert_second(pot, z, u, x_ref, variant="first", xs=None, abstol=1e-10,
                     n_dense=2001):
    """Second solution ``v`` with ``W(v, u) = 1`` from a known solution ``u``.

    ``variant="first"`` divides by ``u_1``:
        v = u int_{x_ref}^x (Q22 - z)/u1^2 - (0, 1/u1);
    ``variant="second"`` divides by ``u_2``:
        v = u int_{x_ref}^x (Q11 - z)/u2^2 + (1/u2, 0).

    ``u`` is any vectorized callable ``x -> (2, n)`` with a ``span`` attribute
    when ``xs`` is omitted.  The integral is accumulated over a dense grid
    (``xs`` merged with ``n_dense`` uniform points) using composite
    Gauss-Legendre rules of order 10 and 20 per cell; the grid is doubled
    until the two agree to ``abstol``.  The result is a cubic-Hermite
    :class:`~diracweyl.ode.SolutionTrajectory` through the dense samples.
    """
    from .ode import SolutionTrajectory

    if variant not in ("first", "second"):
        raise ValueError("variant must be 'first' or 'second'")
    comp = 0 if variant == "first" else 1
    if xs is None:
        xs = np.linspace(u.span[0], u.span[1], 401)
    xs = np.asarray(xs, dtype=float)
    lo, hi = min(xs.min(), x_ref), max(xs.max(), x_ref)
    z = complex(z)

    def integrand(r):
        q11, _, q22 = pot.entries(r)
        q = q22 if comp == 0 else q11
        return (q - z) / np.asarray(u(r))[comp] ** 2

    n = n_dense
    for _ in range(6):
        grid = np.unique(np.concatenate((xs, [x_ref], np.linspace(lo, hi, n))))
        vals = np.asarray(u(grid))
        c = vals[comp]
        if np.min(np.abs(c)) < 1e-8 * np.max(np.abs(c)):
            raise SingularReductionError(
                f"component u{comp + 1} vanishes on the working subinterval")
        real_valued = np.all(np.abs(c.imag) <= 1e-12 * np.abs(c).max())
        if real_valued and np.any(np.diff(np.sign(c.real)) != 0):
            raise SingularReductionError(f"component u{comp + 1} changes sign")
        cells10 = _cell_integrals(integrand, grid, 10)
        cells20 = _cell_integrals(integrand, grid, 20)
        if not np.all(np.isfinite(cells20)):
            raise QuadratureError("d'Alembert integrand is not finite on the grid")
        if np.sum(np.abs(cells20 - cells10)) <= abstol:
            break
        n = 2 * n
    else:
        raise QuadratureError("d'Alembert integral did not converge under grid refinement")

    cum = np.concatenate(([0j], np.cumsum(cells20)))
    k_ref = int(np.searchsorted(grid, x_ref))
    integral = cum - cum[k_ref]
    if comp == 0:
        v = vals * integral - np.array([np.zeros_like(c), 1.0 / c])
    else:
        v = vals * integral + np.array([1.0 / c, np.zeros_like(c)])
    return SolutionTrajectory.from_samples(pot, z, grid, v, base_x=x_ref)


def _cell_integrals(f, grid, order):
    t, w = np.polynomial.legendre.leggauss(order)
    a, b = grid[:-1], grid[1:]
    h = (b - a) / 2
    pts = (a[:, None] + h[:, None] * (t[None, :] + 1)).ravel()
    vals = np.asarray(f(pts)).reshape(len(a), order)
    return (vals * w[None, :]).sum(axis=1) * h
