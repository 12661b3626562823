import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracweyl import radial as R
from diracweyl.ode import (DEFAULT_TOL, ODETolerance, SolutionTrajectory, fundamental_system,
                           integrate, integrate_span, residual)
from diracweyl.operator import (Coefficient, DiracPotential, DomainError, Interval, free_potential,
                                radial_potential, wronskian)


def free_cs(z, xs, c=0.0):
    t = z * (np.asarray(xs) - c)
    return np.array([np.cos(t), -np.sin(t)]), np.array([np.sin(t), np.cos(t)])


def test_tolerance_defaults_and_validation():
    assert (DEFAULT_TOL.rel, DEFAULT_TOL.abs) == (1e-10, 1e-12)
    with pytest.raises(ValueError):
        ODETolerance(rel=0.0)


def test_free_quarter_turns():
    pot = free_potential()
    u = integrate(pot, 1.0, 0.0, [0, 1], math.pi / 2)
    assert np.allclose(u(math.pi / 2), [1, 0], atol=1e-10)
    v = integrate(pot, 1.0, 0.0, [1, 0], math.pi / 2)
    assert np.allclose(v(math.pi / 2), [0, -1], atol=1e-10)


def test_radial_kappa1_matches_closed_form():
    p = R.RadialParams(1.0, 0.0)
    pot = radial_potential(1.0)
    u = integrate(pot, 2.0, 0.1, R.Phi_kappa(p, 2.0, 0.1), 1.0)
    ref = R.Phi_kappa(p, 2.0, 1.0)
    assert np.linalg.norm(u(1.0) - ref) / np.linalg.norm(ref) < 1e-7


@pytest.mark.parametrize("z", [1.0, 50.0, -50.0, 50j, 30 + 40j, 0.1j, 5 - 2j])
def test_free_fundamental_system(z):
    c_sol, s_sol = fundamental_system(free_potential(-10, 10), z, 0.0, span=(-2.5, 2.5))
    xs = np.linspace(-2.5, 2.5, 101)
    C, S = free_cs(z, xs)
    scale = np.exp(abs(complex(z).imag) * np.abs(xs))
    assert (np.abs(c_sol(xs) - C) / scale).max() < 1e-8
    assert (np.abs(s_sol(xs) - S) / scale).max() < 1e-8


def smooth_potential(a, b, c):
    return DiracPotential(Interval(-1, 6), 0.3, Coefficient.expr(f"{a}*sin(x)"),
                          Coefficient.expr(f"{b}*exp(-x^2)"), Coefficient.expr(f"{c}*cos(2*x)"))


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-5, 5), st.floats(-3, 3))
def test_wronskian_constant_and_conjugation(a, b, c, re, im):
    pot = smooth_potential(a, b, c)
    z = complex(re, im)
    cs, ss = fundamental_system(pot, z, 0.5, span=(0.0, 5.0))
    xs = np.linspace(0.0, 5.0, 41)
    C, S = cs(xs), ss(xs)
    W = wronskian(C, S)
    # growing pairs cancel in W; measure against |c||s| once that exceeds 1
    size = np.maximum(1.0, np.linalg.norm(C, axis=0) * np.linalg.norm(S, axis=0))
    assert np.all(np.abs(W - 1) <= 1e-8 * 2 * size)
    cc, sc = fundamental_system(pot, z.conjugate(), 0.5, span=(0.0, 5.0))
    scale = np.exp(abs(im) * np.abs(xs - 0.5))
    assert (np.abs(cc(xs) - np.conj(cs(xs))) / scale).max() < 1e-9


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-8, 8))
def test_wronskian_constant_real_z(a, b, c, lam):
    pot = smooth_potential(a, b, c)
    cs, ss = fundamental_system(pot, lam, 0.5, span=(-1.0, 6.0))
    xs = np.linspace(-1.0, 6.0, 71)
    assert np.abs(wronskian(cs(xs), ss(xs)) - 1).max() <= 1e-8 * 2


def test_linearity():
    pot = smooth_potential(1.0, -0.5, 0.7)
    z, x1 = 1.5 + 0.5j, 4.0
    u = integrate(pot, z, 0.0, [1, 2j], x1)(x1)
    v = integrate(pot, z, 0.0, [-1j, 0.5], x1)(x1)
    al, be = 0.3 - 1j, 2.0
    w = integrate(pot, z, 0.0, al * np.array([1, 2j]) + be * np.array([-1j, 0.5]), x1)(x1)
    assert np.linalg.norm(w - al * u - be * v) <= 1e-8 * np.linalg.norm(w)


def test_scaled_large_imaginary_part():
    traj = integrate(free_potential(), 200j, 0.0, [0, 1], 5.0)
    assert traj.scale_exponent(5.0) == pytest.approx(1000.0)
    v = traj.scaled(5.0)
    # s = (sin zx, cos zx) grows like e^{200 x}/2
    assert np.allclose(v, [0.5j, 0.5], rtol=1e-8)


def test_residual_small_on_integrator_and_closed_form():
    pot = smooth_potential(0.5, 0.5, 0.5)
    traj = integrate(pot, 2.0 + 1j, 0.0, [1, 0], 3.0)
    bound = 100 * (DEFAULT_TOL.rel * np.linalg.norm(traj(1.7)) + DEFAULT_TOL.abs)
    assert residual(pot, traj, 1.7) < max(bound, 1e-7)
    free = free_potential()
    xs = np.linspace(0.0, 2.0, 400)
    exact = SolutionTrajectory.from_samples(free, 1.0, xs, free_cs(1.0, xs)[1])
    assert residual(free, exact, 1.0) < 1e-8


def test_residual_detects_corruption():
    free = free_potential()
    xs = np.linspace(0.0, 2.0, 400)
    vals = free_cs(1.0, xs)[1]
    vals[0, 200] += 1e-3
    bad = SolutionTrajectory.from_samples(free, 1.0, xs, vals)
    assert residual(free, bad, xs[200]) > 1e4 * residual(free, bad, xs[50])


def test_integrate_span_both_sides():
    traj = integrate_span(free_potential(), 1.0, 1.0, [0, 1], 0.0, 2.0)
    xs = np.linspace(0, 2, 9)
    assert np.allclose(traj(xs), free_cs(1.0, xs, 1.0)[1], atol=1e-9)
    with pytest.raises(ValueError):
        traj(2.5)


def test_domain_and_singular_start():
    with pytest.raises(DomainError):
        integrate(free_potential(0, 1), 1.0, 0.5, [1, 0], 1.5)
    with pytest.raises(DomainError), np.errstate(divide="ignore"):
        integrate(radial_potential(1.0), 1.0, 0.0, [0, 1], 1.0)


def test_csv_export(tmp_path):
    traj = integrate(free_potential(), 3j, 0.0, [1, 0], 1.0)
    path = tmp_path / "u.csv"
    traj.to_csv(path, np.linspace(0, 1, 5))
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["x", "re_u1", "im_u1", "re_u2", "im_u2", "scale_exponent"]
    x, r1, i1, r2, i2, s = map(float, rows[-1])
    u = (complex(r1, i1), complex(r2, i2))
    assert abs(u[0] * math.exp(s) - math.cosh(3.0)) < 1e-8 * math.cosh(3.0)
