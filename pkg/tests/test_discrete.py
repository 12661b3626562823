import math

import numpy as np
import pytest

from diracweyl import discrete as D
from diracweyl import radial as R
from diracweyl.discrete import RegularProblem
from diracweyl.operator import Coefficient, DiracPotential, Interval, free_potential
from diracweyl.weyl import graded_quadrature


@pytest.fixture(scope="module")
def free_pi():
    rp = RegularProblem(free_potential(0, math.pi))
    scan = rp.spectrum((-6.5, 6.5))
    return rp, rp.measure(scan.eigenvalues)


@pytest.fixture(scope="module")
def smooth():
    pot = DiracPotential(Interval(0, 2), 0.4, Coefficient.expr("0.5*cos(x)"),
                         Coefficient.expr("0.3*x"), Coefficient.expr("exp(-x)"))
    rp = RegularProblem(pot)
    return rp, rp.measure(rp.spectrum((-8, 8)).eigenvalues)


def bump(x):
    x = np.asarray(x, dtype=float)
    b = np.where((x > 0.5) & (x < 2.5), np.sin(np.pi * (x - 0.5) / 2) ** 4, 0.0)
    return np.array([b, 0.5 * b])


def tau_bump(x):
    # free tau f = (-f2', f1') for the bump above
    x = np.asarray(x, dtype=float)
    t = np.pi * (x - 0.5) / 2
    db = np.where((x > 0.5) & (x < 2.5), 4 * np.sin(t) ** 3 * np.cos(t) * np.pi / 2, 0.0)
    return np.array([-0.5 * db, db])


def test_free_dirichlet_eigenvalues(free_pi):
    rp, mu = free_pi
    assert np.abs(mu.atoms - np.arange(-6, 7)).max() < 1e-8
    assert np.abs(mu.gamma_sq - math.pi).max() < 1e-6


def test_free_dirichlet_other_length():
    L = 2.0
    scan = RegularProblem(free_potential(0, L)).spectrum((-7, 7))
    n = np.arange(-4, 5)
    assert np.abs(scan.eigenvalues - n * math.pi / L).max() < 1e-8
    assert not scan.suspected_missed and scan.double_root_candidates == []


def test_massive_dirichlet_dispersion():
    m = 1.2
    scan = RegularProblem(free_potential(0, math.pi, m)).spectrum((-5, 5))
    n = np.arange(1, 5)
    k = np.sqrt(n ** 2 + m * m)
    expect = np.sort(np.concatenate((k[k < 5], -k[k < 5], [-m])))
    assert np.abs(scan.eigenvalues - expect).max() < 1e-8


def test_empty_window():
    scan = RegularProblem(free_potential(0, math.pi)).spectrum((0.2, 0.8))
    assert scan.eigenvalues.size == 0


def test_eigenvalues_of_a_synthetic_function():
    scan = D.eigenvalues(lambda l: math.sin(l) * (l - 0.5), (0.1, 7.0))
    assert np.allclose(scan.eigenvalues, [0.5, math.pi, 2 * math.pi], atol=1e-10)
    # a double zero is flagged rather than returned
    scan = D.eigenvalues(lambda l: (l - 1.0) ** 2 + 1e-14, (0.0, 2.0), grid=64)
    assert scan.eigenvalues.size == 0 and scan.double_root_candidates


def test_norming_constant_scaling(free_pi):
    rp, mu = free_pi
    g2 = D.norming_constant(rp.frame.rescaled(math.log(2)), 3.0, graded_quadrature(0, math.pi))
    assert abs(g2 - 4 * math.pi) < 4e-6


def test_radial_norming_constants_on_unit_interval():
    # kappa = 1: Dirichlet at x = 1 puts the eigenvalues on the zeros of j_1, tan t = t
    p = R.RadialParams(1.0)
    scan = D.eigenvalues(lambda l: R.Phi_kappa(p, l, 1.0)[0].real, (0.5, 8.0))
    assert np.allclose(scan.eigenvalues, [4.493409457909064, 7.725251836937707], atol=1e-9)
    from diracweyl.weyl import radial_frame
    quad = graded_quadrature(0, 1, grade_a=True)
    for lam in scan.eigenvalues:
        g = D.norming_constant(radial_frame(1.0), lam, quad)
        assert 0 < g < math.inf


def test_orthogonality(smooth):
    rp, mu = smooth
    nodes, w = graded_quadrature(0, 2, grade_a=True, grade_b=True)
    table = np.array([rp.frame.Phi(l, nodes).real for l in mu.atoms])
    gram = np.einsum("min,kin,n->mk", table, table, w)
    g = np.sqrt(mu.gamma_sq)
    off = np.abs(gram - np.diag(np.diag(gram))) / np.outer(g, g)
    assert len(mu) >= 8 and off.max() < 1e-6


def test_transform_of_eigenfunction(smooth):
    rp, mu = smooth
    k = 3
    f = lambda x: rp.frame.Phi(mu.atoms[k], x).real
    fhat = D.forward_transform(rp.frame, mu, f)
    expect = np.zeros(len(mu))
    expect[k] = mu.gamma_sq[k]
    assert np.abs(fhat - expect).max() < 1e-6 * mu.gamma_sq[k]


def test_roundtrip_low_eigenfunctions():
    rp = RegularProblem(free_potential(0, math.pi))
    mu = rp.measure(rp.spectrum((-25.5, 25.5)).eigenvalues)
    centre = np.argmin(np.abs(mu.atoms))
    coef = np.linspace(1, -0.5, 10)
    low = mu.atoms[centre - 5:centre + 5]

    def f(x):
        return sum(c * rp.frame.Phi(l, x).real for c, l in zip(coef, low))

    assert len(mu) >= 50
    assert D.roundtrip_defect(rp.frame, mu, f) < 1e-3


def test_transform_diagonalizes_operator(free_pi):
    rp, mu = free_pi
    fh = D.forward_transform(rp.frame, mu, bump)
    tfh = D.forward_transform(rp.frame, mu, tau_bump)
    assert np.abs(tfh - mu.atoms * fh).max() < 1e-5


def test_green_transform(free_pi):
    rp, mu = free_pi
    assert D.green_transform_check(rp.frame, mu, rp.M, 1j, 1.0, k=0) < 1e-4
    assert D.green_transform_check(rp.frame, mu, rp.M, 1j, 1.0, k=1) < 1e-3
    with pytest.raises(ValueError):
        D.green_transform_check(rp.frame, mu, rp.M, 1.0, 1.0)
    assert D.resolvent_green_check(rp.frame, rp.M, 1 + 1j, 0.4, 2.1) < 1e-8


def test_green_transform_degrades_near_atom(free_pi):
    rp, mu = free_pi
    M = lambda z: -np.cos(math.pi * z) / np.sin(math.pi * z)
    far = D.green_transform_check(rp.frame, mu, M, 2 + 1j, 1.0)
    near = D.green_transform_check(rp.frame, mu, M, 2 + 1e-4j, 1.0)
    assert near > 10 * far


def closed_form_measure(n):
    lam = np.arange(-n, n, dtype=float)
    return D.DiscreteSpectralMeasure.from_arrays(lam, np.full(lam.size, math.pi))


def test_weyl_representation_from_atoms():
    M = lambda z: -np.cos(math.pi * z) / np.sin(math.pi * z)
    rp = RegularProblem(free_potential(0, math.pi))
    assert abs(rp.M(2j) - M(2j)) < 1e-8
    d200, _ = D.discrete_weyl_representation_check(rp.M, closed_form_measure(100), 2j)
    assert d200 < 1e-3
    defects = [D.discrete_weyl_representation_check(M, closed_form_measure(n), 2j, tail=False)[0]
               for n in (5, 10, 20, 40)]
    assert np.all(np.diff(defects) < 0) and defects[1] > d200


def test_weyl_representation_at_i():
    M = lambda z: -np.cos(math.pi * z) / np.sin(math.pi * z)
    d, _ = D.discrete_weyl_representation_check(M, closed_form_measure(100), 1j)
    assert d < 1e-3


def test_convergence_exponent():
    n = np.arange(1, 200)
    assert abs(D.convergence_exponent_estimate(n) - 1) < 0.1
    assert abs(D.convergence_exponent_estimate(n.astype(float) ** 2) - 0.5) < 0.1
    with pytest.raises(ValueError):
        D.convergence_exponent_estimate(np.full(30, 3.0))
    with pytest.raises(ValueError):
        D.convergence_exponent_estimate(n[:10])


@pytest.mark.parametrize("g", [lambda l: 0.4, lambda l: 0.1 + 0.05 * l])
def test_rescaling_weights_and_eigenvalues(smooth, g):
    rp, mu = smooth
    frame = rp.frame.rescaled(g)
    W = D.shooting_wronskian(frame, rp.Pi, 1.0)
    lam = D.eigenvalues(W, (-4, 4)).eigenvalues
    keep = np.abs(mu.atoms) < 4
    assert np.abs(lam - mu.atoms[keep]).max() < 1e-8
    direct = D.spectral_measure(frame, lam, graded_quadrature(0, 2, grade_a=True, grade_b=True))
    expect = mu.rescaled(g).weights[keep]
    assert np.abs(direct.weights / expect - 1).max() < 1e-8
    assert np.allclose(expect, mu.weights[keep] * np.exp(-2 * np.array([g(l) for l in lam])))


def test_measure_invariants():
    with pytest.raises(ValueError):
        D.EigenPair(0, 1.0, 0.0)
    with pytest.raises(ValueError):
        D.DiscreteSpectralMeasure.from_arrays([1.0, 1.0], [1.0, 2.0])
