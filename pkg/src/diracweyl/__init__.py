"""Weyl-Titchmarsh-Kodaira spectral tools for one-dimensional Dirac operators.

Submodules: ``operator`` (potentials, Wronskians, gauges), ``ode`` (solution
trajectories), ``special`` (Bessel and Gamma wrappers), ``radial`` (closed
forms for ``kappa / x``), ``perturbed`` (Neumann series), ``weyl`` (frames,
singular ``M``, Stieltjes inversion), ``discrete`` (eigenvalues and
transforms), ``susy`` (uniqueness harnesses and factorization checks) and
``cli``.
"""
from .discrete import DiscreteSpectralMeasure, RegularProblem
from .ode import DEFAULT_TOL, ODETolerance, fundamental_system, integrate, integrate_span
from .operator import (DiracPotential, Interval, free_potential, potential_from_json,
                       potential_to_json, radial_potential, wronskian)
from .perturbed import Perturbation, neumann_solve
from .radial import M_kappa, RadialParams, rho_kappa_density
from .weyl import m_function, perturbed_frame, radial_frame, regular_frame, singular_M

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOL", "DiracPotential", "DiscreteSpectralMeasure", "Interval", "M_kappa",
    "ODETolerance", "Perturbation", "RadialParams", "RegularProblem", "free_potential",
    "fundamental_system", "integrate", "integrate_span", "m_function", "neumann_solve",
    "perturbed_frame", "potential_from_json", "potential_to_json", "radial_frame",
    "radial_potential", "regular_frame", "rho_kappa_density", "singular_M", "wronskian",
]
