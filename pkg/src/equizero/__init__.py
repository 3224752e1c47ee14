"""Orthonormal polynomial ensembles, Szegő kernels and expected zero distributions.

Submodules
----------
domain_models
    Compact sets with closed-form Green functions, equilibrium masses and
    quadrature rules for the equilibrium measure.
orthopoly
    Graded multi-indices, moment matrices, orthonormalization and
    Bernstein-Markov diagnostics.
szego
    Szegő kernel evaluation, extremal functions and convergence tables.
zero_ensembles
    Gaussian random polynomials, roots, and Poincaré-Lelong densities.
sphere_scaling
    Radial zero density on the unit ball and its scaling limit.
cli
    ``equizero`` batch runner.
"""

__version__ = "0.1.0"

from equizero.domain_models import DomainModel, QuadratureRule, RegionSpec
from equizero.orthopoly import OrthonormalBasis, build_basis
from equizero.szego import KernelField

__all__ = [
    "DomainModel",
    "QuadratureRule",
    "RegionSpec",
    "OrthonormalBasis",
    "build_basis",
    "KernelField",
    "__version__",
]
