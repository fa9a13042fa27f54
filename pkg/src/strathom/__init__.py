"""Solvers and checks for stratified high-contrast elliptic problems.

The package solves ``-div(μ_ε C ∇u_ε) = f`` on layered media, where the
coefficient μ_ε depends on the stratification coordinate x₁ only and may
degenerate or blow up on thin layers, and compares the result with the
effective problem driven by the limit measures ν (soft layers) and m
(stiff layers).

Modules
-------
measures   finite measures on an interval (densities + atoms)
media      layered coefficient profiles and their limit measures
tensors    constitutive and effective tensors, algebraic identities
fem        fine-scale multilinear finite elements
effective  effective problem with interface conditions at atoms
oracle     closed-form one-dimensional solutions
harness    experiment runner, presets, CLI
"""

from .errors import ConfigError, DomainError, HypothesisError, SolverError, StrathomError
from .measures import (
    Measure1D,
    MeasurePair,
    check_no_common_atoms,
    integrate,
    lebesgue_density_wrt,
    mass_of_interval,
    verify_l1nu_inequalities,
)
from .media import CoefficientField, Feature, LayeredProfile, empirical_measures, limit_measures, realize, verify_limits
from .tensors import (
    EffectiveLaw,
    IsotropicLaw,
    SystemTensor,
    bulk_tensor,
    heat_effective,
    iso_a_par,
    iso_a_perp,
    iso_interface_matrix,
    rearrangement_identity_iso,
    rearrangement_identity_sys,
    reorg_identity,
    sys_effective,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "HypothesisError", "SolverError", "StrathomError",
    "Measure1D", "MeasurePair", "check_no_common_atoms", "integrate", "lebesgue_density_wrt",
    "mass_of_interval", "verify_l1nu_inequalities",
    "CoefficientField", "Feature", "LayeredProfile", "empirical_measures", "limit_measures",
    "realize", "verify_limits",
    "EffectiveLaw", "IsotropicLaw", "SystemTensor", "bulk_tensor", "heat_effective", "iso_a_par",
    "iso_a_perp", "iso_interface_matrix", "rearrangement_identity_iso", "rearrangement_identity_sys",
    "reorg_identity", "sys_effective",
]
