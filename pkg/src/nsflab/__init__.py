"""Numerical laboratory for rotating, stratified compressible flows at low
Mach, Rossby and Froude numbers and their singular limits."""
from .equilibrium import EpsilonScaling, ForcePotentials, solve_static, static_rate_study
from .rates import fit_rate
from .spectral import Field, SpectralGrid
from .thermo import ThermoModel, linearization_coeffs, structural_audit

__version__ = "0.1.0"

__all__ = ["EpsilonScaling", "ForcePotentials", "Field", "SpectralGrid", "ThermoModel",
           "fit_rate", "linearization_coeffs", "solve_static", "static_rate_study",
           "structural_audit"]
