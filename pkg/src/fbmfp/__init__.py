"""Transition densities of a square-root diffusion driven by fractional noise.

Solves ``u_t = (a t^(2v-1) x u)_xx - ((b x + c) u)_x`` on the half-line in the
Laplace domain, recovers densities by numerical inversion, solves for the
boundary flux and checks the results against independent reference solutions.
"""
from .cir import CirParams, cir_transition_density, map_cir_to_fpk
from .errors import (DivergenceError, DomainError, FbmFpError, IllConditionedError,
                     InstabilityError, InversionError, NonIntegrableKernelError,
                     QuadratureError, SingularityError, UnsupportedRegimeError)
from .flux import FluxFunction, boundary_limit, lemma2_residual, solve_flux
from .inversion import InversionConfig, InversionResult, invert, invert_stehfest, invert_talbot
from .laplace_domain import (InitialDistribution, omega, omega_transform, omega_values,
                             pde_residual, pi_argument, pi_eval)
from .params import FpkParams
from .solver import DensityCurve, density_curve, distribution_function, moment_check

__version__ = "0.1.0"

__all__ = [
    "CirParams",
    "DensityCurve",
    "DivergenceError",
    "DomainError",
    "FbmFpError",
    "FluxFunction",
    "FpkParams",
    "IllConditionedError",
    "InitialDistribution",
    "InstabilityError",
    "InversionConfig",
    "InversionError",
    "InversionResult",
    "NonIntegrableKernelError",
    "QuadratureError",
    "SingularityError",
    "UnsupportedRegimeError",
    "boundary_limit",
    "cir_transition_density",
    "density_curve",
    "distribution_function",
    "invert",
    "invert_stehfest",
    "invert_talbot",
    "lemma2_residual",
    "map_cir_to_fpk",
    "moment_check",
    "omega",
    "omega_transform",
    "omega_values",
    "pde_residual",
    "pi_argument",
    "pi_eval",
    "solve_flux",
]
