"""Independent reference solutions used to validate the Laplace-domain pipeline."""
from .characteristics import characteristic_omega
from .fd import FdResult, FdSolverConfig, fd_pde_solve
from .feller import feller_v_half_cdf, feller_v_half_density
from .ks import ks_statistic
from .montecarlo import FbmSimConfig, fractional_gaussian_noise, simulate_fbm_paths

__all__ = [
    "characteristic_omega",
    "FdResult",
    "FdSolverConfig",
    "fd_pde_solve",
    "feller_v_half_cdf",
    "feller_v_half_density",
    "ks_statistic",
    "FbmSimConfig",
    "fractional_gaussian_noise",
    "simulate_fbm_paths",
]
