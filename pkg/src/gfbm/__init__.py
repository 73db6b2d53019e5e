"""Numerical laboratory for generalized fractional Brownian motion."""

from .core import GfbmParams, QuadratureSpec, TimeGrid, is_valid_params
from .errors import GfbmError, NumericalError, ValidationError
from .kernelcov import Kind, c21, cov_matrix, cov_x, cov_y, cov_z, rho_limit
from .lamperti import SpectralTable, build_table, r_u, spectral_density
from .pathsim import PathEnsemble, increment_ensemble, x_path_ensemble
from .rkhs import GridFunction, LimitCov, linear_sup, rate_functional

__version__ = "0.1.0"

__all__ = [
    "GfbmParams", "QuadratureSpec", "TimeGrid", "is_valid_params",
    "GfbmError", "NumericalError", "ValidationError",
    "Kind", "c21", "cov_matrix", "cov_x", "cov_y", "cov_z", "rho_limit",
    "SpectralTable", "build_table", "r_u", "spectral_density",
    "PathEnsemble", "increment_ensemble", "x_path_ensemble",
    "GridFunction", "LimitCov", "linear_sup", "rate_functional",
]
