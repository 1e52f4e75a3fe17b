"""Weighted least-squares fitting of Freundlich isotherms with analytical weights."""

from .estimation import IsothermDataset, estimate_delta, estimate_gamma_e, estimate_gamma_i
from .exceptions import FreundlichError, InvalidInputError, NumericalError
from .isotherm import FreundlichParams, SorptionSystem, solve_equilibrium
from .pipeline import fit_isotherm
from .regress import FitResult, fit_line, fit_relative_posterior, fit_uls_posterior
from .weights import sigma_eps, sigma_eps_effective

__version__ = "0.1.0"
