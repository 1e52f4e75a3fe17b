"""Two-step fitting of a measured isotherm.

Step one is an unweighted fit whose exponent enters the weight formula;
step two is the weighted fit that yields the reported parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimation import IsothermDataset, estimate_delta, estimate_gamma_e, estimate_gamma_i, log_points
from .exceptions import InsufficientDataError, InvalidInputError, RejectedIsotherm
from .regress import FitResult, fit_line, fit_relative_posterior, fit_uls_posterior
from .weights import sigma_eps

FIT_METHODS = ("wls-apriori", "wls-estimated", "uls", "wls-relative")
LOW_DELTA = 0.30
# only the ratio matters for relative weights; c_i error taken as half the c_e error
DEFAULT_RELATIVE_GAMMAS = (0.005, 0.01)


@dataclass
class FitReport:
    result: FitResult
    deltas: np.ndarray
    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    gamma_i: float | None = None
    gamma_e: float | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def residuals(self) -> np.ndarray:
        return self.y - self.result.a - self.result.n * self.x


def _check_deltas(deltas):
    bad = np.flatnonzero(deltas <= 0)
    if bad.size:
        levels = ", ".join(str(i + 1) for i in bad)
        raise RejectedIsotherm(f"fractional decrease <= 0 at level(s) {levels}; weights are undefined")


def fit_isotherm(
    dataset: IsothermDataset,
    method: str,
    gamma_i: float | None = None,
    gamma_e: float | None = None,
) -> FitReport:
    if method not in FIT_METHODS:
        raise InvalidInputError(f"method must be one of {FIT_METHODS}")
    x, y = log_points(dataset.measured_ci, dataset.ce, dataset.r, dataset.c_ref)
    deltas = estimate_delta(dataset.measured_ci, dataset.ce)
    notes = [
        f"level {i + 1}: fractional decrease {d:.3g} < {LOW_DELTA}; K_F and N are poorly determined"
        for i, d in enumerate(deltas) if d < LOW_DELTA
    ]
    first = fit_uls_posterior(x, y, dataset.c_ref)
    u = dataset.u

    if method == "uls":
        return FitReport(first, deltas, x, y, np.ones_like(x), warnings=notes)

    _check_deltas(deltas)
    if method == "wls-apriori":
        if gamma_i is None or gamma_e is None:
            raise InvalidInputError("wls-apriori needs both --gamma-i and --gamma-e")
        sigma = sigma_eps(deltas, first.n, gamma_i, gamma_e, u)
        res = fit_line(x, y, sigma, dataset.c_ref, method="WLS-a-priori-true")
    elif method == "wls-estimated":
        if u < 2:
            raise InsufficientDataError("wls-estimated needs at least 2 replicates per level")
        if dataset.n_levels < 2:
            raise InsufficientDataError("wls-estimated needs at least 2 levels")
        if dataset.expected_ci is None:
            raise InvalidInputError("wls-estimated needs the expected_ci column for every level")
        gamma_e = estimate_gamma_e(dataset.ce)
        gamma_i = estimate_gamma_i(dataset.measured_ci, dataset.expected_ci)
        sigma = sigma_eps(deltas, first.n, gamma_i, gamma_e, u)
        res = fit_line(x, y, sigma, dataset.c_ref, method="WLS-a-priori-estimated")
    else:
        if gamma_i is None or gamma_e is None:
            gamma_i, gamma_e = DEFAULT_RELATIVE_GAMMAS
        sigma = sigma_eps(deltas, first.n, gamma_i, gamma_e, u)
        res = fit_relative_posterior(x, y, sigma, dataset.c_ref)
    return FitReport(res, deltas, x, y, np.asarray(sigma) * np.ones_like(x), gamma_i, gamma_e, notes)
