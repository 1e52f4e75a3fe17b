"""Analytical error model for log-log Freundlich regression.

All standard deviations are in log10 units. Functions accept scalars or
numpy arrays and broadcast.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .exceptions import InvalidInputError

__all__ = [
    "ErrorInputs",
    "ErrorModel",
    "sigma_eps",
    "sigma_eps_effective",
    "curvature_term",
    "cv_of_x",
    "log_cv",
    "gamma_delta",
    "weight_surface",
    "SurfaceRow",
    "write_surface_csv",
    "GammaRangeWarning",
]

LN10 = math.log(10.0)
GAMMA_LIMIT = 0.10
SOURCES = ("true-parameters", "estimated-from-data", "unit", "relative-scaled")


class GammaRangeWarning(UserWarning):
    """A CV exceeds the range where the log-CV approximation is accurate."""


def _check_gammas(*gammas):
    for g in gammas:
        g = np.asarray(g)
        if np.any(g < 0):
            raise InvalidInputError("CVs must be >= 0")
        if np.any(g > GAMMA_LIMIT):
            warnings.warn(
                f"CV above {GAMMA_LIMIT}; the log-CV approximation loses accuracy",
                GammaRangeWarning,
                stacklevel=3,
            )


def _check_delta(delta):
    delta = np.asarray(delta, dtype=float)
    if np.any(~(delta > 0)):
        raise InvalidInputError("fractional decrease must be > 0 (sigma_eps diverges at 0)")
    if np.any(delta > 1):
        raise InvalidInputError("fractional decrease must be <= 1")
    return delta


def _check_u(u):
    u = np.asarray(u)
    if np.any(u < 1):
        raise InvalidInputError("replicate count must be >= 1")
    return u


def curvature_term(delta, n):
    """[1 - delta * (1 - n)]**2, the weight of the c_e error in sigma_eps."""
    delta = np.asarray(delta, dtype=float)
    # (1 - delta) + delta * n: both terms >= 0, so no cancellation near delta = 1, n = 0
    return ((1.0 - delta) + delta * np.asarray(n, dtype=float)) ** 2


def sigma_eps(delta, n, gamma_i, gamma_e, u):
    """Standard deviation of the log-log residual at one concentration level.

    ``delta`` is the fractional decrease of the solution concentration,
    ``n`` the Freundlich exponent and ``u`` the number of replicate c_e
    measurements that share one measured c_i. The fit must use the
    replicate-averaged log values for this to apply.
    """
    delta = _check_delta(delta)
    u = _check_u(u)
    _check_gammas(gamma_i, gamma_e)
    gi, ge = np.asarray(gamma_i, dtype=float), np.asarray(gamma_e, dtype=float)
    # hypot avoids squaring tiny gammas into subnormals
    out = np.hypot(gi, ge * np.sqrt(curvature_term(delta, n) / u)) / (delta * LN10)
    return out if out.ndim else float(out)


def sigma_eps_effective(delta, n, gamma_i, gamma_e, u):
    """Same quantity as :func:`sigma_eps`, via the effective-variance route.

    Sums the squared sensitivities of log X to log c_i and to log c_e,
    where the c_e term combines the direct mass-balance contribution
    ``|(delta - 1) / delta|`` and the indirect isotherm slope ``n``.
    """
    delta = _check_delta(delta)
    u = _check_u(u)
    _check_gammas(gamma_i, gamma_e)
    gi, ge = np.asarray(gamma_i, dtype=float), np.asarray(gamma_e, dtype=float)
    d_ci = 1.0 / delta
    d_ce = np.abs((delta - 1.0) / delta) + n
    out = np.hypot(d_ci * gi, d_ce * ge / np.sqrt(u)) / LN10
    return out if out.ndim else float(out)


def cv_of_x(delta, gamma_i, gamma_e):
    """First-order CV of the sorbed amount computed from a concentration drop."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise InvalidInputError("fractional decrease must be > 0")
    out = np.sqrt(np.asarray(gamma_i) ** 2 + np.asarray(gamma_e) ** 2 * (1.0 - delta) ** 2) / delta
    return out if out.ndim else float(out)


def log_cv(gamma):
    """Standard deviation of log10 of a variable with CV ``gamma``."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise InvalidInputError("CV must be >= 0")
    if np.any(g > GAMMA_LIMIT):
        warnings.warn(f"CV above {GAMMA_LIMIT}", GammaRangeWarning, stacklevel=2)
    out = g / LN10
    return out if out.ndim else float(out)


def gamma_delta(delta, gamma_i, gamma_e, u):
    """CV of a fractional decrease estimated as the mean over ``u`` replicates."""
    delta = np.asarray(delta, dtype=float)
    if np.any((delta <= 0) | (delta >= 1)):
        raise InvalidInputError("fractional decrease must lie in (0, 1)")
    u = _check_u(u)
    out = (1.0 - delta) / delta * np.sqrt(np.asarray(gamma_i) ** 2 + np.asarray(gamma_e) ** 2 / u)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ErrorInputs:
    delta: float
    n: float
    gamma_i: float
    gamma_e: float
    u: int = 3

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise InvalidInputError(f"delta must lie in (0, 1], got {self.delta}")
        if not 0 <= self.gamma_i <= GAMMA_LIMIT or not 0 <= self.gamma_e <= GAMMA_LIMIT:
            raise InvalidInputError("gamma_i and gamma_e must lie in [0, 0.10]")
        if self.u < 1:
            raise InvalidInputError("u must be >= 1")

    def sigma(self) -> float:
        return sigma_eps(self.delta, self.n, self.gamma_i, self.gamma_e, self.u)

    def sigma_effective(self) -> float:
        return sigma_eps_effective(self.delta, self.n, self.gamma_i, self.gamma_e, self.u)


@dataclass(frozen=True)
class ErrorModel:
    """Per-level residual standard deviations and where they came from."""

    sigma: np.ndarray
    source: str
    deltas: np.ndarray | None = None
    n: float | None = None
    gamma_i: float | None = None
    gamma_e: float | None = None
    u: int | None = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise InvalidInputError(f"unknown error-model source {self.source!r}")
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim != 1 or np.any(~(sigma > 0)):
            raise InvalidInputError("sigma must be a 1-d array of positive values")
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def from_parameters(cls, deltas, n, gamma_i, gamma_e, u, source="true-parameters"):
        deltas = np.asarray(deltas, dtype=float)
        return cls(sigma_eps(deltas, n, gamma_i, gamma_e, u) * np.ones_like(deltas), source,
                   deltas, n, gamma_i, gamma_e, u)

    @classmethod
    def unit(cls, n_levels: int):
        return cls(np.ones(n_levels), "unit")

    def scaled(self, factor: float) -> "ErrorModel":
        return ErrorModel(self.sigma * factor, "relative-scaled", self.deltas, self.n,
                          self.gamma_i, self.gamma_e, self.u)

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / self.sigma**2


class SurfaceRow(NamedTuple):
    delta: float
    n: float
    curvature: float
    sigma_ratio: float


def weight_surface(
    delta_grid: Iterable[float],
    n_grid: Iterable[float],
    gamma_i: float,
    gamma_e: float,
    u: int = 3,
) -> list[SurfaceRow]:
    """Tabulate the curvature term and sigma_eps / gamma_e over a (delta, n) grid."""
    if gamma_e <= 0:
        raise InvalidInputError("gamma_e must be > 0 to form sigma_eps / gamma_e")
    rows = []
    for d in delta_grid:
        for n in n_grid:
            s = sigma_eps(d, n, gamma_i, gamma_e, u)
            rows.append(SurfaceRow(float(d), float(n), float(curvature_term(d, n)), s / gamma_e))
    return rows


def write_surface_csv(rows: Iterable[SurfaceRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SurfaceRow._fields)
    for r in rows:
        w.writerow([repr(float(v)) for v in r])
