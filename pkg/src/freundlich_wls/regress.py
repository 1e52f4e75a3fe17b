"""Straight-line least squares on log-log Freundlich data.

The core routine :func:`wls_arrays` works along the last axis so that the
Monte Carlo code can fit thousands of isotherms in one call; the public
``fit_*`` functions wrap it for a single isotherm and return a
:class:`FitResult`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import DegenerateDesignError, InsufficientDataError, InvalidInputError

__all__ = [
    "FitResult",
    "LineArrays",
    "wls_arrays",
    "chi2_merit",
    "posterior_factor",
    "fit_line",
    "fit_uls_posterior",
    "fit_relative_posterior",
    "METHODS",
]

LN10 = math.log(10.0)
METHODS = ("ULS-posterior", "WLS-a-priori-true", "WLS-a-priori-estimated", "WLS-relative-posterior")


class LineArrays(NamedTuple):
    """Raw weighted fit output; every field has the batch shape of the input."""

    a: np.ndarray
    n: np.ndarray
    var_a: np.ndarray
    var_n: np.ndarray
    chi2: np.ndarray


def wls_arrays(x, y, w) -> LineArrays:
    """Weighted straight-line fit ``y = a + n x`` along the last axis.

    Centred on the weighted mean of x to avoid cancellation. The returned
    variances are the a-priori ones, i.e. they assume the weights are the
    inverse residual variances.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.broadcast_to(np.asarray(w, dtype=float), np.broadcast_shapes(x.shape, y.shape))
    s = w.sum(axis=-1)
    xm = (w * x).sum(axis=-1) / s
    ym = (w * y).sum(axis=-1) / s
    dx = x - xm[..., None]
    stt = (w * dx * dx).sum(axis=-1)
    n = (w * dx * (y - ym[..., None])).sum(axis=-1) / stt
    a = ym - n * xm
    var_n = 1.0 / stt
    # 1/S * (1 + (sum w x)^2 / (S * Stt)) == 1/S + xm^2 / Stt
    var_a = 1.0 / s + xm * xm / stt
    resid = y - a[..., None] - n[..., None] * x
    chi2 = (w * resid * resid).sum(axis=-1)
    return LineArrays(a, n, var_a, var_n, chi2)


@dataclass(frozen=True)
class FitResult:
    a: float
    n: float
    k_f: float
    sigma_a: float
    sigma_n: float
    sigma_kf: float
    cv_kf: float
    cv_n: float
    chi2: float
    dof: int
    scale_factor: float
    method: str
    c_ref: float = 1.0

    @classmethod
    def from_line(cls, line: LineArrays, dof: int, scale: float, method: str, c_ref: float = 1.0):
        if method not in METHODS:
            raise InvalidInputError(f"unknown method {method!r}")
        a, n = float(line.a), float(line.n)
        sigma_a = math.sqrt(float(line.var_a) * scale)
        sigma_n = math.sqrt(float(line.var_n) * scale)
        k_f = 10.0**a / c_ref
        sigma_kf = LN10 * k_f * sigma_a
        return cls(
            a=a, n=n, k_f=k_f,
            sigma_a=sigma_a, sigma_n=sigma_n, sigma_kf=sigma_kf,
            cv_kf=sigma_kf / k_f, cv_n=sigma_n / n if n != 0 else math.inf,
            chi2=float(line.chi2), dof=dof, scale_factor=float(scale),
            method=method, c_ref=c_ref,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def _validate(x, y, sigma):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), x.shape)
    if x.ndim != 1 or x.shape != y.shape:
        raise InvalidInputError("x and y must be 1-d arrays of equal length")
    if x.size < 3:
        raise InsufficientDataError(f"need at least 3 points for a line with variance, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidInputError("x and y must be finite")
    if np.any(~(sigma > 0)):
        raise InvalidInputError("sigma must be > 0")
    if np.ptp(x) == 0:
        raise DegenerateDesignError("all x values are equal")
    return x, y, sigma


def chi2_merit(x, y, sigma, a: float, n: float) -> float:
    """Sum of squared standardized residuals of the line ``a + n x``."""
    r = (np.asarray(y, dtype=float) - a - n * np.asarray(x, dtype=float)) / np.asarray(sigma, dtype=float)
    return float(np.sum(r * r))


def posterior_factor(residuals, dof: int, weights=1.0) -> float:
    """A-posteriori variance multiplier: weighted residual sum of squares over dof."""
    if dof < 1:
        raise InsufficientDataError("a-posteriori scaling needs dof >= 1")
    r = np.asarray(residuals, dtype=float)
    return float(np.sum(np.asarray(weights, dtype=float) * r * r)) / dof


def fit_line(x, y, sigma, c_ref: float = 1.0, method: str = "WLS-a-priori-true") -> FitResult:
    """Weighted fit with a-priori parameter variances (weights 1 / sigma**2)."""
    x, y, sigma = _validate(x, y, sigma)
    line = wls_arrays(x, y, 1.0 / sigma**2)
    return FitResult.from_line(line, x.size - 2, 1.0, method, c_ref)


def fit_uls_posterior(x, y, c_ref: float = 1.0) -> FitResult:
    """Unweighted fit; variances rescaled by the residual mean square."""
    x, y, _ = _validate(x, y, 1.0)
    dof = x.size - 2
    line = wls_arrays(x, y, 1.0)
    resid = y - line.a - line.n * x
    return FitResult.from_line(line, dof, posterior_factor(resid, dof), "ULS-posterior", c_ref)


def fit_relative_posterior(x, y, sigma, c_ref: float = 1.0) -> FitResult:
    """Weighted fit with relative weights; variances rescaled by chi2 / dof.

    Multiplying every sigma by a constant leaves the result unchanged.
    """
    x, y, sigma = _validate(x, y, sigma)
    dof = x.size - 2
    w = 1.0 / sigma**2
    line = wls_arrays(x, y, w)
    resid = y - line.a - line.n * x
    return FitResult.from_line(line, dof, posterior_factor(resid, dof, w), "WLS-relative-posterior", c_ref)
