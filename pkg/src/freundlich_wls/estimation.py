"""Estimate fractional decreases and concentration CVs from isotherm data.

The estimators operate on arrays so a batch of simulated isotherms can be
processed at once: ``measured_ci`` has shape ``(..., L)`` and ``ce`` has
shape ``(..., L, U)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientDataError, InvalidInputError, NonpositiveObservableError

__all__ = [
    "IsothermDataset",
    "EstimatedErrorParams",
    "estimate_delta",
    "estimate_gamma_e",
    "estimate_gamma_i",
    "estimate_error_params",
    "log_points",
]


@dataclass(frozen=True)
class IsothermDataset:
    """One measured isotherm: a single c_i and ``U`` replicate c_e per level.

    ``expected_ci`` holds the design concentrations and may be None for lab
    data that lacks them (only the c_i CV estimate needs it).
    """

    measured_ci: np.ndarray
    ce: np.ndarray
    r: float
    c_ref: float = 1.0
    expected_ci: np.ndarray | None = None

    def __post_init__(self):
        ci = np.asarray(self.measured_ci, dtype=float)
        ce = np.asarray(self.ce, dtype=float)
        if ce.ndim == 1:
            ce = ce[:, None]
        if ci.ndim != 1 or ce.ndim != 2 or ce.shape[0] != ci.shape[0]:
            raise InvalidInputError("need one c_i per level and a (levels, replicates) c_e table")
        if np.any(ci <= 0):
            raise InvalidInputError("measured c_i must be > 0")
        if not self.r > 0 or not self.c_ref > 0:
            raise InvalidInputError("r and c_ref must be > 0")
        object.__setattr__(self, "measured_ci", ci)
        object.__setattr__(self, "ce", ce)
        if self.expected_ci is not None:
            exp = np.asarray(self.expected_ci, dtype=float)
            if exp.shape != ci.shape or np.any(exp <= 0):
                raise InvalidInputError("expected c_i must be positive, one per level")
            object.__setattr__(self, "expected_ci", exp)

    @property
    def n_levels(self) -> int:
        return self.ce.shape[0]

    @property
    def u(self) -> int:
        return self.ce.shape[1]

    @property
    def sorbed(self) -> np.ndarray:
        return (self.measured_ci[:, None] - self.ce) / self.r


@dataclass(frozen=True)
class EstimatedErrorParams:
    delta_per_level: np.ndarray
    gamma_e: float
    gamma_i: float


def estimate_delta(measured_ci, ce):
    """Mean over replicates of (c_i - c_e,u) / c_i. May be negative."""
    ci = np.asarray(measured_ci, dtype=float)
    ce = np.asarray(ce, dtype=float)
    return ((ci[..., None] - ce) / ci[..., None]).mean(axis=-1)


def estimate_gamma_e(ce):
    """Root of the level-averaged squared CV of the replicate c_e values."""
    ce = np.asarray(ce, dtype=float)
    if ce.shape[-1] < 2:
        raise InsufficientDataError("estimating gamma_e needs at least 2 replicates")
    mean = ce.mean(axis=-1)
    s2 = ce.var(axis=-1, ddof=1)
    out = np.sqrt((s2 / mean**2).mean(axis=-1))
    return out if out.ndim else float(out)


def estimate_gamma_i(measured_ci, expected_ci):
    """CV of c_i from measured/expected quotients with their common bias removed."""
    q = np.asarray(measured_ci, dtype=float) / np.asarray(expected_ci, dtype=float)
    if q.shape[-1] < 2:
        raise InsufficientDataError("estimating gamma_i needs at least 2 levels")
    revised = q / q.mean(axis=-1, keepdims=True)
    out = revised.std(axis=-1, ddof=1)
    return out if out.ndim else float(out)


def estimate_error_params(dataset: IsothermDataset) -> EstimatedErrorParams:
    if dataset.expected_ci is None:
        raise InvalidInputError("estimating gamma_i needs the expected (design) c_i values")
    return EstimatedErrorParams(
        delta_per_level=estimate_delta(dataset.measured_ci, dataset.ce),
        gamma_e=estimate_gamma_e(dataset.ce),
        gamma_i=estimate_gamma_i(dataset.measured_ci, dataset.expected_ci),
    )


def log_points(measured_ci, ce, r: float, c_ref: float = 1.0):
    """Replicate-averaged (log10 c_e/c_ref, log10 X) per level.

    Raises :class:`NonpositiveObservableError` if any c_e or X is <= 0.
    """
    ci = np.asarray(measured_ci, dtype=float)
    ce = np.asarray(ce, dtype=float)
    x_sorbed = (ci[..., None] - ce) / r
    if np.any(ce <= 0):
        idx = np.argwhere(ce <= 0)[0]
        raise NonpositiveObservableError(f"c_e <= 0 at level/replicate index {tuple(idx.tolist())}")
    if np.any(x_sorbed <= 0):
        idx = np.argwhere(x_sorbed <= 0)[0]
        raise NonpositiveObservableError(f"sorbed amount X <= 0 at level/replicate index {tuple(idx.tolist())}")
    x = np.log10(ce / c_ref).mean(axis=-1)
    y = np.log10(x_sorbed).mean(axis=-1)
    return x, y
