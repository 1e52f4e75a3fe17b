"""Freundlich isotherm and the mass balance of a batch sorption experiment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError
from .numerics import solve_scalar

__all__ = [
    "FreundlichParams",
    "SorptionSystem",
    "sorbed_freundlich",
    "sorbed_from_decrease",
    "fractional_decrease",
    "delta_of_system",
    "solve_equilibrium",
]

GAMMA_LIMIT = 0.10


@dataclass(frozen=True)
class FreundlichParams:
    """Freundlich isotherm X = k_f * c_ref * (c_e / c_ref) ** n.

    ``k_f`` in L/kg, ``c_ref`` in mg/L. ``k_f == 0`` is accepted as the
    no-sorption limit.
    """

    k_f: float
    n: float
    c_ref: float = 1.0

    def __post_init__(self):
        if not self.k_f >= 0:
            raise InvalidInputError(f"k_f must be >= 0, got {self.k_f}")
        if not self.n > 0:
            raise InvalidInputError(f"n must be > 0, got {self.n}")
        if not self.c_ref > 0:
            raise InvalidInputError(f"c_ref must be > 0, got {self.c_ref}")


@dataclass(frozen=True)
class SorptionSystem:
    """Design of a batch sorption experiment.

    r is the sorbent-liquid ratio (kg/L); c_i_levels the design initial
    concentrations (mg/L); u the replicate count per level; gamma_i and
    gamma_e the CVs of the initial and equilibrium concentrations.
    """

    params: FreundlichParams
    r: float
    c_i_levels: tuple[float, ...]
    u: int = 3
    gamma_i: float = 0.01
    gamma_e: float = 0.05
    true_ce: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        levels = tuple(float(c) for c in self.c_i_levels)
        object.__setattr__(self, "c_i_levels", levels)
        if not self.r > 0:
            raise InvalidInputError(f"r must be > 0, got {self.r}")
        if not levels or any(c <= 0 for c in levels):
            raise InvalidInputError("c_i_levels must be non-empty and positive")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise InvalidInputError("c_i_levels must be strictly increasing")
        if int(self.u) != self.u or self.u < 1:
            raise InvalidInputError(f"u must be an integer >= 1, got {self.u}")
        for name in ("gamma_i", "gamma_e"):
            g = getattr(self, name)
            if not 0.0 <= g <= GAMMA_LIMIT:
                raise InvalidInputError(f"{name} must lie in [0, {GAMMA_LIMIT}], got {g}")
        ce = tuple(solve_equilibrium(self.params, self.r, c) for c in levels)
        object.__setattr__(self, "true_ce", ce)

    @property
    def n_levels(self) -> int:
        return len(self.c_i_levels)

    @property
    def rkf(self) -> float:
        return self.r * self.params.k_f

    def true_deltas(self) -> np.ndarray:
        """Fractional decrease at each level, evaluated at the true c_e."""
        ci = np.asarray(self.c_i_levels)
        return (ci - np.asarray(self.true_ce)) / ci


def sorbed_freundlich(params: FreundlichParams, c_e):
    if np.any(np.asarray(c_e) < 0):
        raise InvalidInputError("c_e must be >= 0")
    return params.k_f * params.c_ref * (np.asarray(c_e, dtype=float) / params.c_ref) ** params.n


def sorbed_from_decrease(r: float, c_i, c_e):
    """Amount sorbed from the drop in solution concentration, (c_i - c_e) / r.

    The result is negative when c_e > c_i, which happens with noisy data.
    """
    if not r > 0:
        raise InvalidInputError(f"r must be > 0, got {r}")
    return (np.asarray(c_i, dtype=float) - c_e) / r


def fractional_decrease(c_i, c_e):
    c_i = np.asarray(c_i, dtype=float)
    if np.any(c_i <= 0):
        raise InvalidInputError("c_i must be > 0")
    return (c_i - c_e) / c_i


def delta_of_system(params: FreundlichParams, r: float, c_e):
    """Fractional decrease implied by the isotherm at equilibrium concentration c_e."""
    c_e = np.asarray(c_e, dtype=float)
    if np.any(c_e <= 0):
        raise InvalidInputError("c_e must be > 0")
    if r < 0:
        raise InvalidInputError("r must be >= 0")
    C = c_e / params.c_ref
    sorbed = r * params.k_f * C**params.n
    return sorbed / (C + sorbed)


def solve_equilibrium(params: FreundlichParams, r: float, c_i: float, rel_tol: float = 1e-12) -> float:
    """True equilibrium concentration from c_e + r * X(c_e) = c_i."""
    if not c_i > 0:
        raise InvalidInputError(f"c_i must be > 0, got {c_i}")
    if r < 0:
        raise InvalidInputError("r must be >= 0")
    rk = r * params.k_f * params.c_ref
    if rk == 0:
        return float(c_i)
    n, c_ref = params.n, params.c_ref

    def balance(c):
        return c + rk * (c / c_ref) ** n - c_i

    # neither term can exceed c_i and one of them carries at least half of it;
    # the factors 2 and 1/4 keep the bracket signs robust to rounding
    hi = min(c_i, c_ref * (2.0 * c_i / rk) ** (1.0 / n))
    lo = min(0.25 * c_i, c_ref * (0.25 * c_i / rk) ** (1.0 / n))
    return solve_scalar(balance, lo, hi, rel_tol=rel_tol)
