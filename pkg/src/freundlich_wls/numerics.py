"""Small deterministic numerical utilities shared by the other modules.

Random streams are backed by numpy's counter-based Philox bit generator,
keyed through a ``SeedSequence`` so that every ``(seed, stream_id)`` pair
maps to its own reproducible, platform-independent sequence.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence

import numpy as np

from .exceptions import BracketError, ConvergenceError, InvalidInputError

__all__ = [
    "RandomStream",
    "sample_normal",
    "percentile",
    "chisq_cdf",
    "chisq_quantile",
    "regularized_gamma_p",
    "solve_scalar",
]

_MASK64 = (1 << 64) - 1


class RandomStream:
    """A reproducible stream of random numbers identified by ``(seed, stream_id)``.

    The stream owns its generator state, so drawing from it advances it.
    Two streams built from the same pair yield identical sequences.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int, stream_id: int = 0):
        if not (0 <= seed <= _MASK64 and 0 <= stream_id <= _MASK64):
            raise InvalidInputError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)


def derive_stream_id(*keys: int) -> int:
    """Hash a tuple of non-negative integers into a 64-bit stream id."""
    ss = np.random.SeedSequence(0, spawn_key=tuple(int(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def sample_normal(stream: RandomStream, mean: float, cv: float) -> float:
    """Draw ``mean * (1 + cv * z)`` with ``z`` standard normal."""
    if cv < 0:
        raise InvalidInputError(f"cv must be >= 0, got {cv}")
    if cv > 0 and mean <= 0:
        raise InvalidInputError("a CV parameterisation needs a positive mean")
    z = stream.standard_normal()
    return float(mean * (1.0 + cv * z))


def percentile(values: Sequence[float], p: float) -> float:
    """Linear interpolation between order statistics at rank ``(n - 1) * p``."""
    data = np.sort(np.asarray(values, dtype=float).ravel())
    n = data.size
    if n == 0:
        raise InvalidInputError("percentile of an empty sequence")
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"p must lie in [0, 1], got {p}")
    h = (n - 1) * p
    lo = int(math.floor(h))
    hi = min(lo + 1, n - 1)
    return float(data[lo] + (h - lo) * (data[hi] - data[lo]))


# -- incomplete gamma ------------------------------------------------------

_EPS = 1e-15
_TINY = 1e-300
_MAX_TERMS = 500


def _gamma_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ConvergenceError("incomplete gamma series did not converge")


def _gamma_contfrac(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise ConvergenceError("incomplete gamma continued fraction did not converge")


def regularized_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(a, x)."""
    if a <= 0:
        raise InvalidInputError("a must be positive")
    if x < 0:
        raise InvalidInputError("x must be non-negative")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_contfrac(a, x))


def chisq_cdf(x: float, dof: int) -> float:
    """CDF of the chi-squared distribution with ``dof`` degrees of freedom."""
    if dof < 1 or int(dof) != dof:
        raise InvalidInputError(f"dof must be a positive integer, got {dof}")
    if x < 0:
        raise InvalidInputError(f"x must be >= 0, got {x}")
    return regularized_gamma_p(dof / 2.0, x / 2.0)


def chisq_quantile(p: float, dof: int) -> float:
    """Inverse of :func:`chisq_cdf`, found by bracketed root finding."""
    if not 0.0 < p < 1.0:
        raise InvalidInputError(f"p must lie in (0, 1), got {p}")
    hi = max(2.0 * dof, 1.0)
    while chisq_cdf(hi, dof) < p:
        hi *= 2.0
    return solve_scalar(lambda x: chisq_cdf(x, dof) - p, 0.0, hi, rel_tol=1e-12)


# -- root finding ----------------------------------------------------------

def solve_scalar(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    rel_tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Find a root of a monotone function on ``[lo, hi]``.

    Bisection shrinks the bracket until its width is below
    ``rel_tol * |midpoint|`` (or it cannot shrink further in floating
    point); a final secant step inside the tiny bracket polishes the
    estimate.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= min(lo, hi) or mid >= max(lo, hi) or abs(hi - lo) <= rel_tol * abs(mid):
            break
        fmid = f(mid)
        if fmid == 0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    else:
        raise ConvergenceError(f"bisection did not converge in {max_iter} iterations")

    # secant polish, kept only if it stays inside the bracket and improves |f|
    best, fbest = (lo, flo) if abs(flo) <= abs(fhi) else (hi, fhi)
    if fhi != flo:
        r = lo - flo * (hi - lo) / (fhi - flo)
        if min(lo, hi) <= r <= max(lo, hi):
            fr = f(r)
            if abs(fr) < abs(fbest):
                best = r
    return best
