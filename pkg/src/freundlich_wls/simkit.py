"""Monte Carlo engine for checking CV estimates of Freundlich parameters.

Isotherms are generated in batches: for one sorption system all ``reps``
isotherms are drawn from a single :class:`RandomStream` as ``(reps, L)``
c_i and ``(reps, L, U)`` c_e arrays, then every fitting case is applied
to the whole batch with vectorized least squares. Each system in a sweep
gets its own stream derived from ``(seed, system index)``, so results do
not depend on execution order or worker count.

Cases:

``I``
    WLS with sigma_eps from the true fractional decreases and CVs.
``II``
    WLS with fractional decreases and CVs estimated from each isotherm.
``III``
    ULS with residual-based (a-posteriori) variance scaling.
``IV``
    WLS with case-I weights times 0.1, rescaled a-posteriori.

All cases start from a ULS fit whose exponent feeds the weight formula;
there is exactly one reweighted fit after it.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .estimation import (
    IsothermDataset,
    estimate_delta,
    estimate_gamma_e,
    estimate_gamma_i,
    log_points,
)
from .exceptions import DegenerateSystemError, InvalidInputError, RejectedIsotherm
from .isotherm import FreundlichParams, SorptionSystem
from .numerics import RandomStream, chisq_quantile, derive_stream_id, percentile
from .regress import FitResult, LineArrays, wls_arrays
from .weights import GammaRangeWarning, sigma_eps

log = logging.getLogger(__name__)

CASES = ("I", "II", "III", "IV")
CASE_METHODS = {
    "I": "WLS-a-priori-true",
    "II": "WLS-a-priori-estimated",
    "III": "ULS-posterior",
    "IV": "WLS-relative-posterior",
}
RELATIVE_FACTOR = 0.1
MAX_REDRAWS = 1000
LN10 = math.log(10.0)
RATIO_PERCENTILES = (0.025, 0.5, 0.975)
# true CVs below this are rounding noise of a noiseless system
TINY_CV = 1e-12


# -- grid -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepGrid:
    k_f_min: float = 0.5
    k_f_max: float = 10.0
    k_f_steps: int = 25
    n_min: float = 0.2
    n_max: float = 1.0
    n_steps: int = 20
    r: float = 1.0
    c_i_levels: tuple[float, ...] = (0.1, 0.32, 1.0, 3.2, 10.0)
    u: int = 3
    gamma_i: float = 0.01
    gamma_e: float = 0.05
    min_delta: float = 0.30
    reps: int = 10_000
    c_ref: float = 1.0

    @property
    def k_f_values(self) -> np.ndarray:
        factor = (self.k_f_max / self.k_f_min) ** (1.0 / self.k_f_steps)
        return self.k_f_min * factor ** np.arange(self.k_f_steps + 1)

    @property
    def n_values(self) -> np.ndarray:
        step = (self.n_max - self.n_min) / self.n_steps
        # rounding keeps 0.2 + 20 * 0.04 at exactly 1.0
        return np.round(self.n_min + step * np.arange(self.n_steps + 1), 12)

    def system(self, k_f: float, n: float) -> SorptionSystem:
        return SorptionSystem(
            FreundlichParams(float(k_f), float(n), self.c_ref),
            self.r, self.c_i_levels, self.u, self.gamma_i, self.gamma_e,
        )


@dataclass(frozen=True)
class GridSystem:
    index: int
    system: SorptionSystem
    deltas: tuple[float, ...]

    @property
    def k_f(self) -> float:
        return self.system.params.k_f

    @property
    def n(self) -> float:
        return self.system.params.n

    @property
    def delta_spread(self) -> float:
        return max(self.deltas) - min(self.deltas)


@dataclass(frozen=True)
class GridPartition:
    grid: SweepGrid
    retained: tuple[GridSystem, ...]
    discarded: tuple[GridSystem, ...]

    @property
    def total(self) -> int:
        return len(self.retained) + len(self.discarded)


def build_grid(grid: SweepGrid | None = None) -> GridPartition:
    """Enumerate all (k_f, n) systems and drop those with delta < min_delta at any level."""
    grid = grid or SweepGrid()
    retained, discarded = [], []
    index = 0
    for k_f in grid.k_f_values:
        for n in grid.n_values:
            system = grid.system(k_f, n)
            deltas = tuple(float(d) for d in system.true_deltas())
            gs = GridSystem(index, system, deltas)
            (retained if min(deltas) >= grid.min_delta else discarded).append(gs)
            index += 1
    return GridPartition(grid, tuple(retained), tuple(discarded))


# -- generation -------------------------------------------------------------

class IsothermBatch(NamedTuple):
    measured_ci: np.ndarray  # (reps, L)
    ce: np.ndarray  # (reps, L, U)
    redraws: int


def _draw(system: SorptionSystem, stream: RandomStream, k: int):
    L, U = system.n_levels, system.u
    ci = np.asarray(system.c_i_levels) * (1.0 + system.gamma_i * stream.standard_normal((k, L)))
    ce = np.asarray(system.true_ce)[:, None] * (1.0 + system.gamma_e * stream.standard_normal((k, L, U)))
    return ci, ce


def _bad_rows(ci, ce):
    return np.any(ce <= 0, axis=(1, 2)) | np.any(ci[:, :, None] - ce <= 0, axis=(1, 2))


def generate_batch(system: SorptionSystem, stream: RandomStream, reps: int) -> IsothermBatch:
    """Draw ``reps`` isotherms; unusable ones (c_e <= 0 or X <= 0) are redrawn whole."""
    ci, ce = _draw(system, stream, reps)
    redraws = 0
    bad = np.flatnonzero(_bad_rows(ci, ce))
    rounds = 0
    while bad.size:
        rounds += 1
        if rounds > MAX_REDRAWS:
            raise DegenerateSystemError(
                f"isotherms still unusable after {MAX_REDRAWS} redraws for {system.params}"
            )
        redraws += bad.size
        ci[bad], ce[bad] = _draw(system, stream, bad.size)
        bad = bad[_bad_rows(ci[bad], ce[bad])]
    return IsothermBatch(ci, ce, redraws)


def generate_isotherm(system: SorptionSystem, stream: RandomStream) -> IsothermDataset:
    batch = generate_batch(system, stream, 1)
    return IsothermDataset(
        batch.measured_ci[0], batch.ce[0], system.r, system.params.c_ref,
        expected_ci=np.asarray(system.c_i_levels),
    )


def noiseless_isotherm(system: SorptionSystem) -> IsothermDataset:
    ce = np.repeat(np.asarray(system.true_ce)[:, None], system.u, axis=1)
    ci = np.asarray(system.c_i_levels)
    return IsothermDataset(ci, ce, system.r, system.params.c_ref, expected_ci=ci)


def prepare_points(dataset: IsothermDataset):
    """Per-level means of log10(c_e / c_ref) and log10(X) over replicates."""
    return log_points(dataset.measured_ci, dataset.ce, dataset.r, dataset.c_ref)


# -- fitting cases ----------------------------------------------------------

class CaseArrays(NamedTuple):
    """Second-fit results of one case for a batch; ``valid`` masks rejected reps."""

    k_f: np.ndarray
    n: np.ndarray
    cv_kf: np.ndarray
    cv_n: np.ndarray
    chi2: np.ndarray
    scale: np.ndarray
    first_k_f: np.ndarray
    first_n: np.ndarray
    valid: np.ndarray
    line: LineArrays


def _apriori_fit(x, y, sigma) -> LineArrays:
    # rows with zero sigma everywhere (noiseless CVs) are fitted unweighted with zero variance
    zero = np.all(sigma == 0, axis=-1)
    if not np.any(zero):
        return wls_arrays(x, y, 1.0 / sigma**2)
    safe = np.where(zero[..., None], 1.0, sigma)
    line = wls_arrays(x, y, 1.0 / safe**2)
    return line._replace(
        var_a=np.where(zero, 0.0, line.var_a),
        var_n=np.where(zero, 0.0, line.var_n),
        chi2=np.where(zero, 0.0, line.chi2),
    )


def _case_sigma_true(system: SorptionSystem, first_n):
    deltas = system.true_deltas()
    return sigma_eps(deltas[None, :], first_n[:, None], system.gamma_i, system.gamma_e, system.u)


def case_arrays(case: str, system: SorptionSystem, measured_ci, ce) -> CaseArrays:
    """Apply one fitting case to a batch of isotherms (leading axis = reps)."""
    if case not in CASES:
        raise InvalidInputError(f"unknown case {case!r}; expected one of {CASES}")
    ci = np.atleast_2d(measured_ci)
    ce = np.asarray(ce, dtype=float)
    if ce.ndim == 2:
        ce = ce[None]
    x, y = log_points(ci, ce, system.r, system.params.c_ref)
    reps, L = x.shape
    dof = L - 2
    first = wls_arrays(x, y, 1.0)
    valid = np.ones(reps, dtype=bool)
    scale = np.ones(reps)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GammaRangeWarning)
        if case == "I":
            line = _apriori_fit(x, y, _case_sigma_true(system, first.n))
        elif case == "II":
            d = estimate_delta(ci, ce)
            valid = np.all(d > 0, axis=-1)
            d = np.where(valid[:, None], d, 0.5)
            ge = estimate_gamma_e(ce)
            gi = estimate_gamma_i(ci, np.asarray(system.c_i_levels))
            sigma = sigma_eps(d, first.n[:, None], np.atleast_1d(gi)[:, None],
                              np.atleast_1d(ge)[:, None], system.u)
            line = _apriori_fit(x, y, sigma)
        elif case == "III":
            line = first
            scale = first.chi2 / dof
        else:
            sigma = RELATIVE_FACTOR * _case_sigma_true(system, first.n)
            # relative weights are undefined when every sigma is zero; fall back to equal ones
            sigma = np.where(np.all(sigma == 0, axis=-1, keepdims=True), 1.0, sigma)
            line = wls_arrays(x, y, 1.0 / sigma**2)
            scale = line.chi2 / dof

    sd_a = np.sqrt(line.var_a * scale)
    sd_n = np.sqrt(line.var_n * scale)
    c_ref = system.params.c_ref
    return CaseArrays(
        k_f=10.0**line.a / c_ref,
        n=line.n,
        cv_kf=LN10 * sd_a,
        cv_n=sd_n / line.n,
        chi2=line.chi2,
        scale=scale,
        first_k_f=10.0**first.a / c_ref,
        first_n=first.n,
        valid=valid,
        line=line,
    )


def run_case(case: str, system: SorptionSystem, dataset: IsothermDataset) -> FitResult:
    """Fit one isotherm with the given case's weighting procedure."""
    res = case_arrays(case, system, dataset.measured_ci, dataset.ce)
    if not res.valid[0]:
        raise RejectedIsotherm("an estimated fractional decrease is <= 0; weights undefined")
    line = LineArrays(*(np.asarray(v)[0] for v in res.line))
    return FitResult.from_line(line, system.n_levels - 2, float(res.scale[0]),
                               CASE_METHODS[case], system.params.c_ref)


# -- populations ------------------------------------------------------------

@dataclass
class SystemPopulation:
    case: str
    k_f: float
    n: float
    rkf: float
    reps: int
    k_f_samples: np.ndarray = field(repr=False)
    n_samples: np.ndarray = field(repr=False)
    cv_kf_est: np.ndarray = field(repr=False)
    cv_n_est: np.ndarray = field(repr=False)
    true_cv_kf: float
    true_cv_n: float
    ratio_kf: tuple[float, float, float]
    ratio_n: tuple[float, float, float]
    redraws: int
    rejected_reps: int
    fit_ratio_n: tuple[float, float]
    fit_ratio_kf: tuple[float, float]
    delta_spread: float
    degenerate: bool = False

    @property
    def rejected(self) -> int:
        return self.redraws + self.rejected_reps

    @property
    def mean_k_f(self) -> float:
        return float(np.mean(self.k_f_samples))

    @property
    def mean_n(self) -> float:
        return float(np.mean(self.n_samples))


def _true_cv(samples) -> float:
    return float(np.std(samples, ddof=1) / np.mean(samples))


def _ratio_percentiles(est, true_cv):
    if not true_cv > TINY_CV:
        return (math.nan,) * 3
    ratios = est / true_cv
    return tuple(percentile(ratios, p) for p in RATIO_PERCENTILES)


def _population(case, system, res: CaseArrays, true_kf, true_n, redraws, reps):
    v = res.valid
    degenerate = not (true_kf > TINY_CV and true_n > TINY_CV)
    fr_n = res.first_n[v] / res.n[v]
    fr_kf = res.first_k_f[v] / res.k_f[v]
    deltas = system.true_deltas()
    return SystemPopulation(
        case=case,
        k_f=system.params.k_f,
        n=system.params.n,
        rkf=system.rkf,
        reps=reps,
        k_f_samples=res.k_f[v],
        n_samples=res.n[v],
        cv_kf_est=res.cv_kf[v],
        cv_n_est=res.cv_n[v],
        true_cv_kf=true_kf,
        true_cv_n=true_n,
        ratio_kf=_ratio_percentiles(res.cv_kf[v], true_kf),
        ratio_n=_ratio_percentiles(res.cv_n[v], true_n),
        redraws=redraws,
        rejected_reps=int(reps - v.sum()),
        fit_ratio_n=(float(fr_n.mean()), float(fr_n.std(ddof=1))),
        fit_ratio_kf=(float(fr_kf.mean()), float(fr_kf.std(ddof=1))),
        delta_spread=float(deltas.max() - deltas.min()),
        degenerate=degenerate,
    )


def run_system_cases(
    cases: Iterable[str],
    system: SorptionSystem,
    reps: int,
    seed: int,
    stream_id: int = 0,
) -> dict[str, SystemPopulation]:
    """Run several cases on one shared batch of isotherms.

    True CVs are always taken from the case-I fits of this batch.
    """
    cases = tuple(cases)
    if reps < 2:
        raise InvalidInputError("reps must be >= 2")
    for c in cases:
        if c not in CASES:
            raise InvalidInputError(f"unknown case {c!r}")
    batch = generate_batch(system, RandomStream(seed, stream_id), reps)
    ref = case_arrays("I", system, batch.measured_ci, batch.ce)
    with np.errstate(invalid="ignore", divide="ignore"):
        true_kf, true_n = _true_cv(ref.k_f), _true_cv(ref.n)
    out = {}
    for c in cases:
        res = ref if c == "I" else case_arrays(c, system, batch.measured_ci, batch.ce)
        out[c] = _population(c, system, res, true_kf, true_n, batch.redraws, reps)
    return out


def run_system(case: str, system: SorptionSystem, reps: int, seed: int, stream_id: int = 0) -> SystemPopulation:
    return run_system_cases((case,), system, reps, seed, stream_id)[case]


def _sweep_job(args):
    cases, gs, reps, seed = args
    return gs.index, run_system_cases(cases, gs.system, reps, seed, derive_stream_id(gs.index))


def run_sweep(
    cases: Sequence[str],
    partition: GridPartition,
    seed: int,
    reps: int | None = None,
    parallelism: int = 1,
    on_result: Callable[[int, dict[str, SystemPopulation]], None] | None = None,
    systems: Sequence[GridSystem] | None = None,
) -> dict[str, list[SystemPopulation]]:
    """Run every retained system for the given cases.

    Results come back in grid order whatever ``parallelism`` is.
    ``on_result`` is called after each system so callers can persist
    partial output.
    """
    reps = reps or partition.grid.reps
    systems = partition.retained if systems is None else systems
    jobs = [(tuple(cases), gs, reps, seed) for gs in systems]
    out: dict[str, list[SystemPopulation]] = {c: [] for c in cases}

    def collect(index, pops):
        for c in cases:
            out[c].append(pops[c])
        if on_result is not None:
            on_result(index, pops)

    if parallelism <= 1:
        for job in jobs:
            collect(*_sweep_job(job))
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            for index, pops in pool.map(_sweep_job, jobs, chunksize=4):
                collect(index, pops)
    return out


# -- chi-squared calibration ------------------------------------------------

@dataclass(frozen=True)
class ChisqCase:
    r: float
    k_f: float
    n: float
    gamma_i: float
    gamma_e: float
    u: int
    c_i_levels: tuple[float, ...]

    @property
    def dof(self) -> int:
        return len(self.c_i_levels) - 2

    def system(self) -> SorptionSystem:
        return SorptionSystem(FreundlichParams(self.k_f, self.n), self.r, self.c_i_levels,
                              self.u, self.gamma_i, self.gamma_e)


CHISQ_CASES = {
    1: ChisqCase(0.5, 0.5, 0.9, 0.005, 0.01, 3, (0.1, 0.32, 1.0, 3.2, 10.0)),
    2: ChisqCase(0.04, 200.0, 0.3, 0.025, 0.05, 2, (0.2, 0.5, 2.0, 5.0, 10.0, 20.0)),
    3: ChisqCase(1.0, 1.0, 0.7, 0.025, 0.05, 1, (0.1, 0.2, 0.32, 0.7, 1.0, 2.0, 3.2, 7.0, 10.0)),
}
CHISQ_PERCENTILES = (10, 25, 50, 75, 90)


class ChisqRow(NamedTuple):
    percentile: float
    simulated: float
    theoretical: float


@dataclass(frozen=True)
class ChisqTable:
    case: int
    dof: int
    reps: int
    rows: tuple[ChisqRow, ...]
    chi2: np.ndarray = field(repr=False)

    def max_rel_error(self) -> float:
        return max(abs(r.simulated / r.theoretical - 1.0) for r in self.rows)


def chisq_validation(case_id: int, reps: int = 10_000, seed: int = 0,
                     percentiles: Sequence[float] = CHISQ_PERCENTILES) -> ChisqTable:
    """Compare simulated chi-squared values of weighted fits with the theoretical law."""
    if case_id not in CHISQ_CASES:
        raise InvalidInputError(f"chi-squared case must be one of {sorted(CHISQ_CASES)}")
    if reps < 2:
        raise InvalidInputError("reps must be >= 2")
    design = CHISQ_CASES[case_id]
    system = design.system()
    batch = generate_batch(system, RandomStream(seed, derive_stream_id(10**6, case_id)), reps)
    res = case_arrays("I", system, batch.measured_ci, batch.ce)
    rows = tuple(
        ChisqRow(float(p), percentile(res.chi2, p / 100.0), chisq_quantile(p / 100.0, design.dof))
        for p in percentiles
    )
    return ChisqTable(case_id, design.dof, reps, rows, res.chi2)
