"""Acceptance criteria, each checked at its stated tolerance.

The ten Monte Carlo systems are chosen before any run: the retained grid
corners plus seven systems at evenly spaced quantiles of the delta spread.
All of them use the package default seed 0.
"""

import math
import time

import numpy as np
import pytest

from conftest import record
from freundlich_wls import cli, dataio
from freundlich_wls.estimation import estimate_gamma_e, estimate_gamma_i
from freundlich_wls.numerics import RandomStream, derive_stream_id
from freundlich_wls.simkit import (
    CASES,
    CHISQ_CASES,
    CHISQ_PERCENTILES,
    SweepGrid,
    build_grid,
    chisq_validation,
    generate_batch,
    run_system_cases,
)
from freundlich_wls.weights import gamma_delta, sigma_eps, sigma_eps_effective

SEED = 0
REPS = 10_000


def select_systems(partition):
    grid = partition.grid
    kf_ends = (grid.k_f_values[0], grid.k_f_values[-1])
    n_ends = (grid.n_values[0], grid.n_values[-1])
    corners = [g for g in partition.retained
               if any(math.isclose(g.k_f, k) for k in kf_ends) and g.n in n_ends]
    rest = sorted((g for g in partition.retained if g not in corners), key=lambda g: (g.delta_spread, g.index))
    picks = [rest[int((i + 0.5) * len(rest) / 7)] for i in range(7)]
    return corners + picks


@pytest.fixture(scope="module")
def partition():
    return build_grid()


@pytest.fixture(scope="module")
def populations(partition):
    systems = select_systems(partition)
    return [(gs, run_system_cases(CASES, gs.system, REPS, SEED, derive_stream_id(gs.index))) for gs in systems]


def test_c01_grid_counts():
    t0 = time.perf_counter()
    part = build_grid()
    dt = time.perf_counter() - t0
    ok = (part.total, len(part.retained), len(part.discarded)) == (546, 425, 121) and dt < 1.0
    record(1, ok, f"candidates {part.total}, retained {len(part.retained)}, "
                  f"discarded {len(part.discarded)}, {dt:.2f} s")
    assert ok


def test_c02_unbiased(populations):
    devs = []
    for gs, pops in populations:
        p = pops["I"]
        devs.append(max(abs(p.mean_k_f / gs.k_f - 1), abs(p.mean_n / gs.n - 1)))
    worst = max(devs)
    ok = len(populations) == 10 and worst < 0.004
    record(2, ok, f"max |mean/true - 1| over 10 systems = {worst:.4%} (limit 0.4%)")
    assert ok


def test_c03_case_i_calibration(populations):
    fails = []
    for gs, pops in populations:
        p = pops["I"]
        band_kf = 0.10 if gs.system.rkf <= 1.0 else 0.05
        checks = [
            all(0.97 <= v <= 1.03 for v in (p.ratio_kf[1], p.ratio_n[1])),
            all(abs(v - 1) <= 0.05 for v in (p.ratio_n[0], p.ratio_n[2])),
            all(abs(v - 1) <= band_kf for v in (p.ratio_kf[0], p.ratio_kf[2])),
        ]
        if not all(checks):
            fails.append((round(gs.k_f, 3), gs.n, p.ratio_kf, p.ratio_n))
    worst_n = max(max(abs(v - 1) for v in pops["I"].ratio_n) for _, pops in populations)
    worst_kf = max(max(abs(v - 1) for v in pops["I"].ratio_kf) for _, pops in populations)
    record(3, not fails, f"max |ratio - 1|: N {worst_n:.3f}, K_F {worst_kf:.3f}; failing systems {fails}")
    assert not fails


def test_c04_true_cv_magnitudes(populations):
    low = [pops["I"] for gs, pops in populations if math.isclose(gs.system.rkf, 0.5)]
    high = [pops["I"] for gs, pops in populations if math.isclose(gs.system.rkf, 10.0)]
    ok_low = all(0.03 <= p.true_cv_kf <= 0.05 and 0.015 <= p.true_cv_n <= 0.035 for p in low)
    ok_high = all(0.0 < p.true_cv_kf <= 0.03 and 0.0 < p.true_cv_n <= 0.02 for p in high)
    decreasing = (max(p.true_cv_kf for p in high) < min(p.true_cv_kf for p in low)
                  and max(p.true_cv_n for p in high) < min(p.true_cv_n for p in low))
    ok = bool(low) and bool(high) and ok_low and ok_high and decreasing
    fmt = lambda ps: ", ".join(f"({p.true_cv_kf:.2%}, {p.true_cv_n:.2%})" for p in ps)  # noqa: E731
    record(4, ok, f"(CV K_F, CV N) at RK_F=0.5: {fmt(low)}; at RK_F=10: {fmt(high)}")
    assert ok


def test_c05_case_ii_spread(populations):
    fails, seen = [], {"low": [], "high": []}
    for gs, pops in populations:
        p = pops["II"]
        if gs.n < 0.4:
            lo, hi, group = 0.35, 0.70, "low"
        elif gs.n >= 0.6:
            lo, hi, group = 0.25, 0.50, "high"
        else:
            continue
        devs = [abs(v - 1) for v in (p.ratio_kf[0], p.ratio_kf[2], p.ratio_n[0], p.ratio_n[2])]
        seen[group].extend(devs)
        medians_ok = all(0.90 <= v <= 1.10 for v in (p.ratio_kf[1], p.ratio_n[1]))
        if not (all(lo <= d <= hi for d in devs) and medians_ok):
            fails.append((round(gs.k_f, 3), gs.n))
    ok = not fails and seen["low"] and seen["high"]
    record(5, bool(ok), f"deviations N<0.4: {min(seen['low']):.3f}-{max(seen['low']):.3f}; "
                        f"N>=0.6: {min(seen['high']):.3f}-{max(seen['high']):.3f}; failing {fails}")
    assert ok


def test_c06_case_iii_degradation(populations):
    k = len(populations)
    below = sum(all(v < 1 for v in (pops["III"].ratio_kf[1], pops["III"].ratio_n[1])) for _, pops in populations)
    wider = sum(pops["III"].ratio_kf[2] > pops["II"].ratio_kf[2] and pops["III"].ratio_n[2] > pops["II"].ratio_n[2]
                for _, pops in populations)
    ok = below > k / 2 and wider > k / 2
    record(6, ok, f"median ratio < 1 on {below}/{k}; 97.5th above case II on {wider}/{k}")
    assert ok


def aggregate_width(populations, case):
    widths = [p.ratio_kf[2] - p.ratio_kf[0] for p in (pops[case] for _, pops in populations)]
    widths += [p.ratio_n[2] - p.ratio_n[0] for p in (pops[case] for _, pops in populations)]
    return float(np.mean(widths))


def test_c07_case_iv_ordering(populations):
    w = {c: aggregate_width(populations, c) for c in ("II", "III", "IV")}
    ok = w["II"] < w["IV"] < w["III"]
    record(7, ok, f"mean 2.5-97.5 width: II {w['II']:.3f} < IV {w['IV']:.3f} < III {w['III']:.3f}")
    assert ok


def test_c08_chisq_calibration():
    worst, times, dofs = 0.0, [], []
    for case_id in sorted(CHISQ_CASES):
        t0 = time.perf_counter()
        table = chisq_validation(case_id, REPS, SEED)
        times.append(time.perf_counter() - t0)
        assert [r.percentile for r in table.rows] == list(CHISQ_PERCENTILES)
        worst = max(worst, table.max_rel_error())
        dofs.append(table.dof)
    ok = worst <= 0.05 and max(times) < 60 and dofs == [3, 4, 7]
    record(8, ok, f"dof {dofs}; max relative percentile error {worst:.2%}; slowest case {max(times):.2f} s")
    assert ok


def test_c09_oracle_equivalence():
    d, n, gi, ge = np.meshgrid(
        np.linspace(0.01, 1.0, 10), np.linspace(0.05, 1.0, 10),
        np.linspace(0.0, 0.1, 10), np.linspace(0.001, 0.1, 10), indexing="ij",
    )
    u = 1 + (np.arange(d.size).reshape(d.shape) % 5)
    a = sigma_eps(d, n, gi, ge, u)
    b = sigma_eps_effective(d, n, gi, ge, u)
    rel = float(np.max(np.abs(a / b - 1)))
    ok = d.size == 10_000 and rel < 1e-12
    record(9, ok, f"{d.size} points, max relative difference {rel:.2e}")
    assert ok


def test_c10_spot_values():
    gd = float(gamma_delta(0.5, 0.01, 0.05, 3))
    gi = float(estimate_gamma_i([0.94, 9.8], [1.0, 10.0]))
    ok = abs(gd - 0.031) <= 0.0005 and abs(gi - 0.0295) <= 0.0015
    record(10, ok, f"gamma_delta = {gd:.5f}; gamma_i worked example = {gi:.5f}")
    assert ok


def test_c11_estimator_distributions():
    grid = SweepGrid()
    system = grid.system(1.0, 0.7)
    L, U = system.n_levels, system.u
    batch = generate_batch(system, RandomStream(SEED, derive_stream_id(7, 11)), 100_000)
    ge = estimate_gamma_e(batch.ce)
    gi = estimate_gamma_i(batch.measured_ci, np.asarray(system.c_i_levels))
    stat_e = float(np.mean(L * (U - 1) * ge**2 / system.gamma_e**2))
    stat_i = float(np.mean((L - 1) * gi**2 / system.gamma_i**2))
    ok = abs(stat_e / (L * (U - 1)) - 1) <= 0.03 and abs(stat_i / (L - 1) - 1) <= 0.03
    record(11, ok, f"mean statistic: gamma_e {stat_e:.3f} vs {L * (U - 1)}, gamma_i {stat_i:.3f} vs {L - 1}")
    assert ok


def test_c12_full_sweep(tmp_path, capsys):
    t0 = time.perf_counter()
    argv = ["sweep", "--reps", "1000", "--seed", str(SEED)]
    codes = [cli.main(argv + ["--out", str(tmp_path / name)]) for name in ("a", "b")]
    dt = (time.perf_counter() - t0) / 2
    capsys.readouterr()
    ok = codes == [0, 0]
    for case in CASES:
        name = f"sweep_case_{case}.csv"
        a, b = (tmp_path / "a" / name).read_text(), (tmp_path / "b" / name).read_text()
        lines = a.splitlines()
        ok &= a == b
        ok &= lines[0] == ",".join(dataio.SWEEP_HEADER) and len(lines) == 426
        ok &= all(len(row.split(",")) == 12 and all(math.isfinite(float(v)) for v in row.split(","))
                  for row in lines[1:])
    ok &= dt < 600
    record(12, bool(ok), f"4 cases x 425 systems x 1000 reps in {dt:.1f} s per run; reruns identical")
    assert ok
