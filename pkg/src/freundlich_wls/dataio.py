"""CSV and config-file formats used by the command line tool."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .estimation import IsothermDataset
from .exceptions import InvalidInputError

ISOTHERM_HEADER = ("level", "expected_ci", "measured_ci", "replicate", "ce")
SWEEP_HEADER = (
    "kf", "n", "rkf", "true_cv_kf", "true_cv_n",
    "ratio_kf_p2_5", "ratio_kf_p50", "ratio_kf_p97_5",
    "ratio_n_p2_5", "ratio_n_p50", "ratio_n_p97_5", "rejected",
)
DIAGNOSTICS_HEADER = (
    "kf", "n", "delta_spread", "mean_kf", "mean_n",
    "fit_ratio_n_mean", "fit_ratio_n_std", "fit_ratio_kf_mean", "fit_ratio_kf_std",
    "redraws", "rejected_reps",
)
CHISQ_HEADER = ("percentile", "simulated", "theoretical")


class InputFormatError(InvalidInputError):
    """A data or config file could not be parsed."""


def fmt(v) -> str:
    """Full-precision text for CSV output (round-trips through float())."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


# -- isotherm CSV -----------------------------------------------------------

def _parse_float(text: str, lineno: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise InputFormatError(f"line {lineno}: column {col!r}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise InputFormatError(f"line {lineno}: column {col!r}: value must be finite")
    return v


def read_isotherm_csv(fh: TextIO, r: float, c_ref: float = 1.0) -> IsothermDataset:
    """Parse the long-form isotherm CSV, one row per replicate.

    ``expected_ci`` may be absent or blank; it is kept only if given for
    every level.
    """
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputFormatError("line 1: empty file") from None
    required = {"level", "measured_ci", "replicate", "ce"}
    missing = required - set(header)
    if missing:
        raise InputFormatError(f"line 1: missing column(s) {sorted(missing)}")
    col = {name: header.index(name) for name in header}

    measured: dict[int, float] = {}
    expected: dict[int, float | None] = {}
    reps: dict[int, dict[int, float]] = defaultdict(dict)
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputFormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            level = int(row[col["level"]])
            rep = int(row[col["replicate"]])
        except ValueError:
            raise InputFormatError(f"line {lineno}: level and replicate must be integers") from None
        ci = _parse_float(row[col["measured_ci"]], lineno, "measured_ci")
        ce = _parse_float(row[col["ce"]], lineno, "ce")
        exp = None
        if "expected_ci" in col and row[col["expected_ci"]].strip():
            exp = _parse_float(row[col["expected_ci"]], lineno, "expected_ci")
        if level in measured:
            if measured[level] != ci:
                raise InputFormatError(f"line {lineno}: level {level} has more than one measured_ci")
            if expected[level] != exp:
                raise InputFormatError(f"line {lineno}: level {level} has inconsistent expected_ci")
        measured[level] = ci
        expected[level] = exp
        if rep in reps[level]:
            raise InputFormatError(f"line {lineno}: duplicate replicate {rep} at level {level}")
        reps[level][rep] = ce

    if not measured:
        raise InputFormatError("no data rows")
    levels = sorted(measured)
    counts = {len(reps[lv]) for lv in levels}
    if len(counts) != 1:
        raise InvalidInputError(f"every level needs the same replicate count, got {sorted(counts)}")
    ce = np.array([[reps[lv][k] for k in sorted(reps[lv])] for lv in levels])
    ci = np.array([measured[lv] for lv in levels])
    exp_vals = [expected[lv] for lv in levels]
    exp_arr = None if any(v is None for v in exp_vals) else np.array(exp_vals)
    return IsothermDataset(ci, ce, r, c_ref, expected_ci=exp_arr)


def write_isotherm_csv(dataset: IsothermDataset, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ISOTHERM_HEADER)
    for lv in range(dataset.n_levels):
        exp = "" if dataset.expected_ci is None else fmt(dataset.expected_ci[lv])
        for u in range(dataset.u):
            w.writerow([lv + 1, exp, fmt(dataset.measured_ci[lv]), u + 1, fmt(dataset.ce[lv, u])])


# -- simulation outputs -----------------------------------------------------

def sweep_row(pop) -> list[str]:
    return [fmt(v) for v in (
        pop.k_f, pop.n, pop.rkf, pop.true_cv_kf, pop.true_cv_n,
        *pop.ratio_kf, *pop.ratio_n,
    )] + [str(pop.rejected)]


def diagnostics_row(pop) -> list[str]:
    return [fmt(v) for v in (
        pop.k_f, pop.n, pop.delta_spread, pop.mean_k_f, pop.mean_n,
        *pop.fit_ratio_n, *pop.fit_ratio_kf,
    )] + [str(pop.redraws), str(pop.rejected_reps)]


def write_rows(fh: TextIO, header: Iterable[str], rows: Iterable[Iterable[str]]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def write_chisq_csv(table, fh: TextIO) -> None:
    fh.write(f"# case={table.case},dof={table.dof},reps={table.reps}\n")
    write_rows(fh, CHISQ_HEADER, ([fmt(r.percentile), fmt(r.simulated), fmt(r.theoretical)]
                                  for r in table.rows))


# -- config -----------------------------------------------------------------

def read_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment; keys use underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputFormatError(f"{path}: line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise InputFormatError(f"{path}: line {lineno}: empty key")
            out[key.replace("-", "_")] = value
    return out
