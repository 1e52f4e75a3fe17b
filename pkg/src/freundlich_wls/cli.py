"""Command line interface: ``freundlich-wls <command> ...``.

Exit codes: 0 success, 2 input/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import dataio
from .estimation import estimate_error_params
from .exceptions import InvalidInputError, NumericalError
from .isotherm import FreundlichParams, SorptionSystem
from .numerics import RandomStream, derive_stream_id
from .pipeline import FIT_METHODS, fit_isotherm
from .simkit import CASES, SweepGrid, build_grid, chisq_validation, generate_isotherm, run_sweep, run_system_cases
from .weights import weight_surface, write_surface_csv

log = logging.getLogger("freundlich_wls")

SEED_ENV = "FREUNDLICH_WLS_SEED"
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _g(v: float) -> str:
    return f"{v:.6g}"


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InvalidInputError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# -- commands ---------------------------------------------------------------

def cmd_fit(args) -> int:
    path = Path(args.data)
    if not path.is_file():
        raise InvalidInputError(f"data file not found: {path}")
    if args.r is None:
        raise InvalidInputError("--r (sorbent-liquid ratio, kg/L) is required")
    if args.method == "wls-apriori" and (args.gamma_i is None or args.gamma_e is None):
        raise InvalidInputError("--method wls-apriori requires --gamma-i and --gamma-e")
    with open(path, newline="", encoding="utf-8") as fh:
        ds = dataio.read_isotherm_csv(fh, args.r, args.c_ref)
    if args.estimate_only:
        est = estimate_error_params(ds)
        print(f"gamma_i       {_g(est.gamma_i)}")
        print(f"gamma_e       {_g(est.gamma_e)}")
        for i, d in enumerate(est.delta_per_level):
            print(f"delta[{i + 1}]      {_g(d)}")
        return 0
    report = fit_isotherm(ds, args.method, args.gamma_i, args.gamma_e)
    res = report.result

    out = sys.stdout
    print(f"method        {res.method}", file=out)
    print(f"K_F           {_g(res.k_f)}  (sd {_g(res.sigma_kf)}, CV {_g(res.cv_kf)})", file=out)
    print(f"N             {_g(res.n)}  (sd {_g(res.sigma_n)}, CV {_g(res.cv_n)})", file=out)
    print(f"a             {_g(res.a)}  (sd {_g(res.sigma_a)})", file=out)
    print(f"chi2          {_g(res.chi2)}  dof {res.dof}", file=out)
    print(f"scale_factor  {_g(res.scale_factor)}", file=out)
    if report.gamma_i is not None:
        print(f"gamma_i       {_g(report.gamma_i)}", file=out)
        print(f"gamma_e       {_g(report.gamma_e)}", file=out)
    print("level  delta  x  y  sigma  residual", file=out)
    for i in range(len(report.x)):
        print(f"{i + 1}  {_g(report.deltas[i])}  {_g(report.x[i])}  {_g(report.y[i])}  "
              f"{_g(report.sigma[i])}  {_g(report.residuals[i])}", file=out)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)

    if args.output:
        payload = res.to_dict()
        payload.update(
            gamma_i=report.gamma_i, gamma_e=report.gamma_e, warnings=report.warnings,
            levels=[
                {"delta": float(d), "x": float(x), "y": float(y), "sigma": float(s), "residual": float(r)}
                for d, x, y, s, r in zip(report.deltas, report.x, report.y, report.sigma, report.residuals)
            ],
        )
        Path(args.output).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return 0


def _grid_from_args(args) -> SweepGrid:
    kw = {}
    for name in ("r", "u", "gamma_i", "gamma_e", "min_delta", "reps"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    if getattr(args, "levels", None):
        kw["c_i_levels"] = tuple(args.levels)
    return SweepGrid(**kw)


def cmd_sweep(args) -> int:
    cases = CASES if args.case == "all" else (args.case,)
    grid = _grid_from_args(args)
    if grid.reps < 2:
        raise InvalidInputError("--reps must be >= 2")
    if args.parallelism < 1:
        raise InvalidInputError("--parallelism must be >= 1")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    partition = build_grid(grid)

    handles = {}
    for c in cases:
        for kind, header in (("sweep", dataio.SWEEP_HEADER), ("diagnostics", dataio.DIAGNOSTICS_HEADER)):
            fh = open(out_dir / f"{kind}_case_{c}.csv.partial", "w", newline="", encoding="utf-8")
            dataio.write_rows(fh, header, [])
            handles[c, kind] = fh

    def persist(index, pops):
        for c in cases:
            handles[c, "sweep"].write(",".join(dataio.sweep_row(pops[c])) + "\n")
            handles[c, "diagnostics"].write(",".join(dataio.diagnostics_row(pops[c])) + "\n")
            handles[c, "sweep"].flush()

    try:
        run_sweep(cases, partition, args.seed, grid.reps, args.parallelism, on_result=persist)
    finally:
        for fh in handles.values():
            fh.close()
    for (c, kind) in handles:
        src = out_dir / f"{kind}_case_{c}.csv.partial"
        src.replace(out_dir / f"{kind}_case_{c}.csv")

    summary = (
        f"candidates = {partition.total}\n"
        f"retained = {len(partition.retained)}\n"
        f"discarded = {len(partition.discarded)}\n"
        f"reps = {grid.reps}\n"
        f"seed = {args.seed}\n"
        f"cases = {','.join(cases)}\n"
    )
    (out_dir / "summary.txt").write_text(summary, encoding="utf-8")
    sys.stdout.write(summary)
    return 0


def cmd_simulate(args) -> int:
    params = FreundlichParams(args.kf, args.n, args.c_ref)
    levels = tuple(args.levels) if args.levels else SweepGrid().c_i_levels
    system = SorptionSystem(params, args.r, levels, args.u, args.gamma_i, args.gamma_e)
    cases = CASES if args.case == "all" else (args.case,)
    if args.reps < 2:
        raise InvalidInputError("--reps must be >= 2")
    if args.write_isotherm:
        ds = generate_isotherm(system, RandomStream(args.seed, derive_stream_id(2**32, 0)))
        with open(args.write_isotherm, "w", newline="", encoding="utf-8") as fh:
            dataio.write_isotherm_csv(ds, fh)
    pops = run_system_cases(cases, system, args.reps, args.seed)
    rows = [dataio.sweep_row(pops[c]) for c in cases]
    print("case," + ",".join(dataio.SWEEP_HEADER))
    for c, row in zip(cases, rows):
        print(c + "," + ",".join(row))
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            dataio.write_rows(fh, ("case",) + dataio.SWEEP_HEADER, ([c] + r for c, r in zip(cases, rows)))
    if any(p.degenerate for p in pops.values()):
        print("warning: true CVs are zero; ratio statistics are undefined", file=sys.stderr)
    return 0


def cmd_validate_chisq(args) -> int:
    if args.reps < 2:
        raise InvalidInputError("--reps must be >= 2")
    if args.reps < 1000:
        print(f"warning: reps={args.reps} gives imprecise Monte Carlo percentiles", file=sys.stderr)
    table = chisq_validation(args.case, args.reps, args.seed)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            dataio.write_chisq_csv(table, fh)
    else:
        dataio.write_chisq_csv(table, sys.stdout)
    print(f"dof = {table.dof}; max relative deviation = {_g(table.max_rel_error())}", file=sys.stderr)
    return 0


def cmd_weights_table(args) -> int:
    gamma_i = 0.5 * args.gamma_e if args.gamma_i is None else args.gamma_i
    deltas = np.round(np.linspace(args.delta_min, args.delta_max, args.delta_steps), 12)
    ns = np.round(np.linspace(args.n_min, args.n_max, args.n_steps), 12)
    rows = weight_surface(deltas, ns, gamma_i, args.gamma_e, args.u)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_surface_csv(rows, fh)
    else:
        write_surface_csv(rows, sys.stdout)
    return 0


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freundlich-wls", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat 'key = value' file; command line flags override it")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit one isotherm CSV")
    f.add_argument("data", help="long-form CSV: level,expected_ci,measured_ci,replicate,ce")
    f.add_argument("--method", choices=FIT_METHODS, default="wls-estimated")
    f.add_argument("--r", type=float, help="sorbent-liquid ratio, kg/L")
    f.add_argument("--c-ref", type=float, default=1.0)
    f.add_argument("--gamma-i", type=float)
    f.add_argument("--gamma-e", type=float)
    f.add_argument("--output", help="write the result as JSON")
    f.add_argument("--estimate-only", action="store_true",
                   help="only report the estimated fractional decreases and CVs (wls-estimated inputs)")
    f.set_defaults(func=cmd_fit)

    def sim_flags(sp, reps_default):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--reps", type=int, default=reps_default)
        sp.add_argument("--case", choices=CASES + ("all",), default="all")
        sp.add_argument("--levels", type=_float_list, help="comma-separated design c_i, mg/L")
        sp.add_argument("--u", type=int, default=3)
        sp.add_argument("--gamma-i", type=float, default=0.01)
        sp.add_argument("--gamma-e", type=float, default=0.05)

    s = sub.add_parser("sweep", help="run the (K_F, N) grid")
    sim_flags(s, 10_000)
    s.add_argument("--r", type=float, default=1.0)
    s.add_argument("--min-delta", type=float, default=0.30)
    s.add_argument("--parallelism", type=int, default=1)
    s.add_argument("--out", default="sweep-out")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("simulate", help="run one sorption system")
    sim_flags(m, 10_000)
    m.add_argument("--kf", type=float, required=True)
    m.add_argument("--n", type=float, required=True)
    m.add_argument("--r", type=float, default=1.0)
    m.add_argument("--c-ref", type=float, default=1.0)
    m.add_argument("--out")
    m.add_argument("--write-isotherm", help="also write one generated isotherm as CSV")
    m.set_defaults(func=cmd_simulate)

    c = sub.add_parser("validate-chisq", help="chi-squared calibration for one reference case")
    c.add_argument("--case", type=int, choices=(1, 2, 3), required=True)
    c.add_argument("--reps", type=int, default=10_000)
    c.add_argument("--seed", type=int)
    c.add_argument("--out")
    c.set_defaults(func=cmd_validate_chisq)

    w = sub.add_parser("weights-table", help="tabulate curvature and sigma_eps/gamma_e")
    w.add_argument("--gamma-e", type=float, default=0.05)
    w.add_argument("--gamma-i", type=float, help="default: 0.5 * gamma_e")
    w.add_argument("--u", type=int, default=3)
    w.add_argument("--delta-min", type=float, default=0.05)
    w.add_argument("--delta-max", type=float, default=1.0)
    w.add_argument("--delta-steps", type=int, default=20)
    w.add_argument("--n-min", type=float, default=0.1)
    w.add_argument("--n-max", type=float, default=1.0)
    w.add_argument("--n-steps", type=int, default=10)
    w.add_argument("--out")
    w.set_defaults(func=cmd_weights_table)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    if not Path(known.config).is_file():
        raise InvalidInputError(f"config file not found: {known.config}")
    cfg = dataio.read_config(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    used = set()
    for sp in subparsers.choices.values():
        dests = {a.dest for a in sp._actions}
        mine = {k: v for k, v in cfg.items() if k in dests}
        sp.set_defaults(**mine)
        used |= mine.keys()
    unknown = set(cfg) - used
    if unknown:
        raise InvalidInputError(f"unknown config key(s): {', '.join(sorted(unknown))}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
