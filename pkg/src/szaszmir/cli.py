"""Command-line interface.

Subcommands: estimate (evaluate both estimators at points), lscv (run
the level search and print the score trace), simulate (the Monte Carlo
experiment grid), validate (theory check suites), tables (regenerate
summaries and figures from a raw replication log).

All output is machine-readable CSV, on stdout or in files.  Exit
codes: 0 success, 1 a validation check failed, 2 usage error, 3 an
input file could not be read or parsed.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import estimators, lscv, simharness, validation

__all__ = ["main", "entry"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_DATA = 3


class _DataError(Exception):
    pass


class _UsageError(Exception):
    pass


def _load_sample(path) -> estimators.Sample:
    try:
        return estimators.load_sample(path)
    except OSError as exc:
        raise _DataError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise _DataError(str(exc)) from exc


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _parse_floats(text: str, what: str) -> np.ndarray:
    try:
        values = np.array([float(s) for s in text.split(",") if s.strip()], dtype=np.float64)
    except ValueError as exc:
        raise _UsageError(f"invalid {what} {text!r}") from exc
    if values.size == 0:
        raise _UsageError(f"empty {what} {text!r}")
    return values


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _grid_from_flags(d: int, delta: float, size: int, kind: str) -> lscv.EvaluationGrid:
    try:
        region = lscv.IntegrationRegion(delta=delta, d=d)
        return lscv.qmc_grid(region, size=size, kind=kind)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _add_domain_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m-min", type=int, default=5, help="smallest candidate level (default 5)")
    p.add_argument("--m-cap", type=int, default=500, help="hard cap on candidate levels (default 500)")
    p.add_argument("--c", type=float, default=3.0,
                   help="rate constant: candidates go up to c * n^(2/3) (default 3.0)")
    p.add_argument("--passes", type=int, default=2,
                   help="coordinate-descent passes after the pilot scan (default 2)")


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=float, default=0.05,
                   help="integration box is [delta, 1/delta)^d (default 0.05)")
    p.add_argument("--grid-size", type=int, default=4096,
                   help="QMC nodes in the risk grid (default 4096)")
    p.add_argument("--qmc-kind", choices=("sobol", "halton"), default="sobol",
                   help="low-discrepancy sequence (default sobol)")


def cmd_estimate(args) -> int:
    sample = _load_sample(args.data)
    d = sample.d

    sources = [s for s in (args.x, args.points, args.grid) if s is not None]
    if len(sources) != 1:
        raise _UsageError("exactly one of --x, --points, --grid is required")
    eval_grid = None
    if args.x is not None:
        point = _parse_floats(args.x, "--x point")
        if point.shape != (d,):
            raise _UsageError(f"--x needs {d} coordinates for this sample, got {point.size}")
        if np.any(point < 0.0):
            raise _UsageError("--x coordinates must be nonnegative")
        points = point[None, :]
    elif args.points is not None:
        points = _load_sample(args.points).data
        if points.shape[1] != d:
            raise _DataError(
                f"{args.points}: points are {points.shape[1]}-dimensional, sample is {d}-dimensional"
            )
    else:
        eval_grid = _grid_from_flags(d, args.delta, args.grid, args.qmc_kind)
        points = eval_grid.points

    out, close = _open_out(args.out)
    try:
        if args.m.strip().lower() == "auto":
            domain = lscv.SearchDomain(m_min=args.m_min, m_cap=args.m_cap, c=args.c)
            select_grid = eval_grid
            if select_grid is None:
                select_grid = _grid_from_flags(d, args.delta, args.select_grid_size, args.qmc_kind)
            sel = lscv.select_m(sample, select_grid, domain, passes=args.passes)
            m = sel.m_star
            out.write(f"# m_star={','.join(str(v) for v in m)}\n")
        else:
            m_values = _parse_floats(args.m, "--m levels")
            try:
                m = estimators.as_smoothing(
                    m_values if m_values.size > 1 else m_values[0], d
                )
            except ValueError as exc:
                raise _UsageError(str(exc)) from exc
        f_ecdf = estimators.empirical_cdf_batch(sample, points)
        f_sm = estimators.sm_estimate_batch(sample, m, points)
        out.write(",".join(f"x_{j + 1}" for j in range(d)) + ",F_ecdf,F_sm\n")
        for row, fe, fs in zip(points, f_ecdf, f_sm):
            coords = ",".join(_fmt(v) for v in row)
            out.write(f"{coords},{_fmt(fe)},{_fmt(fs)}\n")
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_lscv(args) -> int:
    sample = _load_sample(args.data)
    if sample.n < 2:
        raise _DataError("leave-one-out cross-validation needs at least 2 observations")
    grid = _grid_from_flags(sample.d, args.delta, args.grid_size, args.qmc_kind)
    domain = lscv.SearchDomain(m_min=args.m_min, m_cap=args.m_cap, c=args.c)
    try:
        sel = lscv.select_m(sample, grid, domain, passes=args.passes)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    out, close = _open_out(args.out)
    try:
        out.write(f"# m_star={','.join(str(v) for v in sel.m_star)}")
        out.write(f" score={_fmt(sel.score)} pilot={sel.pilot} evaluations={sel.evaluations}\n")
        heads = ",".join(f"m_{j + 1}" for j in range(sample.d))
        out.write(f"stage,coordinate,{heads},score\n")
        for stage, coord, m_vec, score in sel.trace:
            coord_txt = "" if coord is None else str(coord + 1)
            levels = ",".join(str(v) for v in m_vec)
            out.write(f"{stage},{coord_txt},{levels},{_fmt(score)}\n")
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_simulate(args) -> int:
    mapping = {}
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise _DataError(f"cannot read {args.config}: {exc}") from exc
        try:
            mapping.update(simharness.parse_config_text(text))
        except ValueError as exc:
            raise _UsageError(f"{args.config}: {exc}") from exc
    overrides = {
        "models": args.model,
        "n_list": args.n,
        "n_mc": args.nmc,
        "d": args.d,
        "alpha": args.alpha,
        "beta": args.beta,
        "theta": args.theta,
        "delta": args.delta,
        "grid_size": args.grid_size,
        "qmc_kind": args.qmc_kind,
        "qmc_scramble": args.qmc_scramble,
        "qmc_seed": args.qmc_seed,
        "m_min": args.m_min,
        "m_cap": args.m_cap,
        "c": args.c,
        "passes": args.passes,
        "master_seed": args.seed,
        "out_dir": args.out_dir,
        "threads": args.threads,
        "figures": args.figures,
    }
    for key, value in overrides.items():
        if value is not None:
            mapping[key] = value
    try:
        config = simharness.ExperimentConfig.from_mapping(mapping)
        simharness.resolve_threads(config.threads)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
    result = simharness.run_experiment(config, log=log)
    for name in sorted(result.paths):
        print(f"{name},{result.paths[name]}")
    return EXIT_OK


def cmd_validate(args) -> int:
    names = None
    if args.suite is not None:
        names = [s.strip() for s in args.suite.split(",") if s.strip()]
    try:
        rows = validation.run_suites(names, master_seed=args.seed)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    text = validation.rows_to_csv(rows)
    out, close = _open_out(args.out)
    try:
        out.write(text)
    finally:
        if close:
            out.close()
    return EXIT_CHECK_FAILED if validation.has_failures(rows) else EXIT_OK


def cmd_tables(args) -> int:
    cells: dict = {}
    for path in args.raw:
        try:
            parsed = simharness.read_raw_log(path)
        except OSError as exc:
            raise _DataError(f"cannot read {path}: {exc}") from exc
        except ValueError as exc:
            raise _DataError(str(exc)) from exc
        for key, results in parsed.items():
            cells.setdefault(key, []).extend(results)
    summaries = {
        key: simharness.summarize(key[0], key[1], results) for key, results in cells.items()
    }
    models = sorted({key[0] for key in cells})
    layout = [(m, sorted(n for mm, n in cells if mm == m)) for m in models]
    paths = simharness.write_summary_files(args.out_dir, layout, summaries, args.figures)
    for name in sorted(paths):
        print(f"{name},{paths[name]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="szaszmir",
        description="Smoothed distribution-function estimation on the nonnegative orthant.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "estimate",
        help="evaluate the empirical and smoothed CDF estimators at points",
        description=(
            "Rows are x_1,...,x_d,F_ecdf,F_sm.  Points come from exactly one of "
            "--x (one point), --points (a file of points), or --grid (a QMC grid "
            "on [delta, 1/delta)^d).  With --m auto the levels are selected by "
            "cross-validation first and echoed on a leading comment line."
        ),
    )
    p.add_argument("--data", required=True, help="sample file: one observation per row")
    p.add_argument("--m", default="auto",
                   help="levels 'auto', a single integer, or d comma-separated integers (default auto)")
    p.add_argument("--x", help="single evaluation point, comma-separated coordinates")
    p.add_argument("--points", help="file of evaluation points, same format as --data")
    p.add_argument("--grid", type=int, help="evaluate on a QMC grid of this size")
    p.add_argument("--select-grid-size", type=int, default=4096,
                   help="QMC grid size for --m auto when --grid is not used (default 4096)")
    p.add_argument("--qmc-kind", choices=("sobol", "halton"), default="sobol",
                   help="low-discrepancy sequence (default sobol)")
    p.add_argument("--delta", type=float, default=0.05,
                   help="box parameter for generated grids (default 0.05)")
    _add_domain_flags(p)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser(
        "lscv",
        help="select smoothing levels by cross-validation and print the score trace",
        description=(
            "Prints a comment line with m_star, the final score, the pilot level "
            "and the number of distinct candidates scored, then one CSV row per "
            "visited candidate: stage, scanned coordinate (empty for the pilot), "
            "levels, score."
        ),
    )
    p.add_argument("--data", required=True, help="sample file: one observation per row")
    _add_grid_flags(p)
    _add_domain_flags(p)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_lscv)

    p = sub.add_parser(
        "simulate",
        help="run the Monte Carlo experiment grid and write raw/summary/figure files",
        description=(
            "Config keys (file via --config, 'key = value' lines, overridden by "
            "flags): models, d, alpha, beta, theta, n_list, n_mc, delta, "
            "grid_size, qmc_kind, qmc_scramble, qmc_seed, m_min, m_cap, c, "
            "passes, master_seed, out_dir, threads, figures.  Models: m1 is the "
            "product of Gamma(alpha, beta) margins, m2 couples the same margins "
            "with a Clayton copula (dependence parameter theta)."
        ),
    )
    p.add_argument("--config", help="config file of key = value lines")
    p.add_argument("--model", help="comma-separated model names (config: models)")
    p.add_argument("--n", help="comma-separated sample sizes (config: n_list)")
    p.add_argument("--nmc", type=int, help="replications per cell (config: n_mc)")
    p.add_argument("--d", type=int, help="dimension (config: d)")
    p.add_argument("--alpha", type=float, help="Gamma shape (config: alpha)")
    p.add_argument("--beta", type=float, help="Gamma rate (config: beta)")
    p.add_argument("--theta", type=float, help="Clayton dependence (config: theta)")
    p.add_argument("--delta", type=float, help="risk box parameter (config: delta)")
    p.add_argument("--grid-size", type=int, help="QMC nodes (config: grid_size)")
    p.add_argument("--qmc-kind", choices=("sobol", "halton"), help="sequence (config: qmc_kind)")
    p.add_argument("--qmc-scramble", action="store_const", const=True, default=None,
                   help="scramble the QMC sequence (config: qmc_scramble)")
    p.add_argument("--qmc-seed", type=int, help="scrambling seed (config: qmc_seed)")
    p.add_argument("--m-min", type=int, help="smallest candidate level (config: m_min)")
    p.add_argument("--m-cap", type=int, help="level cap (config: m_cap)")
    p.add_argument("--c", type=float, help="rate constant for m_max (config: c)")
    p.add_argument("--passes", type=int, help="descent passes (config: passes)")
    p.add_argument("--seed", type=int, help="master seed (config: master_seed)")
    p.add_argument("--out-dir", help="output directory (config: out_dir)")
    p.add_argument("--threads", type=int,
                   help=f"worker processes; 0 reads {simharness.THREADS_ENV} (config: threads)")
    p.add_argument("--figures", dest="figures", action="store_const", const=True, default=None,
                   help="render figures (config: figures)")
    p.add_argument("--no-figures", dest="figures", action="store_const", const=False,
                   help="skip figure rendering")
    p.add_argument("--quiet", action="store_true", help="suppress per-replication progress on stderr")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser(
        "validate",
        help="run theory check suites; exit 1 if any row fails",
        description=(
            "Emits one CSV row per check: name, predicted, observed, tolerance, "
            "passed.  Suites: " + ", ".join(sorted(validation.SUITES)) + "."
        ),
    )
    p.add_argument("--suite", help="comma-separated suite names (default: all)")
    p.add_argument("--seed", type=int, default=20260818,
                   help="master seed for the stochastic suites (default 20260818)")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser(
        "tables",
        help="regenerate summary tables and figures from raw replication logs",
        description=(
            "Reads one or more raw logs written by simulate and rewrites the "
            "summary, selected-level and figure files for the cells they contain."
        ),
    )
    p.add_argument("--raw", action="append", required=True,
                   help="raw replication log (repeatable)")
    p.add_argument("--out-dir", default="szaszmir-tables", help="output directory")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=True,
                   help="skip figure rendering")
    p.set_defaults(func=cmd_tables)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return EXIT_OK if code in (0, None) else int(code)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main(sys.argv[1:]))
