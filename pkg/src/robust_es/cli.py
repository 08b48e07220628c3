"""Command-line interface.

Exit status: 0 on success, 1 on invalid input, 2 on numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .convert import KINDS, ConversionContext, classify_effect, cohens_d_bias_grid, convert, r2_bias_grid
from .effectsize import analyze
from .errors import DomainError, NumericalError
from .models import FAMILIES, Dataset
from .power import CURVE_HEADER, PowerSpec, power_curve, solve
from .sim import (
    SUMMARY_HEADER,
    THREADS_ENV,
    SimConfig,
    default_threads,
    run_simulation,
    summary_row,
    write_replicates_csv,
    write_summary_json,
)

SCHEMA_VERSION = 1


class UsageError(DomainError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _names(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Read a strict numeric CSV into ``{column: array}``.

    Requires a header row, no missing cells and the same number of fields
    on every row.
    """
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty file, header row required")
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise DomainError(f"{path}: duplicate column names in header")
        cols = [[] for _ in header]
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise DomainError(
                    f"{path}: row {line} has {len(row)} fields, expected {len(header)}"
                )
            for j, cell in enumerate(row):
                cell = cell.strip()
                if cell == "":
                    raise DomainError(f"{path}: row {line}, column {header[j]!r}: missing value")
                try:
                    v = float(cell)
                except ValueError:
                    raise DomainError(
                        f"{path}: row {line}, column {header[j]!r}: non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DomainError(f"{path}: row {line}, column {header[j]!r}: non-finite value")
                cols[j].append(v)
    if not cols or not cols[0]:
        raise DomainError(f"{path}: no data rows")
    return {h: np.asarray(c) for h, c in zip(header, cols)}


def _pick(columns, names, path):
    missing = [c for c in names if c not in columns]
    if missing:
        raise DomainError(f"{path}: missing column(s) {', '.join(missing)}")
    if not names:
        return None
    return np.column_stack([columns[c] for c in names])


def _flatten(report):
    """Flatten nested dicts/lists into dotted keys for CSV output."""
    flat = {}

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        elif isinstance(obj, (list, tuple)):
            for i, v in enumerate(obj):
                walk(f"{prefix}[{i}]", v)
        else:
            flat[prefix] = obj

    walk("", report)
    return flat


def _fmt_csv(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _fmt_text(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def emit(report: dict, fmt: str, out) -> None:
    if fmt == "json":
        json.dump(report, out, indent=2)
        out.write("\n")
        return
    flat = _flatten(report)
    if fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(list(flat))
        w.writerow([_fmt_csv(v) for v in flat.values()])
        return
    width = max(len(k) for k in flat)
    for k, v in flat.items():
        out.write(f"{k:<{width}}  {_fmt_text(v)}\n")


def write_table(header, rows, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt_csv(v) for v in row])


def _report(command, config, results):
    return {"schema_version": SCHEMA_VERSION, "command": command, "config": config, "results": results}


def cmd_estimate(args, out):
    columns = read_csv_columns(args.data)
    target = _names(args.target)
    nuisance = _names(args.nuisance) if args.nuisance else []
    if not target:
        raise DomainError("--target needs at least one column")
    y = _pick(columns, [args.outcome], args.data)[:, 0]
    xt = _pick(columns, target, args.data)
    xn = _pick(columns, nuisance, args.data)
    data = Dataset(y=y, x_target=xt, x_nuisance=xn, target_names=tuple(target),
                   nuisance_names=tuple(nuisance))
    beta0 = args.beta0 if args.beta0 is not None else [0.0] * len(target)
    if len(beta0) == 1 and len(target) > 1:
        beta0 = beta0 * len(target)
    res = analyze(data, args.model, beta0=beta0, pi1_known=args.pi1)
    est, model, cov = res.estimate, res.model, res.covariance
    config = {
        "data": str(args.data),
        "model": args.model,
        "outcome": args.outcome,
        "target": target,
        "nuisance": nuisance,
        "beta0": [float(b) for b in res.wald.beta0],
        "pi1": args.pi1 if args.pi1 is not None else ("empirical" if args.model == "two_means" else None),
        "format": args.format,
    }
    results = {
        "s_hat": est.s_hat,
        "s_sq_untruncated": est.s_sq_untruncated,
        "t_squared": est.t_squared,
        "df": res.wald.df,
        "n": est.n,
        "m": est.m,
        "m0": model.m0,
        "m1": model.m1,
        "truncated": est.truncated,
        "classification": classify_effect(est.s_hat),
        "theta_hat": {name: float(v) for name, v in zip(model.param_names, model.theta_hat)},
        "sigma_beta": cov.sigma_beta.tolist(),
    }
    if model.pi is not None:
        results["pi1_used"] = model.pi[0]
    emit(_report("estimate", config, results), args.format, out)


def cmd_convert(args, out):
    ctx = ConversionContext(pi1=args.pi1, r2_full=args.r2_full)
    value = convert(args.value, args.from_kind, args.to_kind, ctx)
    config = {"from": args.from_kind, "to": args.to_kind, "value": args.value, "pi1": args.pi1,
              "r2_full": args.r2_full, "format": args.format}
    results = {"value": value}
    if args.to_kind == "s":
        results["classification"] = classify_effect(value)
    emit(_report("convert", config, results), args.format, out)


def cmd_power(args, out):
    if args.curve:
        if not args.s_values or not args.df_values:
            raise DomainError("--curve needs --s-values and --df-values")
        if args.n_min < 1 or args.n_max < args.n_min or args.n_step < 1:
            raise DomainError("invalid --n-min/--n-max/--n-step")
        rows = power_curve(args.s_values, args.df_values, args.alpha,
                           range(args.n_min, args.n_max + 1, args.n_step))
        _write_rows(CURVE_HEADER, rows, args.output, out)
        return
    if args.solve is None:
        raise DomainError("power needs --solve or --curve")
    fields = {"n": args.n, "s": args.s, "df": args.df, "alpha": args.alpha, "power": args.power}
    fields[args.solve] = None
    spec = PowerSpec(**fields)
    solved = solve(spec)
    config = dict(fields, solve=args.solve, format=args.format)
    results = {k: getattr(solved, k) for k in ("n", "s", "df", "alpha", "power")}
    results["solved_for"] = args.solve
    emit(_report("power", config, results), args.format, out)


def _write_rows(header, rows, path, out):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_table(header, rows, fh)
    else:
        write_table(header, rows, out)


def cmd_bias(args, out):
    v = np.linspace(-3.0, 3.0, args.steps)
    if args.kind == "d":
        pis = np.linspace(0.0, 1.0, args.pi_steps + 2)[1:-1]
        rows = cohens_d_bias_grid(v, pis)
        header = ("log2_var_ratio", "pi1", "ratio")
    else:
        rows = r2_bias_grid(v, args.beta, args.sigma_x_sq, args.sigma_y_sq)
        header = ("log2_sxy_ratio", "beta", "ratio")
    _write_rows(header, rows, args.output, out)


def cmd_simulate(args, out):
    threads = args.threads if args.threads is not None else default_threads()
    replicates = 1000 if args.paper_replicates else args.replicates
    outdir = Path(args.out_dir) if args.out_dir else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    summaries, rows = [], []
    for n in args.n:
        for s in args.s:
            for rho in args.rho_sq:
                for m0 in args.m0:
                    for m1 in args.m1:
                        for a in args.a:
                            cfg = SimConfig(n=n, s_target=s, rho_sq=rho, m0=m0, m1=m1, a=a,
                                            n_replicates=replicates, base_seed=args.seed,
                                            error_dist=args.error_dist, n_cal=args.n_cal)
                            res = run_simulation(cfg, threads=threads)
                            if outdir:
                                stem = f"sim_n{n}_s{s:g}_rho{rho:g}_m0{m0}_m1{m1}_a{a:g}_{cfg.error_dist}"
                                write_replicates_csv(res, outdir / f"{stem}.csv")
                                write_summary_json(res, outdir / f"{stem}.json")
                            summaries.append(res.summary())
                            rows.append(summary_row(res))
    if outdir:
        with open(outdir / "summary.csv", "w", encoding="utf-8", newline="") as fh:
            write_table(SUMMARY_HEADER, rows, fh)
    config = {"n": args.n, "s": args.s, "rho_sq": args.rho_sq, "m0": args.m0, "m1": args.m1,
              "a": args.a, "replicates": replicates, "seed": args.seed, "threads": threads,
              "error_dist": args.error_dist, "n_cal": args.n_cal,
              "out_dir": str(outdir) if outdir else None}
    if args.format == "csv":
        write_table(SUMMARY_HEADER, rows, out)
    else:
        emit(_report("simulate", config, {"configs": summaries}), args.format, out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="robust-es", description="Robust effect size index: estimation, conversion, power, simulation")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    fmt = dict(choices=("json", "csv", "text"), default="json", help="output format (default json)")

    e = sub.add_parser("estimate", help="estimate S from a CSV file")
    e.add_argument("--data", required=True, help="CSV file with a header row")
    e.add_argument("--model", required=True, choices=FAMILIES)
    e.add_argument("--outcome", default="y", help="outcome column (default y)")
    e.add_argument("--target", required=True, help="comma-separated target columns")
    e.add_argument("--nuisance", default="", help="comma-separated nuisance columns")
    e.add_argument("--beta0", type=_floats, default=None, help="reference value(s), default 0")
    e.add_argument("--pi1", type=float, default=None, help="known group-1 proportion (two_means)")
    e.add_argument("--format", **fmt)
    e.set_defaults(func=cmd_estimate)

    c = sub.add_parser("convert", help="convert between d, f2, r2 and s")
    c.add_argument("--from", dest="from_kind", required=True, choices=KINDS)
    c.add_argument("--to", dest="to_kind", required=True, choices=KINDS)
    c.add_argument("--value", type=float, required=True)
    c.add_argument("--pi1", type=float, default=0.5)
    c.add_argument("--r2-full", type=float, default=None, help="whole-model R^2 when it differs from the partial R^2")
    c.add_argument("--format", **fmt)
    c.set_defaults(func=cmd_convert)

    pw = sub.add_parser("power", help="solve the power relation or tabulate power curves")
    pw.add_argument("--solve", choices=("power", "n", "s", "alpha"))
    pw.add_argument("--n", type=float)
    pw.add_argument("--s", type=float)
    pw.add_argument("--df", type=int, default=1)
    pw.add_argument("--alpha", type=float, default=0.05)
    pw.add_argument("--power", type=float)
    pw.add_argument("--curve", action="store_true", help="emit a power-curve CSV")
    pw.add_argument("--s-values", type=_floats)
    pw.add_argument("--df-values", type=_ints)
    pw.add_argument("--n-min", type=int, default=10)
    pw.add_argument("--n-max", type=int, default=1000)
    pw.add_argument("--n-step", type=int, default=10)
    pw.add_argument("--output", help="write the curve CSV here instead of stdout")
    pw.add_argument("--format", **fmt)
    pw.set_defaults(func=cmd_power)

    b = sub.add_parser("bias", help="bias ratios of classical estimators as CSV grids")
    b.add_argument("--kind", choices=("d", "r2"), default="d")
    b.add_argument("--steps", type=int, default=61, help="grid points on the log2 axis in [-3, 3]")
    b.add_argument("--pi-steps", type=int, default=49, help="interior pi1 grid points (d only)")
    b.add_argument("--beta", type=_floats, default=[0.0, 0.5, 1.0])
    b.add_argument("--sigma-x-sq", type=float, default=1.0)
    b.add_argument("--sigma-y-sq", type=float, default=1.0)
    b.add_argument("--output")
    b.set_defaults(func=cmd_bias)

    s = sub.add_parser("simulate", help="run the finite-sample simulation")
    s.add_argument("--n", type=_ints, default=[25, 50, 100, 250, 500, 1000])
    s.add_argument("--s", type=_floats, default=[0.0, 0.1, 0.25, 0.4, 0.6])
    s.add_argument("--rho-sq", type=_floats, default=[0.0, 0.6])
    s.add_argument("--m0", type=_ints, default=[2])
    s.add_argument("--m1", type=_ints, default=[1])
    s.add_argument("--a", type=_floats, default=[10.0])
    s.add_argument("--replicates", type=int, default=200)
    s.add_argument("--paper-replicates", action="store_true", help="use 1000 replicates")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or 1)")
    s.add_argument("--error-dist", choices=("gamma", "normal"), default="gamma")
    s.add_argument("--n-cal", type=int, default=10**6, help="calibration sample size")
    s.add_argument("--out-dir")
    s.add_argument("--format", **fmt)
    s.set_defaults(func=cmd_simulate)
    return p


def run_cli(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        args.func(args, out)
    except (DomainError, argparse.ArgumentTypeError) as exc:
        err.write(f"error: {exc}\n")
        return 1
    except NumericalError as exc:
        err.write(f"numerical failure: {exc}\n")
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
