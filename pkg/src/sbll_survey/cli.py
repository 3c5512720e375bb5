"""Command-line front end: ``sbll-survey estimate | select | simulate``.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .design import SampleData, SRSDesign
from .estimators import METHODS, ConfigurationError, default_spec, estimate
from .montecarlo import ESTIMATORS, SimConfig, run_cell, summarize
from .sbll import BANDWIDTH_RULES, DEFAULT_BANDWIDTH_RULE, DEFAULT_BANDWIDTH_SCALE, rot_kernel, sbll_fit
from .selection import BicEvaluator, backward_select, forward_select
from .splinebasis import DEFAULT_KNOT_CONSTANT, PopulationFrame, knot_count

EXIT_INPUT, EXIT_NUMERIC, EXIT_CONFIG = 2, 3, 4


class InputError(ValueError):
    pass


def _read_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    if not rows or not rows[0]:
        raise InputError(f"{path}: missing header")
    header = [h.strip() for h in rows[0]]
    if "id" not in header:
        raise InputError(f"{path}: header must contain an 'id' column")
    return header, rows[1:]


def _float(value, path, lineno, column):
    try:
        return float(value)
    except ValueError:
        raise InputError(f"{path}:{lineno}: column {column!r}: not a number: {value!r}") from None


def read_population(path):
    """Population CSV: id plus covariate columns (an optional y column is kept as responses)."""
    header, rows = _read_csv(path)
    cov_names = [h for h in header if h not in ("id", "y")]
    if not cov_names:
        raise InputError(f"{path}: no covariate columns")
    ids, X, y = [], [], []
    for k, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise InputError(f"{path}:{k}: expected {len(header)} fields, got {len(row)}")
        rec = dict(zip(header, row))
        ids.append(rec["id"].strip())
        X.append([_float(rec[c], path, k, c) for c in cov_names])
        if "y" in header:
            y.append(_float(rec["y"], path, k, "y"))
    if len(set(ids)) != len(ids):
        raise InputError(f"{path}: duplicate ids")
    frame = PopulationFrame(np.array(X), np.array(y) if y else None, cov_names)
    return ids, frame


def read_sample(path, ids):
    """Sample CSV: id, y. Returns population row indices and responses."""
    header, rows = _read_csv(path)
    if "y" not in header:
        raise InputError(f"{path}: header must contain a 'y' column")
    pos = {v: i for i, v in enumerate(ids)}
    idx, y = [], []
    for k, row in enumerate(rows, start=2):
        if not row:
            continue
        rec = dict(zip(header, row))
        key = rec["id"].strip()
        if key not in pos:
            raise InputError(f"{path}:{k}: id {key!r} not in population")
        idx.append(pos[key])
        y.append(_float(rec["y"], path, k, "y"))
    if len(set(idx)) != len(idx):
        raise InputError(f"{path}: duplicate sample ids")
    return np.array(idx, dtype=np.intp), np.array(y)


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, command, config: dict, inputs=(), timings=None):
    lines = [f"command={command}", f"version={__version__}"]
    lines += [f"{k}={config[k]}" for k in sorted(config)]
    lines += [f"input_sha256[{Path(p).name}]={_digest(p)}" for p in inputs]
    if timings:
        lines += [f"seconds_{k}={v:.3f}" for k, v in timings.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _columns(frame, vars_arg):
    if not vars_arg:
        return list(range(frame.dim))
    names = [v.strip() for v in vars_arg.split(",") if v.strip()]
    missing = [v for v in names if v not in frame.column_names]
    if missing:
        raise ConfigurationError(f"unknown covariates: {', '.join(missing)}")
    return [frame.column_names.index(v) for v in names]


def _load(args):
    ids, frame = read_population(args.population)
    idx, y = read_sample(args.sample, ids)
    if len(idx) == 0:
        raise InputError(f"{args.sample}: empty sample")
    design = SRSDesign(frame.size, len(idx))
    return ids, frame, SampleData(idx, y, design)


def _print_report(rep, out):
    print(f"estimator  {rep.method}", file=out)
    print(f"total      {rep.total:.6f}", file=out)
    print(f"se_v       {rep.se_ht:.6f}", file=out)
    print(f"se_vg      {rep.se_g:.6f}", file=out)
    print(f"n          {rep.n}", file=out)
    print(f"N          {rep.N}", file=out)


def _weights(args, frame, sample, columns):
    """g-weights matching the chosen estimator."""
    from .baselines import lreg_fit, ls_g_weights
    from .pilot import fit_pilot

    method = args.estimator
    if method == "ht":
        return np.ones(sample.n)
    if method == "lreg":
        return lreg_fit(sample, frame, columns)[1]
    spec = default_spec(sample, frame, columns, args.knot_constant)
    if method == "ls":
        return ls_g_weights(fit_pilot(sample, frame, spec), sample, frame)
    pilot = fit_pilot(sample, frame, spec)
    kernel = rot_kernel(sample, frame, spec, args.bandwidth_scale, args.bandwidth_rule, pilot)
    return sbll_fit(sample, frame, spec, kernel, pilot=pilot).g_weights


def cmd_estimate(args, out=None):
    out = out or sys.stdout
    t0 = time.perf_counter()
    ids, frame, sample = _load(args)
    columns = _columns(frame, args.vars)
    rep = estimate(sample, frame, args.estimator, columns, args.knot_constant, args.bandwidth_scale,
                   args.bandwidth_rule)
    if not np.isfinite(rep.total):
        raise FloatingPointError("non-finite estimate")
    _print_report(rep, out)
    if args.weights_out:
        g = _weights(args, frame, sample, columns)
        with open(args.weights_out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "pi", "g_weight", "design_weight", "final_weight"])
            for k, i in enumerate(sample.indices):
                w.writerow([ids[i], repr(float(sample.pi[k])), repr(float(g[k])),
                            repr(float(1 / sample.pi[k])), repr(float(g[k] / sample.pi[k]))])
    if args.manifest:
        cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
        write_manifest(args.manifest, "estimate", cfg, [args.population, args.sample],
                       {"total": time.perf_counter() - t0})
    return 0


def cmd_select(args, out=None):
    out = out or sys.stdout
    ids, frame, sample = _load(args)
    candidates = _columns(frame, args.candidates)
    bic = BicEvaluator(sample, frame, args.knot_constant, args.bandwidth_scale,
                       knot_count(sample.n, len(candidates), args.knot_constant), args.bandwidth_rule)
    search = forward_select if args.method == "forward" else backward_select
    res = search(sample, frame, candidates, evaluator=bic)
    names = [frame.column_names[c] for c in res.chosen]
    print(f"method     {res.method}", file=out)
    print(f"d_max      {res.d_max}", file=out)
    print(f"chosen     {','.join(names) if names else '(none)'}", file=out)
    print("path:", file=out)
    for subset, value in res.path:
        label = ",".join(frame.column_names[c] for c in subset) or "(empty)"
        print(f"  {value:>14.6f}  {label}", file=out)
    rep = estimate(sample, frame, "sbll", list(res.chosen), args.knot_constant, args.bandwidth_scale,
                   args.bandwidth_rule)
    _print_report(rep, out)
    if args.manifest:
        cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
        write_manifest(args.manifest, "select", cfg, [args.population, args.sample])
    return 0


def cmd_simulate(args, out=None):
    out = out or sys.stdout
    t0 = time.perf_counter()
    estimators = tuple(e.strip().upper() for e in args.estimators.split(","))
    try:
        cfg = SimConfig(model=args.model, n=args.n, sigma0=args.sigma0, N=args.N, reps=args.reps,
                        seed=args.seed, estimators=estimators, knot_constant=args.knot_constant,
                        bandwidth_scale=args.bandwidth_scale, bandwidth_rule=args.bandwidth_rule,
                        workers=args.threads, timing=args.timing)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    cell = run_cell(cfg)
    csv_text, table = summarize([cell])
    out.write(table)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = f"model{cfg.model}_sigma{cfg.sigma0:g}_n{cfg.n}"
    (outdir / f"{stem}.csv").write_text(csv_text, encoding="utf-8")
    manifest = {k: v for k, v in vars(args).items() if k not in ("func",)}
    write_manifest(outdir / f"{stem}.manifest", "simulate", manifest,
                   timings={"total": time.perf_counter() - t0} if args.timing else None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sbll-survey", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def tuning(sp):
        sp.add_argument("--knot-constant", type=float, default=DEFAULT_KNOT_CONSTANT,
                        help="c in the knot count min([c n^1/4 ln n] + 1, [(n/2 - 1)/d - 1])")
        sp.add_argument("--bandwidth-scale", type=float, default=DEFAULT_BANDWIDTH_SCALE,
                        help="multiplier on the bandwidth rule")
        sp.add_argument("--bandwidth-rule", choices=BANDWIDTH_RULES, default=DEFAULT_BANDWIDTH_RULE,
                        help="plugin: quartic-pilot plug-in; spread: scale * sd(x) * n^-1/5")
        sp.add_argument("--seed", type=int, default=0, help="master seed (used by simulate)")

    def inputs(sp):
        sp.add_argument("population", help="CSV with id and covariate columns")
        sp.add_argument("sample", help="CSV with id and y columns")
        sp.add_argument("--design", choices=["srs"], default="srs")
        sp.add_argument("--manifest", help="write a key=value run manifest here")

    e = sub.add_parser("estimate", help="estimate a population total")
    inputs(e)
    tuning(e)
    e.add_argument("--vars", help="comma-separated covariate names (default: all)")
    e.add_argument("--estimator", choices=METHODS, default="sbll")
    e.add_argument("--weights-out", help="write per-unit calibration weights")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("select", help="BIC selection of auxiliary variables")
    inputs(s)
    tuning(s)
    s.add_argument("--method", choices=["forward", "backward"], default="forward")
    s.add_argument("--candidates", help="comma-separated covariate names (default: all)")
    s.set_defaults(func=cmd_select)

    m = sub.add_parser("simulate", help="run one Monte Carlo cell")
    tuning(m)
    m.add_argument("--model", type=int, required=True)
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--sigma0", type=float, default=0.1)
    m.add_argument("--N", type=int, default=1000)
    m.add_argument("--reps", type=int, default=1000)
    m.add_argument("--estimators", default=",".join(ESTIMATORS))
    m.add_argument("--out-dir", default="sim_out")
    m.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    m.add_argument("--timing", action="store_true", help="record fit times (output no longer byte-stable)")
    m.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
