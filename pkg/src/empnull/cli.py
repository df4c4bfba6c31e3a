"""Command-line interface: ``empnull <subcommand> ...``.

Exit codes: 0 success, 2 usage or input error, 3 numeric failure.
Every successful run writes a JSON manifest next to its main output.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, formats
from .benefit import LITERAL, SIGN_PRESERVING, benefit_curve, parse_grid
from .errors import DomainError, EmpnullError, InputError
from .levels import levels_from_table
from .nullmodel import DEFAULT_CENTER_FRACTION, NullModel, adjust_vector, fit_null
from .rng import DEFAULT_SEED
from .screening import LossParams, optimize_decisions
from .simstudy import StudyConfig, run_study

log = logging.getLogger("empnull")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _emit(args, text):
    if not args.quiet:
        print(text)


def _write_manifest(args, outputs, extra=None):
    path = Path(args.manifest) if args.manifest else Path(str(outputs[0]) + ".manifest.json")
    params = {
        k: v for k, v in vars(args).items()
        if k not in ("func", "manifest", "quiet", "seed_given") and not k.startswith("_")
    }
    manifest = {
        "subcommand": args.command,
        "parameters": params,
        "inputs": [str(p) for p in args._inputs],
        "outputs": [str(p) for p in outputs],
        "seed": args.seed,
        "version": __version__,
        "runtime_seconds": time.perf_counter() - args._t0,
    }
    if extra:
        manifest["results"] = extra
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _require(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise UsageError(f"no such file: {p}")


def cmd_levels(args):
    _require(args.input)
    args._inputs = [args.input]
    table = formats.read_feature_tsv(args.input, log_base=args.log_base)
    v = levels_from_table(table)
    formats.write_levels_csv(v, args.output)
    counts = {
        "n_features": len(v),
        "n_excluded": v.n_excluded,
        "too_few_observations": v.exclusion_reason.count("too_few_observations"),
        "nonfinite_z": v.exclusion_reason.count("nonfinite_z"),
    }
    _write_manifest(args, [args.output], counts)
    _emit(args, " ".join(f"{k}={v}" for k, v in counts.items()))


def cmd_nullfit(args):
    _require(args.levels)
    args._inputs = [args.levels]
    v = formats.read_levels_csv(args.levels)
    null = fit_null(v.included_z(), args.center_fraction)
    formats.write_null_json(null, args.output)
    _write_manifest(args, [args.output], null.to_dict())
    _emit(args, f"mu0={null.mu0!r} sigma0={null.sigma0!r} p0={null.p0!r} n_central={null.n_central}")


def _geometric_mean_ratios(table, ids):
    base = 2.0 if table.log_base == "2" else math.e
    by_id = dict(zip(table.feature_ids, table.observations))
    out = []
    for fid in ids:
        obs = by_id.get(fid)
        out.append(base ** float(np.mean(obs)) if obs is not None and len(obs) else math.nan)
    return out


def cmd_adjust(args):
    _require(args.levels, args.null, args.table)
    args._inputs = [p for p in (args.levels, args.null, args.table) if p]
    v = formats.read_levels_csv(args.levels)
    null = formats.read_null_json(args.null)
    adj = adjust_vector(v, null)
    formats.write_levels_csv(adj, args.output)
    outputs = [args.output]

    thr = args.threshold
    before, after = v.level, adj.level
    ok = v.included & adj.included
    lost_down = int(np.sum(ok & (before > thr) & ~(after > thr)))
    lost_up = int(np.sum(ok & ((1 - before) > thr) & ~((1 - after) > thr)))
    if args.figure_table:
        ratios = [math.nan] * len(v)
        if args.table:
            ratios = _geometric_mean_ratios(formats.read_feature_tsv(args.table, args.log_base), v.feature_ids)
        rows = [
            (fid, float(r), float(b), float(a), float(a - b))
            for fid, r, b, a in zip(v.feature_ids, ratios, before, after)
        ]
        formats.write_rows(
            args.figure_table,
            ["feature_id", "estimated_ratio", "level_assumed", "level_estimated", "delta"],
            rows,
        )
        outputs.append(args.figure_table)
    counts = {"threshold": thr, "lost_negative_calls": lost_down, "lost_positive_calls": lost_up}
    _write_manifest(args, outputs, counts)
    _emit(args, f"lost_negative_calls={lost_down} lost_positive_calls={lost_up}")


def _parse_floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


def _loss_params(args, a):
    try:
        return LossParams(a, args.c, args.n_mc, args.seed)
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def cmd_screen(args):
    _require(args.levels, args.null)
    args._inputs = [p for p in (args.levels, args.null) if p]
    v = formats.read_levels_csv(args.levels)
    null = formats.read_null_json(args.null) if args.null else None
    if args.sweep:
        rows = []
        nulls = [("assumed", NullModel.assumed())]
        if null is not None and not null.is_identity:
            nulls.append(("estimated", null))
        for label, nm in nulls:
            vv = adjust_vector(v, nm)
            for a in _parse_floats(args.sweep):
                r = optimize_decisions(vv, _loss_params(args, a), threads=args.threads)
                rows.append((label, 1.0 + a, r.n_decisions, r.expected_loss))
        formats.write_rows(args.output, ["null", "one_plus_a", "n_decisions", "expected_loss"], rows)
        _write_manifest(args, [args.output], {"points": len(rows)})
        for row in rows:
            _emit(args, f"null={row[0]} one_plus_a={row[1]!r} n_decisions={row[2]}")
        return
    if null is not None:
        v = adjust_vector(v, null)
    params = _loss_params(args, args.a)
    report = optimize_decisions(v, params, threads=args.threads)
    formats.write_decisions_csv(report, v, args.output)
    summary = {"n_decisions": report.n_decisions, "expected_loss": report.expected_loss}
    _write_manifest(args, [args.output], summary)
    _emit(args, f"n_decisions={report.n_decisions} expected_loss={report.expected_loss!r}")


def cmd_benefit(args):
    _require(args.levels, args.null)
    args._inputs = [args.levels, args.null]
    v = formats.read_levels_csv(args.levels)
    null = formats.read_null_json(args.null)
    try:
        grid = parse_grid(args.d1_grid)
    except ValueError:
        raise UsageError(f"bad --d1-grid {args.d1_grid!r}") from None
    curve = benefit_curve(v, null, grid, args.center_fraction, args.mode)
    rows = [
        (int(d1), float(na), float(curve.relevance), float(b))
        for d1, na, b in zip(curve.d1_grid, curve.nonancillarity, curve.benefit)
    ]
    formats.write_rows(args.output, ["d1", "nonancillarity_bits", "relevance_bits", "benefit_bits"], rows)
    _write_manifest(args, [args.output], {"relevance_bits": curve.relevance, "sign_changes": curve.sign_changes()})
    _emit(args, f"relevance_bits={curve.relevance!r} points={len(rows)}")


def cmd_simulate(args):
    _require(args.config)
    args._inputs = [args.config]
    try:
        cfg = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: invalid JSON: {exc}") from None
    if args.seed_given:
        cfg["seed"] = args.seed
    try:
        config = StudyConfig.from_dict(cfg)
    except (DomainError, TypeError) as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    args.seed = config.seed
    results, cells = run_study(config, threads=args.threads)
    trial_rows = []
    for r in results:
        mu = r.null_fit.mu0 if r.null_fit else (0.0 if r.null_mode == "assumed" else math.nan)
        sd = r.null_fit.sigma0 if r.null_fit else (1.0 if r.null_mode == "assumed" else math.nan)
        trial_rows.append(
            (r.k, r.null_mode, float(r.sigma_k), float(mu), float(sd),
             float(r.conservatism_unaffected), float(r.conservatism_affected), r.error or "")
        )
    formats.write_rows(
        args.trials_out,
        ["k", "null_mode", "sigma_k", "mu0_hat", "sigma0_hat",
         "conservatism_unaffected", "conservatism_affected", "error"],
        trial_rows,
    )
    formats.write_rows(
        args.summary_out,
        ["null_mode", "subset", "mean", "se", "mean_abs", "se_abs", "n_trials", "n_failed"],
        [(c.null_mode, c.subset, c.mean, c.se, c.mean_abs, c.se_abs, c.n_trials, c.n_failed) for c in cells],
    )
    _write_manifest(args, [args.summary_out, args.trials_out], {"config": config.to_dict()})
    for c in cells:
        _emit(args, f"{c.null_mode:9s} {c.subset:10s} mean={c.mean:+.5f} se={c.se:.5f} mean_abs={c.mean_abs:.5f}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"RNG seed (default {DEFAULT_SEED})")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--quiet", action="store_true")
    common.add_argument("--manifest", default=None, help="manifest path (default: <output>.manifest.json)")

    p = argparse.ArgumentParser(prog="empnull", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("levels", parents=[common], help="one-sided t levels from a replicate TSV")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--log-base", choices=["e", "2"], default="e")
    s.set_defaults(func=cmd_levels)

    s = sub.add_parser("nullfit", parents=[common], help="fit the empirical null")
    s.add_argument("levels")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--center-fraction", type=float, default=DEFAULT_CENTER_FRACTION)
    s.set_defaults(func=cmd_nullfit)

    s = sub.add_parser("adjust", parents=[common], help="re-derive levels under a null")
    s.add_argument("levels")
    s.add_argument("--null", required=True)
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--table", help="replicate TSV, for the geometric-mean ratio column")
    s.add_argument("--log-base", choices=["e", "2"], default="e")
    s.add_argument("--figure-table", help="write the per-feature before/after table here")
    s.add_argument("--threshold", type=float, default=0.99)
    s.set_defaults(func=cmd_adjust)

    s = sub.add_parser("screen", parents=[common], help="minimise expected screening loss")
    s.add_argument("levels")
    s.add_argument("--null")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--a", type=float, default=0.0)
    s.add_argument("--c", type=float, default=9.0)
    s.add_argument("--n-mc", type=int, default=10_000)
    s.add_argument("--sweep", help="comma list of a values; writes (1+a, n_decisions) per null")
    s.set_defaults(func=cmd_screen)

    s = sub.add_parser("benefit", parents=[common], help="nonancillarity, relevance and benefit curve")
    s.add_argument("levels")
    s.add_argument("--null", required=True)
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--d1-grid", default="0:100:2000")
    s.add_argument("--mode", choices=[SIGN_PRESERVING, LITERAL], default=SIGN_PRESERVING)
    s.add_argument("--center-fraction", type=float, default=DEFAULT_CENTER_FRACTION)
    s.set_defaults(func=cmd_benefit)

    s = sub.add_parser("simulate", parents=[common], help="run the precision-mixture simulation")
    s.add_argument("config")
    s.add_argument("--trials-out", required=True)
    s.add_argument("--summary-out", required=True)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = DEFAULT_SEED
    if args.threads < 1:
        print("empnull: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    args._t0 = time.perf_counter()
    args._inputs = []
    try:
        args.func(args)
    except (UsageError, InputError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"empnull {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmpnullError as exc:
        print(f"empnull {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
