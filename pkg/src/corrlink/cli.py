"""Command-line front end: region, dist, simulate, verify rank-ratio, sweep."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .correlation import CorrelationParams, ParameterError, build_joint_pmf
from .fieldla import FieldSpec, MERSENNE31
from .protocol import SimConfig, Trace, run_batch, simulate, trial_seeds
from .region import export_boundary, max_symmetric_sum_rate, p_rx_00, region
from .verifier import compare_to_region, estimate_rank_ratio, sweep

EXIT_OK, EXIT_PARAM, EXIT_HALT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _default_seed() -> int:
    raw = os.environ.get("CORRLINK_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"CORRLINK_SEED must be an integer, got {raw!r}")


def _add_params(p: argparse.ArgumentParser, p_required: bool = True) -> None:
    p.add_argument("--p", type=float, required=p_required)
    p.add_argument("--rho-tx", type=float, required=True)
    p.add_argument("--rho-rx", type=float, required=True)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="corrlink", description="Correlated two-user interference network toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    r = sub.add_parser("region", help="throughput region as JSON")
    _add_params(r)
    r.add_argument("--csv", help="write the boundary polyline as CSV")
    r.add_argument("--resolution", type=int, default=101)
    r.add_argument("--out", help="write JSON here instead of stdout")

    d = sub.add_parser("dist", help="16-state joint pmf as JSON")
    _add_params(d)
    d.add_argument("--out")

    s = sub.add_parser("simulate", help="run protocol trials")
    _add_params(s)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--mode", choices=("ledger", "algebraic"), default="ledger")
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--field-modulus", type=int, default=MERSENNE31)
    s.add_argument("--out")
    s.add_argument("--dump-equations", metavar="PATH", help="algebraic mode: write per-receiver equations of every trial")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--halt-tolerance", type=float, default=0.05, help="largest halted fraction still counted as success")
    s.add_argument("--fixed-phase1", action="store_true", help="run Phase 1 for its full fixed length")

    v = sub.add_parser("verify", help="Monte-Carlo verification")
    vsub = v.add_subparsers(dest="check", parser_class=_Parser)
    rr = vsub.add_parser("rank-ratio", help="rank[G21 V1] against rank[G11 V1] / beta")
    _add_params(rr)
    rr.add_argument("--m", type=int, default=200)
    rr.add_argument("--trials", type=int, default=200)
    rr.add_argument("--seed", type=int, default=None)
    rr.add_argument("--family", choices=("protocol", "random"), default="protocol")
    rr.add_argument("--tolerance", type=float, default=0.02)
    rr.add_argument("--field-modulus", type=int, default=MERSENNE31)
    rr.add_argument("--out")

    w = sub.add_parser("sweep", help="max symmetric sum-rate along one axis as CSV")
    w.add_argument("--axis", choices=("p", "rho_tx", "rho_rx"), required=True)
    w.add_argument("--start", type=float, required=True)
    w.add_argument("--stop", type=float, required=True)
    w.add_argument("--num", type=int, default=9)
    w.add_argument("--p", type=float, default=0.5)
    w.add_argument("--rho-tx", type=float, default=0.0)
    w.add_argument("--rho-rx", type=float, default=0.0)
    w.add_argument("--m", type=int, default=20_000)
    w.add_argument("--trials", type=int, default=0)
    w.add_argument("--seed", type=int, default=None)
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--out")
    return ap


def _params(args) -> CorrelationParams:
    return CorrelationParams(args.p, args.rho_tx, args.rho_rx)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _manifest(command: str, args, seed, outputs: list[str]) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("command", "check") and v is not None}
    return {
        "subcommand": command,
        "parameters": params,
        "seed": seed,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "outputs": outputs,
    }


def _manifest_path(out: str) -> str:
    return out + ".manifest.json"


def _emit_json(payload: dict, out: str | None, command: str, args, seed=None, extra: list[str] = ()) -> None:
    if out is None:
        sys.stdout.write(_dumps(payload))
        return
    man = _manifest_path(out)
    payload = dict(payload, manifest=os.path.basename(man))
    Path(out).write_text(_dumps(payload), encoding="utf-8")
    Path(man).write_text(_dumps(_manifest(command, args, seed, [out, *extra])), encoding="utf-8")


def _csv_text(rows, header) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\r\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def cmd_region(args) -> int:
    params = _params(args)
    reg = region(params)
    payload = {
        "p": params.p,
        "rho_tx": params.rho_tx,
        "rho_rx": params.rho_rx,
        "beta": reg.beta,
        "p_rx_00": p_rx_00(params.p, params.rho_rx),
        "vertices": [list(v) for v in reg.vertices],
        "max_symmetric_sum_rate": max_symmetric_sum_rate(params),
    }
    extra = []
    if args.csv:
        pts = export_boundary(reg, args.resolution)
        Path(args.csv).write_text(_csv_text(pts, ["r1", "r2"]), encoding="utf-8")
        Path(_manifest_path(args.csv)).write_text(
            _dumps(_manifest("region", args, None, [args.csv])), encoding="utf-8"
        )
        extra.append(args.csv)
    _emit_json(payload, args.out, "region", args, extra=extra)
    return EXIT_OK


def cmd_dist(args) -> int:
    pmf = build_joint_pmf(_params(args))
    payload = pmf.as_dict()
    if args.out is None:
        sys.stdout.write(_dumps(payload))
    else:
        # keys stay the 16 state strings; the manifest is the sibling file
        Path(args.out).write_text(_dumps(payload), encoding="utf-8")
        Path(_manifest_path(args.out)).write_text(
            _dumps(_manifest("dist", args, None, [args.out])), encoding="utf-8"
        )
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = _params(args)
    seed = _default_seed() if args.seed is None else args.seed
    if args.trials < 1:
        raise ParameterError("trials must be at least 1")
    if args.dump_equations and args.mode != "algebraic":
        raise ParameterError("--dump-equations requires --mode algebraic")
    fld = FieldSpec(args.field_modulus)
    config = SimConfig(
        params, args.m, mode=args.mode, field=fld, seed=seed,
        phase1_early_stop=not args.fixed_phase1,
    )
    pmf = build_joint_pmf(params)
    if args.dump_equations:
        reports, dumps = [], []
        for t, s in enumerate(trial_seeds(seed, args.trials)):
            tr = Trace()
            reports.append(simulate(replace(config, seed=s, record_equations=True), pmf, tr))
            dumps.append({"trial": t, "receivers": [st.to_json() for st in tr.stores]})
        Path(args.dump_equations).write_text(_dumps({"trials": dumps}), encoding="utf-8")
    else:
        reports = run_batch(config, args.trials, args.jobs, pmf)
    summary = compare_to_region(reports, region(params))
    payload = {
        "params": params.as_dict(),
        "m": args.m,
        "mode": args.mode,
        "seed": seed,
        "field_modulus": fld.modulus,
        "pmf_used": pmf.as_dict(),
        "reports": [r.to_json() for r in reports],
        "summary": summary,
    }
    extra = [args.dump_equations] if args.dump_equations else []
    _emit_json(payload, args.out, "simulate", args, seed, extra)
    halted = sum(r.halted != "none" for r in reports) / len(reports)
    if halted > args.halt_tolerance:
        print(f"halted fraction {halted:.4g} exceeds tolerance {args.halt_tolerance}", file=sys.stderr)
        return EXIT_HALT
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.check != "rank-ratio":
        raise UsageError("verify: choose a check (rank-ratio)")
    params = _params(args)
    seed = _default_seed() if args.seed is None else args.seed
    est = estimate_rank_ratio(
        params, args.m, args.trials, seed, args.family, FieldSpec(args.field_modulus), args.tolerance
    )
    payload = dict(est.to_json(), params=params.as_dict(), m=args.m, seed=seed)
    _emit_json(payload, args.out, "verify rank-ratio", args, seed)
    return EXIT_OK if est.holds else EXIT_HALT


def cmd_sweep(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    if args.num < 1:
        raise ParameterError("--num must be at least 1")
    values = np.linspace(args.start, args.stop, args.num) if args.num > 1 else [args.start]
    fixed = {"p": args.p, "rho_tx": args.rho_tx, "rho_rx": args.rho_rx}
    rows = sweep(args.axis, values, fixed, m=args.m, trials=args.trials, seed=seed, jobs=args.jobs)
    header = ["param", "analytic", "simulated", "trials", "stderr"]
    text = _csv_text([[r[h] for h in header] for r in rows], header)
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
        Path(_manifest_path(args.out)).write_text(
            _dumps(_manifest("sweep", args, seed, [args.out])), encoding="utf-8"
        )
    return EXIT_OK


COMMANDS = {
    "region": cmd_region,
    "dist": cmd_dist,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_PARAM
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_PARAM
    except ParameterError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARAM
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
