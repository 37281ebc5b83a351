"""Region boundaries and max symmetric sum-rate curves as CSV files.

Writes one boundary polyline per transmit correlation, the sum-rate against
receive correlation for several transmit correlations, and optionally
simulated points next to the analytic ones.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from corrlink import CorrelationParams, export_boundary, region
from corrlink.verifier import sweep

RHO_TX = (-1.0, -0.5, 0.0, 0.5, 1.0)


def write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--rho-rx", type=float, default=0.0)
    ap.add_argument("--num", type=int, default=41)
    ap.add_argument("--trials", type=int, default=0, help="ledger trials per point; 0 for analytic only")
    ap.add_argument("--m", type=int, default=20_000)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for rt in RHO_TX:
        try:
            reg = region(CorrelationParams(args.p, rt, args.rho_rx))
        except ValueError as e:
            print(f"rho_tx={rt}: {e}")
            continue
        rows += [(rt, x, y) for x, y in export_boundary(reg, 101)]
    write(out / "boundaries.csv", ["rho_tx", "r1", "r2"], rows)

    vals = np.linspace(-1, 1, args.num)
    rows = []
    for rt in RHO_TX:
        fixed = {"p": args.p, "rho_tx": rt, "rho_rx": 0.0}
        for r in sweep("rho_rx", vals, fixed, m=args.m, trials=args.trials):
            rows.append((rt, r["param"], r["analytic"], r["simulated"], r["trials"], r["stderr"]))
    write(out / "sum_rate_vs_rho_rx.csv", ["rho_tx", "rho_rx", "analytic", "simulated", "trials", "stderr"], rows)

    rows = []
    for rr in (-1.0, -0.5, 0.0, 0.5, 1.0):
        fixed = {"p": args.p, "rho_tx": 0.0, "rho_rx": rr}
        for r in sweep("rho_tx", vals, fixed, m=args.m, trials=args.trials):
            rows.append((rr, r["param"], r["analytic"], r["simulated"], r["trials"], r["stderr"]))
    write(out / "sum_rate_vs_rho_tx.csv", ["rho_rx", "rho_tx", "analytic", "simulated", "trials", "stderr"], rows)


if __name__ == "__main__":
    main()
