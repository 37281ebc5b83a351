"""Ledger-mode runs at the two worked parameter points, with queue and slot statistics."""

import argparse
import time

import numpy as np

from corrlink import CorrelationParams, SimConfig, max_symmetric_sum_rate, run_batch

POINTS = {
    "symmetric (0.5, 0.5, 0.5)": CorrelationParams(0.5, 0.5, 0.5),
    "anti-correlated rx (0.45, 0, -0.75)": CorrelationParams(0.45, 0.0, -0.75),
}


def summarize(reps, m):
    ok = [r for r in reps if r.halted == "none"]

    def mean(f):
        return float(np.mean([f(r) for r in ok]))

    def census(*keys):
        return mean(lambda r: sum(r.queue_census[k] for k in keys))

    return {
        "trials": len(reps),
        "halted": len(reps) - len(ok),
        "phase1/m": mean(lambda r: r.phase1_slots) / m,
        "phase2/m": mean(lambda r: r.phase2_slots) / m,
        "phase3/m": mean(lambda r: r.phase3_slots) / m,
        "total/m": mean(lambda r: r.total_slots) / m,
        "N_1/m": census("N11", "N21") / (2 * m),
        "N_2/m": census("N12", "N22") / (2 * m),
        "commons/m": census("common1", "common2") / m,
        "sum rate": mean(lambda r: r.r1 + r.r2),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=100_000)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    for name, params in POINTS.items():
        t0 = time.perf_counter()
        reps = run_batch(SimConfig(params, args.m, seed=args.seed), args.trials, args.jobs)
        stats = summarize(reps, args.m)
        print(f"{name}: {time.perf_counter() - t0:.1f}s")
        for k, v in stats.items():
            print(f"  {k:10s} {v:.4f}" if isinstance(v, float) else f"  {k:10s} {v}")
        print(f"  {'analytic':10s} {max_symmetric_sum_rate(params):.4f}")


if __name__ == "__main__":
    main()
