"""Fraction of halted trials against the number of packets per transmitter."""

import argparse
from collections import Counter

from corrlink import CorrelationParams, SimConfig, run_batch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--rho-tx", type=float, default=0.5)
    ap.add_argument("--rho-rx", type=float, default=0.5)
    ap.add_argument("--m", type=int, nargs="+", default=[200, 500, 2000, 5000, 20000])
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    params = CorrelationParams(args.p, args.rho_tx, args.rho_rx)
    print("m,trials,halted,rate,by_type")
    for m in args.m:
        reps = run_batch(SimConfig(params, m, seed=args.seed), args.trials, args.jobs)
        kinds = Counter(r.halted for r in reps if r.halted != "none")
        n = sum(kinds.values())
        print(f"{m},{args.trials},{n},{n / args.trials:.5f},{dict(kinds)}")


if __name__ == "__main__":
    main()
