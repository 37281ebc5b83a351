"""Rank of the cross-link image of Tx1's precoder against its direct-link image."""

import argparse

from corrlink import CorrelationParams
from corrlink.verifier import estimate_rank_ratio

TRIPLES = [(0.5, 0.5, 0.5), (0.45, 0.0, -0.75), (0.5, 0.0, 0.0), (0.5, -1.0, 0.0), (0.5, 1.0, 0.0), (0.8, -0.2, 0.3)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=200)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print("p,rho_tx,rho_rx,family,e_rank_cross,e_rank_direct,ratio,bound,holds")
    for t in TRIPLES:
        for family in ("protocol", "random"):
            est = estimate_rank_ratio(CorrelationParams(*t), args.m, args.trials, args.seed, family)
            d = est.to_json()
            print(
                f"{t[0]},{t[1]},{t[2]},{family},{d['e_rank_cross']:.3f},{d['e_rank_direct']:.3f},"
                f"{d['ratio']:.4f},{d['bound']:.4f},{d['holds']}"
            )


if __name__ == "__main__":
    main()
