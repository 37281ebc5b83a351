"""Monte-Carlo checks: rank-ratio inequality and simulated rates against the region."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .correlation import CorrelationParams, ParameterError, StateStream, build_joint_pmf
from .correlation import BITS
from .fieldla import FieldSpec, rank
from .protocol import SimConfig, SimReport, Trace, run_batch, simulate, trial_seeds
from .region import Region, beta, contains, max_symmetric_sum_rate


@dataclass
class RankRatioEstimate:
    e_rank_cross: float
    e_rank_direct: float
    trials: int
    beta_ref: float
    family: str = "protocol"
    tolerance: float = 0.02
    cross_ranks: list = field(default_factory=list, repr=False)
    direct_ranks: list = field(default_factory=list, repr=False)

    @property
    def ratio(self) -> float:
        return self.e_rank_cross / self.e_rank_direct if self.e_rank_direct > 0 else 1.0

    @property
    def holds(self) -> bool:
        return self.ratio >= 1.0 / self.beta_ref - self.tolerance

    def to_json(self) -> dict:
        return {
            "e_rank_cross": self.e_rank_cross,
            "e_rank_direct": self.e_rank_direct,
            "ratio": self.ratio,
            "bound": 1.0 / self.beta_ref,
            "beta_ref": self.beta_ref,
            "trials": self.trials,
            "family": self.family,
            "tolerance": self.tolerance,
            "holds": self.holds,
        }


def _scaled_ranks(v1, alpha, gains, q):
    """rank[G21 V1] and rank[G11 V1] for one transcript."""
    fld = FieldSpec(q)
    cross = (alpha[:, 2] * gains[:, 2])[:, None] * v1 % q
    direct = (alpha[:, 0] * gains[:, 0])[:, None] * v1 % q
    return rank(cross, fld), rank(direct, fld)


def _protocol_trial(params, m, seed, fld, pmf):
    tr = Trace()
    cfg = SimConfig(params, m, mode="algebraic", field=fld, seed=seed, record_precoders=True)
    simulate(cfg, pmf, tr)
    return _scaled_ranks(tr.v1, tr.alpha, tr.gains, fld.modulus)


def _random_trial(params, m, seed, fld, pmf):
    rng = np.random.default_rng(seed)
    n = 2 * m
    states = StateStream(pmf, rng).take(n)
    alpha = BITS[states].astype(np.int64)
    gains = fld.random_nonzero(rng, (n, 4))
    v1 = fld.random(rng, (n, m))
    return _scaled_ranks(v1, alpha, gains, fld.modulus)


def estimate_rank_ratio(
    params: CorrelationParams,
    m: int,
    trials: int,
    seed: int = 0,
    family: str = "protocol",
    fld: FieldSpec = FieldSpec(),
    tolerance: float = 0.02,
) -> RankRatioEstimate:
    """Average rank[G21 V1] and rank[G11 V1] over realized transmit strategies.

    ``family="protocol"`` takes V1 from algebraic protocol runs; ``"random"``
    draws uniformly random precoders over 2m slots.
    """
    if params.p <= 0.0:
        raise ParameterError("rank-ratio estimate needs p > 0")
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    pmf = build_joint_pmf(params)
    run = {"protocol": _protocol_trial, "random": _random_trial}[family]
    cross, direct = [], []
    for s in trial_seeds(seed, trials):
        c, d = run(params, m, s, fld, pmf)
        cross.append(c)
        direct.append(d)
    return RankRatioEstimate(
        e_rank_cross=float(np.mean(cross)),
        e_rank_direct=float(np.mean(direct)),
        trials=trials,
        beta_ref=beta(params.p, params.rho_tx),
        family=family,
        tolerance=tolerance,
        cross_ranks=cross,
        direct_ranks=direct,
    )


def compare_to_region(reports: list[SimReport], reg: Region, tol: float = 0.02) -> dict:
    """Membership of every non-halted report's rate pair in the region."""
    ok = [r for r in reports if r.halted == "none"]
    if not ok:
        return {"count": 0, "violations": 0}
    sums = [r.r1 + r.r2 for r in ok]
    best = max(sums)
    sym = min(2 * reg.individual_cap, 2 * reg.rhs / (1 + reg.beta))
    violations = sum(not contains(reg, r.r1, r.r2, tol) for r in ok)
    return {
        "count": len(ok),
        "halted": len(reports) - len(ok),
        "max_sum_rate": best,
        "mean_sum_rate": float(np.mean(sums)),
        "max_symmetric_sum_rate": sym,
        "gap": sym - best,
        "violations": int(violations),
    }


SWEEP_AXES = ("p", "rho_tx", "rho_rx")


def sweep(
    axis: str,
    values,
    fixed: dict,
    m: int = 20_000,
    trials: int = 0,
    seed: int = 0,
    jobs: int = 1,
) -> list[dict]:
    """Analytic and simulated maximum symmetric sum-rate along one parameter axis.

    Rows carry keys param, analytic, simulated, trials, stderr; infeasible
    points are kept with ``skipped`` markers.
    """
    if axis not in SWEEP_AXES:
        raise ParameterError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    rows = []
    for v in values:
        kw = {k: fixed[k] for k in SWEEP_AXES if k != axis}
        kw[axis] = float(v)
        try:
            params = CorrelationParams(**kw)
        except ParameterError:
            rows.append({"param": float(v), "analytic": "skipped", "simulated": "skipped", "trials": 0, "stderr": "skipped"})
            continue
        row = {"param": float(v), "analytic": max_symmetric_sum_rate(params), "simulated": "", "trials": 0, "stderr": ""}
        if trials > 0 and params.p > 0:
            reps = run_batch(SimConfig(params, m, seed=seed), trials, jobs)
            sums = np.array([r.r1 + r.r2 for r in reps if r.halted == "none"])
            row["trials"] = int(len(sums))
            if len(sums):
                row["simulated"] = float(sums.mean())
                row["stderr"] = float(sums.std(ddof=1) / math.sqrt(len(sums))) if len(sums) > 1 else 0.0
        rows.append(row)
    return rows
