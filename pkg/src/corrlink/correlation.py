"""Correlated binary shadowing coefficients for the two-user interference network.

A channel state is the quadruple (a11, a12, a21, a22) where a_ji = 1 means the
link from transmitter i to receiver j is on.  States are indexed by the integer
whose binary digits read a11 a12 a21 a22 (most significant first).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

BITS = np.array(list(itertools.product((0, 1), repeat=4)), dtype=np.int8)
STATE_KEYS = tuple("".join(str(b) for b in row) for row in BITS)

# constrained pairs as (axis, axis, which correlation)
TX_PAIRS = ((0, 2), (1, 3))  # (a11, a21) and (a12, a22)
RX_PAIRS = ((0, 1), (2, 3))  # (a11, a12) and (a21, a22)

_ABS_TOL = 1e-12


class ParameterError(ValueError):
    """Raised for (p, rho) combinations outside the feasible domain."""


class JointInfeasibleError(ParameterError):
    """Raised when no 16-state pmf meets all four pairwise constraints."""


def feasible_range(rho: float) -> tuple[float, float]:
    """Interval of link probabilities compatible with correlation ``rho``."""
    if not -1.0 <= rho <= 1.0:
        raise ParameterError(f"correlation {rho} outside [-1, 1]")
    if rho == 1.0:
        return (0.0, 1.0)
    lo = max(0.0, -rho / (1.0 - rho))
    hi = min(1.0, 1.0 / (1.0 - rho))
    return (lo, hi)


def _in_range(p: float, rho: float) -> bool:
    lo, hi = feasible_range(rho)
    return lo - _ABS_TOL <= p <= hi + _ABS_TOL


def _fmt_interval(rho: float) -> str:
    lo, hi = feasible_range(rho)
    return f"[{lo:.6g}, {hi:.6g}]"


@dataclass(frozen=True)
class PairwiseJoint:
    p00: float
    p01: float
    p10: float
    p11: float

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.p00, self.p01], [self.p10, self.p11]])


def pairwise_joint(p: float, rho: float) -> PairwiseJoint:
    """Joint law of two equal-marginal Bernoulli(p) links with correlation rho."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"probability {p} outside [0, 1]")
    if not _in_range(p, rho):
        raise ParameterError(
            f"p={p} infeasible for rho={rho}: feasible interval {_fmt_interval(rho)}"
        )
    q = 1.0 - p
    p11 = p * q * rho + p * p
    p10 = p - p11
    p00 = 1.0 - p11 - 2.0 * p10
    # clamp negative rounding noise at the interval endpoints
    vals = [0.0 if -_ABS_TOL < v < 0.0 else v for v in (p00, p10, p11)]
    p00, p10, p11 = vals
    return PairwiseJoint(p00=p00, p01=p10, p10=p10, p11=p11)


@dataclass(frozen=True)
class CorrelationParams:
    p: float
    rho_tx: float
    rho_rx: float

    def __post_init__(self) -> None:
        for name in ("rho_tx", "rho_rx"):
            rho = getattr(self, name)
            if not -1.0 <= rho <= 1.0:
                raise ParameterError(f"{name}={rho} outside [-1, 1]")
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"p={self.p} outside [0, 1]")
        for name in ("rho_tx", "rho_rx"):
            rho = getattr(self, name)
            if not _in_range(self.p, rho):
                raise ParameterError(
                    f"p={self.p} infeasible for {name}={rho}: "
                    f"feasible interval {_fmt_interval(rho)}"
                )

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def tx_joint(self) -> PairwiseJoint:
        return pairwise_joint(self.p, self.rho_tx)

    @property
    def rx_joint(self) -> PairwiseJoint:
        return pairwise_joint(self.p, self.rho_rx)

    def as_dict(self) -> dict:
        return {"p": self.p, "rho_tx": self.rho_tx, "rho_rx": self.rho_rx}


@dataclass(frozen=True)
class JointStatePmf:
    """Probability of each of the 16 states; ``probs[k]`` belongs to STATE_KEYS[k]."""

    params: CorrelationParams
    probs: np.ndarray = field(repr=False)
    method: str = "ipf"
    sweeps: int = 0

    def __post_init__(self) -> None:
        arr = np.asarray(self.probs, dtype=float).reshape(16)
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def tensor(self) -> np.ndarray:
        return self.probs.reshape(2, 2, 2, 2)

    def pair_marginal(self, axes: tuple[int, int]) -> np.ndarray:
        other = tuple(k for k in range(4) if k not in axes)
        m = self.tensor.sum(axis=other)
        return m if axes[0] < axes[1] else m.T

    def max_violation(self) -> float:
        """Largest deviation from the sum, marginal and pairwise constraints."""
        t = self.tensor
        worst = abs(t.sum() - 1.0)
        worst = max(worst, float(-min(0.0, t.min())))
        for ax in range(4):
            other = tuple(k for k in range(4) if k != ax)
            worst = max(worst, abs(t.sum(axis=other)[1] - self.params.p))
        tx = self.params.tx_joint.as_matrix()
        rx = self.params.rx_joint.as_matrix()
        for axes in TX_PAIRS:
            worst = max(worst, float(np.abs(self.pair_marginal(axes) - tx).max()))
        for axes in RX_PAIRS:
            worst = max(worst, float(np.abs(self.pair_marginal(axes) - rx).max()))
        return float(worst)

    def prob(self, event) -> float:
        """Probability of the states for which ``event(a11, a12, a21, a22)`` holds."""
        mask = np.array([bool(event(*row)) for row in BITS])
        return float(self.probs[mask].sum())

    def entropy(self) -> float:
        nz = self.probs[self.probs > 0]
        return float(-(nz * np.log(nz)).sum())

    def as_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in zip(STATE_KEYS, self.probs)}


def _constraints(params: CorrelationParams):
    tx = params.tx_joint.as_matrix()
    rx = params.rx_joint.as_matrix()
    return [(a, tx) for a in TX_PAIRS] + [(a, rx) for a in RX_PAIRS]


def _support(cons) -> np.ndarray:
    """States that do not hit a zero cell of any pairwise joint.

    Zero cells appear at boundary correlations (forced equal or forced
    complementary bits).  Removing them up front keeps IPF away from
    vanishing-support pathologies.
    """
    ok = np.ones(16, dtype=bool)
    for (i, j), joint in cons:
        ok &= joint[BITS[:, i], BITS[:, j]] > 0
    return ok


def _ipf(cons, support: np.ndarray, tol: float, max_sweeps: int):
    t = np.where(support, 1.0, 0.0)
    t /= t.sum()
    t = t.reshape(2, 2, 2, 2)
    for sweep in range(1, max_sweeps + 1):
        for (i, j), joint in cons:
            other = tuple(k for k in range(4) if k not in (i, j))
            m = t.sum(axis=other)  # axes (i, j) in increasing order
            target = joint if i < j else joint.T
            ratio = np.divide(target, m, out=np.zeros_like(m), where=m > 0)
            shape = [1, 1, 1, 1]
            shape[min(i, j)] = 2
            shape[max(i, j)] = 2
            t = t * ratio.reshape(shape)
        viol = 0.0
        for (i, j), joint in cons:
            other = tuple(k for k in range(4) if k not in (i, j))
            m = t.sum(axis=other)
            target = joint if i < j else joint.T
            viol = max(viol, float(np.abs(m - target).max()))
        if viol < tol:
            return t.reshape(16), sweep, True
    return t.reshape(16), max_sweeps, False


def _linear_system(cons):
    rows, rhs = [], []
    for (i, j), joint in cons:
        for a, b in itertools.product((0, 1), repeat=2):
            rows.append(((BITS[:, i] == a) & (BITS[:, j] == b)).astype(float))
            rhs.append(joint[a, b])
    return np.array(rows), np.array(rhs)


def _linear_fallback(cons, support: np.ndarray, params: CorrelationParams):
    A, b = _linear_system(cons)
    A = A[:, support]
    x, *_ = np.linalg.lstsq(A, b, rcond=None)  # least-norm completion
    if x.min() < -1e-12 or np.abs(A @ x - b).max() > 1e-10:
        res = linprog(
            np.zeros(A.shape[1]), A_eq=A, b_eq=b, bounds=(0, None), method="highs"
        )
        if res.status != 0:
            raise JointInfeasibleError(
                "no joint pmf satisfies the pairwise constraints "
                "(a11,a21),(a12,a22) at rho_tx and (a11,a12),(a21,a22) at rho_rx "
                f"for p={params.p}, rho_tx={params.rho_tx}, rho_rx={params.rho_rx}"
            )
        x = res.x
    full = np.zeros(16)
    full[support] = np.clip(x, 0.0, None)
    return full / full.sum()


def build_joint_pmf(
    params: CorrelationParams, tol: float = 1e-10, max_sweeps: int = 10_000
) -> JointStatePmf:
    """Maximum-entropy 16-state pmf consistent with the four pairwise joints."""
    cons = _constraints(params)
    support = _support(cons)
    if not support.any():
        raise JointInfeasibleError(
            f"pairwise constraints leave no admissible state for {params}"
        )
    probs, sweeps, converged = _ipf(cons, support, tol, max_sweeps)
    method = "ipf"
    if not converged:
        probs = _linear_fallback(cons, support, params)
        method = "linear"
    pmf = JointStatePmf(params=params, probs=probs, method=method, sweeps=sweeps)
    if pmf.max_violation() > 1e-9:
        raise JointInfeasibleError(
            f"pairwise constraints jointly unsatisfiable for {params} "
            f"(residual {pmf.max_violation():.3g})"
        )
    return pmf


@dataclass(frozen=True)
class ChannelState:
    alpha: tuple[int, int, int, int]
    gains: tuple[int, int, int, int]


def state_bits(index) -> np.ndarray:
    """Rows of (a11, a12, a21, a22) for an array of state indices."""
    return BITS[np.asarray(index)]


def sample_state(pmf: JointStatePmf, rng: np.random.Generator, modulus: int) -> ChannelState:
    k = int(rng.choice(16, p=pmf.probs))
    gains = rng.integers(1, modulus, size=4) if modulus > 2 else np.ones(4, dtype=np.int64)
    return ChannelState(
        alpha=tuple(int(b) for b in BITS[k]), gains=tuple(int(g) for g in gains)
    )


class StateStream:
    """Lazily sampled i.i.d. state sequence with look-ahead.

    Each state consumes exactly one uniform draw, so the realized sequence does
    not depend on how callers chunk their requests.
    """

    def __init__(self, pmf: JointStatePmf, rng: np.random.Generator, chunk: int = 4096):
        cdf = np.cumsum(pmf.probs)
        cdf[-1] = 1.0
        self._cdf = cdf
        self._rng = rng
        self._chunk = chunk
        self._buf = np.empty(0, dtype=np.int8)
        self._pos = 0
        self.consumed = 0

    def _draw(self, n: int) -> np.ndarray:
        u = self._rng.random(n)
        return np.searchsorted(self._cdf, u, side="right").astype(np.int8)

    def peek(self, n: int) -> np.ndarray:
        have = len(self._buf) - self._pos
        if have < n:
            extra = self._draw(max(n - have, self._chunk))
            self._buf = np.concatenate([self._buf[self._pos:], extra])
            self._pos = 0
        return self._buf[self._pos:self._pos + n]

    def take(self, n: int) -> np.ndarray:
        out = self.peek(n).copy()
        self._pos += n
        self.consumed += n
        return out
