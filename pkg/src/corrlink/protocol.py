"""Multi-phase opportunistic retransmission protocol with delayed channel knowledge.

Phase 1 sends every packet uncoded and sorts it by the delayed channel state.
Phase 2 builds packets useful to both receivers and multicasts random linear
combinations of them.  Phase 3 retransmits packets that only the intended
receiver still lacks.  Ledger mode counts; algebraic mode tracks every
equation over a prime field and checks decodability by rank.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .correlation import (
    BITS,
    CorrelationParams,
    JointStatePmf,
    ParameterError,
    StateStream,
    build_joint_pmf,
)
from .fieldla import Echelon, EquationStore, FieldSpec
from .region import p_rx_00

INITIAL, DELIVERED, Q1, Q2 = 0, 1, 2, 3
UNSET, C, NC = 0, 1, 2
STATUS_NAMES = {INITIAL: "initial", DELIVERED: "delivered", Q1: "Q1", Q2: "Q2"}

HALT_NONE = "none"
HALT_EXPIRED = "expired"


@dataclass(frozen=True)
class SimConfig:
    params: CorrelationParams
    m: int
    mode: str = "ledger"
    field: FieldSpec = FieldSpec()
    seed: int = 0
    slack_exponent: float = 2.0 / 3.0
    algebraic_cap: int = 2000
    # end Phase 1 once both initial queues drain; the fixed length stays the cap
    phase1_early_stop: bool = True
    record_equations: bool = False
    record_precoders: bool = False
    topup_limit_factor: int = 50

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ParameterError("m must be at least 1")
        if self.mode not in ("ledger", "algebraic"):
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.mode == "algebraic" and self.m > self.algebraic_cap:
            raise ParameterError(f"algebraic mode supports m <= {self.algebraic_cap}")
        if self.params.p <= 0.0:
            raise ParameterError("p must be positive to simulate transmissions")

    @property
    def slack(self) -> float:
        return self.m ** self.slack_exponent


@dataclass
class SimReport:
    phase1_slots: int
    phase2_slots: int
    phase3_slots: int
    topup_slots: int
    halted: str
    r1: float
    r2: float
    decodable: bool | None
    queue_census: dict
    pmf_used: dict = field(default_factory=dict, repr=False)

    @property
    def total_slots(self) -> int:
        return self.phase1_slots + self.phase2_slots + self.phase3_slots + self.topup_slots

    @property
    def achieved_rates(self) -> tuple[float, float]:
        return (self.r1, self.r2)

    def to_json(self) -> dict:
        return {
            "phase1_slots": self.phase1_slots,
            "phase2_slots": self.phase2_slots,
            "phase3_slots": self.phase3_slots,
            "topup_slots": self.topup_slots,
            "halted": self.halted,
            "r1": self.r1,
            "r2": self.r2,
            "decodable": self.decodable,
            "queue_census": self.queue_census,
        }


@dataclass
class PacketLedger:
    """Queue status of one transmitter's packets."""

    owner: int
    status: np.ndarray
    label: np.ndarray
    tx_slot: np.ndarray

    @classmethod
    def fresh(cls, owner: int, m: int) -> "PacketLedger":
        return cls(
            owner=owner,
            status=np.zeros(m, dtype=np.int8),
            label=np.zeros(m, dtype=np.int8),
            tx_slot=np.full(m, -1, dtype=np.int64),
        )

    def count(self, status: int, label: int | None = None) -> int:
        mask = self.status == status
        if label is not None:
            mask &= self.label == label
        return int(mask.sum())

    def indices(self, status: int, label: int | None = None) -> np.ndarray:
        mask = self.status == status
        if label is not None:
            mask &= self.label == label
        return np.flatnonzero(mask)


def _own_cross_other(owner: int) -> tuple[int, int, int]:
    """Bit positions of (own link, cross link, other transmitter's own link)."""
    # bits are (a11, a12, a21, a22)
    return (0, 2, 3) if owner == 1 else (3, 1, 0)


def classify_packet(alpha, owner: int, other_active: bool = True) -> tuple[int, int]:
    """Queue transition of an Initial packet given the slot's channel state."""
    o, x, oo = _own_cross_other(owner)
    own, cross = alpha[o], alpha[x]
    if cross:
        status = Q1 if own else Q2
        label = C if (alpha[oo] and other_active) else NC
        return status, label
    return (DELIVERED if own else INITIAL), UNSET


@dataclass
class Phase1Result:
    ledgers: tuple[PacketLedger, PacketLedger]
    slots: int
    states: np.ndarray
    sent: np.ndarray  # (slots, 2) packet index per transmitter, -1 when silent
    halted: str
    census: dict


def _expected_queue_sizes(pmf: JointStatePmf, m: int) -> tuple[float, float]:
    tx = pmf.params.tx_joint
    denom = 1.0 - tx.p00
    return tx.p11 * m / denom, tx.p01 * m / denom


def known_fractions(pmf: JointStatePmf, owner: int) -> tuple[float, float]:
    """Probability that a Q1 (resp. Q2) packet is already known at the other receiver.

    Conditioned on the full pmf rather than on a single pairwise joint, since
    the other receiver's direct link need not be independent of the owner's
    links given the cross link.
    """
    o, x, oo = _own_cross_other(owner)
    out = []
    for own in (1, 0):
        sel = (BITS[:, o] == own) & (BITS[:, x] == 1)
        tot = pmf.probs[sel].sum()
        known = pmf.probs[sel & (BITS[:, oo] == 0)].sum()
        out.append(float(known / tot) if tot > 0 else 0.0)
    return out[0], out[1]


def phase1_length(params: CorrelationParams, m: int, slack_exponent: float = 2 / 3) -> int:
    p00 = params.tx_joint.p00
    return math.ceil(m / (1.0 - p00)) + math.ceil(m ** slack_exponent)


def run_phase1(config: SimConfig, pmf: JointStatePmf, stream: StateStream) -> Phase1Result:
    m = config.m
    budget = phase1_length(config.params, m, config.slack_exponent)
    states = stream.peek(budget)
    bits = BITS[states]
    d1 = np.flatnonzero(bits[:, 0] | bits[:, 2])[:m]
    d2 = np.flatnonzero(bits[:, 3] | bits[:, 1])[:m]
    ledgers = (PacketLedger.fresh(1, m), PacketLedger.fresh(2, m))
    halted = HALT_NONE
    if len(d1) < m or len(d2) < m:
        halted = "I"
        end = budget
    else:
        end = int(max(d1[-1], d2[-1])) + 1 if config.phase1_early_stop else budget
    states = stream.take(end)
    bits = BITS[states]
    t = np.arange(end)
    sent = np.full((end, 2), -1, dtype=np.int64)
    for i, dep in ((0, d1), (1, d2)):
        k = np.searchsorted(dep, t, side="left")
        live = k < m
        sent[live, i] = k[live]
    active = sent >= 0

    for owner, dep in ((1, d1), (2, d2)):
        led = ledgers[owner - 1]
        o, x, oo = _own_cross_other(owner)
        b = bits[dep]
        other_active = active[dep, 2 - owner]
        own, cross = b[:, o] == 1, b[:, x] == 1
        st = np.where(cross, np.where(own, Q1, Q2), np.where(own, DELIVERED, INITIAL))
        lab = np.where(cross, np.where((b[:, oo] == 1) & other_active, C, NC), UNSET)
        n = len(dep)
        led.status[:n] = st
        led.label[:n] = lab
        led.tx_slot[:n] = dep

    census = _census(ledgers)
    if halted == HALT_NONE:
        halted = _check_errors(config, pmf, ledgers, census)
    return Phase1Result(ledgers, end, states, sent, halted, census)


def _census(ledgers) -> dict:
    out = {}
    for led in ledgers:
        i = led.owner
        out[f"N{i}1"] = led.count(Q1)
        out[f"N{i}2"] = led.count(Q2)
        out[f"N{i}1c"] = led.count(Q1, C)
        out[f"N{i}1nc"] = led.count(Q1, NC)
        out[f"N{i}2c"] = led.count(Q2, C)
        out[f"N{i}2nc"] = led.count(Q2, NC)
        out[f"delivered{i}"] = led.count(DELIVERED)
    return out


def _check_errors(config, pmf, ledgers, census) -> str:
    m = config.m
    e1, e2 = _expected_queue_sizes(pmf, m)
    n1 = e1 + 2 * config.slack
    n2 = e2 + 2 * config.slack
    for i in (1, 2):
        if census[f"N{i}1"] > n1 or census[f"N{i}2"] > n2:
            return "II"
    for i in (1, 2):
        census[f"pad{i}1"] = math.floor(n1) - census[f"N{i}1"]
        census[f"pad{i}2"] = math.floor(n2) - census[f"N{i}2"]
    # deterministic padding is known to every receiver
    for i in (1, 2):
        f1, f2 = known_fractions(pmf, i)
        if census[f"N{i}1nc"] + census[f"pad{i}1"] < f1 * n1 - 2 * config.slack:
            return "III"
        if census[f"N{i}2nc"] + census[f"pad{i}2"] < f2 * n2 - 2 * config.slack:
            return "III"
    return HALT_NONE


@dataclass
class CommonPackets:
    """Packets of common interest owned by one transmitter.

    ``first``/``second`` hold packet indices of the owner (second = -1 for a
    single packet); ``side_info`` marks commons the owner's receiver already
    knows; ``kind`` names the construction rule.
    """

    owner: int
    first: np.ndarray
    second: np.ndarray
    kind: np.ndarray
    side_info: np.ndarray

    def __len__(self) -> int:
        return len(self.first)

    @property
    def side_count(self) -> int:
        return int(self.side_info.sum())


KIND_PAIRED, KIND_CONVERTED, KIND_BOTH, KIND_COLLISION, KIND_SINGLE = range(5)
KIND_NAMES = ("paired", "converted", "needed_both", "collision", "single")


@dataclass
class Leftovers:
    packets: tuple[np.ndarray, np.ndarray]
    plan: str = "retransmit until the intended receiver hears it"


def build_common_packets(p1: Phase1Result):
    """Group Phase-1 residue into packets useful to both receivers.

    For transmitter i: packets heard only by the unintended receiver (nc, Q2)
    are summed with packets heard by both receivers but not by the other
    user's collision partner; Q2 packets with the other user's direct link on
    go alone; same-slot collisions where all four links were on are served by
    one packet per pair.  When both users hold unpaired nc residue, a
    collision pair is split to carry one residue packet per user.
    """
    led1, led2 = p1.ledgers
    bits = BITS[p1.states]
    groups = {}
    for led in (led1, led2):
        i = led.owner
        cross_bit = 1 if i == 1 else 2  # a12 for Tx1 packets, a21 for Tx2 packets
        q1c = led.indices(Q1, C)
        slots = led.tx_slot[q1c]
        collided = bits[slots, cross_bit] == 1
        groups[i] = {
            "B": q1c[~collided],
            "A": q1c[collided],
            "C": led.indices(Q2, NC),
            "D": led.indices(Q2, C),
        }
    # collision pairs: Tx1 packet and the Tx2 packet of the same slot
    a1 = groups[1]["A"]
    slot_to_pkt2 = p1.sent[:, 1]
    a2 = slot_to_pkt2[led1.tx_slot[a1]]

    first = {1: [], 2: []}
    second = {1: [], 2: []}
    kind = {1: [], 2: []}
    side = {1: [], 2: []}

    def emit(i, a, b, k, s=False):
        first[i].append(np.asarray(a, dtype=np.int64))
        second[i].append(np.asarray(b, dtype=np.int64))
        kind[i].append(np.full(len(a), k, dtype=np.int8))
        side[i].append(np.full(len(a), s, dtype=bool))

    residue = {}
    for i in (1, 2):
        g = groups[i]
        k = min(len(g["B"]), len(g["C"]))
        emit(i, g["B"][:k], g["C"][:k], KIND_PAIRED)
        residue[i] = (g["B"][k:], g["C"][k:])
        emit(i, g["D"], np.full(len(g["D"]), -1), KIND_BOTH)

    nconv = min(len(a1), len(residue[1][1]), len(residue[2][1]))
    emit(1, a1[:nconv], residue[1][1][:nconv], KIND_CONVERTED)
    emit(2, a2[:nconv], residue[2][1][:nconv], KIND_CONVERTED)
    left = (residue[1][1][nconv:], residue[2][1][nconv:])

    for i in (1, 2):
        b_rest = residue[i][0]
        emit(i, b_rest, np.full(len(b_rest), -1), KIND_SINGLE, True)

    rest1, rest2 = a1[nconv:], a2[nconv:]
    r = len(rest1)
    k1 = sum(len(x) for x in first[1])
    k2 = sum(len(x) for x in first[2])
    give1 = int(min(max(round((k2 + r - k1) / 2), 0), r))
    emit(1, rest1[:give1], np.full(give1, -1), KIND_COLLISION)
    emit(2, rest2[give1:], np.full(r - give1, -1), KIND_COLLISION)

    commons = []
    for i in (1, 2):
        commons.append(
            CommonPackets(
                owner=i,
                first=np.concatenate(first[i]),
                second=np.concatenate(second[i]),
                kind=np.concatenate(kind[i]),
                side_info=np.concatenate(side[i]),
            )
        )
    return commons[0], commons[1], Leftovers(left)


def multicast_budget(k1: int, k2: int, params: CorrelationParams, m: int, slack_exponent=2 / 3) -> int:
    prx = p_rx_00(params.p, params.rho_rx)
    return math.ceil(2 * max(k1, k2) / (1.0 - prx)) + math.ceil(m ** slack_exponent)


def generic_rank(x, y, z, n_own, n_other):
    """Generic rank of rows reaching only the own, only the other, or both blocks."""
    return np.minimum.reduce(
        [x + y + z, n_own + y + z, n_other + x + z, np.full_like(x, n_own + n_other)]
    )


def _first_full(bits, needs):
    """First slot after which both receivers hold full-rank common systems."""
    ok = np.ones(len(bits), dtype=bool)
    for rx, (n_own, n_other) in enumerate(needs):
        own_bit, other_bit = (0, 1) if rx == 0 else (3, 2)
        own = bits[:, own_bit] == 1
        oth = bits[:, other_bit] == 1
        if n_own == 0:
            own = np.zeros_like(own)
        if n_other == 0:
            oth = np.zeros_like(oth)
        x = np.cumsum(own & ~oth)
        y = np.cumsum(~own & oth)
        z = np.cumsum(own & oth)
        ok &= generic_rank(x, y, z, n_own, n_other) >= n_own + n_other
    hit = np.flatnonzero(ok)
    return int(hit[0]) + 1 if hit.size else -1


def _needs(c1: CommonPackets, c2: CommonPackets):
    k1, k2 = len(c1), len(c2)
    # (own unknowns, other unknowns) per receiver
    return ((k1 - c1.side_count, k2), (k2 - c2.side_count, k1))


def run_two_multicast_ledger(c1, c2, config, stream) -> tuple[int, bool]:
    k1, k2 = len(c1), len(c2)
    if k1 + k2 == 0:
        return 0, False
    budget = multicast_budget(k1, k2, config.params, config.m, config.slack_exponent)
    bits = BITS[stream.peek(budget)]
    n = _first_full(bits, _needs(c1, c2))
    if n < 0:
        stream.take(budget)
        return budget, True
    stream.take(n)
    return n, False


def _successes(stream: StateStream, bit: int, count: int, start: int = 0) -> int:
    """Slots needed (from the stream head) until ``count`` slots with the bit on."""
    if count == 0:
        return 0
    n = max(64, 2 * count)
    while True:
        hits = np.flatnonzero(BITS[stream.peek(n)][:, bit] == 1)
        if len(hits) >= count:
            return int(hits[count - 1]) + 1
        n *= 2


def run_phase3_ledger(left: Leftovers, stream: StateStream) -> int:
    n1 = _successes(stream, 0, len(left.packets[0]))
    n2 = _successes(stream, 3, len(left.packets[1]))
    n = max(n1, n2)
    stream.take(n)
    return n


class _Receivers:
    """Per-receiver equation tracking in packet coordinates."""

    def __init__(self, m: int, fld: FieldSpec, record: bool):
        self.m = m
        self.q = fld.modulus
        w = 2 * m
        self.ech = []
        self.stores = []
        for rx in (1, 2):
            own = np.arange(m) if rx == 1 else np.arange(m, w)
            other = np.arange(m, w) if rx == 1 else np.arange(m)
            self.ech.append(Echelon(w, self.q, np.concatenate([other, own]), split=m))
            self.stores.append(EquationStore(rx, m, m) if record else None)

    def observe(self, rx: int, row: np.ndarray, slot: int) -> None:
        if not row.any():
            return
        self.ech[rx - 1].insert(row)
        if self.stores[rx - 1] is not None:
            self.stores[rx - 1].add(row, slot)

    def decoded_dim(self, rx: int) -> int:
        return self.ech[rx - 1].second

    def decodable(self, rx: int) -> bool:
        return self.decoded_dim(rx) == self.m


class _Precoders:
    """Per-slot transmit vectors of Tx1 with the slot's links and gains."""

    def __init__(self):
        self.v1 = []
        self.alpha = []
        self.gains = []

    def add(self, v1: np.ndarray, bits: np.ndarray, gains: np.ndarray) -> None:
        self.v1.append(v1.copy())
        self.alpha.append(bits.copy())
        self.gains.append(gains.copy())


def _combine(w: np.ndarray, c: CommonPackets, m: int) -> np.ndarray:
    """Owner-block vector of the combination sum_k w_k * common_k.

    Every packet belongs to at most one common, so scattering suffices.
    """
    v = np.zeros(m, dtype=np.int64)
    v[c.first] = w
    has2 = c.second >= 0
    v[c.second[has2]] = w[has2]
    return v


class _Slotter:
    """Emit one slot of simultaneous transmissions to both receivers."""

    def __init__(self, rec: _Receivers, pre: _Precoders | None, rng: np.random.Generator, fld: FieldSpec):
        self.rec = rec
        self.pre = pre
        self.rng = rng
        self.fld = fld
        self.q = fld.modulus
        self.slot = 0

    def send(self, v1: np.ndarray | None, v2: np.ndarray | None, bits: np.ndarray):
        m = self.rec.m
        g = self.fld.random_nonzero(self.rng, 4)  # g11, g12, g21, g22
        z = np.zeros(m, dtype=np.int64)
        v1 = z if v1 is None else v1
        v2 = z if v2 is None else v2
        for rx, (b1, b2, g1, g2) in ((1, (0, 1, 0, 1)), (2, (2, 3, 2, 3))):
            row = np.concatenate(
                [bits[b1] * g[g1] * v1 % self.q, bits[b2] * g[g2] * v2 % self.q]
            )
            self.rec.observe(rx, row, self.slot)
        if self.pre is not None:
            self.pre.add(v1, bits, g)
        self.slot += 1
        return g


def _unit(m: int, k: int) -> np.ndarray:
    v = np.zeros(m, dtype=np.int64)
    v[k] = 1
    return v


def _algebraic_phase1(p1: Phase1Result, slotter: _Slotter) -> None:
    m = slotter.rec.m
    bits = BITS[p1.states]
    for t in range(p1.slots):
        k1, k2 = p1.sent[t]
        slotter.send(
            _unit(m, k1) if k1 >= 0 else None, _unit(m, k2) if k2 >= 0 else None, bits[t]
        )


def _algebraic_multicast(c1, c2, config, stream, slotter) -> tuple[int, bool]:
    k1, k2 = len(c1), len(c2)
    if k1 + k2 == 0:
        return 0, False
    q = slotter.q
    m = config.m
    budget = multicast_budget(k1, k2, config.params, m, config.slack_exponent)
    K = k1 + k2
    checks = []
    for rx, c in ((1, c1), (2, c2)):
        ech = Echelon(K, q)
        off = 0 if rx == 1 else k1
        for k in np.flatnonzero(c.side_info):
            ech.insert(_unit(K, off + k))
        checks.append(ech)
    n = 0
    while not all(e.rank == K for e in checks):
        if n == budget:
            return n, True
        bits = BITS[stream.take(1)[0]]
        w1 = slotter.fld.random(slotter.rng, k1)
        w2 = slotter.fld.random(slotter.rng, k2)
        v1 = _combine(w1, c1, m) if k1 else None
        v2 = _combine(w2, c2, m) if k2 else None
        g = slotter.send(v1, v2, bits)
        for rx, ech in zip((1, 2), checks):
            b1, b2 = (0, 1) if rx == 1 else (2, 3)
            row = np.concatenate([bits[b1] * g[b1] * w1 % q, bits[b2] * g[b2] * w2 % q])
            if row.any():
                ech.insert(row)
        n += 1
    return n, False


def _algebraic_phase3(left: Leftovers, stream, slotter) -> int:
    q = slotter.q
    m = slotter.rec.m
    packs = left.packets
    checks = [Echelon(len(packs[0]), q), Echelon(len(packs[1]), q)]
    done = [len(packs[0]) == 0, len(packs[1]) == 0]
    n = 0
    while not all(done):
        bits = BITS[stream.take(1)[0]]
        vs = []
        ws = []
        for i in (0, 1):
            if done[i]:
                vs.append(None)
                ws.append(None)
                continue
            w = slotter.fld.random(slotter.rng, len(packs[i]))
            v = np.zeros(m, dtype=np.int64)
            v[packs[i]] = w
            vs.append(v)
            ws.append(w)
        g = slotter.send(vs[0], vs[1], bits)
        for i, own_bit in ((0, 0), (1, 3)):
            if ws[i] is not None and bits[own_bit]:
                checks[i].insert(ws[i] * g[own_bit] % q)
                done[i] = checks[i].rank == len(packs[i])
        n += 1
    return n


def _algebraic_topup(config, stream, slotter) -> tuple[int, bool]:
    rec = slotter.rec
    m = config.m
    limit = config.topup_limit_factor * m
    n = 0
    for rx in (1, 2):
        while not rec.decodable(rx):
            if n >= limit:
                return n, True
            bits = BITS[stream.take(1)[0]].copy()
            v = slotter.fld.random(slotter.rng, m)
            if rx == 1:
                slotter.send(v, None, bits)
            else:
                slotter.send(None, v, bits)
            n += 1
    return n, False


@dataclass
class Trace:
    """Optional by-products of an algebraic run."""

    stores: list | None = None
    v1: np.ndarray | None = None
    alpha: np.ndarray | None = None
    gains: np.ndarray | None = None


def _rng_pair(seed: int):
    ss = np.random.SeedSequence(seed)
    s_state, s_coef = ss.spawn(2)
    return np.random.default_rng(s_state), np.random.default_rng(s_coef)


def simulate(config: SimConfig, pmf: JointStatePmf | None = None, trace: Trace | None = None) -> SimReport:
    if pmf is None:
        pmf = build_joint_pmf(config.params)
    state_rng, coef_rng = _rng_pair(config.seed)
    stream = StateStream(pmf, state_rng)
    m = config.m
    algebraic = config.mode == "algebraic"

    p1 = run_phase1(config, pmf, stream)
    census = dict(p1.census)
    slots = [p1.slots, 0, 0, 0]

    def report(halted: str, dec=None) -> SimReport:
        total = sum(slots)
        ok = halted == HALT_NONE
        rate = m / total if ok and total > 0 else 0.0
        return SimReport(
            phase1_slots=slots[0],
            phase2_slots=slots[1],
            phase3_slots=slots[2],
            topup_slots=slots[3],
            halted=halted,
            r1=rate,
            r2=rate,
            decodable=dec if algebraic else None,
            queue_census=census,
            pmf_used=pmf.as_dict(),
        )

    slotter = None
    if algebraic:
        rec = _Receivers(m, config.field, config.record_equations)
        pre = _Precoders() if config.record_precoders else None
        slotter = _Slotter(rec, pre, coef_rng, config.field)
        _algebraic_phase1(p1, slotter)
    if p1.halted != HALT_NONE:
        return _finish(report(p1.halted, False), slotter, trace)

    c1, c2, left = build_common_packets(p1)
    census["common1"] = len(c1)
    census["common2"] = len(c2)
    census["common_side_info1"] = c1.side_count
    census["common_side_info2"] = c2.side_count
    for k, name in enumerate(KIND_NAMES):
        census[f"common_{name}"] = int((c1.kind == k).sum() + (c2.kind == k).sum())
    census["leftover1"] = len(left.packets[0])
    census["leftover2"] = len(left.packets[1])

    if algebraic:
        slots[1], expired = _algebraic_multicast(c1, c2, config, stream, slotter)
    else:
        slots[1], expired = run_two_multicast_ledger(c1, c2, config, stream)
    if expired:
        return _finish(report(HALT_EXPIRED, False), slotter, trace)

    if algebraic:
        slots[2] = _algebraic_phase3(left, stream, slotter)
        slots[3], expired = _algebraic_topup(config, stream, slotter)
        if expired:
            return _finish(report(HALT_EXPIRED, False), slotter, trace)
        dec = slotter.rec.decodable(1) and slotter.rec.decodable(2)
        return _finish(report(HALT_NONE, dec), slotter, trace)
    slots[2] = run_phase3_ledger(left, stream)
    return report(HALT_NONE)


def _finish(rep: SimReport, slotter: _Slotter | None, trace: Trace | None) -> SimReport:
    if trace is not None and slotter is not None:
        trace.stores = slotter.rec.stores
        if slotter.pre is not None and slotter.pre.v1:
            trace.v1 = np.array(slotter.pre.v1)
            trace.alpha = np.array(slotter.pre.alpha)
            trace.gains = np.array(slotter.pre.gains)
    return rep


def trial_seeds(seed: int, trials: int) -> list[int]:
    """Per-trial seeds derived from one root seed, independent of scheduling."""
    children = np.random.SeedSequence(seed).spawn(trials)
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for c in children]


def _run_one(args):
    config, pmf = args
    return simulate(config, pmf)


def run_batch(config: SimConfig, trials: int, jobs: int = 1, pmf: JointStatePmf | None = None) -> list[SimReport]:
    """Run ``trials`` independent trials; ``config.seed`` is the root seed."""
    if pmf is None:
        pmf = build_joint_pmf(config.params)
    configs = [replace(config, seed=s) for s in trial_seeds(config.seed, trials)]
    if jobs <= 1 or trials <= 1:
        return [simulate(c, pmf) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run_one, [(c, pmf) for c in configs], chunksize=max(1, trials // (4 * jobs))))
