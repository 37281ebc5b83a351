import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrlink.correlation import BITS, STATE_KEYS, CorrelationParams, ParameterError, StateStream, build_joint_pmf
from corrlink.fieldla import FieldSpec
from corrlink.protocol import (
    C,
    DELIVERED,
    INITIAL,
    KIND_COLLISION,
    KIND_CONVERTED,
    NC,
    Q1,
    Q2,
    UNSET,
    SimConfig,
    _algebraic_topup,
    _Receivers,
    _Slotter,
    build_common_packets,
    classify_packet,
    generic_rank,
    known_fractions,
    multicast_budget,
    phase1_length,
    run_batch,
    run_phase1,
    simulate,
    trial_seeds,
)
from corrlink.region import contains, region

from oracles import generic_rank_bruteforce, phase1_reference

EX1 = CorrelationParams(0.5, 0.5, 0.5)
EX2 = CorrelationParams(0.45, 0.0, -0.75)
TRIPLES = [EX1, EX2, CorrelationParams(0.5, 0.0, 0.0), CorrelationParams(0.5, -1.0, 0.0)]


class FixedStream:
    """Replays a scripted state sequence, then all-off slots."""

    def __init__(self, keys):
        self.states = np.array([STATE_KEYS.index(k) for k in keys], dtype=np.int8)
        self.pos = 0
        self.consumed = 0

    def peek(self, n):
        out = self.states[self.pos:self.pos + n]
        return np.concatenate([out, np.zeros(n - len(out), dtype=np.int8)])

    def take(self, n):
        out = self.peek(n)
        self.pos += n
        self.consumed += n
        return out


def test_classify_packet_examples():
    # alpha = (a11, a12, a21, a22)
    assert classify_packet((1, 0, 1, 1), 1) == (Q1, C)
    assert classify_packet((1, 1, 1, 0), 1) == (Q1, NC)
    assert classify_packet((0, 0, 1, 1), 1) == (Q2, C)
    assert classify_packet((0, 1, 1, 0), 1) == (Q2, NC)
    assert classify_packet((1, 1, 0, 1), 1) == (DELIVERED, UNSET)
    assert classify_packet((0, 1, 0, 1), 1) == (INITIAL, UNSET)
    # Tx2 reads a22 as own, a12 as cross and a11 for the label
    assert classify_packet((1, 1, 0, 1), 2) == (Q1, C)
    assert classify_packet((0, 1, 0, 0), 2) == (Q2, NC)
    assert classify_packet((1, 0, 1, 1), 2) == (DELIVERED, UNSET)
    # a silent partner cannot interfere
    assert classify_packet((1, 0, 1, 1), 1, other_active=False) == (Q1, NC)


def test_phase1_length():
    assert phase1_length(EX1, 1000) == 1600 + 100
    assert phase1_length(CorrelationParams(1.0, 0.0, 0.0), 1000) == 1000 + 100
    m = 10**5
    assert phase1_length(EX2, m) == math.ceil(m / (1 - 0.55**2)) + math.ceil(m ** (2 / 3))


def test_known_fractions_independent_links():
    # with independent links the other receiver misses a packet w.p. 1 - p
    pmf = build_joint_pmf(CorrelationParams(0.3, 0.0, 0.0))
    for owner in (1, 2):
        f1, f2 = known_fractions(pmf, owner)
        assert f1 == pytest.approx(0.7, abs=1e-9)
        assert f2 == pytest.approx(0.7, abs=1e-9)


def test_known_fractions_example_one():
    pmf = build_joint_pmf(EX1)
    f1, f2 = known_fractions(pmf, 1)
    assert 0.0 < f1 < 1.0 and 0.0 < f2 < 1.0
    # Q2^nc / Q2 = P(a22 = 0 | a11 = 0, a21 = 1)
    sel = (BITS[:, 0] == 0) & (BITS[:, 2] == 1)
    assert f2 == pytest.approx(pmf.probs[sel & (BITS[:, 3] == 0)].sum() / pmf.probs[sel].sum())


@pytest.mark.parametrize("params", TRIPLES + [CorrelationParams(0.8, 0.6, -0.2), CorrelationParams(0.3, 0.9, 0.9)])
@pytest.mark.parametrize("early_stop", [True, False])
def test_phase1_matches_slot_by_slot_reference(params, early_stop):
    pmf = build_joint_pmf(params)
    for seed in range(3):
        m = 300
        cfg = SimConfig(params, m, seed=seed, phase1_early_stop=early_stop)
        budget = phase1_length(params, m)
        bits = BITS[StateStream(pmf, np.random.default_rng(seed)).peek(budget)]
        p1 = run_phase1(cfg, pmf, StateStream(pmf, np.random.default_rng(seed)))
        slots, ref = phase1_reference(bits, m, budget, early_stop)
        assert p1.slots == slots
        for led, packets in zip(p1.ledgers, ref):
            for k, (status, label, tx) in enumerate(packets):
                assert {"initial": INITIAL, "delivered": DELIVERED, "Q1": Q1, "Q2": Q2}[status] == led.status[k]
                assert {None: UNSET, "c": C, "nc": NC}[label] == led.label[k]
                if status != "initial":
                    assert led.tx_slot[k] == tx


def test_phase1_reports_error_one_when_budget_too_short():
    stream = FixedStream(["0000"] * 10)
    cfg = SimConfig(EX1, 3)
    p1 = run_phase1(cfg, build_joint_pmf(EX1), stream)
    assert p1.halted == "I"
    assert (p1.ledgers[0].status == INITIAL).all()


def test_phase1_perfect_links():
    params = CorrelationParams(1.0, 0.0, 0.0)
    m = 64
    p1 = run_phase1(SimConfig(params, m), build_joint_pmf(params), FixedStream(["1111"] * 200))
    assert p1.slots == m
    for led in p1.ledgers:
        assert (led.status == Q1).all() and (led.label == C).all()
    p1 = run_phase1(SimConfig(params, m, phase1_early_stop=False), build_joint_pmf(params), FixedStream(["1111"] * 200))
    assert p1.slots == m + math.ceil(m ** (2 / 3))


def test_four_slot_transcript_emits_two_sums():
    # a, c from Tx1 and b, d from Tx2; slot 1 all links on, slot 3 crosses only
    stream = FixedStream(["0000", "1111", "0000", "0110"])
    p1 = run_phase1(SimConfig(EX1, 2), build_joint_pmf(EX1), stream)
    assert p1.slots == 4
    assert p1.halted == "none"
    led1, led2 = p1.ledgers
    assert list(led1.status) == [Q1, Q2] and list(led1.label) == [C, NC]
    assert list(led2.status) == [Q1, Q2] and list(led2.label) == [C, NC]
    c1, c2, left = build_common_packets(p1)
    assert (list(c1.first), list(c1.second), list(c1.kind)) == ([0], [1], [KIND_CONVERTED])
    assert (list(c2.first), list(c2.second), list(c2.kind)) == ([0], [1], [KIND_CONVERTED])
    assert not c1.side_info.any() and not c2.side_info.any()
    assert len(left.packets[0]) == len(left.packets[1]) == 0


def test_common_packets_only_needed_by_both():
    # a Tx1 packet whose cross link and Tx2's direct link were on, own link off
    stream = FixedStream(["0011", "0011"])
    p1 = run_phase1(SimConfig(EX1, 2), build_joint_pmf(EX1), stream)
    c1, c2, left = build_common_packets(p1)
    assert list(c1.first) == [0, 1]
    assert (c1.second == -1).all()
    assert len(left.packets[0]) == 0


def test_collision_pairs_share_one_common():
    # all links on every slot: every packet collides, one common per pair
    params = CorrelationParams(1.0, 0.0, 0.0)
    m = 10
    p1 = run_phase1(SimConfig(params, m), build_joint_pmf(params), FixedStream(["1111"] * 40))
    c1, c2, left = build_common_packets(p1)
    assert len(c1) + len(c2) == m
    assert abs(len(c1) - len(c2)) <= 1
    assert (c1.kind == KIND_COLLISION).all() and (c2.kind == KIND_COLLISION).all()


def test_generic_rank_matches_random_matrices():
    rng = np.random.default_rng(0)
    for _ in range(60):
        x, y, z, n_own, n_other = (int(v) for v in rng.integers(0, 6, 5))
        got = generic_rank(np.array([x]), np.array([y]), np.array([z]), n_own, n_other)[0]
        assert got == generic_rank_bruteforce(x, y, z, n_own, n_other, seed=int(rng.integers(1 << 30)))


def test_multicast_budget():
    m = 1000
    # balanced loads k each at (0.5, 0.5, 0.5): 2k / (5/8) plus the slack
    assert multicast_budget(400, 400, EX1, m) == math.ceil(800 / 0.625) + 100


def test_simulate_perfect_links_needs_two_slots_per_packet():
    params = CorrelationParams(1.0, 0.0, 0.0)
    for mode in ("ledger", "algebraic"):
        rep = simulate(SimConfig(params, 120, mode=mode, seed=4))
        assert rep.halted == "none"
        assert rep.phase1_slots == 120
        assert rep.phase2_slots == 120
        assert rep.phase3_slots == 0
        assert rep.r1 == rep.r2 == 0.5
        assert contains(region(params), rep.r1, rep.r2)
        if mode == "algebraic":
            assert rep.decodable


def test_report_json_keys():
    rep = simulate(SimConfig(EX1, 200, seed=1))
    assert list(rep.to_json()) == [
        "phase1_slots", "phase2_slots", "phase3_slots", "topup_slots",
        "halted", "r1", "r2", "decodable", "queue_census",
    ]
    assert rep.total_slots == rep.phase1_slots + rep.phase2_slots + rep.phase3_slots + rep.topup_slots
    assert rep.r1 == pytest.approx(200 / rep.total_slots)
    assert rep.achieved_rates == (rep.r1, rep.r2)
    assert max(rep.achieved_rates) <= 1.0
    assert rep.decodable is None
    assert sum(rep.pmf_used.values()) == pytest.approx(1.0)


def test_config_validation():
    with pytest.raises(ParameterError):
        SimConfig(EX1, 0)
    with pytest.raises(ParameterError):
        SimConfig(EX1, 10, mode="exact")
    with pytest.raises(ParameterError):
        SimConfig(EX1, 2001, mode="algebraic")
    with pytest.raises(ParameterError):
        SimConfig(CorrelationParams(0.0, 0.0, 0.0), 10)
    SimConfig(EX1, 10**6)


@pytest.mark.parametrize("mode", ["ledger", "algebraic"])
def test_determinism(mode):
    cfg = SimConfig(EX2, 150, mode=mode, seed=99)
    assert simulate(cfg).to_json() == simulate(cfg).to_json()
    assert simulate(cfg).to_json() != simulate(replace(cfg, seed=100)).to_json()


@pytest.mark.parametrize("params", TRIPLES + [CorrelationParams(0.7, 0.3, -0.2), CorrelationParams(0.25, 0.8, 0.1)])
def test_ledger_and_algebraic_agree(params):
    for seed in range(3):
        for m in (40, 250):
            a = simulate(SimConfig(params, m, seed=seed))
            b = simulate(SimConfig(params, m, mode="algebraic", seed=seed))
            assert a.halted == b.halted
            assert a.phase1_slots == b.phase1_slots
            assert a.queue_census == b.queue_census
            if a.halted == "none":
                assert b.decodable
                overall = abs(a.total_slots - (b.total_slots - b.topup_slots))
                assert overall <= b.topup_slots


@pytest.mark.parametrize("params", TRIPLES + [CorrelationParams(0.6, -0.4, 0.7)])
def test_every_packet_is_accounted_once(params):
    pmf = build_joint_pmf(params)
    for seed in range(4):
        m = 2000
        cfg = SimConfig(params, m, seed=seed)
        p1 = run_phase1(cfg, pmf, StateStream(pmf, np.random.default_rng(seed)))
        if p1.halted != "none":
            continue
        bits = BITS[p1.states]
        c1, c2, left = build_common_packets(p1)
        commons = (c1, c2)
        for i, led in enumerate(p1.ledgers):
            other, other_led = commons[1 - i], p1.ledgers[1 - i]
            # a collision common of the other user also carries this user's packet of that slot
            coll = other.first[other.kind == KIND_COLLISION]
            partners = p1.sent[other_led.tx_slot[coll], i]
            used = np.concatenate([
                commons[i].first,
                commons[i].second[commons[i].second >= 0],
                left.packets[i],
                partners,
            ])
            assert len(used) == len(np.unique(used))
            q1nc = led.indices(Q1, NC)
            queued = np.flatnonzero((led.status == Q1) | (led.status == Q2))
            assert sorted(used.tolist()) == np.setdiff1d(queued, q1nc).tolist()
            assert led.count(DELIVERED) + len(queued) == m
            # Q1 nc packets reached their own receiver clean or summed with a
            # partner packet that is itself multicast as a common
            interferer_bit = 1 if i == 0 else 2
            slots = led.tx_slot[q1nc]
            partner = p1.sent[slots, 1 - i]
            hit = (partner >= 0) & (bits[slots, interferer_bit] == 1)
            assert (other_led.status[partner[hit]] == Q2).all()
            assert np.isin(partner[hit], other.first[other.second < 0]).all()


def test_topup_completes_an_undecodable_receiver():
    m = 5
    fld = FieldSpec()
    rec = _Receivers(m, fld, record=True)
    slotter = _Slotter(rec, None, np.random.default_rng(0), fld)
    # Tx1 heard only by Rx1 on every slot; Tx2 only by Rx2
    cfg = SimConfig(EX1, m, mode="algebraic")
    n, expired = _algebraic_topup(cfg, FixedStream(["1001"] * 100), slotter)
    assert not expired
    assert n == 2 * m
    assert rec.decodable(1) and rec.decodable(2)


def test_topup_gives_up_after_its_limit():
    m = 3
    fld = FieldSpec()
    rec = _Receivers(m, fld, record=False)
    slotter = _Slotter(rec, None, np.random.default_rng(0), fld)
    cfg = SimConfig(EX1, m, mode="algebraic", topup_limit_factor=2)
    n, expired = _algebraic_topup(cfg, FixedStream([]), slotter)
    assert expired and n == 2 * m


def test_topup_overhead_is_not_growing():
    per_m = []
    for m in (100, 300, 1000):
        reps = [simulate(SimConfig(EX1, m, mode="algebraic", seed=s)) for s in range(2)]
        per_m.append(np.mean([r.topup_slots for r in reps]) / m)
    assert per_m[0] >= per_m[1] >= per_m[2]


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(-1, 1), st.floats(-1, 1), st.integers(0, 2**31))
def test_rates_stay_inside_region(p, rt, rr, seed):
    try:
        params = CorrelationParams(p, rt, rr)
    except ParameterError:
        return
    reg = region(params)
    for rep in run_batch(SimConfig(params, 3000, seed=seed), 3):
        if rep.halted == "none":
            assert contains(reg, rep.r1, rep.r2, 0.02)


def test_run_batch_independent_of_jobs():
    cfg = SimConfig(EX1, 500, seed=5)
    a = [r.to_json() for r in run_batch(cfg, 4, jobs=1)]
    b = [r.to_json() for r in run_batch(cfg, 4, jobs=2)]
    assert a == b


def test_trial_seeds_are_stable_prefixes():
    assert trial_seeds(3, 5) == trial_seeds(3, 5)
    assert trial_seeds(3, 8)[:5] == trial_seeds(3, 5)
    assert len(set(trial_seeds(3, 100))) == 100


def test_halted_trial_reports_zero_rate():
    cfg = SimConfig(EX1, 2000)
    for s in trial_seeds(0, 400):
        rep = simulate(replace(cfg, seed=s))
        if rep.halted != "none":
            assert rep.r1 == rep.r2 == 0.0
            break
