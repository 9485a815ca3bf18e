"""End-to-end acceptance checks, one test per criterion."""
from __future__ import annotations

import itertools
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from mwgame.games import (
    DegenerateGame,
    Interval,
    classify_1v1n,
    differentials_0n,
    feasibility_1n,
    min_pv_0n,
    payoff_matrix_1v1,
    solve_1v1,
)
from mwgame.majority import claim1_monotonicity
from mwgame.mechanism import (
    Certificate,
    MechanismPlan,
    Prediction,
    design,
    design_seti,
    emit_certificate,
)
from mwgame.oracle import (
    differentials_bruteforce,
    enumerate_pure_equilibria,
    lemma1_check,
    outcome_payoffs,
    search_mixed_equilibria,
    verify_unique,
)
from mwgame.payoffs import (
    Config,
    GameKind,
    GroupPartition,
    InfeasibleMechanism,
    PAYOFF_KEYS,
    PayoffParameters,
    RewardModel,
    Scenario,
    ScenarioConstraints,
    Tunable,
    validate,
)
from mwgame.simulator import config_for_plan, deviation_gain, run_protocol

from .conftest import BASE, SETI

RM, RA, RN = RewardModel.RM, RewardModel.RA, RewardModel.RNONE


class Clock:
    def __init__(self, limit: float):
        self.limit = limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.2f}s, limit {self.limit}s"


def _admissible(rng: np.random.Generator, integer: bool) -> PayoffParameters:
    while True:
        draw = (lambda: float(rng.integers(0, 6))) if integer else (lambda: float(rng.uniform(0, 10)))
        p = PayoffParameters(**{k: draw() for k in PAYOFF_KEYS})
        scenario = Scenario.CONTRACTOR if p.wct > 0 else Scenario.SETI
        if validate(p, ScenarioConstraints(scenario)).ok:
            return p


# --- 1 --------------------------------------------------------------------------

def _iid_weights(n: int, pc: float) -> tuple[np.ndarray, np.ndarray]:
    cheats = np.array(list(itertools.product((False, True), repeat=n)))
    k = cheats.sum(axis=1)
    return cheats, pc ** k * (1 - pc) ** (n - k)


def _master_gain(p: PayoffParameters, model: RewardModel, pc: float) -> float:
    # conditions are those of each master/worker pair; an unverified worker
    # is paid unless no rewards exist
    pay = RN if model is RN else RA
    cheats, w = _iid_weights(1, pc)
    m = len(w)
    on, _ = outcome_payoffs(p, pay, (1,), cheats, np.ones(m, bool))
    off, _ = outcome_payoffs(p, pay, (1,), cheats, np.zeros(m, bool))
    return float(w @ (on - off))


def _worker_gain(p: PayoffParameters, model: RewardModel, pv: float) -> float:
    pay = RN if model is RN else RA
    _, on = outcome_payoffs(p, pay, (1,), np.array([[True], [False]]), np.ones(2, bool))
    _, off = outcome_payoffs(p, pay, (1,), np.array([[True], [False]]), np.zeros(2, bool))
    cheat = pv * on[0, 0] + (1 - pv) * off[0, 0]
    honest = pv * on[1, 0] + (1 - pv) * off[1, 0]
    return float(cheat - honest)


def _samples(iv: Interval) -> list[float]:
    pts = [iv.midpoint]
    if not iv.lo_open:
        pts.append(iv.lo)
    if not iv.hi_open:
        pts.append(iv.hi)
    return pts


def _best_response_ok(gain: float, x: float, tol: float = 1e-9) -> bool:
    if x <= 0.0:
        return gain <= tol
    if x >= 1.0:
        return gain >= -tol
    return abs(gain) <= tol


def test_criterion_1_table_rows_reproduce_conditions():
    rng = np.random.default_rng(1)
    instances = [_admissible(rng, integer=k % 2 == 0) for k in range(50)]
    fully_mixed = 0
    with Clock(1.0):
        for p, n, model in itertools.product(instances, (1, 3, 5), RewardModel):
            rows = classify_1v1n(p, model, n)
            assert [(r.pc, r.pv) for r in rows] == [(r.pc, r.pv) for r in classify_1v1n(p, model, 1)]
            for row in rows:
                assert 0.0 <= row.p_wrong <= 1.0
                for pc in _samples(row.pc):
                    for pv in _samples(row.pv):
                        assert _best_response_ok(_worker_gain(p, model, pv), pc), (p, row)
                        assert _best_response_ok(_master_gain(p, model, pc), pv), (p, row)
                if row.fully_mixed:
                    fully_mixed += 1
                    num = p.mcv + p.mca if model is RN else p.mcv
                    assert row.pc.lo == pytest.approx(num / (p.mca + p.mpw), abs=1e-9)
                    assert row.pv.lo == pytest.approx(p.wct / (p.wba + p.wpc), abs=1e-9)
    assert fully_mixed > 0


# --- 2 ---------------------------------------------------------------------------

@pytest.mark.parametrize("n,expected", [(1, 0.1875), (3, 0.1171875), (5, 0.07763671875)])
def test_criterion_2_simulation_matches_closed_form(n, expected):
    p = PayoffParameters(**BASE)
    (row,) = classify_1v1n(p, RM, n)
    assert row.p_wrong == pytest.approx(expected, abs=1e-15)
    plan = MechanismPlan(GameKind.G1V1N, RM, n, row.pv.lo, p,
                         Prediction(row.p_wrong, row.u_master, row.u_worker), row.source,
                         declared_pc=row.pc.lo)
    with Clock(10.0):
        rep = run_protocol(config_for_plan(plan, 100_000, seed=20240 + n))
    assert abs(rep.empirical_p_wrong - row.p_wrong) <= rep.p_wrong_radius
    assert abs(rep.mean_u_master - row.u_master) <= rep.u_master_radius


# --- 3 ---------------------------------------------------------------------------

def test_criterion_3_seti_mechanism():
    p, eps = PayoffParameters(**SETI), 0.01
    with Clock(20.0):
        plan = design_seti(p, eps)
        assert (plan.game, plan.model, plan.n, plan.pv) == (GameKind.G0N, RN, 1, eps)
        rep = run_protocol(config_for_plan(plan, 1_000_000, seed=3))
        verdict = verify_unique(emit_certificate(plan), GroupPartition((1,)))
    assert rep.empirical_p_wrong == 0.0
    assert abs(rep.mean_u_master - (p.mbr - eps * (p.mcv + p.mca))) <= rep.u_master_radius
    assert verdict.unique


# --- 4 ---------------------------------------------------------------------------

def test_criterion_4_honesty_bound_is_sharp():
    p = PayoffParameters(wpc=2.0, wct=1.0, wba=2.0, mca=2.0, mpw=6.0, mcv=5.0, mbr=10.0)
    bound = min_pv_0n(p, RA, 1).value
    assert bound == pytest.approx(0.25)
    eps = 0.02
    with Clock(30.0):
        for sizes in [(1, 1, 1), (2, 1)]:
            part = GroupPartition(sizes)
            above = Certificate(GameKind.G0N, RA, part.n, bound + eps, p, 0.0, 1)
            assert verify_unique(above, part).unique
            for pv, sign in ((bound + eps, -1), (bound - eps, +1)):
                plan = MechanismPlan(GameKind.G0N, RA, part.n, pv, p,
                                     Prediction(0.0, 0.0, 0.0), "probe")
                cfg = config_for_plan(plan, 200_000, seed=44, partition=part)
                for g in range(part.groups):
                    if sizes[g] != 1:
                        continue
                    est = deviation_gain(cfg, g, to_pc=1.0)
                    if sign < 0:
                        assert est.significant_loss, est
                    else:
                        assert est.significant_gain, est


# --- 5 ---------------------------------------------------------------------------

def test_criterion_5_reward_model_switches_at_threshold():
    eps = 0.01
    s, wct, wpc = 2.0, 1.0, 2.0
    threshold = s * (s / wct - 1) * (s / wpc + 1)
    grid = np.round(np.arange(0.5, 8.0 + 1e-9, 0.05), 10)
    step = 0.05
    chosen = []
    with Clock(5.0):
        for mcv in grid:
            p = PayoffParameters(wpc=wpc, wct=wct, wba=s, mca=s, mpw=100.0, mcv=float(mcv),
                                 mbr=100.0)
            plan = design(Config(p, ScenarioConstraints(Scenario.CONTRACTOR, Tunable.N, s=s,
                                                        margin=eps)))
            chosen.append(plan.model)
            for alt in plan.alternatives:
                assert plan.predicted.u_master >= alt.predicted.u_master - 2 * eps * s
    switch = next(v for v, m in zip(grid, chosen) if m is RA)
    assert abs(switch - threshold) <= step
    assert all(m is RN for v, m in zip(grid, chosen) if v < threshold)
    assert all(m is RA for v, m in zip(grid, chosen) if v >= threshold)


# --- 6 ---------------------------------------------------------------------------

def test_criterion_6_claim1_monotonicity():
    with Clock(1.0):
        for pc in np.round(np.arange(0.0, 0.5 + 1e-12, 0.05), 10):
            for n in range(1, 22, 2):
                a, b, holds = claim1_monotonicity(n, float(pc))
                assert holds and b <= a + 1e-12, (n, pc)


# --- 7 ---------------------------------------------------------------------------

def _random_partition(rng: np.random.Generator) -> GroupPartition:
    while True:
        n = int(rng.choice([1, 3, 5, 7]))
        groups = int(rng.integers(1, min(3, n) + 1))
        cuts = np.sort(rng.choice(np.arange(1, n), groups - 1, replace=False)) if groups > 1 else []
        sizes = np.diff(np.concatenate([[0], cuts, [n]])).astype(int)
        if all(sizes > 0):
            return GroupPartition(tuple(int(x) for x in sizes))


def test_criterion_7_lemma1_harness():
    rng = np.random.default_rng(7)
    with Clock(120.0):
        for model in RewardModel:
            for k in range(1000):
                if k % 2:
                    p = PayoffParameters(**{key: float(rng.integers(0, 5)) for key in PAYOFF_KEYS})
                else:
                    p = PayoffParameters(**{key: float(rng.uniform(0, 10)) for key in PAYOFF_KEYS})
                part = _random_partition(rng)
                pv = float(rng.choice([0.0, 0.25, 0.5, 1.0])) if k % 3 == 0 else float(rng.uniform())
                for size in set(part.sizes):
                    d = differentials_0n(p, model, size, pv)
                    assert d.ordered
                    assert (d.dw_c, d.dw_x, d.dw_h) == pytest.approx(
                        differentials_bruteforce(p, model, size, pv), abs=1e-9)
                verdict = lemma1_check(p, model, part, pv)
                assert verdict.consistent, (p, model, part, pv, verdict)


# --- 8 ---------------------------------------------------------------------------

def test_criterion_8_game_1n_is_unusable():
    rng = np.random.default_rng(8)
    with Clock(1.0):
        for _ in range(200):
            p = PayoffParameters(**{k: float(rng.choice([0.0, 1e-10, 1e-6, 1.0, 3.0]))
                                    for k in PAYOFF_KEYS})
            for model in RewardModel:
                verdict = feasibility_1n(p, model)
                expect = p.mcv <= 1e-9 and not (model is RN and p.mca > 1e-9)
                assert verdict.feasible is expect
        plans = []
        for k in range(40):
            p = _admissible(rng, integer=False)
            if p.wct == 0:
                cfg = Config(p, ScenarioConstraints(Scenario.SETI, margin=0.01))
            else:
                s = float(rng.uniform(p.wct * 1.05, p.wct * 3))
                p = replace(p.with_reward(s), mbr=max(p.mbr, s + 1), mpw=max(p.mpw, p.mcv + 1))
                cfg = Config(p, ScenarioConstraints(Scenario.CONTRACTOR,
                                                    list(Tunable)[k % len(Tunable)], s=s,
                                                    margin=0.01))
            try:
                plans.append(design(cfg, n=1 + 2 * (k % 3), pwrong_ceiling=1.0))
            except InfeasibleMechanism:
                pass
    assert len(plans) > 20
    for plan in plans:
        assert plan.game is not GameKind.G1N
        assert all(a.game is not GameKind.G1N for a in plan.alternatives)


# --- 9 ---------------------------------------------------------------------------

def _in_row(rows, pc: float, pv: float, tol: float = 1e-6) -> bool:
    return any(r.pc.lo - tol <= pc <= r.pc.hi + tol and r.pv.lo - tol <= pv <= r.pv.hi + tol
               for r in rows)


def test_criterion_9_oracle_recovers_closed_form():
    rng = np.random.default_rng(9)
    checked = 0
    part = GroupPartition((1,))
    with Clock(30.0):
        while checked < 20:
            integer = checked % 2 == 0
            p = _admissible(rng, integer)
            model = list(RewardModel)[checked % 3]
            try:
                rows = solve_1v1(payoff_matrix_1v1(p, model))
            except DegenerateGame:
                continue
            checked += 1
            corners = {(pc, pv) for pc, pv in itertools.product((0.0, 1.0), repeat=2)
                       if any(r.pc.contains(pc) and r.pv.contains(pv) for r in rows)}
            pure = {(w.profile.pc_per_group[0], w.profile.pv)
                    for w in enumerate_pure_equilibria(p, model, GameKind.G1V1, part)}
            assert pure == corners, (p, model)
            mixed = search_mixed_equilibria(p, model, GameKind.G1V1, part)
            for w in mixed:
                assert _in_row(rows, w.profile.pc_per_group[0], w.profile.pv), (p, model, w)
            for r in rows:
                if r.fully_mixed:
                    assert any(not w.continuum
                               and abs(w.profile.pc_per_group[0] - r.pc.lo) <= 1e-6
                               and abs(w.profile.pv - r.pv.lo) <= 1e-6 for w in mixed)
                elif not (r.pc.is_point and r.pv.is_point):
                    assert any(w.continuum and _in_row([r], w.profile.pc_per_group[0],
                                                       w.profile.pv) for w in mixed)


# --- 10 --------------------------------------------------------------------------

def test_criterion_10_simulate_is_deterministic(tmp_path):
    plan = tmp_path / "plan.json"
    cfg = tmp_path / "seti.json"
    cfg.write_text('{"wct": 0, "wba": 1, "mbr": 5, "mca": 1, "mpw": 3, "mcv": 1, '
                   '"scenario": "seti", "margin": 0.01}')
    cli = [sys.executable, "-m", "mwgame.cli"]
    subprocess.run(cli + ["design", "--config", str(cfg), "--out", str(plan)], check=True,
                   capture_output=True)
    outputs = []
    for k in range(2):
        rec = tmp_path / f"sim{k}.jsonl"
        subprocess.run(cli + ["simulate", "--plan", str(plan), "--trials", "50000", "--seed", "10",
                              "--workers", str(k + 1), "--records", str(rec)],
                       check=True, capture_output=True)
        outputs.append(rec.read_bytes())
    assert outputs[0] and outputs[0] == outputs[1]
