"""Seeded Monte Carlo execution of the master protocol.

Trials run in fixed-size chunks. Chunk k draws from its own generator derived
from (seed, k), so results do not depend on execution order or on how many
threads process the chunks; per-chunk sums are reduced in chunk order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .mechanism import MechanismPlan
from .payoffs import GameKind, GroupPartition, RewardModel, StrategyProfile

DEFAULT_CHUNK = 1 << 16
MAX_TRIALS = 1 << 31
SIGMAS = 3.0


@dataclass(frozen=True)
class SimConfig:
    plan: MechanismPlan
    partition: GroupPartition
    strategy: StrategyProfile
    trials: int
    seed: int
    deviation: tuple[int, float] | None = None
    chunk_size: int = DEFAULT_CHUNK
    workers: int = 1

    def __post_init__(self) -> None:
        if not 1 <= self.trials <= MAX_TRIALS:
            raise ValueError(f"trials must lie in [1, 2^31], got {self.trials}")
        if len(self.strategy.pc_per_group) != self.partition.groups:
            raise ValueError("strategy and partition disagree on the number of groups")
        if self.partition.n % 2 == 0:
            raise ValueError("the number of workers must be odd")
        if self.deviation is not None:
            i, pc = self.deviation
            if not 0 <= i < self.partition.groups:
                raise ValueError(f"deviation group {i} out of range")
            if not 0.0 <= pc <= 1.0:
                raise ValueError("deviation probability must lie in [0, 1]")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if self.plan.game in (GameKind.G1V1, GameKind.G1V1N) and \
                set(self.partition.sizes) != {1}:
            raise ValueError("one-to-one games need singleton groups")

    def effective_pcs(self) -> np.ndarray:
        pcs = np.array(self.strategy.pc_per_group, dtype=float)
        if self.deviation is not None:
            pcs[self.deviation[0]] = self.deviation[1]
        return pcs

    def to_dict(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "groups": list(self.partition.sizes),
            "pc": list(self.strategy.pc_per_group),
            "pv": self.strategy.pv,
            "trials": self.trials,
            "seed": self.seed,
            "deviation": list(self.deviation) if self.deviation else None,
            "chunk_size": self.chunk_size,
        }


@dataclass(frozen=True)
class TrialBatch:
    """Per-trial outcomes, exposed for accounting checks."""

    verify: np.ndarray          # (m,)
    cheats: np.ndarray          # (m, groups)
    rewarded: np.ndarray        # (m, groups) groups whose members were paid
    wrong_accepted: np.ndarray  # (m,)
    correct_obtained: np.ndarray
    u_master: np.ndarray
    u_groups: np.ndarray        # (m, groups)
    master_reward_outflow: np.ndarray
    worker_reward_inflow: np.ndarray
    reward_events: np.ndarray   # number of individual workers paid
    compute_charges: np.ndarray  # number of WC_T charges


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _draws(cfg: SimConfig, chunk: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    rng = _chunk_rng(cfg.seed, chunk)
    u_verify = rng.random(m)
    u_groups = rng.random((m, cfg.partition.groups))
    return u_verify, u_groups


def play(cfg: SimConfig, u_verify: np.ndarray, u_groups: np.ndarray,
         pcs: np.ndarray | None = None) -> TrialBatch:
    """Run the protocol on pre-drawn uniforms."""
    plan = cfg.plan
    p = plan.params
    pcs = cfg.effective_pcs() if pcs is None else pcs
    sizes = np.array(cfg.partition.sizes, dtype=float)
    n = float(sizes.sum())

    verify = u_verify < cfg.strategy.pv
    cheats = u_groups < pcs[None, :]
    cheaters = cheats @ sizes
    honest_workers = n - cheaters
    maj_cheat = 2.0 * cheaters > n

    if plan.model is RewardModel.RNONE:
        paid_unverified = np.zeros_like(cheats)
    elif plan.model is RewardModel.RA or plan.game is GameKind.G1V1N:
        # n separate one-to-one games: every worker is its own majority
        paid_unverified = np.ones_like(cheats)
    else:
        paid_unverified = cheats == maj_cheat[:, None]
    rewarded = np.where(verify[:, None], ~cheats, paid_unverified)
    paid_workers = rewarded @ sizes

    # master
    got_right = np.where(verify, honest_workers > 0, ~maj_cheat)
    wrong_accepted = ~verify & maj_cheat
    u_master = (np.where(got_right, p.mbr, 0.0) - np.where(wrong_accepted, p.mpw, 0.0)
                - np.where(verify, p.mcv, 0.0) - p.mca * paid_workers)

    # groups: one WC_T per honest group, benefit per rewarded member
    punished = verify[:, None] & cheats
    u_groups = (np.where(rewarded, p.wba * sizes, 0.0)
                - np.where(punished, p.wpc * sizes, 0.0)
                - np.where(cheats, 0.0, p.wct))

    return TrialBatch(
        verify=verify,
        cheats=cheats,
        rewarded=rewarded,
        wrong_accepted=wrong_accepted,
        correct_obtained=got_right,
        u_master=u_master,
        u_groups=u_groups,
        master_reward_outflow=p.mca * paid_workers,
        worker_reward_inflow=np.where(rewarded, p.wba * sizes, 0.0).sum(axis=1),
        reward_events=paid_workers,
        compute_charges=(~cheats).sum(axis=1),
    )


def _chunks(cfg: SimConfig) -> list[tuple[int, int]]:
    full, rest = divmod(cfg.trials, cfg.chunk_size)
    out = [(k, cfg.chunk_size) for k in range(full)]
    if rest:
        out.append((full, rest))
    return out


def simulate_trials(cfg: SimConfig) -> TrialBatch:
    """All trials materialized at once (intended for small runs and tests)."""
    parts = [play(cfg, *_draws(cfg, k, m)) for k, m in _chunks(cfg)]
    return TrialBatch(*(np.concatenate([getattr(b, f) for b in parts])
                        for f in TrialBatch.__dataclass_fields__))


def _chunk_sums(cfg: SimConfig, chunk: int, m: int) -> np.ndarray:
    b = play(cfg, *_draws(cfg, chunk, m))
    return np.concatenate([
        [b.wrong_accepted.sum(), b.correct_obtained.sum(),
         b.u_master.sum(), np.square(b.u_master).sum()],
        b.u_groups.sum(axis=0),
        np.square(b.u_groups).sum(axis=0),
    ]).astype(float)


def _map_chunks(cfg: SimConfig, fn) -> list:
    chunks = _chunks(cfg)
    if cfg.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return list(pool.map(lambda km: fn(cfg, *km), chunks))
    return [fn(cfg, k, m) for k, m in chunks]


def _radius(s: float, s2: float, t: int) -> float:
    if t < 2:
        return math.inf
    var = max(s2 - s * s / t, 0.0) / (t - 1)
    return SIGMAS * math.sqrt(var / t)


@dataclass(frozen=True)
class SimReport:
    empirical_p_wrong: float
    p_wrong_radius: float
    empirical_p_correct: float
    mean_u_master: float
    u_master_radius: float
    mean_u_worker: tuple[float, ...]
    u_worker_radius: tuple[float, ...]
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "empirical_p_wrong": self.empirical_p_wrong,
            "p_wrong_radius": self.p_wrong_radius,
            "empirical_p_correct": self.empirical_p_correct,
            "mean_u_master": self.mean_u_master,
            "u_master_radius": self.u_master_radius,
            "mean_u_worker": list(self.mean_u_worker),
            "u_worker_radius": list(self.u_worker_radius),
            "trials": self.trials,
            "seed": self.seed,
        }

    def summary(self) -> str:
        workers = ", ".join(f"{m:.6g} +/- {r:.2g}"
                            for m, r in zip(self.mean_u_worker, self.u_worker_radius))
        return (f"trials={self.trials} seed={self.seed}\n"
                f"P_wrong = {self.empirical_p_wrong:.6g} +/- {self.p_wrong_radius:.2g}\n"
                f"P_correct = {self.empirical_p_correct:.6g}\n"
                f"U_M = {self.mean_u_master:.6g} +/- {self.u_master_radius:.2g}\n"
                f"U_W = [{workers}]")


def run_protocol(cfg: SimConfig) -> SimReport:
    sums = _map_chunks(cfg, _chunk_sums)
    total = np.zeros_like(sums[0])
    for s in sums:  # fixed reduction order
        total = total + s
    t = cfg.trials
    ell = cfg.partition.groups
    pw = total[0] / t
    return SimReport(
        empirical_p_wrong=float(pw),
        p_wrong_radius=SIGMAS * math.sqrt(pw * (1 - pw) / t),
        empirical_p_correct=float(total[1] / t),
        mean_u_master=float(total[2] / t),
        u_master_radius=_radius(total[2], total[3], t),
        mean_u_worker=tuple(float(v / t) for v in total[4:4 + ell]),
        u_worker_radius=tuple(_radius(total[4 + i], total[4 + ell + i], t) for i in range(ell)),
        trials=t,
        seed=cfg.seed,
    )


@dataclass(frozen=True)
class DeviationEstimate:
    group: int
    to_pc: float
    delta: float
    radius: float
    trials: int

    @property
    def significant_loss(self) -> bool:
        return self.delta + self.radius < 0

    @property
    def significant_gain(self) -> bool:
        return self.delta - self.radius > 0

    def to_dict(self) -> dict:
        return {"group": self.group, "to_pc": self.to_pc, "delta": self.delta,
                "radius": self.radius, "trials": self.trials}


def _paired(cfg: SimConfig, group: int, to_pc: float) -> DeviationEstimate:
    base = cfg.effective_pcs()
    alt = base.copy()
    alt[group] = to_pc

    def sums(c: SimConfig, k: int, m: int) -> tuple[float, float]:
        draws = _draws(c, k, m)
        d = play(c, *draws, pcs=alt).u_groups[:, group] - play(c, *draws, pcs=base).u_groups[:, group]
        return float(d.sum()), float(np.square(d).sum())

    s = s2 = 0.0
    for a, b in _map_chunks(cfg, sums):
        s += a
        s2 += b
    t = cfg.trials
    return DeviationEstimate(group, to_pc, s / t, _radius(s, s2, t), t)


def deviation_gain(cfg: SimConfig, group: int, to_pc: float | None = None) -> DeviationEstimate:
    """Utility change of one group switching strategy, on common random numbers.

    Without ``to_pc`` the group moves to its best pure alternative: the
    opposite action for a pure baseline, or the better of the two otherwise.
    """
    if not 0 <= group < cfg.partition.groups:
        raise ValueError(f"group {group} out of range")
    if to_pc is not None:
        return _paired(cfg, group, to_pc)
    current = float(cfg.effective_pcs()[group])
    if current in (0.0, 1.0):
        return _paired(cfg, group, 1.0 - current)
    return max((_paired(cfg, group, x) for x in (0.0, 1.0)), key=lambda e: e.delta)


def config_for_plan(plan: MechanismPlan, trials: int, seed: int,
                    partition: GroupPartition | None = None,
                    pcs: tuple[float, ...] | None = None, **kw) -> SimConfig:
    """Simulation of a plan with its declared strategy unless overridden."""
    partition = partition or GroupPartition.singletons(plan.n)
    if pcs is None:
        pcs = (plan.declared_pc,) * partition.groups
    return SimConfig(plan, partition, StrategyProfile(tuple(pcs), plan.pv), trials, seed, **kw)


def with_deviation(cfg: SimConfig, group: int, pc: float) -> SimConfig:
    return replace(cfg, deviation=(group, pc))
