"""Mechanism design for the volunteer (SETI-like) and contractor scenarios.

A plan fixes the game, reward model, number of workers, verification
probability and any tuned payoff. Plans come with a certificate that lets a
worker re-check that honesty is the unique equilibrium.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .games import (
    DegenerateGame,
    EquilibriumNotGuaranteed,
    analyze_0n,
    analyze_1v1n,
    classify_1v1n,
    min_pv_0n,
)
from .payoffs import (
    DEFAULT_MARGIN,
    EQ_TOL,
    Config,
    ConfigError,
    GameKind,
    GroupPartition,
    InfeasibleMechanism,
    PayoffParameters,
    RewardModel,
    Scenario,
    ScenarioConstraints,
    Tunable,
    validate,
)


@dataclass(frozen=True)
class Prediction:
    p_wrong: float
    u_master: float
    u_worker: float

    def to_dict(self) -> dict[str, float]:
        return {"p_wrong": self.p_wrong, "u_master": self.u_master, "u_worker": self.u_worker}


@dataclass(frozen=True)
class Alternative:
    """A candidate the designer evaluated but did not necessarily pick."""

    game: GameKind
    model: RewardModel
    pv: float
    s: float | None
    predicted: Prediction
    note: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"game": self.game.value, "model": self.model.value, "pv": self.pv,
                "s": self.s, "predicted": self.predicted.to_dict(), "note": self.note}


@dataclass(frozen=True)
class MechanismPlan:
    game: GameKind
    model: RewardModel
    n: int
    pv: float
    params: PayoffParameters
    predicted: Prediction
    rationale: str
    tuned: dict[str, float] = field(default_factory=dict)
    declared_pc: float = 0.0
    min_group_size: int = 1
    alternatives: tuple[Alternative, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 < self.pv <= 1.0:
            raise ValueError(f"pv must lie in (0, 1], got {self.pv}")
        if self.n < 1 or self.n % 2 == 0:
            raise ValueError(f"n must be a positive odd integer, got {self.n}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "game": self.game.value,
            "model": self.model.value,
            "n": self.n,
            "pv": self.pv,
            "params": self.params.to_dict(),
            "predicted": self.predicted.to_dict(),
            "rationale": self.rationale,
            "tuned": dict(self.tuned),
            "declared_pc": self.declared_pc,
            "min_group_size": self.min_group_size,
            "alternatives": [a.to_dict() for a in self.alternatives],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> MechanismPlan:
        alts = tuple(
            Alternative(GameKind(a["game"]), RewardModel(a["model"]), a["pv"], a["s"],
                        Prediction(**a["predicted"]), a.get("note", ""))
            for a in d.get("alternatives", ())
        )
        return cls(
            game=GameKind(d["game"]),
            model=RewardModel(d["model"]),
            n=int(d["n"]),
            pv=float(d["pv"]),
            params=PayoffParameters.from_dict(d["params"]),
            predicted=Prediction(**d["predicted"]),
            rationale=d.get("rationale", ""),
            tuned=dict(d.get("tuned", {})),
            declared_pc=float(d.get("declared_pc", 0.0)),
            min_group_size=int(d.get("min_group_size", 1)),
            alternatives=alts,
        )


@dataclass(frozen=True)
class Certificate:
    """What the master ships with the task so workers can check uniqueness."""

    game: GameKind
    model: RewardModel
    n: int
    pv: float
    params: PayoffParameters
    declared_pc: float = 0.0
    min_group_size: int = 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "game": self.game.value,
            "model": self.model.value,
            "n": self.n,
            "pv": self.pv,
            "params": self.params.to_dict(),
            "declared_pc": self.declared_pc,
            "min_group_size": self.min_group_size,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Certificate:
        return cls(GameKind(d["game"]), RewardModel(d["model"]), int(d["n"]), float(d["pv"]),
                   PayoffParameters.from_dict(d["params"]), float(d.get("declared_pc", 0.0)),
                   int(d.get("min_group_size", 1)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> Certificate:
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> Certificate:
        return cls.from_json(Path(path).read_text())


def emit_certificate(plan: MechanismPlan) -> Certificate:
    return Certificate(plan.game, plan.model, plan.n, plan.pv, plan.params,
                       plan.declared_pc, plan.min_group_size)


# --- helpers -----------------------------------------------------------------

def _check(params: PayoffParameters, scenario: Scenario, s: float | None = None) -> None:
    validate(params, ScenarioConstraints(scenario, s=s)).raise_if_invalid()


def _coupled_reward(params: PayoffParameters, s: float | None) -> float:
    if s is None:
        if abs(params.wba - params.mca) > EQ_TOL:
            raise ConfigError("contractor designs need WB_A = MC_A (set s)")
        s = params.wba
    return s


def _pv(bound: float, margin: float, what: str) -> float:
    if bound >= 1.0:
        raise InfeasibleMechanism(f"{what}: honesty needs p_V > {bound:.6g}, which is not below 1")
    return min(bound + margin, 1.0)


@dataclass(frozen=True)
class _Candidate:
    model: RewardModel
    params: PayoffParameters
    pv: float
    predicted: Prediction


def participation_pv(params: PayoffParameters, model: RewardModel, min_group_size: int = 1) -> float:
    """Verification probability below which a paid worker expects a loss.

    Only binding without unverified rewards: a group then earns its benefit
    solely when verified.
    """
    if model is not RewardModel.RNONE or params.wct == 0:
        return 0.0
    if params.wba <= 0:
        return math.inf
    return params.wct / (min_group_size * params.wba)


def _zero_n(params: PayoffParameters, model: RewardModel, n: int, margin: float,
            min_group_size: int = 1) -> _Candidate:
    """(0:n, model) at the smallest verification probability that makes honesty
    the unique equilibrium and keeps workers willing to take part."""
    bound = max(min_pv_0n(params, model, min_group_size).value,
                participation_pv(params, model, min_group_size))
    pv = _pv(bound, margin, f"(0:n, {model.value})")
    part = GroupPartition((min_group_size,) + (1,) * (n - min_group_size)) \
        if n > min_group_size else GroupPartition((n,))
    out = analyze_0n(params, model, pv, part)
    return _Candidate(model, params, pv, Prediction(out.p_wrong, out.u_master, out.u_worker[0]))


def _plan(c: _Candidate, n: int, rationale: str, tuned: dict[str, float],
          alternatives: tuple[Alternative, ...] = (), game: GameKind = GameKind.G0N,
          declared_pc: float = 0.0) -> MechanismPlan:
    return MechanismPlan(game, c.model, n, c.pv, c.params, c.predicted, rationale,
                         tuned, declared_pc, 1, alternatives)


def _alt(c: _Candidate, note: str, game: GameKind = GameKind.G0N) -> Alternative:
    s = c.params.wba if c.params.wba == c.params.mca else None
    return Alternative(game, c.model, c.pv, s, c.predicted, note)


# --- designers ---------------------------------------------------------------

def design_seti(params: PayoffParameters, margin: float = DEFAULT_MARGIN) -> MechanismPlan:
    """One worker, no reward unless verified, verification with probability margin."""
    _check(params, Scenario.SETI)
    if not 0.0 < margin <= 1.0:
        raise ConfigError("margin must lie in (0, 1]")
    c = _zero_n(params, RewardModel.RNONE, 1, margin)
    return _plan(c, 1, "seti: (0:n, rnone), n = 1, p_V = margin", {})


def reward_threshold_n(s: float, wct: float, wpc: float, n: int = 1) -> float:
    """MC_V above which reward-all beats reward-none (coupled reward s)."""
    if wpc <= 0:
        return math.inf
    return n * s * (s / wct - 1.0) * (s / wpc + 1.0)


def design_contractor_tunable_n(params: PayoffParameters, s: float | None = None,
                                margin: float = DEFAULT_MARGIN) -> MechanismPlan:
    s = _coupled_reward(params, s)
    _check(params, Scenario.CONTRACTOR, s)
    threshold = reward_threshold_n(s, params.wct, params.wpc)
    cands = {}
    for model in (RewardModel.RNONE, RewardModel.RA):
        try:
            cands[model] = _zero_n(params, model, 1, margin)
        except InfeasibleMechanism:
            pass
    model = RewardModel.RNONE if params.mcv < threshold else RewardModel.RA
    if model not in cands:
        raise InfeasibleMechanism(f"(0:n, {model.value}) needs p_V >= 1")
    others = tuple(_alt(c, "other branch") for m, c in cands.items() if m is not model)
    return _plan(cands[model], 1,
                 f"tunable n: n = 1, MC_V {'<' if model is RewardModel.RNONE else '>='} "
                 f"{threshold:.6g}", {"n": 1}, others)


def design_contractor_tunable_wpc(params: PayoffParameters, n: int = 1, s: float | None = None,
                                  margin: float = DEFAULT_MARGIN,
                                  wpc: float | None = None) -> MechanismPlan:
    """Reward-none while it is cheaper; otherwise reward-all with a punishment
    large enough that reward-all wins."""
    s = _coupled_reward(params, s)
    _check(params, Scenario.CONTRACTOR, s)
    if n < 1 or n % 2 == 0:
        raise ConfigError(f"n must be a positive odd integer, got {n}")
    base = n * s * (s / params.wct - 1.0)
    if params.mcv <= base:
        c = _zero_n(params, RewardModel.RNONE, n, margin)
        return _plan(c, n, f"tunable wpc: MC_V <= {base:.6g}, reward none", {})
    ratio = params.mcv / base
    wpc_min = s / (ratio - 1.0)
    if params.mcv < reward_threshold_n(s, params.wct, params.wpc, n):
        # current punishment too small for reward-all to win
        chosen = wpc if wpc is not None else 2.0 * wpc_min
    else:
        chosen = params.wpc if wpc is None else wpc
    if not chosen > wpc_min:
        raise InfeasibleMechanism(f"WP_C = {chosen} does not exceed the needed {wpc_min:.6g}")
    tuned_params = replace(params, wpc=chosen)
    c = _zero_n(tuned_params, RewardModel.RA, n, margin)
    alt = ()
    try:
        alt = (_alt(_zero_n(params, RewardModel.RNONE, n, margin), "reward none, WP_C untouched"),)
    except InfeasibleMechanism:
        pass
    return _plan(c, n, f"tunable wpc: MC_V > {base:.6g}, reward all with WP_C > {wpc_min:.6g}",
                 {"wpc": chosen}, alt)


def reward_none_s_bound(params: PayoffParameters, n: int) -> float:
    """Smallest S for which reward-none beats the best reward-all plan."""
    p = params
    denom = 2.0 * math.sqrt(n * p.mcv * p.wct) - n * (p.wpc + p.wct)
    if denom <= 0:
        raise InfeasibleMechanism(
            f"2 sqrt(n MC_V WC_T) - n (WP_C + WC_T) = {denom:.6g} is not positive")
    return p.wct * p.mcv / denom


def s_max_ra(params: PayoffParameters, n: int) -> float:
    """Reward that maximizes the master utility of (0:n, reward all)."""
    return math.sqrt(params.mcv * params.wct / n) - params.wpc


def _ra_at_smax(params: PayoffParameters, n: int, margin: float) -> _Candidate:
    s = min(max(s_max_ra(params, n), params.wct + margin), params.mbr - margin)
    if not params.wct < s < params.mbr:
        raise InfeasibleMechanism("no reward strictly between WC_T and MB_R")
    return _zero_n(params.with_reward(s), RewardModel.RA, n, margin)


def _one_v_one_rm(params: PayoffParameters, n: int, margin: float) -> tuple[_Candidate, float] | None:
    """(1:1^n, Rm) alternative when the master's punishment dominates verification."""
    p = params
    if p.mpw < 2 * p.mcv:
        return None
    hi = 2 * math.sqrt(p.mcv * p.wct / n) - (p.mbr + p.mpw) / (2 * n) - p.wpc
    s = p.wct + margin
    if not (s <= hi and s < p.mbr):
        return None
    sp = p.with_reward(s)
    rows = [r for r in classify_1v1n(sp, RewardModel.RM, n) if r.fully_mixed]
    if not rows:
        return None
    pw, um, uw = analyze_1v1n(rows[0], sp, n)
    lower = (p.mbr - p.mpw) / 2 - n * s
    cand = _Candidate(RewardModel.RM, sp, rows[0].pv.lo, Prediction(pw, um, uw))
    return cand, lower


def design_contractor_tunable_s(params: PayoffParameters, n: int = 1,
                                margin: float = DEFAULT_MARGIN, pwrong_ceiling: float = 0.0,
                                fallback_ra: bool = False) -> MechanismPlan:
    _check(params, Scenario.CONTRACTOR)
    if n < 1 or n % 2 == 0:
        raise ConfigError(f"n must be a positive odd integer, got {n}")
    p = params
    primary = None
    primary_error: Exception | None = None
    try:
        s_lo = reward_none_s_bound(p, n)
        floor = max(s_lo, p.wct)
        s = min(floor + margin, p.mbr - margin)
        if not s > floor:
            raise InfeasibleMechanism(f"empty reward interval ({floor:.6g}, {p.mbr:.6g})")
        primary = (_zero_n(p.with_reward(s), RewardModel.RNONE, n, margin),
                   GameKind.G0N, f"tunable s: S > {s_lo:.6g}, reward none")
    except (InfeasibleMechanism, DegenerateGame) as exc:
        primary_error = exc

    reported = []
    try:
        reported.append((_ra_at_smax(p, n, margin), GameKind.G0N,
                         "tunable s: reward all at its best S"))
    except (InfeasibleMechanism, DegenerateGame, EquilibriumNotGuaranteed):
        pass
    if primary is None:
        if not fallback_ra or not reported:
            raise InfeasibleMechanism(str(primary_error))
        primary, reported = reported[0], reported[1:]

    # only a positive P_wrong ceiling can admit the one-to-one alternative
    selectable = [primary]
    alt = _one_v_one_rm(p, n, margin)
    if alt is not None:
        cand, lower = alt
        entry = (cand, GameKind.G1V1N, f"tunable s: (1:1^n, rm), U_M >= {lower:.6g}")
        if cand.predicted.p_wrong <= pwrong_ceiling:
            selectable.append(entry)
        else:
            reported.append(entry)
    best = max(selectable, key=lambda c: c[0].predicted.u_master)
    alts = tuple(_alt(c, why, game) for c, game, why in selectable + reported if c is not best[0])
    cand, game, why = best
    declared = 0.0
    if game is GameKind.G1V1N:
        row = next(r for r in classify_1v1n(cand.params, RewardModel.RM, n) if r.fully_mixed)
        declared = row.pc.lo
    return _plan(cand, n, why, {"s": cand.params.wba}, alts, game, declared)


def design_contractor_fixed(params: PayoffParameters, n: int = 1, s: float | None = None,
                            margin: float = DEFAULT_MARGIN) -> MechanismPlan:
    """Nothing tunable: pick the cheaper of reward-none and reward-all."""
    s = _coupled_reward(params, s)
    _check(params, Scenario.CONTRACTOR, s)
    cands = []
    for model in (RewardModel.RNONE, RewardModel.RA):
        try:
            cands.append(_zero_n(params, model, n, margin))
        except InfeasibleMechanism:
            pass
    if not cands:
        raise InfeasibleMechanism("neither reward model reaches honesty with p_V < 1")
    best = max(cands, key=lambda c: c.predicted.u_master)
    alts = tuple(_alt(c, "other model") for c in cands if c is not best)
    return _plan(best, n, f"fixed payoffs: {best.model.value} is cheaper", {}, alts)


def design(config: Config, n: int = 1, pwrong_ceiling: float = 0.0,
           fallback_ra: bool = False) -> MechanismPlan:
    c = config.constraints
    if c.scenario is Scenario.SETI:
        return design_seti(config.params, c.margin)
    if c.scenario is not Scenario.CONTRACTOR:
        raise ConfigError("design needs a scenario (seti or contractor)")
    if c.tunable is Tunable.N:
        return design_contractor_tunable_n(config.params, c.s, c.margin)
    if c.tunable is Tunable.WPC:
        return design_contractor_tunable_wpc(config.params, n, c.s, c.margin)
    if c.tunable is Tunable.S:
        return design_contractor_tunable_s(config.params, n, c.margin, pwrong_ceiling, fallback_ra)
    return design_contractor_fixed(config.params, n, c.s, c.margin)


def replan(plan: MechanismPlan) -> Prediction:
    """Re-evaluate a plan's prediction through the analytical engine."""
    if plan.game is GameKind.G0N:
        out = analyze_0n(plan.params, plan.model, plan.pv,
                         GroupPartition((plan.n,)) if plan.n == plan.min_group_size
                         else GroupPartition((plan.min_group_size,)
                                             + (1,) * (plan.n - plan.min_group_size)))
        return Prediction(out.p_wrong, out.u_master, out.u_worker[0])
    if plan.game is GameKind.G1V1N:
        rows = [r for r in classify_1v1n(plan.params, plan.model, plan.n) if r.fully_mixed]
        return Prediction(*analyze_1v1n(rows[0], plan.params, plan.n))
    raise ValueError(f"no closed form for game {plan.game.value}")
