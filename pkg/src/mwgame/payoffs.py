"""Payoff constants, game/reward enumerations and scenario validation.

Every other module consumes the immutable value types defined here. Payoffs
are in one abstract utility unit; probabilities and payoffs are plain floats.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any

EQ_TOL = 1e-9
DEFAULT_MARGIN = 1e-3

PAYOFF_KEYS = ("wpc", "wct", "wba", "mpw", "mca", "mcv", "mbr")


class ConfigError(ValueError):
    """Malformed or inadmissible configuration."""


class InfeasibleMechanism(RuntimeError):
    """No mechanism satisfies the requested design constraints."""


class RewardModel(str, Enum):
    RM = "rm"
    RA = "ra"
    RNONE = "rnone"


class GameKind(str, Enum):
    G1V1 = "1v1"
    G1V1N = "1v1n"
    G0N = "0n"
    G1N = "1n"

    @property
    def master_plays(self) -> bool:
        return self in (GameKind.G1V1, GameKind.G1N)


class Scenario(str, Enum):
    SETI = "seti"
    CONTRACTOR = "contractor"


class Tunable(str, Enum):
    NONE = "none"
    N = "n"
    WPC = "wpc"
    S = "s"


@dataclass(frozen=True)
class PayoffParameters:
    """The seven non-negative payoff constants.

    wpc: worker punishment when caught cheating (per worker)
    wct: cost of computing the task (once per group)
    wba: worker benefit when its answer is accepted/rewarded (per worker)
    mpw: master punishment for accepting a wrong answer
    mca: master cost per rewarded worker
    mcv: master cost of verifying
    mbr: master benefit for obtaining the right answer
    """

    wpc: float = 0.0
    wct: float = 0.0
    wba: float = 0.0
    mpw: float = 0.0
    mca: float = 0.0
    mcv: float = 0.0
    mbr: float = 0.0

    def __post_init__(self) -> None:
        for key in PAYOFF_KEYS:
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ConfigError(f"{key} must be finite, got {value!r}")
            if value < 0:
                raise ConfigError(f"{key} must be non-negative, got {value!r}")
            object.__setattr__(self, key, float(value))

    def with_reward(self, s: float) -> PayoffParameters:
        """Couple worker benefit and master reward cost to one amount."""
        return replace(self, wba=s, mca=s)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PayoffParameters:
        return cls(**{k: data[k] for k in PAYOFF_KEYS if k in data})


@dataclass(frozen=True)
class GroupPartition:
    """Sizes of the colluding groups; the total worker count must be odd."""

    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        sizes = tuple(self.sizes)
        if not sizes:
            raise ConfigError("a partition needs at least one group")
        for s in sizes:
            if isinstance(s, bool) or not isinstance(s, int) or s < 1:
                raise ConfigError(f"group sizes must be positive integers, got {s!r}")
        if sum(sizes) % 2 == 0:
            raise ConfigError(f"total number of workers must be odd, got {sum(sizes)}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def groups(self) -> int:
        return len(self.sizes)

    @property
    def min_size(self) -> int:
        return min(self.sizes)

    @classmethod
    def singletons(cls, n: int) -> GroupPartition:
        return cls((1,) * n)

    @classmethod
    def parse(cls, text: str) -> GroupPartition:
        try:
            return cls(tuple(int(tok) for tok in text.split(",") if tok.strip()))
        except ValueError as exc:
            raise ConfigError(f"bad group list {text!r}: {exc}") from exc

    def __str__(self) -> str:
        return ",".join(str(s) for s in self.sizes)


def _check_probability(name: str, p: float) -> float:
    if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
        raise ConfigError(f"{name} must be a probability in [0, 1], got {p!r}")
    return float(p)


@dataclass(frozen=True)
class StrategyProfile:
    """Cheating probability per group plus the master's verification probability."""

    pc_per_group: tuple[float, ...]
    pv: float

    def __post_init__(self) -> None:
        pcs = tuple(_check_probability("p_C", p) for p in self.pc_per_group)
        object.__setattr__(self, "pc_per_group", pcs)
        object.__setattr__(self, "pv", _check_probability("p_V", self.pv))

    @classmethod
    def uniform(cls, groups: int, pc: float, pv: float) -> StrategyProfile:
        return cls((pc,) * groups, pv)


@dataclass(frozen=True)
class ScenarioConstraints:
    scenario: Scenario | None = None
    tunable: Tunable = Tunable.NONE
    s: float | None = None
    margin: float = DEFAULT_MARGIN

    def __post_init__(self) -> None:
        if not (self.margin > 0 and math.isfinite(self.margin)):
            raise ConfigError(f"margin must be a positive finite number, got {self.margin!r}")
        if self.s is not None and not (math.isfinite(self.s) and self.s > 0):
            raise ConfigError(f"s must be positive, got {self.s!r}")


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_invalid(self) -> None:
        if self.violations:
            raise ConfigError("; ".join(self.violations))


def _eq(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol


def validate(params: PayoffParameters, constraints: ScenarioConstraints,
             tol: float = EQ_TOL) -> ValidationReport:
    """List every constraint the instance violates for its scenario."""
    p = params
    out: list[str] = []
    if p.wba + p.wpc <= tol:
        out.append("WB_A + WP_C must be positive")
    if p.mca + p.mpw <= tol:
        out.append("MC_A + MP_W must be positive")

    if constraints.scenario is Scenario.SETI:
        if not p.wba > 0:
            out.append("WB_A > 0 required")
        if not _eq(p.wct, 0.0, tol):
            out.append("WC_T must be 0")
        if not p.mbr > p.mca:
            out.append("MB_R > MC_A required")
        if not p.mpw > p.mcv:
            out.append("MP_W > MC_V required")
        if not p.mcv > 0:
            out.append("MC_V > 0 required")
    elif constraints.scenario is Scenario.CONTRACTOR:
        if not p.wct > tol:
            out.append("WC_T > 0 required")
        if not p.mbr > p.mca:
            out.append("MB_R > MC_A required")
        if not p.mpw > p.mcv:
            out.append("MP_W > MC_V required")
        if not p.mcv > 0:
            out.append("MC_V > 0 required")
        s = constraints.s
        if s is not None:
            if not (_eq(p.wba, s, tol) and _eq(p.mca, s, tol)):
                out.append("WB_A = MC_A = S required")
            if not p.wct < s:
                out.append("WC_T < S required")
            if not s < p.mbr:
                out.append("S < MB_R required")
    return ValidationReport(tuple(out))


@dataclass(frozen=True)
class Config:
    params: PayoffParameters
    constraints: ScenarioConstraints = field(default_factory=ScenarioConstraints)
    partition: GroupPartition | None = None

    def to_dict(self) -> dict[str, Any]:
        c = self.constraints
        d: dict[str, Any] = self.params.to_dict()
        d["scenario"] = c.scenario.value if c.scenario else None
        d["tunable"] = c.tunable.value
        d["s"] = c.s
        d["margin"] = c.margin
        d["group_sizes"] = list(self.partition.sizes) if self.partition else None
        return d


CONFIG_KEYS = frozenset(PAYOFF_KEYS) | {"scenario", "tunable", "s", "margin", "group_sizes"}


def config_from_dict(data: dict[str, Any]) -> Config:
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    payoff = {k: data[k] for k in PAYOFF_KEYS if k in data}
    s = data.get("s")
    if s is not None:
        payoff.setdefault("wba", s)
        payoff.setdefault("mca", s)
    try:
        scenario = Scenario(data["scenario"]) if data.get("scenario") else None
        tunable = Tunable(data.get("tunable") or "none")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    constraints = ScenarioConstraints(
        scenario=scenario, tunable=tunable, s=s,
        margin=data.get("margin", DEFAULT_MARGIN),
    )
    sizes = data.get("group_sizes")
    partition = GroupPartition(tuple(sizes)) if sizes else None
    return Config(PayoffParameters(**payoff), constraints, partition)


def load_config(path: str | Path) -> Config:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(data)
