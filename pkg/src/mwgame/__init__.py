"""Equilibria, mechanism design and simulation for master-worker computing games."""

from __future__ import annotations

__version__ = "0.1.0"

from .payoffs import (  # noqa: E402
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
    StrategyProfile,
    Tunable,
    ValidationReport,
    load_config,
    validate,
)
from .majority import (  # noqa: E402
    MajorityQuery,
    claim1_monotonicity,
    majority_cheat_prob,
    majority_cheat_prob_iid,
)

__all__ = [
    "Config", "ConfigError", "DEFAULT_MARGIN", "EQ_TOL", "GameKind", "GroupPartition",
    "InfeasibleMechanism", "MajorityQuery", "PayoffParameters", "RewardModel", "Scenario",
    "ScenarioConstraints", "StrategyProfile", "Tunable", "ValidationReport",
    "claim1_monotonicity", "load_config", "majority_cheat_prob", "majority_cheat_prob_iid",
    "validate",
]
