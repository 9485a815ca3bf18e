"""Command-line front end: analyze, design, simulate, verify, majority, sweep."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .games import DegenerateGame, EquilibriumNotGuaranteed, game_rows
from .majority import MajorityQuery, majority_cheat_prob
from .mechanism import Certificate, MechanismPlan, design, emit_certificate
from .oracle import PartitionTooLarge, verify_partitions
from .payoffs import (
    Config,
    ConfigError,
    GameKind,
    GroupPartition,
    InfeasibleMechanism,
    RewardModel,
    Scenario,
    StrategyProfile,
    Tunable,
    load_config,
)
from .simulator import SimConfig, run_protocol

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_VERIFY = 4

SWEEP_PARAMS = ("mcv", "mpw", "wpc", "wct", "wba", "mca", "n", "pv", "pc")
CSV_COLUMNS = ("value", "game", "model", "pv", "p_wrong", "u_master", "p_c")

log = logging.getLogger("mwgame")


class VerificationFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class RunRecord:
    subcommand: str
    config: dict[str, Any]
    results: Any
    version: str = __version__
    timestamp: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def append_records(path: str | None, records: Sequence[RunRecord]) -> None:
    if not path:
        return
    with open(path, "a", encoding="utf-8") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def read_records(path: str | Path) -> list[dict[str, Any]]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def _load_json_or_record(path: str, key: str) -> dict[str, Any]:
    """A bare JSON object, or the last record in a records file carrying ``key``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = None
    if isinstance(data, dict):
        results = data.get("results")
        if isinstance(results, dict) and key in results:
            return results[key]
        if "results" not in data:
            return data
    for line in reversed(text.splitlines()):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is neither JSON nor a records file") from exc
        results = rec.get("results")
        if isinstance(results, dict) and key in results:
            return results[key]
    raise ConfigError(f"no {key} found in {path}")


def _fmt(x: Any) -> str:
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def _stamp(args: argparse.Namespace) -> str | None:
    return datetime.now(timezone.utc).isoformat() if args.stamp else None


def _config(args: argparse.Namespace) -> Config:
    if not args.config:
        raise ConfigError("--config is required")
    return load_config(args.config)


# --- subcommands -------------------------------------------------------------

def cmd_analyze(args: argparse.Namespace) -> list[RunRecord]:
    cfg = _config(args)
    game, model = GameKind(args.game), RewardModel(args.model)
    partition = GroupPartition.parse(args.groups) if args.groups else cfg.partition
    if game is GameKind.G0N and args.pv is None:
        raise ConfigError("game 0n needs --pv")
    rows = game_rows(cfg.params, model, game, args.n, args.pv, partition)
    for r in rows:
        print("  ".join(f"{k}={_fmt(v) if not isinstance(v, dict) else _interval(v)}"
                        for k, v in r.items() if k != "conditions"))
    echo = cfg.to_dict() | {"game": game.value, "model": model.value, "n": args.n,
                            "pv": args.pv, "groups": str(partition) if partition else None}
    return [RunRecord("analyze", echo, {"row": r}, timestamp=_stamp(args)) for r in rows]


def _interval(d: dict) -> str:
    if d["lo"] == d["hi"]:
        return repr(d["lo"])
    return f"{'(' if d['lo_open'] else '['}{d['lo']!r},{d['hi']!r}{')' if d['hi_open'] else ']'}"


def _design_config(args: argparse.Namespace) -> Config:
    cfg = _config(args)
    c = cfg.constraints
    if args.scenario:
        c = replace(c, scenario=Scenario(args.scenario))
    if args.tunable:
        c = replace(c, tunable=Tunable(args.tunable))
    return replace(cfg, constraints=c)


def cmd_design(args: argparse.Namespace) -> list[RunRecord]:
    cfg = _design_config(args)
    plan = design(cfg, args.n, args.pwrong_ceiling, args.fallback_ra)
    cert = emit_certificate(plan)
    print(f"game={plan.game.value} model={plan.model.value} n={plan.n} pv={plan.pv!r}")
    print(f"predicted P_wrong={plan.predicted.p_wrong!r} U_M={plan.predicted.u_master!r} "
          f"U_W={plan.predicted.u_worker!r}")
    print(f"tuned={json.dumps(plan.tuned)} ({plan.rationale})")
    if args.out:
        Path(args.out).write_text(json.dumps(plan.to_dict(), sort_keys=True) + "\n")
    if args.certificate:
        cert.save(args.certificate)
    echo = cfg.to_dict() | {"n": args.n, "pwrong_ceiling": args.pwrong_ceiling,
                            "fallback_ra": args.fallback_ra}
    return [RunRecord("design", echo, {"plan": plan.to_dict(), "certificate": cert.to_dict()},
                      timestamp=_stamp(args))]


def cmd_simulate(args: argparse.Namespace) -> list[RunRecord]:
    plan = MechanismPlan.from_dict(_load_json_or_record(args.plan, "plan"))
    partition = GroupPartition.parse(args.groups) if args.groups \
        else GroupPartition.singletons(plan.n)
    pcs = _floats(args.pc) if args.pc else (plan.declared_pc,) * partition.groups
    if len(pcs) == 1 and partition.groups > 1:
        pcs = pcs * partition.groups
    pv = plan.pv if args.pv is None else args.pv
    deviation = None
    if args.deviate:
        i, _, x = args.deviate.partition(":")
        deviation = (int(i), float(x))
    try:
        sim = SimConfig(plan, partition, StrategyProfile(pcs, pv), args.trials, args.seed,
                        deviation, args.chunk_size, args.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = run_protocol(sim)
    print(report.summary())
    return [RunRecord("simulate", sim.to_dict(), {"report": report.to_dict()},
                      timestamp=_stamp(args))]


def cmd_verify(args: argparse.Namespace) -> list[RunRecord]:
    cert = Certificate.from_dict(_load_json_or_record(args.certificate, "certificate"))
    parts = [GroupPartition.parse(t) for t in args.partitions.split("|") if t.strip()]
    sweep = verify_partitions(cert, parts)
    for name, verdict in sweep.results.items():
        status = "unique" if verdict.unique else "NOT unique"
        extra = ""
        if verdict.counterexample is not None:
            w = verdict.counterexample
            extra = f" counterexample pc={list(w.profile.pc_per_group)} pv={w.profile.pv!r}"
        elif not verdict.declared_is_equilibrium:
            extra = f" declared strategy violates equilibrium by {verdict.residual!r}"
        print(f"{{{name}}}: {status}{extra}")
    rec = RunRecord("verify", {"certificate": cert.to_dict(), "partitions": args.partitions},
                    {"all_unique": sweep.all_unique,
                     "verdicts": {k: v.to_dict() for k, v in sweep.results.items()}},
                    timestamp=_stamp(args))
    if not sweep.all_unique:
        raise VerificationFailed("uniqueness check failed", [rec])
    return [rec]


def cmd_majority(args: argparse.Namespace) -> list[RunRecord]:
    partition = None
    if args.groups:
        partition = GroupPartition.parse(args.groups)
    elif args.config:
        partition = load_config(args.config).partition
    if partition is None:
        raise ConfigError("give --groups or a config with group_sizes")
    pcs = _floats(args.pc)
    if len(pcs) == 1:
        pcs = pcs * partition.groups
    try:
        q = MajorityQuery(partition, pcs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    value = majority_cheat_prob(q)
    print(f"P_C = {value!r}")
    return [RunRecord("majority", {"groups": str(partition), "pc": list(pcs)},
                      {"p_c": value}, timestamp=_stamp(args))]


def _grid(param: str, lo: float, hi: float, steps: int) -> list[float]:
    if steps < 1 or not hi >= lo:
        raise ConfigError("sweep needs --steps >= 1 and --to >= --from")
    if param == "n":
        return [float(k) for k in range(int(np.ceil(lo)), int(np.floor(hi)) + 1) if k % 2 == 1]
    return [float(x) for x in np.linspace(lo, hi, steps)]


def _sweep_point(args: argparse.Namespace, cfg: Config, param: str,
                 value: float) -> dict[str, Any]:
    if param == "pc":
        partition = cfg.partition or GroupPartition.singletons(args.n)
        pc = majority_cheat_prob(MajorityQuery(partition, (value,) * partition.groups))
        return {"value": value, "game": None, "model": None, "pv": None,
                "p_wrong": None, "u_master": None, "p_c": pc}
    if param == "pv":
        game, model = GameKind(args.game or "0n"), RewardModel(args.model or "rnone")
        partition = cfg.partition or GroupPartition.singletons(args.n)
        row = game_rows(cfg.params, model, game, args.n, value, partition)[0]
        return {"value": value, "game": game.value, "model": model.value, "pv": value,
                "p_wrong": row.get("p_wrong"), "u_master": row.get("u_master")}
    n = args.n
    point = cfg
    if param == "n":
        n = int(value)
    else:
        params = replace(cfg.params, **{param: value})
        c = cfg.constraints
        if param in ("wba", "mca") and c.s is not None:
            params = params.with_reward(value)
            c = replace(c, s=value)
        point = replace(cfg, params=params, constraints=c)
    plan = design(point, n, args.pwrong_ceiling, args.fallback_ra)
    return {"value": value, "game": plan.game.value, "model": plan.model.value, "pv": plan.pv,
            "p_wrong": plan.predicted.p_wrong, "u_master": plan.predicted.u_master,
            "plan": plan.to_dict()}


def cmd_sweep(args: argparse.Namespace) -> list[RunRecord]:
    cfg = _design_config(args)
    param = args.param
    records, rows = [], []
    for value in _grid(param, args.start, args.stop, args.steps):
        try:
            point = _sweep_point(args, cfg, param, value)
        except (InfeasibleMechanism, EquilibriumNotGuaranteed, DegenerateGame, ConfigError) as exc:
            point = {"value": value, "game": None, "model": None, "pv": None,
                     "p_wrong": None, "u_master": None, "error": str(exc)}
        rows.append(point)
        records.append(RunRecord("sweep", cfg.to_dict() | {"param": param, "n": args.n},
                                 point, timestamp=_stamp(args)))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in CSV_COLUMNS])
    if args.csv:
        Path(args.csv).write_text(buf.getvalue(), newline="")
    else:
        sys.stdout.write(buf.getvalue())
    return records


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mwgame", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--records", help="append JSON-lines run records to this file")
        p.add_argument("--stamp", action="store_true", help="add a wall-clock timestamp to records")

    def designer(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config")
        p.add_argument("--scenario", choices=[s.value for s in Scenario])
        p.add_argument("--tunable", choices=[t.value for t in Tunable])
        p.add_argument("--n", type=int, default=1)
        p.add_argument("--pwrong-ceiling", type=float, default=0.0)
        p.add_argument("--fallback-ra", action="store_true",
                       help="use reward-all at its best S when the reward-none interval is empty")

    p = sub.add_parser("analyze", help="equilibrium rows of one game")
    p.add_argument("--game", required=True, choices=[g.value for g in GameKind])
    p.add_argument("--model", required=True, choices=[m.value for m in RewardModel])
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--config")
    p.add_argument("--pv", type=float)
    p.add_argument("--groups")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("design", help="choose a mechanism for a scenario")
    designer(p)
    p.add_argument("--out", help="write the plan as JSON")
    p.add_argument("--certificate", help="write the certificate as JSON")
    common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="Monte Carlo run of a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--groups")
    p.add_argument("--pc")
    p.add_argument("--pv", type=float)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--deviate", help="GROUP:PC forced strategy for one group")
    p.add_argument("--chunk-size", type=int, default=1 << 16)
    p.add_argument("--workers", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check a certificate's uniqueness claim")
    p.add_argument("--certificate", required=True)
    p.add_argument("--partitions", default="1")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("majority", help="probability that cheaters hold the majority")
    p.add_argument("--groups")
    p.add_argument("--pc", required=True)
    p.add_argument("--config")
    common(p)
    p.set_defaults(func=cmd_majority)

    p = sub.add_parser("sweep", help="design or analyze over a parameter grid")
    designer(p)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--game", choices=[g.value for g in GameKind])
    p.add_argument("--model", choices=[m.value for m in RewardModel])
    p.add_argument("--csv")
    common(p)
    p.set_defaults(func=cmd_sweep)
    return ap


def _setup_logging() -> None:
    level = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("UC_LOG", "quiet").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def run(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    log.debug("arguments: %s", vars(args))
    try:
        records = args.func(args)
    except VerificationFailed as exc:
        append_records(args.records, exc.args[1])
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_VERIFY
    except (InfeasibleMechanism, EquilibriumNotGuaranteed) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, DegenerateGame, PartitionTooLarge, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    append_records(args.records, records)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
