"""Brute-force equilibrium checks that share no code with the analytical engine.

Payoffs are re-derived here from the protocol rules, expected utilities come
from exhaustive enumeration of pure outcomes, and mixed equilibria are found
by an exact branch-and-bound over strategy boxes: every gain function is
multilinear in the other players' probabilities, so its extrema over a box sit
at the box corners.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .payoffs import (
    EQ_TOL,
    GameKind,
    GroupPartition,
    PayoffParameters,
    RewardModel,
    StrategyProfile,
)

INDIFF_TOL = 1e-7
MAX_PURE_GROUPS = 20
MAX_MIXED_GROUPS = 8
DEFAULT_GRID_STEP = 1.0 / 64
MIN_WIDTH = 1e-10
MAX_LIVE_BOXES = 4096
MAX_SEED_BOXES = 64
CONTINUUM_WIDTH = 1e-6
EDGE = 1e-8


class PartitionTooLarge(ValueError):
    pass


# --- payoff rules ------------------------------------------------------------

def outcome_payoffs(params: PayoffParameters, model: RewardModel, sizes: Sequence[int],
                    cheats: np.ndarray, verify: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Realized payoffs for a batch of pure outcomes.

    ``cheats`` is a boolean (m, groups) array and ``verify`` a boolean (m,)
    array. Returns the master payoff (m,) and group payoffs (m, groups).
    """
    p = params
    sizes_a = np.asarray(sizes, dtype=float)
    n = float(sizes_a.sum())
    cheats = np.asarray(cheats, dtype=bool)
    verify = np.asarray(verify, dtype=bool)
    cheaters = cheats.astype(float) @ sizes_a
    honest = n - cheaters
    maj_cheat = 2 * cheaters > n

    if model is RewardModel.RA:
        rewarded = np.ones_like(cheats)
    elif model is RewardModel.RNONE:
        rewarded = np.zeros_like(cheats)
    else:
        rewarded = cheats == maj_cheat[:, None]
    paid_workers = rewarded.astype(float) @ sizes_a

    m_ver = -p.mcv + np.where(honest > 0, p.mbr, 0.0) - p.mca * honest
    m_not = np.where(maj_cheat, -p.mpw, p.mbr) - p.mca * paid_workers
    master = np.where(verify, m_ver, m_not)

    g_ver = np.where(cheats, -p.wpc * sizes_a, p.wba * sizes_a - p.wct)
    g_not = np.where(rewarded, p.wba * sizes_a, 0.0) - np.where(cheats, 0.0, p.wct)
    groups = np.where(verify[:, None], g_ver, g_not)
    return master, groups


def _resolve(game: GameKind, partition: GroupPartition) -> tuple[GroupPartition, bool]:
    # n independent one-to-one games share the equilibria of a single one
    if game in (GameKind.G1V1, GameKind.G1V1N):
        return GroupPartition((1,)), True
    return partition, game.master_plays


class _Game:
    """Enumerated payoff tables over all (group actions, verify) outcomes."""

    def __init__(self, params: PayoffParameters, model: RewardModel, game: GameKind,
                 partition: GroupPartition, pv: float | None):
        self.partition, self.master_plays = _resolve(game, partition)
        self.groups = self.partition.groups
        if self.groups > MAX_MIXED_GROUPS:
            raise PartitionTooLarge(f"{self.groups} groups exceed the limit {MAX_MIXED_GROUPS}")
        if not self.master_plays and pv is None:
            raise ValueError("pv is required when the master is not a player")
        self.pv = pv
        self.players = self.groups + (1 if self.master_plays else 0)
        bits = self.groups + 1
        codes = np.arange(1 << bits)
        table = ((codes[:, None] >> np.arange(bits)) & 1).astype(bool)
        self.bits = table
        master, grp = outcome_payoffs(params, model, self.partition.sizes,
                                      table[:, :self.groups], table[:, self.groups])
        self.u = np.column_stack([grp, master])  # column k: payoff of actor k
        self.pairs = []
        for k in range(bits):
            one = codes[(codes >> k) & 1 == 1]
            self.pairs.append((one, self.u[one, k] - self.u[one ^ (1 << k), k]))

    def full(self, x: np.ndarray) -> np.ndarray:
        """Append the fixed verification probability when the master is not a player."""
        if self.master_plays:
            return x
        return np.column_stack([x, np.full(len(x), self.pv)])

    def gains(self, x: np.ndarray) -> np.ndarray:
        """Cheat-minus-honest (or verify-minus-not) gain of every player at each row of x."""
        x = self.full(np.atleast_2d(np.asarray(x, dtype=float)))
        out = np.empty((len(x), self.players))
        for k in range(self.players):
            one, diff = self.pairs[k]
            w = np.ones((len(x), len(one)))
            for j in range(self.groups + 1):
                if j == k:
                    continue
                b = self.bits[one, j]
                w *= np.where(b, x[:, j:j + 1], 1.0 - x[:, j:j + 1])
            out[:, k] = w @ diff
        return out

    def utilities(self, x: Sequence[float]) -> np.ndarray:
        """Expected payoff of every group followed by the master."""
        x = self.full(np.atleast_2d(np.asarray(x, dtype=float)))[0]
        w = np.prod(np.where(self.bits, x, 1.0 - x), axis=1)
        return w @ self.u


def expected_utilities(params: PayoffParameters, model: RewardModel, game: GameKind,
                       partition: GroupPartition, pcs: Sequence[float],
                       pv: float) -> tuple[float, tuple[float, ...]]:
    """Exact (master, per-group) expected utilities by enumerating every outcome."""
    g = _Game(params, model, game, partition, pv)
    x = list(pcs) + ([pv] if g.master_plays else [])
    u = g.utilities(x)
    return float(u[-1]), tuple(float(v) for v in u[:-1])


def majority_cheat_prob_enum(sizes: Sequence[int], pcs: Sequence[float]) -> float:
    """P(cheaters hold the majority) by summing over all subsets of groups."""
    if len(sizes) > MAX_PURE_GROUPS:
        raise PartitionTooLarge(f"{len(sizes)} groups exceed the limit {MAX_PURE_GROUPS}")
    n = sum(sizes)
    terms = []
    for mask in itertools.product((False, True), repeat=len(sizes)):
        if 2 * sum(s for s, c in zip(sizes, mask) if c) > n:
            terms.append(math.prod(p if c else 1.0 - p for p, c in zip(pcs, mask)))
    return math.fsum(terms)


def differentials_bruteforce(params: PayoffParameters, model: RewardModel,
                             group_size: int, pv: float) -> tuple[float, float, float]:
    """Cheat-minus-honest payoff of one group when cheaters win regardless, when
    the group decides the majority, and when honest workers win regardless.

    Each situation is built as a concrete instance around the group.
    """
    w = group_size
    situations = (
        ([w + 1], [True]),
        ([1], [True]) if w % 2 == 0 else ([], []),
        ([w + 1], [False]),
    )
    out = []
    for others, flags in situations:
        sizes = [w] + others
        rows = np.array([[True] + flags, [False] + flags])
        gain = 0.0
        for verify, weight in ((True, pv), (False, 1.0 - pv)):
            _, g = outcome_payoffs(params, model, sizes, rows, np.array([verify, verify]))
            gain += weight * (g[0, 0] - g[1, 0])
        out.append(float(gain))
    return out[0], out[1], out[2]


# --- equilibrium witnesses ---------------------------------------------------

@dataclass(frozen=True)
class EquilibriumWitness:
    profile: StrategyProfile
    kind: str  # pure, partially-mixed, fully-mixed
    residual: float
    extent: tuple[tuple[float, float], ...] = ()

    @property
    def continuum(self) -> bool:
        return any(hi - lo > CONTINUUM_WIDTH for lo, hi in self.extent)

    def to_dict(self) -> dict:
        return {
            "pc": list(self.profile.pc_per_group),
            "pv": self.profile.pv,
            "kind": self.kind,
            "residual": self.residual,
            "extent": [list(e) for e in self.extent],
        }


def _violation(gains: np.ndarray, x: np.ndarray, mixed: np.ndarray) -> np.ndarray:
    """Per-row worst violation of the equilibrium conditions."""
    at_one = x >= 1.0
    v = np.where(mixed, np.abs(gains), np.where(at_one, -gains, gains))
    return np.maximum(v, 0.0).max(axis=1)


def _profile(g: _Game, x: np.ndarray) -> StrategyProfile:
    x = np.clip(x, 0.0, 1.0)
    pcs = tuple(float(v) for v in x[:g.groups])
    pv = float(x[g.groups]) if g.master_plays else float(g.pv)
    return StrategyProfile(pcs, pv)


def enumerate_pure_equilibria(params: PayoffParameters, model: RewardModel, game: GameKind,
                              partition: GroupPartition, pv: float | None = None,
                              tol: float = INDIFF_TOL) -> list[EquilibriumWitness]:
    """Every pure profile with no profitable unilateral deviation."""
    part, master_plays = _resolve(game, partition)
    if part.groups > MAX_PURE_GROUPS:
        raise PartitionTooLarge(f"{part.groups} groups exceed the limit {MAX_PURE_GROUPS}")
    if not master_plays and pv is None:
        raise ValueError("pv is required when the master is not a player")
    ell = part.groups
    codes = np.arange(1 << ell)
    cheats = ((codes[:, None] >> np.arange(ell)) & 1).astype(bool)
    m = len(codes)

    def payoffs(ch: np.ndarray, ver: bool):
        return outcome_payoffs(params, model, part.sizes, ch, np.full(m, ver))

    if master_plays:
        candidates = []
        mv, gv = payoffs(cheats, True)
        mn, gn = payoffs(cheats, False)
        for verify, (mm, gg), (mo, _) in ((True, (mv, gv), (mn, gn)), (False, (mn, gn), (mv, gv))):
            ok = mm >= mo - tol
            for i in range(ell):
                flipped = cheats.copy()
                flipped[:, i] = ~flipped[:, i]
                _, alt = payoffs(flipped, verify)
                ok &= gg[:, i] >= alt[:, i] - tol
            candidates += [(c, 1.0 if verify else 0.0) for c in codes[ok]]
    else:
        def expected(ch: np.ndarray) -> np.ndarray:
            return pv * payoffs(ch, True)[1] + (1.0 - pv) * payoffs(ch, False)[1]
        base = expected(cheats)
        ok = np.ones(m, dtype=bool)
        for i in range(ell):
            flipped = cheats.copy()
            flipped[:, i] = ~flipped[:, i]
            ok &= base[:, i] >= expected(flipped)[:, i] - tol
        candidates = [(c, pv) for c in codes[ok]]

    out = []
    for code, v in sorted(candidates, key=lambda t: (t[0], t[1])):
        pcs = tuple(float(b) for b in cheats[code])
        out.append(EquilibriumWitness(StrategyProfile(pcs, float(v)), "pure", 0.0,
                                      tuple((x, x) for x in pcs + ((v,) if master_plays else ()))))
    return out


def _seed_cells(dims: int, grid_step: float) -> int:
    per = max(1, round(1.0 / grid_step))
    while per > 1 and per ** dims > MAX_SEED_BOXES:
        per //= 2
    return per


def _search_support(g: _Game, support: tuple[int, ...], grid_step: float,
                    tol: float) -> list[EquilibriumWitness]:
    """Equilibria where exactly the players listed as 2 in ``support`` mix."""
    mixed_idx = [k for k, s in enumerate(support) if s == 2]
    d = len(mixed_idx)
    base = np.array([float(s) if s != 2 else 0.0 for s in support])
    mixed_mask = np.array([s == 2 for s in support])
    per = _seed_cells(d, grid_step)
    edges = np.linspace(0.0, 1.0, per + 1)
    lows = np.array(list(itertools.product(edges[:-1], repeat=d)))
    width = 1.0 / per
    corner_offsets = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    accepted: list[tuple[np.ndarray, float]] = []
    zslack = 1e-12 * (1.0 + float(np.abs(g.u).max()))

    while len(lows):
        pts = (lows[:, None, :] + width * corner_offsets[None, :, :]).reshape(-1, d)
        x = np.repeat(base[None, :], len(pts), axis=0)
        x[:, mixed_idx] = pts
        gains = g.gains(x).reshape(len(lows), len(corner_offsets), g.players)
        lo_g, hi_g = gains.min(axis=1), gains.max(axis=1)
        at_one = base >= 1.0
        # a mixed player's gain must cross zero inside the box; a pure player
        # must weakly prefer its action somewhere in the box
        dead = np.where(mixed_mask, (lo_g > zslack) | (hi_g < -zslack),
                        np.where(at_one, hi_g < -tol, lo_g > tol)).any(axis=1)
        # boxes on which every condition holds identically are whole regions
        full = np.where(mixed_mask, (lo_g >= -zslack) & (hi_g <= zslack),
                        np.where(at_one, lo_g >= -tol, hi_g <= tol)).all(axis=1)
        for lo in lows[full & ~dead]:
            accepted.append((lo, width))
        live = lows[~full & ~dead]
        if not len(live):
            break
        if width <= MIN_WIDTH or len(live) > MAX_LIVE_BOXES // 2:
            accepted += [(lo, width) for lo in live]
            break
        width /= 2
        lows = (live[:, None, :] + width * corner_offsets[None, :, :]).reshape(-1, d)

    if not accepted:
        return []
    return _cluster(g, accepted, base, mixed_idx, mixed_mask, tol)


def _cluster(g: _Game, boxes: list[tuple[np.ndarray, float]], base: np.ndarray,
             mixed_idx: list[int], mixed_mask: np.ndarray, tol: float) -> list[EquilibriumWitness]:
    parent = list(range(len(boxes)))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    lo = np.array([b[0] for b in boxes])
    hi = lo + np.array([b[1] for b in boxes])[:, None]
    slack = 1e-12
    for a in range(len(boxes)):
        touch = np.all((lo[a + 1:] <= hi[a] + slack) & (hi[a + 1:] >= lo[a] - slack), axis=1)
        for b in np.nonzero(touch)[0] + a + 1:
            parent[find(a)] = find(int(b))

    groups: dict[int, list[int]] = {}
    for a in range(len(boxes)):
        groups.setdefault(find(a), []).append(a)

    witnesses = []
    for members in groups.values():
        centers = (lo[members] + hi[members]) / 2
        x = np.repeat(base[None, :], len(members), axis=0)
        x[:, mixed_idx] = centers
        viol = _violation(g.gains(x), x, mixed_mask)
        best = int(np.argmin(viol))
        if viol[best] > tol:
            continue
        box_lo, box_hi = lo[members].min(axis=0), hi[members].max(axis=0)
        if np.any(box_hi <= EDGE) or np.any(box_lo >= 1.0 - EDGE):
            continue  # collapses onto a pure strategy, counted by enumeration
        extent = []
        j = 0
        for k in range(g.players):
            if mixed_mask[k]:
                extent.append((float(box_lo[j]), float(box_hi[j])))
                j += 1
            else:
                extent.append((float(base[k]), float(base[k])))
        kind = "fully-mixed" if mixed_mask.all() else "partially-mixed"
        witnesses.append(EquilibriumWitness(_profile(g, x[best]), kind, float(viol[best]),
                                            tuple(extent)))
    return witnesses


def search_mixed_equilibria(params: PayoffParameters, model: RewardModel, game: GameKind,
                            partition: GroupPartition, grid_step: float = DEFAULT_GRID_STEP,
                            pv: float | None = None,
                            tol: float = INDIFF_TOL) -> list[EquilibriumWitness]:
    """Equilibria in which at least one player strictly mixes."""
    if not 0.0 < grid_step <= 0.5:
        raise ValueError("grid_step must lie in (0, 1/2]")
    g = _Game(params, model, game, partition, pv)
    out = []
    for support in itertools.product((0, 1, 2), repeat=g.players):
        if 2 in support:
            out += _search_support(g, support, grid_step, tol)
    return out


def all_equilibria(params: PayoffParameters, model: RewardModel, game: GameKind,
                   partition: GroupPartition, pv: float | None = None,
                   grid_step: float = DEFAULT_GRID_STEP) -> list[EquilibriumWitness]:
    return (enumerate_pure_equilibria(params, model, game, partition, pv)
            + search_mixed_equilibria(params, model, game, partition, grid_step, pv))


def profile_residual(params: PayoffParameters, model: RewardModel, game: GameKind,
                     partition: GroupPartition, profile: StrategyProfile) -> float:
    """Largest equilibrium-condition violation of a profile (0 means equilibrium)."""
    g = _Game(params, model, game, partition, profile.pv)
    if g.groups != len(profile.pc_per_group):
        raise ValueError("profile does not match the partition")
    x = list(profile.pc_per_group) + ([profile.pv] if g.master_plays else [])
    x = np.array([x])
    mixed = (x > 0) & (x < 1)
    return float(_violation(g.gains(x), x, mixed)[0])


# --- harnesses ---------------------------------------------------------------

@dataclass(frozen=True)
class Lemma1Verdict:
    hypothesis: bool
    consistent: bool
    pure: int
    mixed: tuple[EquilibriumWitness, ...] = ()
    note: str = ""


def lemma1_check(params: PayoffParameters, model: RewardModel, partition: GroupPartition,
                 pv: float, grid_step: float = DEFAULT_GRID_STEP) -> Lemma1Verdict:
    """Look for a counterexample to: ordered differentials admit no unique
    equilibrium in which some group mixes (game 0:n at fixed pv).

    Once two pure equilibria exist no equilibrium is unique, so the mixed
    search is skipped in that case.
    """
    hypothesis = True
    for size in set(partition.sizes):
        dc, dx, dh = differentials_bruteforce(params, model, size, pv)
        if not (dc >= dx - EQ_TOL and dx >= dh - EQ_TOL):
            hypothesis = False
    pure = enumerate_pure_equilibria(params, model, GameKind.G0N, partition, pv)
    if len(pure) >= 2:
        return Lemma1Verdict(hypothesis, True, len(pure), (), "several pure equilibria")
    mixed = tuple(search_mixed_equilibria(params, model, GameKind.G0N, partition, grid_step, pv))
    unique_mixed = not pure and len(mixed) == 1 and not mixed[0].continuum
    consistent = not (hypothesis and unique_mixed)
    return Lemma1Verdict(hypothesis, consistent, len(pure), mixed)


@dataclass(frozen=True)
class UniquenessVerdict:
    unique: bool
    declared_is_equilibrium: bool
    residual: float
    equilibria: tuple[EquilibriumWitness, ...] = ()
    counterexample: EquilibriumWitness | None = None

    def to_dict(self) -> dict:
        return {
            "unique": self.unique,
            "declared_is_equilibrium": self.declared_is_equilibrium,
            "residual": self.residual,
            "equilibria": [w.to_dict() for w in self.equilibria],
            "counterexample": self.counterexample.to_dict() if self.counterexample else None,
        }


def _matches(w: EquilibriumWitness, pcs: Sequence[float], pv: float | None, tol: float) -> bool:
    if w.continuum:
        return False
    if any(abs(a - b) > tol for a, b in zip(w.profile.pc_per_group, pcs)):
        return False
    return pv is None or abs(w.profile.pv - pv) <= tol


def verify_unique(certificate, partition: GroupPartition,
                  grid_step: float = DEFAULT_GRID_STEP, tol: float = 1e-6) -> UniquenessVerdict:
    """True iff the certificate's declared strategy is the only equilibrium on
    this partition. ``certificate`` needs params, model, game, pv and
    declared_pc (one cheating probability applied to every group)."""
    params, model, game = certificate.params, certificate.model, certificate.game
    part, master_plays = _resolve(game, partition)
    pcs = [certificate.declared_pc] * part.groups
    declared_pv = certificate.pv if master_plays else None
    residual = profile_residual(params, model, game, part,
                                StrategyProfile(tuple(pcs), certificate.pv))
    eqs = tuple(all_equilibria(params, model, game, part,
                               None if master_plays else certificate.pv, grid_step))
    is_eq = residual <= INDIFF_TOL
    others = [w for w in eqs if not _matches(w, pcs, declared_pv, tol)]
    unique = is_eq and not others and len(eqs) == 1
    return UniquenessVerdict(unique, is_eq, residual, eqs, others[0] if others else None)


@dataclass(frozen=True)
class PartitionSweep:
    results: dict[str, UniquenessVerdict] = field(default_factory=dict)

    @property
    def all_unique(self) -> bool:
        return all(v.unique for v in self.results.values())


def partitions_up_to(n: int, max_groups: int) -> list[GroupPartition]:
    """Every multiset of at most ``max_groups`` positive sizes summing to n."""
    out = []

    def rec(rest: int, cap: int, acc: list[int]) -> None:
        if rest == 0:
            out.append(GroupPartition(tuple(acc)))
            return
        if len(acc) == max_groups:
            return
        for s in range(min(rest, cap), 0, -1):
            rec(rest - s, s, acc + [s])

    rec(n, n, [])
    return out


def verify_partitions(certificate, partitions: Sequence[GroupPartition]) -> PartitionSweep:
    return PartitionSweep({str(p): verify_unique(certificate, p) for p in partitions})
