"""Analytical equilibria of the four master-worker games.

Game 1:1 is solved as a generic 2x2 bimatrix game. Game 1:1^n rows follow the
closed-form case analysis for the Rm/Ra and R-none reward models. Game 0:n is
handled through the per-group payoff differentials, and game 1:n through the
master's indifference conditions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .majority import cheater_count_distribution, majority_cheat_prob_iid
from .payoffs import EQ_TOL, GameKind, GroupPartition, PayoffParameters, RewardModel


class DegenerateGame(ValueError):
    """A closed form would divide by a vanishing quantity."""

    def __init__(self, quantity: str):
        super().__init__(f"degenerate game: {quantity} vanishes")
        self.quantity = quantity


class EquilibriumNotGuaranteed(ValueError):
    """Verification probability too low for the all-honest equilibrium to be unique."""


@dataclass(frozen=True)
class Interval:
    """A (possibly degenerate) sub-interval of [0, 1] with explicit open ends."""

    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False

    @classmethod
    def point(cls, x: float) -> Interval:
        return cls(x, x)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def empty(self) -> bool:
        if self.lo > self.hi:
            return True
        return self.lo == self.hi and (self.lo_open or self.hi_open)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        lo_ok = x > self.lo - tol if self.lo_open else x >= self.lo - tol
        hi_ok = x < self.hi + tol if self.hi_open else x <= self.hi + tol
        return lo_ok and hi_ok

    def close(self, other: Interval, tol: float) -> bool:
        return abs(self.lo - other.lo) <= tol and abs(self.hi - other.hi) <= tol

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "lo_open": self.lo_open, "hi_open": self.hi_open}

    def __str__(self) -> str:
        if self.is_point:
            return f"{self.lo:.6g}"
        return f"{'(' if self.lo_open else '['}{self.lo:.6g}, {self.hi:.6g}{')' if self.hi_open else ']'}"


OPEN_UNIT = Interval(0.0, 1.0, True, True)
HALF_OPEN_UNIT = Interval(0.0, 1.0, False, True)


def _restrict(domain: Interval, a: float, b: float, sense: str, tol: float) -> Interval | None:
    """Subset of ``domain`` where a + b*x <= 0 (sense "le") or >= 0 ("ge")."""
    if sense == "ge":
        a, b = -a, -b
    if abs(b) <= tol:
        return domain if a <= tol else None
    root = -a / b
    if b > 0:  # x <= root
        if root < domain.hi:
            out = Interval(domain.lo, root, domain.lo_open, False)
        else:
            out = domain
    else:  # x >= root
        if root > domain.lo:
            out = Interval(root, domain.hi, False, domain.hi_open)
        else:
            out = domain
    return None if out.empty else out


@dataclass(frozen=True)
class PayoffMatrix1v1:
    """Master and worker payoffs indexed by (worker action, master action).

    c/h: worker cheats/is honest; v/n: master verifies/does not verify.
    """

    m_cv: float
    m_hv: float
    m_cn: float
    m_hn: float
    w_cv: float
    w_hv: float
    w_cn: float
    w_hn: float

    def master_gain(self, pc: float) -> float:
        """Master's utility from verifying minus not verifying."""
        return pc * (self.m_cv - self.m_cn) + (1 - pc) * (self.m_hv - self.m_hn)

    def worker_gain(self, pv: float) -> float:
        """Worker's utility from cheating minus being honest."""
        return pv * (self.w_cv - self.w_hv) + (1 - pv) * (self.w_cn - self.w_hn)

    def utilities(self, pc: float, pv: float) -> tuple[float, float]:
        um = (pc * pv * self.m_cv + (1 - pc) * pv * self.m_hv
              + pc * (1 - pv) * self.m_cn + (1 - pc) * (1 - pv) * self.m_hn)
        uw = (pc * pv * self.w_cv + pc * (1 - pv) * self.w_cn
              + (1 - pc) * pv * self.w_hv + (1 - pc) * (1 - pv) * self.w_hn)
        return um, uw


def payoff_matrix_1v1(params: PayoffParameters, model: RewardModel) -> PayoffMatrix1v1:
    p = params
    paid = model is not RewardModel.RNONE  # one worker is always the majority
    return PayoffMatrix1v1(
        m_cv=-p.mcv,
        m_hv=p.mbr - p.mcv - p.mca,
        m_cn=-p.mpw - (p.mca if paid else 0.0),
        m_hn=p.mbr - (p.mca if paid else 0.0),
        w_cv=-p.wpc,
        w_hv=p.wba - p.wct,
        w_cn=p.wba if paid else 0.0,
        w_hn=p.wba - p.wct if paid else -p.wct,
    )


@dataclass(frozen=True)
class EquilibriumRow:
    pc: Interval
    pv: Interval
    conditions: tuple[str, ...]
    p_wrong: float
    u_master: float
    u_worker: float
    source: str
    model: RewardModel | None = None
    all_cheat: bool = False

    @property
    def fully_mixed(self) -> bool:
        return self.source.endswith("fully-mixed")

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "model": self.model.value if self.model else None,
            "pc": self.pc.to_dict(),
            "pv": self.pv.to_dict(),
            "conditions": list(self.conditions),
            "p_wrong": self.p_wrong,
            "u_master": self.u_master,
            "u_worker": self.u_worker,
            "all_cheat": self.all_cheat,
        }


def _generic_row(matrix: PayoffMatrix1v1, pc: Interval, pv: Interval,
                 conditions: Sequence[str], tag: str) -> EquilibriumRow:
    x, y = pc.midpoint, pv.midpoint
    um, uw = matrix.utilities(x, y)
    return EquilibriumRow(pc, pv, tuple(conditions), (1 - y) * x, um, uw,
                          f"2x2-{tag}", all_cheat=pc == Interval.point(1.0))


def solve_1v1(matrix: PayoffMatrix1v1, tol: float = EQ_TOL) -> list[EquilibriumRow]:
    """Every Nash equilibrium of the master/worker 2x2 game.

    Rows follow the same case split as the closed-form tables: the fully mixed
    point, four edge families (one player pure, the other mixing) and the
    pure corners. The (honest, no-verify) corner is folded into the
    (mixed, no-verify) edge whenever that edge exists.
    """
    m = matrix
    dm0, dm1 = m.master_gain(0.0), m.master_gain(1.0)
    dw0, dw1 = m.worker_gain(0.0), m.worker_gain(1.0)
    den_m = m.m_cv - m.m_hv - m.m_cn + m.m_hn
    den_w = m.w_cv - m.w_cn - m.w_hv + m.w_hn
    if abs(den_m) <= tol:
        raise DegenerateGame("master indifference denominator m_CV - m_HV - m_CN + m_HN")
    if abs(den_w) <= tol:
        raise DegenerateGame("worker indifference denominator w_CV - w_CN - w_HV + w_HN")

    rows: list[EquilibriumRow] = []
    pc_star = (m.m_hn - m.m_hv) / den_m
    pv_star = (m.w_hn - m.w_cn) / den_w
    if tol < pc_star < 1 - tol and tol < pv_star < 1 - tol:
        rows.append(_generic_row(m, Interval.point(pc_star), Interval.point(pv_star),
                                 ("0 < p_C* < 1", "0 < p_V* < 1"), "fully-mixed"))

    # D_M(pc) = dm0 + (dm1 - dm0) pc ; D_W(pv) = dw0 + (dw1 - dw0) pv
    if abs(dm0) <= tol:
        pv_set = _restrict(OPEN_UNIT, dw0, dw1 - dw0, "le", tol)
        if pv_set is not None:
            rows.append(_generic_row(m, Interval.point(0.0), pv_set,
                                     ("master indifferent at p_C = 0",), "pc0-pvI"))
    if abs(dm1) <= tol:
        pv_set = _restrict(OPEN_UNIT, dw0, dw1 - dw0, "ge", tol)
        if pv_set is not None:
            rows.append(_generic_row(m, Interval.point(1.0), pv_set,
                                     ("master indifferent at p_C = 1",), "pc1-pvI"))
    if abs(dw0) <= tol:
        pc_set = _restrict(HALF_OPEN_UNIT, dm0, dm1 - dm0, "le", tol)
        if pc_set is not None:
            rows.append(_generic_row(m, pc_set, Interval.point(0.0),
                                     ("worker indifferent at p_V = 0",), "pcI-pv0"))
    if abs(dw1) <= tol:
        pc_set = _restrict(OPEN_UNIT, dm0, dm1 - dm0, "ge", tol)
        if pc_set is not None:
            rows.append(_generic_row(m, pc_set, Interval.point(1.0),
                                     ("worker indifferent at p_V = 1",), "pcI-pv1"))
    one, zero = Interval.point(1.0), Interval.point(0.0)
    if dw1 >= -tol and dm1 >= -tol:
        rows.append(_generic_row(m, one, one, ("D_W(1) >= 0", "D_M(1) >= 0"), "pc1-pv1"))
    if dw1 <= tol and dm0 >= -tol:
        rows.append(_generic_row(m, zero, one, ("D_W(1) <= 0", "D_M(0) >= 0"), "pc0-pv1"))
    if dw0 >= -tol and dm1 <= tol:
        rows.append(_generic_row(m, one, zero, ("D_W(0) >= 0", "D_M(1) <= 0"), "pc1-pv0"))
    if dw0 < -tol and dm0 <= tol:
        rows.append(_generic_row(m, zero, zero, ("D_W(0) < 0", "D_M(0) <= 0"), "pc0-pv0"))
    return rows


# --- game 1:1^n -------------------------------------------------------------

def _tag(model: RewardModel) -> str:
    return "unpaid" if model is RewardModel.RNONE else "paid"


def master_bound(params: PayoffParameters, model: RewardModel) -> float:
    """Cheating probability at which the master is indifferent about verifying."""
    p = params
    den = p.mca + p.mpw
    if den <= 0:
        raise DegenerateGame("MC_A + MP_W")
    num = p.mcv + p.mca if model is RewardModel.RNONE else p.mcv
    return num / den


def worker_bound(params: PayoffParameters) -> float:
    """Verification probability at which a single worker is indifferent about cheating."""
    den = params.wba + params.wpc
    if den <= 0:
        raise DegenerateGame("WB_A + WP_C")
    return params.wct / den


def analyze_1v1n(row: EquilibriumRow, params: PayoffParameters, n: int,
                 pc: float | None = None, pv: float | None = None) -> tuple[float, float, float]:
    """P_wrong, master utility and worker utility of a 1:1^n row.

    The row is evaluated at (pc, pv), defaulting to the midpoints of its
    intervals.
    """
    if row.model is None:
        raise ValueError("row carries no reward model")
    x = row.pc.midpoint if pc is None else pc
    y = row.pv.midpoint if pv is None else pv
    p = params
    none = row.model is RewardModel.RNONE
    kind = row.source.split("-", 1)[1]
    big_pc = majority_cheat_prob_iid(n, x)
    nca = n * p.mca

    if kind == "fully-mixed":
        verified = (1 - x ** n) * p.mbr - p.mcv - (1 - x) * nca
        unverified = p.mbr * (1 - big_pc) - p.mpw * big_pc - (0.0 if none else nca)
        um = y * verified + (1 - y) * unverified
        uw = -y * p.wpc if none else p.wba - p.wct
        return (1 - y) * big_pc, um, uw
    if kind == "pc0-pvI":
        return 0.0, (p.mbr if none else p.mbr - nca), (y * p.wba - p.wct if none else p.wba - p.wct)
    if kind == "pc1-pvI":
        if none:
            return 1 - y, -p.mcv, -y * p.wpc
        return 1 - y, -y * p.mcv - (1 - y) * (p.mpw + nca), (1 - y) * p.wba - y * p.wpc
    if kind == "pcI-pv0":
        um = p.mbr * (1 - big_pc) - p.mpw * big_pc - (0.0 if none else nca)
        return big_pc, um, (0.0 if none else p.wba)
    if kind == "pcI-pv1":
        return 0.0, (1 - x ** n) * p.mbr - p.mcv - n * (1 - x) * p.mca, -p.wpc
    if kind == "pc1-pv1":
        return 0.0, -p.mcv, -p.wpc
    if kind == "pc0-pv1":
        return 0.0, (p.mbr if none else p.mbr - nca), p.wba - p.wct
    if kind == "pc1-pv0":
        return 1.0, (-p.mpw if none else -p.mpw - nca), (0.0 if none else p.wba)
    raise ValueError(f"unknown row kind {row.source!r}")


def classify_1v1n(params: PayoffParameters, model: RewardModel, n: int,
                  tol: float = EQ_TOL) -> list[EquilibriumRow]:
    """Rows of the 1:1^n case table whose conditions hold for this instance."""
    if n < 1 or n % 2 == 0:
        raise ValueError(f"n must be a positive odd integer, got {n}")
    p = params
    none = model is RewardModel.RNONE
    t = _tag(model)
    bc = master_bound(p, model)
    bv = worker_bound(p)
    eq = lambda a, b: abs(a - b) <= tol  # noqa: E731
    one, zero = Interval.point(1.0), Interval.point(0.0)
    free = eq(p.mcv, 0) and eq(p.mca, 0) if none else eq(p.mcv, 0)
    free_txt = "MC_A = MC_V = 0" if none else "MC_V = 0"
    pc1_txt = "MC_V = MP_W" if none else "MC_V = MP_W + MC_A"
    pc1_lhs = p.mpw if none else p.mpw + p.mca
    flip = p.wba + p.wpc

    cand: list[tuple[Interval, Interval, tuple[str, ...], str]] = []
    if tol < bc < 1 - tol and tol < bv < 1 - tol:
        cand.append((Interval.point(bc), Interval.point(bv), (), "fully-mixed"))
    if free and bv < 1:
        cand.append((zero, Interval(max(bv, 0.0), 1.0, bv <= 0, True), (free_txt,), "pc0-pvI"))
    if eq(p.mcv, pc1_lhs) and bv > 0:
        cand.append((one, Interval(0.0, min(bv, 1.0), True, bv >= 1), (pc1_txt,), "pc1-pvI"))
    if eq(p.wct, 0):
        cand.append((Interval(0.0, min(bc, 1.0), False, bc >= 1), zero, ("WC_T = 0",), "pcI-pv0"))
    if eq(p.wct, flip) and bc < 1:
        cand.append((Interval(max(bc, 0.0), 1.0, bc <= 0, True), one,
                     ("WC_T = WB_A + WP_C",), "pcI-pv1"))
    if p.mcv <= pc1_lhs + tol and p.wct >= flip - tol:
        cand.append((one, one, (f"MC_V <= {'MP_W' if none else 'MP_W + MC_A'}",
                                "WC_T >= WB_A + WP_C"), "pc1-pv1"))
    if free and p.wct <= flip + tol:
        cand.append((zero, one, (free_txt, "WC_T <= WB_A + WP_C"), "pc0-pv1"))
    if p.mcv >= pc1_lhs - tol:
        cand.append((one, zero, (f"MC_V >= {'MP_W' if none else 'MP_W + MC_A'}",), "pc1-pv0"))

    rows = []
    for pc, pv, conds, kind in cand:
        stub = EquilibriumRow(pc, pv, conds, 0.0, 0.0, 0.0, f"{t}-{kind}", model,
                              all_cheat=pc == one)
        pw, um, uw = analyze_1v1n(stub, p, n)
        rows.append(EquilibriumRow(pc, pv, conds, pw, um, uw, stub.source, model, stub.all_cheat))
    return rows


@dataclass(frozen=True)
class MasterPayoffHooks:
    """Master payoffs as functions of the number of cheating/honest workers.

    verify_cheaters(f) + verify_honest(t) is the master payoff when verifying
    with f cheaters and t honest workers; the unverified pair likewise.
    """

    verify_cheaters: Callable[[int], float]
    verify_honest: Callable[[int], float]
    unverified_cheaters: Callable[[int], float]
    unverified_honest: Callable[[int], float]


def table_hooks(params: PayoffParameters, model: RewardModel, n: int) -> MasterPayoffHooks:
    """The count-linear payoffs underlying the 1:1^n tables."""
    p = params
    pay = 0.0 if model is RewardModel.RNONE else n * p.mca
    return MasterPayoffHooks(
        verify_cheaters=lambda f: -p.mcv,
        verify_honest=lambda t: (p.mbr if t > 0 else 0.0) - t * p.mca,
        unverified_cheaters=lambda f: -p.mpw if 2 * f > n else 0.0,
        unverified_honest=lambda t: (p.mbr if 2 * t > n else 0.0) - pay,
    )


def expected_master_utility(pcs: Sequence[float], pv: float, hooks: MasterPayoffHooks) -> float:
    """Master utility of game 1:1^n for heterogeneous cheating probabilities."""
    n = len(pcs)
    dist = cheater_count_distribution((1,) * n, pcs)
    total = 0.0
    for f in range(n + 1):
        t = n - f
        mv = hooks.verify_cheaters(f) + hooks.verify_honest(t)
        mn = hooks.unverified_cheaters(f) + hooks.unverified_honest(t)
        total += dist[f] * (pv * mv + (1 - pv) * mn)
    return total


# --- game 0:n ---------------------------------------------------------------

@dataclass(frozen=True)
class Differentials:
    """Cheat-minus-honest payoff of a group when the majority is decided by
    cheaters regardless (c), by this group (x), or by honest workers regardless (h)."""

    group_size: int
    dw_c: float
    dw_x: float
    dw_h: float

    @property
    def ordered(self) -> bool:
        return self.dw_c >= self.dw_x - EQ_TOL and self.dw_x >= self.dw_h - EQ_TOL


@dataclass(frozen=True)
class DifferentialReport:
    entries: tuple[Differentials, ...]
    du: tuple[float, ...]

    @property
    def ordered(self) -> bool:
        return all(e.ordered for e in self.entries)


def differentials_0n(params: PayoffParameters, model: RewardModel, group_size: int,
                     pv: float) -> Differentials:
    p, w = params, group_size
    if w < 1:
        raise ValueError("group size must be positive")
    if model is RewardModel.RM:
        return Differentials(
            w,
            -pv * w * (p.wpc + 2 * p.wba) + w * p.wba + p.wct,
            -pv * w * (p.wpc + p.wba) + p.wct,
            -pv * w * p.wpc - w * p.wba + p.wct,
        )
    d = -pv * w * (p.wpc + p.wba) + p.wct
    return Differentials(w, d, d, d)


def utility_differential(params: PayoffParameters, model: RewardModel,
                         partition: GroupPartition, pv: float,
                         pcs: Sequence[float], i: int) -> float:
    """Expected gain of group i from cheating, others playing ``pcs``."""
    sizes = partition.sizes
    d = differentials_0n(params, model, sizes[i], pv)
    others = [k for k in range(len(sizes)) if k != i]
    dist = cheater_count_distribution([sizes[k] for k in others], [pcs[k] for k in others])
    rest = partition.n - sizes[i]
    total = 0.0
    for nf in range(rest + 1):
        if dist[nf] == 0.0:
            continue
        margin = nf - (rest - nf)
        if margin > sizes[i]:
            total += dist[nf] * d.dw_c
        elif -margin > sizes[i]:
            total += dist[nf] * d.dw_h
        else:
            total += dist[nf] * d.dw_x
    return total


def differential_report(params: PayoffParameters, model: RewardModel,
                        partition: GroupPartition, pv: float,
                        pcs: Sequence[float] | None = None) -> DifferentialReport:
    pcs = [0.0] * partition.groups if pcs is None else list(pcs)
    entries = tuple(differentials_0n(params, model, s, pv) for s in partition.sizes)
    du = tuple(utility_differential(params, model, partition, pv, pcs, i)
               for i in range(partition.groups))
    return DifferentialReport(entries, du)


@dataclass(frozen=True)
class PvBound:
    value: float
    min_group_size: int

    @property
    def feasible(self) -> bool:
        return self.value < 1.0

    def __float__(self) -> float:
        return self.value


def min_pv_0n(params: PayoffParameters, model: RewardModel, min_group_size: int = 1,
              tol: float = EQ_TOL) -> PvBound:
    """Smallest verification probability (exclusive) making honesty strictly dominant
    for every group of at least ``min_group_size`` workers."""
    p, w = params, min_group_size
    if w < 1:
        raise ValueError("min_group_size must be positive")
    if model is RewardModel.RM:
        den = w * (p.wpc + 2 * p.wba)
        if den <= tol:
            raise DegenerateGame("|W_i| (WP_C + 2 WB_A)")
        return PvBound((w * p.wba + p.wct) / den, w)
    den = w * (p.wpc + p.wba)
    if den <= tol:
        raise DegenerateGame("|W_i| (WP_C + WB_A)")
    return PvBound(p.wct / den, w)


@dataclass(frozen=True)
class ZeroNOutcome:
    p_wrong: float
    u_master: float
    u_worker: tuple[float, ...]


def analyze_0n(params: PayoffParameters, model: RewardModel, pv: float,
               partition: GroupPartition, margin: float = 0.0) -> ZeroNOutcome:
    """Utilities at the all-honest equilibrium of game 0:n."""
    bound = min_pv_0n(params, model, partition.min_size).value
    if not 0.0 < pv <= 1.0:
        raise EquilibriumNotGuaranteed(f"p_V = {pv} outside (0, 1]")
    if pv <= bound or pv < bound + margin - EQ_TOL:
        raise EquilibriumNotGuaranteed(
            f"p_V = {pv} does not exceed the honesty bound {bound} (+ margin {margin}); "
            "equilibrium not unique/guaranteed")
    p, n = params, partition.n
    if model is RewardModel.RNONE:
        um = p.mbr - pv * (p.mcv + n * p.mca)
        uw = tuple(pv * s * p.wba - p.wct for s in partition.sizes)
    else:
        um = p.mbr - pv * p.mcv - n * p.mca
        uw = tuple(s * p.wba - p.wct for s in partition.sizes)
    return ZeroNOutcome(0.0, um, uw)


# --- game 1:n ---------------------------------------------------------------

@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    reasons: tuple[str, ...] = ()


def feasibility_1n(params: PayoffParameters, model: RewardModel,
                   tol: float = EQ_TOL) -> Feasibility:
    """With the master in the game, honesty only survives if verifying is free."""
    reasons = []
    if abs(params.mcv) > tol:
        reasons.append(f"MC_V = {params.mcv} is not 0")
    if model is RewardModel.RNONE and abs(params.mca) > tol:
        reasons.append(f"MC_A = {params.mca} is not 0")
    return Feasibility(not reasons, tuple(reasons))


def game_rows(params: PayoffParameters, model: RewardModel, game: GameKind, n: int = 1,
              pv: float | None = None, partition: GroupPartition | None = None) -> list[dict]:
    """Uniform record view over every game, used by the CLI."""
    if game is GameKind.G1V1:
        return [r.to_dict() for r in solve_1v1(payoff_matrix_1v1(params, model))]
    if game is GameKind.G1V1N:
        return [r.to_dict() for r in classify_1v1n(params, model, n)]
    partition = partition or GroupPartition.singletons(n)
    if game is GameKind.G0N:
        bound = min_pv_0n(params, model, partition.min_size)
        out = analyze_0n(params, model, pv, partition)
        return [{"source": f"0n-{model.value}", "pc": 0.0, "pv": pv,
                 "pv_bound": bound.value, "p_wrong": out.p_wrong,
                 "u_master": out.u_master, "u_worker": list(out.u_worker)}]
    f = feasibility_1n(params, model)
    return [{"source": f"1n-{model.value}", "feasible": f.feasible, "reasons": list(f.reasons)}]


def bilinear_residual(matrix: PayoffMatrix1v1, pc: float, pv: float) -> tuple[float, float]:
    """Indifference gaps of master and worker at (pc, pv)."""
    return matrix.master_gain(pc), matrix.worker_gain(pv)

