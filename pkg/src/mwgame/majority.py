"""Probability that the cheating side holds the majority of individual answers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .payoffs import GroupPartition

CLAIM_TOL = 1e-12


@dataclass(frozen=True)
class MajorityQuery:
    partition: GroupPartition
    pc_per_group: tuple[float, ...]

    def __post_init__(self) -> None:
        pcs = tuple(float(p) for p in self.pc_per_group)
        if len(pcs) != self.partition.groups:
            raise ValueError(
                f"{len(pcs)} probabilities for {self.partition.groups} groups")
        for p in pcs:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability out of range: {p}")
        object.__setattr__(self, "pc_per_group", pcs)


def cheater_count_distribution(sizes, pcs) -> np.ndarray:
    """Distribution of the number of cheating workers.

    Entry k is the probability that exactly k individual workers cheat when
    group i (of size sizes[i]) cheats as a block with probability pcs[i].
    """
    n = int(sum(sizes))
    dist = np.zeros(n + 1)
    dist[0] = 1.0
    top = 0
    for size, p in zip(sizes, pcs):
        nxt = np.zeros(n + 1)
        nxt[: top + 1] += dist[: top + 1] * (1.0 - p)
        nxt[size: top + size + 1] += dist[: top + 1] * p
        dist = nxt
        top += size
    return dist


def majority_cheat_prob(q: MajorityQuery) -> float:
    dist = cheater_count_distribution(q.partition.sizes, q.pc_per_group)
    n = q.partition.n
    return float(min(1.0, math.fsum(dist[n // 2 + 1:])))


def majority_cheat_prob_iid(n: int, pc: float) -> float:
    """Binomial tail P[X > n/2] for X ~ Bin(n, pc), n odd."""
    if n < 1 or n % 2 == 0:
        raise ValueError(f"n must be a positive odd integer, got {n}")
    if not 0.0 <= pc <= 1.0:
        raise ValueError(f"pc must be in [0, 1], got {pc}")
    if pc == 0.0:
        return 0.0
    if pc == 1.0:
        return 1.0
    lp, lq = math.log(pc), math.log1p(-pc)
    lgn = math.lgamma(n + 1)
    terms = [
        math.exp(lgn - math.lgamma(k + 1) - math.lgamma(n - k + 1) + k * lp + (n - k) * lq)
        for k in range(n // 2 + 1, n + 1)
    ]
    return min(1.0, math.fsum(terms))


def claim1_monotonicity(n: int, pc: float) -> tuple[float, float, bool]:
    """Check that adding two workers never raises the majority-cheat probability
    when each worker cheats with probability at most one half."""
    if pc > 0.5:
        raise ValueError("monotonicity only holds for pc <= 1/2")
    a = majority_cheat_prob_iid(n, pc)
    b = majority_cheat_prob_iid(n + 2, pc)
    return a, b, b <= a + CLAIM_TOL
