"""Exact solvers over a small explicit lot-type set.

``assign_optimal`` is a knapsack-style DP over branches whose state is the
accumulated supply (states above ``supply_hi`` are dropped).  ``solve_restricted``
searches subsets of a dive set best-first under a supply-relaxed bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from lotdesign.model import (
    INF,
    CostCache,
    Instance,
    LotType,
    cost,
    count_applicable_lot_types,
    enumerate_applicable_lot_types,
)


class OracleBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Assignment:
    lot_types: tuple[LotType, ...]
    multiplicities: tuple[int, ...]
    selected: tuple[LotType, ...]
    total_supply: int
    total_cost: int

    def problems(self, inst: Instance) -> list[str]:
        out = []
        if len(self.lot_types) != inst.num_branches or len(self.multiplicities) != inst.num_branches:
            return ["assignment does not cover every branch"]
        if len(self.selected) > inst.k:
            out.append(f"{len(self.selected)} lot-types selected, k = {inst.k}")
        if set(self.lot_types) - set(self.selected):
            out.append("branch uses a lot-type outside the selected set")
        for l in self.selected:
            if not inst.is_applicable(l):
                out.append(f"lot-type {l} is not applicable")
        if any(m not in inst.multiplicities for m in self.multiplicities):
            out.append("multiplicity outside M")
        supply = sum(m * sum(l) for l, m in zip(self.lot_types, self.multiplicities))
        if supply != self.total_supply:
            out.append("total supply mismatch")
        if not inst.supply_lo <= supply <= inst.supply_hi:
            out.append(f"total supply {supply} outside [{inst.supply_lo}, {inst.supply_hi}]")
        exact = sum(cost(inst, b, l, m) for b, (l, m) in enumerate(zip(self.lot_types, self.multiplicities)))
        if exact != self.total_cost:
            out.append(f"cost mismatch: stored {self.total_cost}, recomputed {exact}")
        return out

    def to_dict(self) -> dict:
        return {
            "branches": [
                {"lot": list(l), "multiplicity": m} for l, m in zip(self.lot_types, self.multiplicities)
            ],
            "selected": [list(l) for l in self.selected],
            "total_supply": self.total_supply,
            "total_cost": self.total_cost,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Assignment":
        return cls(
            lot_types=tuple(tuple(e["lot"]) for e in data["branches"]),
            multiplicities=tuple(int(e["multiplicity"]) for e in data["branches"]),
            selected=tuple(tuple(l) for l in data["selected"]),
            total_supply=int(data["total_supply"]),
            total_cost=int(data["total_cost"]),
        )


def _assign_dp(
    costs: np.ndarray, supplies: np.ndarray, lo: int, hi: int
) -> tuple[int, int, np.ndarray] | None:
    """Min-cost choice of one option per row with total supply in [lo, hi].

    ``costs`` is (B, O); options are tried in index order and only a strictly
    better value replaces a stored one, so the lowest option index wins ties.
    Returns (cost, supply, chosen option per row) or None.
    """
    num_b, num_o = costs.shape
    if hi < 0:
        return None
    f = np.full(hi + 1, INF, dtype=np.int64)
    f[0] = 0
    choice = np.empty((num_b, hi + 1), dtype=np.int32)
    # src[o, t] = t - supply_o; invalid sources read a padded INF slot
    src = np.arange(hi + 1)[None, :] - np.asarray(supplies, dtype=np.int64)[:, None]
    src = np.where(src >= 0, src, hi + 1)
    padded = np.empty(hi + 2, dtype=np.int64)
    padded[hi + 1] = INF
    for b in range(num_b):
        padded[: hi + 1] = f
        cand = padded[src] + costs[b][:, None]  # (O, hi+1)
        low = cand.min(axis=0)
        choice[b] = (cand == low).argmax(axis=0)  # first minimum = lowest option index
        f = np.minimum(low, INF)
    window = f[lo:] if lo > 0 else f
    best = int(window.min())
    if best >= INF:
        return None
    t = int(np.argmin(window)) + max(lo, 0)
    picks = np.empty(num_b, dtype=np.int64)
    state = t
    for b in reversed(range(num_b)):
        o = int(choice[b, state])
        picks[b] = o
        state -= int(supplies[o])
    assert state == 0
    return best, t, picks


def _options(inst: Instance, lots: Sequence[LotType]) -> list[tuple[LotType, int]]:
    return [(l, m) for l in sorted(set(lots)) for m in inst.multiplicities]


def assign_optimal(inst: Instance, lots: Sequence[LotType], costs: CostCache | None = None) -> Assignment | None:
    """Best assignment using only ``lots``; None when the supply window cannot be met.

    Ties go to the smaller total supply, then to lexicographically smaller
    (lot-type, multiplicity) per branch.
    """
    if not lots:
        return None
    costs = costs or CostCache(inst)
    opts = _options(inst, lots)
    lot_list = sorted(set(lots))
    table = costs.table(lot_list)  # (B, P, M)
    mat = table.reshape(inst.num_branches, -1)  # option order: lot-major, then m
    supplies = np.array([m * sum(l) for l, m in opts], dtype=np.int64)
    res = _assign_dp(mat, supplies, inst.supply_lo, inst.supply_hi)
    if res is None:
        return None
    total, supply, picks = res
    chosen = [opts[o] for o in picks]
    return Assignment(
        lot_types=tuple(l for l, _ in chosen),
        multiplicities=tuple(m for _, m in chosen),
        selected=tuple(sorted({l for l, _ in chosen})),
        total_supply=supply,
        total_cost=total,
    )


def _subset_bounds(min_cost: np.ndarray, combos: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """Σ_b min over the subset's lot-types of the per-branch best cost."""
    out = np.empty(len(combos), dtype=np.int64)
    for start in range(0, len(combos), chunk):
        block = combos[start : start + chunk]
        out[start : start + chunk] = min_cost[:, block].min(axis=2).sum(axis=0)
    return out


def solve_restricted(
    inst: Instance,
    lots: Sequence[LotType],
    costs: CostCache | None = None,
    cutoff: int | None = None,
) -> Assignment | None:
    """Exact optimum over all selections of at most k lot-types from ``lots``.

    Adding lot-types never hurts, so only selections of size min(k, |lots|) are
    searched.  Subsets are visited in increasing order of the supply-relaxed
    bound and the search stops once the bound reaches the best cost found.
    With ``cutoff`` set, subsets whose bound is >= cutoff are skipped, so the
    result is exact only when it is below ``cutoff`` (None otherwise).
    """
    lot_list = sorted(set(lots))
    if not lot_list:
        return None
    costs = costs or CostCache(inst)
    size = min(inst.k, len(lot_list))
    min_cost = costs.table(lot_list).min(axis=2)  # (B, P)
    combos = np.array(list(itertools.combinations(range(len(lot_list)), size)), dtype=np.int64)
    bounds = _subset_bounds(min_cost, combos)
    order = np.lexsort((np.arange(len(combos)), bounds))
    best: Assignment | None = None
    limit = INF if cutoff is None else cutoff
    for idx in order:
        bound = int(bounds[idx])
        if bound >= limit or (best is not None and bound >= best.total_cost):
            break
        cand = assign_optimal(inst, [lot_list[i] for i in combos[idx]], costs)
        if cand is None:
            continue
        if best is None or _better(cand, best):
            best = cand
    if best is not None and cutoff is not None and best.total_cost >= cutoff:
        return None
    return best


def _better(a: Assignment, b: Assignment) -> bool:
    return (a.total_cost, a.total_supply, a.lot_types, a.multiplicities) < (
        b.total_cost,
        b.total_supply,
        b.lot_types,
        b.multiplicities,
    )


def oracle_work(inst: Instance) -> int:
    count = count_applicable_lot_types(inst.params)
    size = min(inst.k, count)
    return math.comb(count, size) * inst.num_branches * len(inst.multiplicities) * max(inst.supply_hi, 1)


def brute_force_oracle(inst: Instance, max_lot_types: int = 1000, budget: float = 5e9) -> Assignment | None:
    """Global optimum by scoring every selection of min(k, |L|) lot-types.

    All selections are evaluated at once with a vectorized supply DP that is
    independent of ``assign_optimal``; only the winner is re-derived through
    ``assign_optimal`` to obtain the per-branch assignment.
    """
    count = count_applicable_lot_types(inst.params)
    if count > max_lot_types or oracle_work(inst) > budget:
        raise OracleBudgetExceeded(f"|L| = {count}, work estimate {oracle_work(inst):.3g}")
    lots = list(enumerate_applicable_lot_types(inst.params, cap=max_lot_types))
    size = min(inst.k, len(lots))
    table = CostCache(inst).table(lots)  # (B, P, M)
    sizes = np.array([sum(l) for l in lots], dtype=np.int64)
    mults = np.array(inst.multiplicities, dtype=np.int64)
    hi, lo = inst.supply_hi, inst.supply_lo
    if hi < 0:
        return None
    best_val, best_combo = INF, None
    all_combos = itertools.combinations(range(len(lots)), size)
    while True:
        block = np.array(list(itertools.islice(all_combos, 4096)), dtype=np.int64)
        if block.size == 0:
            break
        n = len(block)
        f = np.full((n, hi + 1), INF, dtype=np.int64)
        f[:, 0] = 0
        cols = np.arange(hi + 1)
        for b in range(inst.num_branches):
            g = np.full_like(f, INF)
            for j in range(size):
                lot_idx = block[:, j]
                for mi, m in enumerate(mults):
                    c = table[b, lot_idx, mi]  # (n,)
                    s = m * sizes[lot_idx]  # (n,)
                    src = cols[None, :] - s[:, None]
                    ok = src >= 0
                    vals = np.where(ok, np.take_along_axis(f, np.clip(src, 0, hi), axis=1), INF) + c[:, None]
                    np.minimum(g, vals, out=g)
            f = np.minimum(g, INF)
        vals = f[:, max(lo, 0) :].min(axis=1)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_combo = int(vals[i]), [lots[t] for t in block[i]]
    if best_combo is None:
        return None
    result = assign_optimal(inst, best_combo)
    assert result is not None and result.total_cost == best_val
    return result
