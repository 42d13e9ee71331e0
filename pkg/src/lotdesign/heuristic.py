"""Starting incumbent: greedy selection of up to k lot-types, then 1-swap local search."""

from __future__ import annotations

import logging
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from lotdesign.model import INF, CostCache, Instance, LotType, top_n_lot_types
from lotdesign.subsolver import Assignment, assign_optimal

logger = logging.getLogger(__name__)

MAX_SWAP_PASSES = 50


class InfeasibleError(RuntimeError):
    """No selection of candidate lot-types meets the supply window."""


def _profile_lot(inst: Instance, agg: list, agg_total: int, target: int) -> LotType | None:
    """Aggregate size curve scaled to ``target`` pieces, clipped to the per-size bounds."""
    if agg_total == 0:
        shares = [Decimal(target) / inst.num_sizes] * inst.num_sizes
    else:
        shares = [Decimal(int(a)) * target / agg_total for a in agg]
    lot = [min(max(int(s.to_integral_value(ROUND_HALF_UP)), inst.min_c), inst.max_c) for s in shares]
    resid = [s - v for s, v in zip(shares, lot)]
    while sum(lot) < max(inst.min_t, target):
        order = sorted((i for i in range(len(lot)) if lot[i] < inst.max_c), key=lambda i: (-resid[i], i))
        if not order:
            break
        lot[order[0]] += 1
        resid[order[0]] -= 1
    while sum(lot) > min(inst.max_t, target):
        order = sorted((i for i in range(len(lot)) if lot[i] > inst.min_c), key=lambda i: (resid[i], i))
        if not order:
            break
        lot[order[0]] -= 1
        resid[order[0]] += 1
    return tuple(lot) if inst.is_applicable(lot) else None


def profile_lot_types(inst: Instance, targets: list[int] | None = None) -> list[LotType]:
    """Aggregate size-curve lot-types.

    By default one per multiplicity: the branch-summed demand is scaled so the
    lot holds the average branch demand divided by m, clamped to the reachable
    totals and rounded half-up.  ``targets`` asks for explicit totals instead.
    """
    t_lo, t_hi = inst.params.total_range
    if t_lo > t_hi:
        return []
    agg = inst.demand.sum(axis=0).astype(object).tolist()
    agg_total = int(sum(agg))
    if targets is None:
        per_branch = Decimal(agg_total) / Decimal(inst.num_branches * inst.scale)
        targets = [
            min(max(int((per_branch / m).to_integral_value(ROUND_HALF_UP)), t_lo), t_hi)
            for m in inst.multiplicities
        ]
    out = {_profile_lot(inst, agg, agg_total, t) for t in targets}
    out.discard(None)
    return sorted(out)


def supply_gap(inst: Instance, lots: list[LotType]) -> int:
    """Distance from the closest reachable total supply to the supply window."""
    steps = {m * sum(l) for l in lots for m in inst.multiplicities}
    if not steps or inst.supply_hi < 0:
        return INF
    reach = 1  # bit t set <=> total supply t is reachable
    for _ in range(inst.num_branches):
        nxt = 0
        for s in steps:
            nxt |= reach << s
        reach = nxt
    lo, hi = max(inst.supply_lo, 0), inst.supply_hi
    if (reach >> lo) & ((1 << (hi - lo + 1)) - 1):
        return 0
    gaps = []
    below = reach & ((1 << lo) - 1)
    if below:
        gaps.append(lo - (below.bit_length() - 1))
    above = reach >> (hi + 1)
    if above:
        gaps.append((above & -above).bit_length())
    return min(gaps)


def _relaxed_cost(costs: CostCache, lots: list[LotType]) -> int:
    return int(costs.table(lots).min(axis=(1, 2)).sum())


def _evaluate(inst: Instance, costs: CostCache, lots: list[LotType]) -> tuple[int, int, Assignment | None]:
    """(supply gap, cost, assignment); the cost is the supply-relaxed one while the gap is positive."""
    a = assign_optimal(inst, lots, costs)
    if a is None:
        return max(supply_gap(inst, lots), 1), _relaxed_cost(costs, lots), None
    return 0, a.total_cost, a


def _search(inst: Instance, costs: CostCache, pool: list[LotType]) -> Assignment | None:
    selected: list[LotType] = []
    current: tuple[int, int, Assignment | None] | None = None
    while len(selected) < inst.k:
        best = None
        for cand in pool:
            if cand in selected:
                continue
            res = _evaluate(inst, costs, selected + [cand])
            key = (res[0], res[1], cand)
            if best is None or key < best[0]:
                best = (key, cand, res)
        if best is None:
            break
        _, cand, res = best
        if current is not None and current[0] == 0 and res[1] >= current[1]:
            break  # no further reduction available
        selected.append(cand)
        current = res
    if current is None or current[0] != 0:
        return None
    incumbent = current[2]
    assert incumbent is not None

    for _ in range(MAX_SWAP_PASSES):
        best_swap = None
        for i, out in enumerate(selected):
            for cand in pool:
                if cand in selected:
                    continue
                trial = selected[:i] + [cand] + selected[i + 1 :]
                a = assign_optimal(inst, trial, costs)
                if a is not None and a.total_cost < incumbent.total_cost:
                    if best_swap is None or (a.total_cost, cand, i) < (best_swap[0].total_cost, best_swap[1], best_swap[2]):
                        best_swap = (a, cand, i)
        if best_swap is None:
            break
        incumbent, cand, i = best_swap
        selected[i] = cand
        logger.debug("swap improved incumbent to %d", incumbent.total_cost)
    return incumbent


def initial_incumbent(inst: Instance, costs: CostCache | None = None) -> Assignment:
    costs = costs or CostCache(inst)
    pool = set(profile_lot_types(inst))
    for b in range(inst.num_branches):
        pool.update(l for l, _ in top_n_lot_types(inst, b, 3))
    found = _search(inst, costs, sorted(pool))
    if found is None:
        logger.info("widening the heuristic pool to the per-branch top 10")
        for b in range(inst.num_branches):
            pool.update(l for l, _ in top_n_lot_types(inst, b, 10))
        found = _search(inst, costs, sorted(pool))
    if found is None:
        t_lo, t_hi = inst.params.total_range
        logger.info("adding one profile lot-type per total %d..%d", t_lo, t_hi)
        pool.update(profile_lot_types(inst, list(range(t_lo, t_hi + 1))))
        found = _search(inst, costs, sorted(pool))
    if found is None:
        raise InfeasibleError("no candidate lot-type selection meets the supply window")
    return found
