"""Shared instance factories and independent reference computations."""

from __future__ import annotations

import itertools
from importlib import resources
from pathlib import Path

import numpy as np

from lotdesign.model import (
    Instance,
    LotTypeParams,
    count_applicable_lot_types,
    enumerate_applicable_lot_types,
    make_instance,
)

DATA = Path(str(resources.files("lotdesign") / "data"))
TOY = DATA / "toy.json"


def random_params(rng: np.random.Generator, max_sizes: int = 3, max_count: int = 50) -> LotTypeParams:
    while True:
        s = int(rng.integers(1, max_sizes + 1))
        min_c = int(rng.integers(0, 2))
        max_c = min_c + int(rng.integers(1, 4))
        min_t = int(rng.integers(0, s * max_c + 1))
        max_t = int(rng.integers(min_t, s * max_c + 2))
        p = LotTypeParams(s, min_c, max_c, min_t, max_t)
        if 1 <= count_applicable_lot_types(p) <= max_count:
            return p


def random_instance(rng: np.random.Generator, max_branches: int = 5, max_k: int = 3) -> Instance:
    """Small instance whose supply window is reachable by construction."""
    p = random_params(rng)
    num_b = int(rng.integers(1, max_branches + 1))
    k = int(rng.integers(1, max_k + 1))
    mults = sorted({int(x) for x in rng.integers(1, 4, size=int(rng.integers(1, 4)))})
    lots = list(enumerate_applicable_lot_types(p))
    demand = [[f"{rng.uniform(0, p.max_c * max(mults) + 1):.1f}" for _ in range(p.num_sizes)] for _ in range(num_b)]
    chosen = [lots[i] for i in rng.choice(len(lots), size=min(k, len(lots)), replace=False)]
    supply = sum(int(rng.choice(mults)) * sum(chosen[int(rng.integers(len(chosen)))]) for _ in range(num_b))
    lo = max(0, supply - int(rng.integers(0, 6)))
    hi = supply + int(rng.integers(0, 6))
    return make_instance(
        demand, mults, min_c=p.min_c, max_c=p.max_c, min_t=p.min_t, max_t=p.max_t, supply=(lo, hi), k=k
    )


def brute_lots(p: LotTypeParams) -> list[tuple[int, ...]]:
    """All applicable lot-types by plain product enumeration, sorted."""
    return sorted(
        l
        for l in itertools.product(range(p.min_c, p.max_c + 1), repeat=p.num_sizes)
        if p.min_t <= sum(l) <= p.max_t
    )


def exact_cost(inst: Instance, b: int, lot, m: int) -> int:
    return sum(abs(int(inst.demand[b][s]) - m * v * inst.scale) for s, v in enumerate(lot))


def exhaustive_optimum(inst: Instance, lots=None) -> int | None:
    """Minimum cost over every tuple (l(b), m(b)) with at most k distinct lot-types."""
    lots = brute_lots(inst.params) if lots is None else sorted(set(lots))
    options = [(l, m) for l in lots for m in inst.multiplicities]
    best = None
    for combo in itertools.product(options, repeat=inst.num_branches):
        if len({l for l, _ in combo}) > inst.k:
            continue
        supply = sum(m * sum(l) for l, m in combo)
        if not inst.supply_lo <= supply <= inst.supply_hi:
            continue
        c = sum(exact_cost(inst, b, l, m) for b, (l, m) in enumerate(combo))
        if best is None or c < best:
            best = c
    return best


def random_bounded_lp(rng: np.random.Generator, n: int = 5, m: int = 5):
    """Program with positive costs (bounded below by 0) and small integer data."""
    from lotdesign.lp import EQ, GE, LinearProgram

    costs = rng.integers(1, 10, n).astype(float)
    rows = []
    for i in range(m):
        sense = EQ if rng.random() < 0.2 else GE
        coefs = {j: float(rng.integers(-3, 5)) for j in range(n) if rng.random() < 0.8}
        rows.append((coefs, sense, float(rng.integers(-3, 6))))
    return LinearProgram.from_rows(costs, rows)


def vertex_minimum(lp) -> float | None:
    """Minimum over all basic feasible solutions of the standard form; None if there are none."""
    from lotdesign.lp import GE

    A = lp.matrix.toarray()
    m, n = A.shape
    ge = [i for i, s in enumerate(lp.senses) if s == GE]
    surplus = np.zeros((m, len(ge)))
    for j, i in enumerate(ge):
        surplus[i, j] = -1.0
    full = np.hstack([A, surplus])
    cost = np.concatenate([lp.costs, np.zeros(len(ge))])
    rank = np.linalg.matrix_rank(full)
    best = None
    for cols in itertools.combinations(range(full.shape[1]), rank):
        sub = full[:, cols]
        if np.linalg.matrix_rank(sub) < rank:
            continue
        x_b, *_ = np.linalg.lstsq(sub, lp.rhs, rcond=None)
        if np.any(x_b < -1e-9) or np.abs(sub @ x_b - lp.rhs).max() > 1e-9:
            continue
        val = float(cost[list(cols)] @ x_b)
        best = val if best is None else min(best, val)
    return best
