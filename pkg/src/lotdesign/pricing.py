"""Reduced costs and the column/row search over the full lot-type space.

For an assignment column x_{b,l,m} the reduced cost against the RMP duals is

    rc = c_{b,l,m} - α_b - m·|l|·(μ_lo - μ_hi) + β_{b,l}

where β only applies when the binding row (b, l) exists.  Write rc̄ for the
β-free part.  A pair (b, l) outside ζ(b) enters together with its binding row,
and the new row's dual may be raised to max(0, -min_m rc̄_{b,l,m}) to keep every
x column of the pair dual feasible.  That raise is paid by y_l, whose reduced
cost is κ + Σ_{cuts ∋ l} γ_i - Σ_{b: l ∈ ζ(b)} β_{b,l}.  So lot-type l has a
dual-feasible extension iff its deficiency

    D(l) = Σ_{b: l ∉ ζ(b)} max(0, -min_m rc̄_{b,l,m}) - rc_y(l)

is not positive.  Pricing emits (row, column) bundles for lot-types with
D(l) > tol_rc and is clean when no such lot-type and no improving multiplicity
for an admitted pair exist.

For pool lot-types D is evaluated directly.  Outside the pool it is maximised by
best-first search over lot-type prefixes: rc̄ depends on l only through a
separable cost and |l|, so the best completion of a prefix per branch comes
from a suffix DP over (size index, remaining total), and summing the
per-branch optima bounds every completion.

With ``farkas=True`` the duals are phase-one multipliers of an infeasible RMP
and column costs are treated as zero.
"""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from lotdesign.model import (
    INF,
    CostCache,
    Instance,
    LotType,
    best_multiplicity,
    cost,
    entry_costs,
    iter_best_lot_types,
    multiplicity_window,
)
from lotdesign.rmp import AddZeta, Duals, EnlargeEta, NewLotType, WorkingSet

TOL_RC = 1e-5
DEFAULT_CAP = 200

_KIND_ORDER = {EnlargeEta: 0, AddZeta: 1, NewLotType: 2}


@dataclass
class PricingResult:
    actions: list = field(default_factory=list)
    best_rc: float = 0.0
    proven_clean: bool = True
    num_improving: int = 0


def reduced_cost_x(duals: Duals, inst: Instance, b: int, lot: Sequence[int], m: int, beta_known: float = 0.0) -> float:
    return float(cost(inst, b, lot, m)) - duals.alpha[b] - m * sum(lot) * duals.delta + beta_known


def _entry_table(inst: Instance, m: int, farkas: bool) -> np.ndarray:
    """(B, S, V) per-entry costs for multiplicity m (zeros in Farkas mode)."""
    values = np.arange(inst.min_c, inst.max_c + 1, dtype=np.int64)
    shape = (inst.num_branches, inst.num_sizes, len(values))
    if farkas:
        return np.zeros(shape, dtype=np.int64)
    return np.abs(inst.demand[:, :, None] - m * values[None, None, :] * inst.scale)


def _suffix_tables(E: np.ndarray, min_c: int, max_t: int) -> np.ndarray:
    """h[s, b, r]: cheapest way to fill sizes s.. with exactly r pieces."""
    num_b, num_s, width = E.shape
    h = np.full((num_s + 1, num_b, max_t + 1), INF, dtype=np.int64)
    h[num_s, :, 0] = 0
    for s in reversed(range(num_s)):
        cur = h[s]
        nxt = h[s + 1]
        for j in range(width):
            v = min_c + j
            if v > max_t:
                break
            cand = nxt[:, : max_t + 1 - v] + E[:, s, j][:, None]
            np.minimum(cur[:, v:], cand, out=cur[:, v:])
        np.minimum(cur, INF, out=cur)
    return h


def _reconstruct(E: np.ndarray, h: np.ndarray, b: int, total: int, min_c: int) -> LotType:
    """Lexicographically smallest vector attaining h[0, b, total]."""
    num_s, width = E.shape[1], E.shape[2]
    out = []
    r = total
    for s in range(num_s):
        target = h[s, b, r]
        for j in range(width):
            v = min_c + j
            if v > r:
                break
            if E[b, s, j] + h[s + 1, b, r - v] == target:
                out.append(v)
                r -= v
                break
        else:  # pragma: no cover - table inconsistency
            raise AssertionError("DP reconstruction failed")
    return tuple(out)


def _best_for_multiplicity(inst: Instance, duals: Duals, m: int, farkas: bool) -> list[tuple[LotType, float]]:
    """Minimiser of g(l) = c_{b,l,m} - δ·m·|l| for every branch, ties lexicographic."""
    t_lo, t_hi = inst.params.total_range
    if t_lo > t_hi:
        raise ValueError("empty applicable lot-type set")
    E = _entry_table(inst, m, farkas)
    h = _suffix_tables(E, inst.min_c, t_hi)
    totals = np.arange(t_lo, t_hi + 1)
    C = h[0][:, t_lo : t_hi + 1]  # (B, T)
    reachable = C < INF
    values = np.where(reachable, C.astype(float) - duals.delta * m * totals[None, :], np.inf)
    out = []
    for b in range(inst.num_branches):
        row = values[b]
        best = row.min()
        tied = np.flatnonzero(row == best)
        lots = [_reconstruct(E, h, b, int(totals[i]), inst.min_c) for i in tied]
        out.append((min(lots), float(best)))
    return out


def price_new_lot_type(inst: Instance, duals: Duals, b: int, m: int, farkas: bool = False) -> tuple[LotType, float]:
    """Best lot-type for column (b, ·, m) over the whole applicable set, with its reduced cost."""
    sub = _single_branch(inst, b)
    lot, g = _best_for_multiplicity(sub, _single_duals(duals, b), m, farkas)[0]
    return lot, g - duals.alpha[b]


def _single_branch(inst: Instance, b: int) -> Instance:
    from dataclasses import replace

    return replace(inst, branches=(inst.branches[b],), demand=inst.demand[b : b + 1].copy())


def _single_duals(duals: Duals, b: int) -> Duals:
    return Duals(duals.alpha[b : b + 1], duals.kappa, duals.mu_lo, duals.mu_hi, {}, [])


def _ranked_new(inst: Instance, duals: Duals, b: int, m: int, farkas: bool) -> Iterator[tuple[float, LotType]]:
    """(g(l), l) for branch b and multiplicity m in increasing order, ties lexicographic."""
    t_lo, t_hi = inst.params.total_range
    costs = entry_costs(inst, b, m)
    if farkas:
        costs = np.zeros_like(costs)
    return iter_best_lot_types(costs, inst.min_c, t_lo, t_hi, duals.delta * m)


def best_outside(
    inst: Instance, duals: Duals, b: int, m: int, excluded: set, farkas: bool = False
) -> tuple[float, LotType] | None:
    """Smallest (g(l), l) over lot-types not in ``excluded``."""
    for val, lot in _ranked_new(inst, duals, b, m, farkas):
        if lot not in excluded:
            return val, lot
    return None


def _new_multiplicities(inst: Instance, b: int, lot: LotType, m: int) -> tuple[int, ...]:
    return tuple(sorted({m} | multiplicity_window(inst, best_multiplicity(inst, b, lot))))


def _y_reduced_costs(ws: WorkingSet, duals: Duals, pool: list[LotType]) -> np.ndarray:
    rc = np.full(len(pool), float(duals.kappa))
    pos = {l: i for i, l in enumerate(pool)}
    for cut, g in zip(ws.cuts, duals.gamma):
        for l in cut:
            rc[pos[l]] += g
    for (b, l), v in duals.beta.items():
        rc[pos[l]] -= v
    return rc


def _bundle(inst: Instance, lot: LotType, rcbar: np.ndarray, branches, deficiency: float, cls) -> list:
    """One action per branch that gains from the lot-type; ``rcbar`` is (B, M)."""
    out = []
    for b in branches:
        mi = int(np.argmin(rcbar[b]))
        if rcbar[b, mi] < 0:
            m = inst.multiplicities[mi]
            out.append(cls(int(b), lot, _new_multiplicities(inst, int(b), lot, m), -deficiency))
    return out


def price_existing(
    inst: Instance,
    ws: WorkingSet,
    duals: Duals,
    tol_rc: float = TOL_RC,
    costs: CostCache | None = None,
    farkas: bool = False,
) -> list:
    """Improving actions on pool lot-types: multiplicities for admitted pairs, bundles otherwise."""
    costs = costs or CostCache(inst)
    pool = ws.pool()
    if not pool:
        return []
    B, P = inst.num_branches, len(pool)
    mults = np.array(inst.multiplicities, dtype=np.int64)
    pos = {l: i for i, l in enumerate(pool)}
    in_zeta = np.zeros((B, P), dtype=bool)
    in_eta = np.zeros((B, P, len(mults)), dtype=bool)
    beta = np.zeros((B, P))
    midx = {m: i for i, m in enumerate(inst.multiplicities)}
    for (b, l), ms in ws.eta.items():
        p = pos[l]
        in_zeta[b, p] = True
        beta[b, p] = duals.beta.get((b, l), 0.0)
        for m in ms:
            in_eta[b, p, midx[m]] = True
    sizes = np.array([sum(l) for l in pool], dtype=float)
    base = np.zeros((B, P, len(mults))) if farkas else costs.table(pool).astype(float)
    rcbar = base - duals.alpha[:, None, None] - duals.delta * mults[None, None, :] * sizes[None, :, None]

    actions = []
    rc = rcbar + beta[:, :, None]
    rc[~in_zeta] = np.inf
    rc[in_eta] = np.inf
    for b, p, mi in np.argwhere(rc < -tol_rc):
        actions.append(EnlargeEta(int(b), pool[p], int(mults[mi]), float(rc[b, p, mi])))

    need = np.maximum(0.0, -rcbar.min(axis=2))  # (B, P)
    need[in_zeta] = 0.0
    deficiency = need.sum(axis=0) - _y_reduced_costs(ws, duals, pool)
    for p in np.flatnonzero(deficiency > tol_rc):
        branches = np.flatnonzero(need[:, p] > 0)
        actions.extend(_bundle(inst, pool[p], rcbar[:, p, :], branches, float(deficiency[p]), AddZeta))
    return actions


class _PrefixSearch:
    """Best-first search for lot-types maximising Σ_b max(0, -min_m rc̄_{b,l,m})."""

    def __init__(self, inst: Instance, duals: Duals, farkas: bool, threads: int = 1):
        self.inst = inst
        self.t_lo, self.t_hi = inst.params.total_range
        mults = inst.multiplicities

        def tables(m):
            E = _entry_table(inst, m, farkas)
            return E, _suffix_tables(E, inst.min_c, self.t_hi)

        if threads > 1 and len(mults) > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                built = list(ex.map(tables, mults))
        else:
            built = [tables(m) for m in mults]
        self.E = np.stack([e for e, _ in built])  # (M, B, S, V)
        self.H = np.stack([h for _, h in built])  # (M, S+1, B, T)
        self.slopes = duals.delta * np.asarray(mults, dtype=float)
        self.alpha = duals.alpha
        self.totals = np.arange(self.t_hi + 1, dtype=float)

    def branch_values(self, depth: int, pc: np.ndarray, partial: int) -> np.ndarray | None:
        """Per-branch best rc̄ over completions of the prefix; None if none is applicable."""
        r_lo, r_hi = max(self.t_lo - partial, 0), self.t_hi - partial
        if r_hi < r_lo:
            return None
        tail = self.H[:, depth, :, r_lo : r_hi + 1]  # (M, B, R)
        ok = tail < INF
        if not ok.any():
            return None
        vals = (pc[:, :, None] + tail).astype(float)
        vals -= self.slopes[:, None, None] * self.totals[None, None, partial + r_lo : partial + r_hi + 1]
        vals[~ok] = np.inf
        return vals.min(axis=(0, 2)) - self.alpha

    @staticmethod
    def gain(values: np.ndarray) -> float:
        return float(np.maximum(0.0, -values).sum())

    def search(self, threshold: float, skip: set, limit: int) -> list[tuple[float, LotType, np.ndarray]]:
        """Up to ``limit`` lot-types outside ``skip`` with gain > threshold, best first."""
        inst = self.inst
        num_s, width = inst.num_sizes, inst.max_c - inst.min_c + 1
        found = []
        pc0 = np.zeros(self.H.shape[0:3:2], dtype=np.int64)  # (M, B)
        v0 = self.branch_values(0, pc0, 0)
        if v0 is None:
            return found
        heap = [(-self.gain(v0), (), 0, pc0)]
        while heap and len(found) < limit:
            neg, prefix, partial, pc = heapq.heappop(heap)
            if -neg <= threshold:
                break
            depth = len(prefix)
            if depth == num_s:
                if prefix not in skip:
                    found.append((-neg, prefix, self._rcbar(prefix)))
                continue
            for j in range(width):
                v = inst.min_c + j
                if partial + v > self.t_hi:
                    break
                child = pc + self.E[:, :, depth, j]
                vals = self.branch_values(depth + 1, child, partial + v)
                if vals is None:
                    continue
                g = self.gain(vals)
                if g > threshold:
                    heapq.heappush(heap, (-g, prefix + (v,), partial + v, child))
        return found

    def _rcbar(self, lot: LotType) -> np.ndarray:
        """(B, M) β-free reduced costs of a complete lot-type."""
        idx = np.asarray(lot) - self.inst.min_c
        c = self.E[:, :, np.arange(len(lot)), idx].sum(axis=2)  # (M, B)
        vals = c.astype(float) - self.slopes[:, None] * float(sum(lot))
        return (vals - self.alpha[None, :]).T


def _action_key(a) -> tuple:
    # bundle members share rc, so ordering by lot before branch keeps them together
    m = a.multiplicity if isinstance(a, EnlargeEta) else a.multiplicities
    return (a.rc, _KIND_ORDER[type(a)], a.lot, a.branch, m)


def pricing_round(
    inst: Instance,
    ws: WorkingSet,
    duals: Duals,
    tol_rc: float = TOL_RC,
    cap: int = DEFAULT_CAP,
    costs: CostCache | None = None,
    farkas: bool = False,
    threads: int = 1,
) -> PricingResult:
    """One full pricing pass; ``proven_clean`` reflects the uncapped scan."""
    costs = costs or CostCache(inst)
    actions = price_existing(inst, ws, duals, tol_rc, costs, farkas)

    # lot-types outside the pool: a bundle pays off once its gain beats κ
    search = _PrefixSearch(inst, duals, farkas, threads)
    limit = max(1, cap // max(1, inst.num_branches // 4))
    for gain, lot, rcbar in search.search(duals.kappa + tol_rc, ws.lot_pool, limit):
        deficiency = gain - duals.kappa
        actions.extend(_bundle(inst, lot, rcbar, range(inst.num_branches), deficiency, NewLotType))

    actions.sort(key=_action_key)
    return PricingResult(
        actions=_take(actions, cap),
        best_rc=min((a.rc for a in actions), default=0.0),
        proven_clean=not actions,
        num_improving=len(actions),
    )


def _take(actions: list, cap: int) -> list:
    """The first ``cap`` actions, extended so no bundle is split."""
    if cap <= 0:
        return []
    out = actions[:cap]
    if len(actions) > cap and not isinstance(out[-1], EnlargeEta):
        last = out[-1].lot
        out.extend(a for a in actions[cap:] if not isinstance(a, EnlargeEta) and a.lot == last)
    return out
