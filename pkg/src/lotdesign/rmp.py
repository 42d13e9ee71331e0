"""The restricted master problem over a working set of lot-types and its duals.

Column keys are ``("x", b, lot, m)`` and ``("y", lot)``; row keys are
``("conv", b)``, ``("k",)``, ``("supply_lo",)``, ``("supply_hi",)``,
``("bind", b, lot)`` and ``("cut", i)``.  Keys are stable as the working set
grows, which is what lets the LP warm-start across rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from lotdesign.lp import EQ, GE, TOL_DUAL, LinearProgram, LpSolution
from lotdesign.model import (
    CostCache,
    Instance,
    LotType,
    best_multiplicity,
    multiplicity_window,
    top_n_lot_types,
)

DEFAULT_EPS = 0.15


class EngineFault(RuntimeError):
    """LP duals violate their sign conditions beyond tolerance."""


@dataclass
class WorkingSet:
    num_branches: int
    k: int
    lot_pool: set[LotType] = field(default_factory=set)
    zeta: dict[int, set[LotType]] = field(default_factory=dict)
    eta: dict[tuple[int, LotType], set[int]] = field(default_factory=dict)
    cuts: list[frozenset[LotType]] = field(default_factory=list)

    def pool(self) -> list[LotType]:
        return sorted(self.lot_pool)

    def zeta_of(self, b: int) -> list[LotType]:
        return sorted(self.zeta.get(b, ()))

    def num_x_columns(self) -> int:
        return sum(len(v) for v in self.eta.values())

    def check(self, multiplicities: Iterable[int] | None = None) -> None:
        mult = set(multiplicities) if multiplicities is not None else None
        for b, lots in self.zeta.items():
            if not 0 <= b < self.num_branches:
                raise ValueError(f"unknown branch {b}")
            if not lots <= self.lot_pool:
                raise ValueError(f"zeta({b}) is not contained in the pool")
            for l in lots:
                ms = self.eta.get((b, l))
                if not ms:
                    raise ValueError(f"eta({b}, {l}) is empty")
                if mult is not None and not ms <= mult:
                    raise ValueError(f"eta({b}, {l}) has multiplicities outside M")
        for (b, l) in self.eta:
            if l not in self.zeta.get(b, ()):
                raise ValueError(f"eta({b}, {l}) without zeta membership")
        for c in self.cuts:
            if len(c) < self.k:
                raise ValueError("cover cut smaller than k")
        if len(set(self.cuts)) != len(self.cuts):
            raise ValueError("duplicate cover cut")

    def copy(self) -> "WorkingSet":
        # lot-types and cuts are immutable, so only the containers need copying
        return WorkingSet(
            self.num_branches,
            self.k,
            set(self.lot_pool),
            {b: set(v) for b, v in self.zeta.items()},
            {key: set(v) for key, v in self.eta.items()},
            list(self.cuts),
        )

    def to_dict(self) -> dict:
        return {
            "num_branches": self.num_branches,
            "k": self.k,
            "lot_pool": [list(l) for l in self.pool()],
            "columns": [
                {"branch": b, "lot": list(l), "multiplicities": sorted(self.eta[(b, l)])}
                for b in range(self.num_branches)
                for l in self.zeta_of(b)
            ],
            "cuts": [[list(l) for l in sorted(c)] for c in self.cuts],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WorkingSet":
        ws = cls(num_branches=int(data["num_branches"]), k=int(data["k"]))
        ws.lot_pool = {tuple(l) for l in data["lot_pool"]}
        for col in data["columns"]:
            b, l = int(col["branch"]), tuple(col["lot"])
            ws.zeta.setdefault(b, set()).add(l)
            ws.eta[(b, l)] = set(col["multiplicities"])
        ws.cuts = [frozenset(tuple(l) for l in c) for c in data["cuts"]]
        return ws


# -- actions ---------------------------------------------------------------------


@dataclass(frozen=True)
class EnlargeEta:
    branch: int
    lot: LotType
    multiplicity: int
    rc: float = 0.0


@dataclass(frozen=True)
class AddZeta:
    branch: int
    lot: LotType
    multiplicities: tuple[int, ...]
    rc: float = 0.0


@dataclass(frozen=True)
class NewLotType:
    branch: int
    lot: LotType
    multiplicities: tuple[int, ...]
    rc: float = 0.0


@dataclass(frozen=True)
class AddCut:
    lots: frozenset[LotType]


Action = EnlargeEta | AddZeta | NewLotType | AddCut


def apply_actions(ws: WorkingSet, actions: Iterable[Action]) -> WorkingSet:
    """Apply column, row and cut actions to ``ws`` in place; duplicates are no-ops."""
    for act in actions:
        if isinstance(act, AddCut):
            if len(act.lots) < ws.k:
                raise ValueError("a cover cut needs at least k lot-types")
            unknown = act.lots - ws.lot_pool
            if unknown:
                raise ValueError(f"cut references lot-types outside the pool: {sorted(unknown)}")
            if act.lots in ws.cuts:
                continue
            ws.cuts.append(act.lots)
            continue
        b = act.branch
        if not 0 <= b < ws.num_branches:
            raise ValueError(f"unknown branch {b}")
        if isinstance(act, EnlargeEta):
            if act.lot not in ws.zeta.get(b, ()):
                raise ValueError(f"lot-type {act.lot} is not admitted for branch {b}")
            ws.eta[(b, act.lot)].add(act.multiplicity)
            continue
        if isinstance(act, AddZeta) and act.lot not in ws.lot_pool:
            raise ValueError(f"lot-type {act.lot} is not in the pool")
        if not act.multiplicities:
            raise ValueError("an admitted lot-type needs at least one multiplicity")
        ws.lot_pool.add(act.lot)
        ws.zeta.setdefault(b, set()).add(act.lot)
        ws.eta.setdefault((b, act.lot), set()).update(act.multiplicities)
    return ws


def initialize_working_set(inst: Instance, incumbent, top: int = 3) -> WorkingSet:
    """Seed ζ(b) with the ``top`` best-fitting lot-types per branch plus the incumbent's.

    η(b, l) is the window {m̂-1, m̂, m̂+1} ∩ M around the best multiplicity; the
    incumbent's own multiplicity is added so the incumbent stays RMP-feasible.
    """
    ws = WorkingSet(num_branches=inst.num_branches, k=inst.k)
    for b in range(inst.num_branches):
        lots = {l for l, _ in top_n_lot_types(inst, b, top)}
        if incumbent is not None:
            lots.add(incumbent.lot_types[b])
        ws.zeta[b] = set(lots)
        for l in lots:
            ws.eta[(b, l)] = multiplicity_window(inst, best_multiplicity(inst, b, l))
        if incumbent is not None:
            ws.eta[(b, incumbent.lot_types[b])].add(incumbent.multiplicities[b])
        ws.lot_pool |= lots
    if incumbent is not None:
        ws.lot_pool |= set(incumbent.selected)
    return ws


# -- the LP ------------------------------------------------------------------------


def build_rmp(inst: Instance, ws: WorkingSet, costs: CostCache | None = None) -> LinearProgram:
    costs = costs or CostCache(inst)
    pool = ws.pool()
    costs.ensure(pool)
    midx = {m: i for i, m in enumerate(inst.multiplicities)}
    B = inst.num_branches

    col_names: list = []
    col_cost: list[float] = []
    rows_i: list[int] = []
    cols_j: list[int] = []
    vals: list[float] = []
    row_names: list = []
    senses: list[str] = []
    rhs: list[float] = []

    def add_row(name, sense, b_val):
        row_names.append(name)
        senses.append(sense)
        rhs.append(float(b_val))
        return len(row_names) - 1

    conv = [add_row(("conv", b), EQ, 1) for b in range(B)]
    k_row = add_row(("k",), GE, -inst.k)
    lo_row = add_row(("supply_lo",), GE, inst.supply_lo)
    hi_row = add_row(("supply_hi",), GE, -inst.supply_hi)
    bind_rows = {}
    for b in range(B):
        for l in ws.zeta_of(b):
            bind_rows[(b, l)] = add_row(("bind", b, l), GE, 0)
    cut_rows = [add_row(("cut", i), GE, -(inst.k - 1)) for i in range(len(ws.cuts))]

    def entry(i, j, a):
        rows_i.append(i)
        cols_j.append(j)
        vals.append(a)

    for b in range(B):
        for l in ws.zeta_of(b):
            size = sum(l)
            crow = costs[l][b]
            for m in sorted(ws.eta[(b, l)]):
                j = len(col_names)
                col_names.append(("x", b, l, m))
                col_cost.append(float(crow[midx[m]]))
                entry(conv[b], j, 1.0)
                entry(lo_row, j, float(m * size))
                entry(hi_row, j, -float(m * size))
                entry(bind_rows[(b, l)], j, -1.0)
    lots_in_cut = [set(c) for c in ws.cuts]
    for l in pool:
        j = len(col_names)
        col_names.append(("y", l))
        col_cost.append(0.0)
        entry(k_row, j, -1.0)
        for b in range(B):
            r = bind_rows.get((b, l))
            if r is not None:
                entry(r, j, 1.0)
        for i, c in enumerate(lots_in_cut):
            if l in c:
                entry(cut_rows[i], j, -1.0)

    matrix = sp.csc_matrix((vals, (rows_i, cols_j)), shape=(len(row_names), len(col_names)))
    return LinearProgram(
        costs=np.array(col_cost, dtype=float),
        matrix=matrix,
        senses=tuple(senses),
        rhs=np.array(rhs, dtype=float),
        col_names=tuple(col_names),
        row_names=tuple(row_names),
    )


@dataclass
class Duals:
    alpha: np.ndarray
    kappa: float
    mu_lo: float
    mu_hi: float
    beta: dict[tuple[int, LotType], float]
    gamma: list[float]

    @property
    def delta(self) -> float:
        """Net price of one piece of supply, μ_lo - μ_hi."""
        return self.mu_lo - self.mu_hi

    def objective(self, inst: Instance) -> float:
        """Dual objective; equals the RMP optimum at an optimal solve."""
        return float(
            self.alpha.sum()
            - inst.k * self.kappa
            + inst.supply_lo * self.mu_lo
            - inst.supply_hi * self.mu_hi
            - (inst.k - 1) * sum(self.gamma)
        )

    @classmethod
    def zero(cls, num_branches: int) -> "Duals":
        return cls(np.zeros(num_branches), 0.0, 0.0, 0.0, {}, [])

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "kappa": self.kappa,
            "mu_lo": self.mu_lo,
            "mu_hi": self.mu_hi,
            "beta": [{"branch": b, "lot": list(l), "value": v} for (b, l), v in sorted(self.beta.items())],
            "gamma": list(self.gamma),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Duals":
        return cls(
            alpha=np.array(d["alpha"], dtype=float),
            kappa=float(d["kappa"]),
            mu_lo=float(d["mu_lo"]),
            mu_hi=float(d["mu_hi"]),
            beta={(int(e["branch"]), tuple(e["lot"])): float(e["value"]) for e in d["beta"]},
            gamma=[float(g) for g in d["gamma"]],
        )

    def rmp_reduced_costs(self, inst: Instance, ws: "WorkingSet", costs: CostCache, farkas: bool = False) -> dict:
        """Reduced cost of every column of the RMP built from ``ws``."""
        out = {}
        for (b, l), ms in ws.eta.items():
            crow = costs[l][b]
            for m in ms:
                c = 0.0 if farkas else float(crow[inst.multiplicities.index(m)])
                out[("x", b, l, m)] = c - self.alpha[b] - m * sum(l) * self.delta + self.beta.get((b, l), 0.0)
        for l in ws.lot_pool:
            in_cuts = sum(g for g, c in zip(self.gamma, ws.cuts) if l in c)
            bind = sum(self.beta.get((b, l), 0.0) for b in range(ws.num_branches) if l in ws.zeta.get(b, ()))
            out[("y", l)] = self.kappa + in_cuts - bind
        return out


def extract_duals(lp: LinearProgram, sol: LpSolution, ws: WorkingSet, tol: float = TOL_DUAL) -> Duals:
    """Relabel row duals by family, clamping tiny sign violations on >= rows to zero."""
    assert lp.row_names is not None
    y = sol.dual
    scale = 1.0 + float(np.abs(y).max(initial=0.0))
    alpha = np.zeros(ws.num_branches)
    kappa = mu_lo = mu_hi = 0.0
    beta: dict[tuple[int, LotType], float] = {}
    gamma = [0.0] * len(ws.cuts)
    for i, name in enumerate(lp.row_names):
        v = float(y[i])
        if lp.senses[i] == GE:
            if v < -tol * scale:
                raise EngineFault(f"dual of row {name} is {v:.3g} < 0")
            v = max(v, 0.0)
        kind = name[0]
        if kind == "conv":
            alpha[name[1]] = v
        elif kind == "k":
            kappa = v
        elif kind == "supply_lo":
            mu_lo = v
        elif kind == "supply_hi":
            mu_hi = v
        elif kind == "bind":
            beta[(name[1], name[2])] = v
        elif kind == "cut":
            gamma[name[1]] = v
    return Duals(alpha, kappa, mu_lo, mu_hi, beta, gamma)


@dataclass
class RmpSolution:
    x: dict[tuple[int, LotType, int], float]
    y: dict[LotType, float]
    objective: float
    duals: Duals


def interpret(lp: LinearProgram, sol: LpSolution, ws: WorkingSet) -> RmpSolution:
    assert lp.col_names is not None
    x: dict = {}
    y: dict = {}
    for j, name in enumerate(lp.col_names):
        if name[0] == "x":
            x[(name[1], name[2], name[3])] = float(sol.primal[j])
        else:
            y[name[1]] = float(sol.primal[j])
    return RmpSolution(x=x, y=y, objective=sol.objective, duals=extract_duals(lp, sol, ws))


def fractional_support(sol: RmpSolution, eps: float = DEFAULT_EPS) -> list[LotType]:
    return sorted(l for l, v in sol.y.items() if v >= eps)


def lp_size(lp: LinearProgram) -> tuple[int, int]:
    return lp.num_cols, lp.num_rows


def x_column(inst: Instance, b: int, lot: Sequence[int], m: int, lp: LinearProgram) -> dict[int, float]:
    """Row coefficients of column x_{b,l,m} in ``lp`` (its binding row must exist)."""
    assert lp.row_names is not None
    index = {name: i for i, name in enumerate(lp.row_names)}
    size = sum(lot)
    col = {index[("conv", b)]: 1.0, index[("supply_lo",)]: float(m * size), index[("supply_hi",)]: -float(m * size)}
    bind = index.get(("bind", b, tuple(lot)))
    if bind is not None:
        col[bind] = -1.0
    return col
