"""Incumbent, restricted master, dives on the fractional support, cover cuts, pricing.

The loop stops with a proof when pricing finds no improving column and the
certified RMP bound, rounded up to the integer cost grid, reaches the
incumbent.  Every dive set is recorded: the best solution whose selected
lot-types lie inside it was computed exactly, which is what licenses the cover
cut  Σ_{l∈C} y_l ≤ k-1  on the RMP.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from lotdesign.heuristic import initial_incumbent
from lotdesign.lp import TOL_DUAL, TOL_GAP, LpStatus, solve_lp
from lotdesign.model import CostCache, Instance, LotType, count_applicable_lot_types
from lotdesign.pricing import DEFAULT_CAP, TOL_RC, _new_multiplicities, best_outside, pricing_round
from lotdesign.rmp import (
    DEFAULT_EPS,
    AddCut,
    Duals,
    NewLotType,
    RmpSolution,
    WorkingSet,
    apply_actions,
    build_rmp,
    extract_duals,
    fractional_support,
    initialize_working_set,
    interpret,
)
from lotdesign.subsolver import Assignment, solve_restricted

logger = logging.getLogger(__name__)


class Conclusion(str, enum.Enum):
    PROVEN_OPTIMAL = "ProvenOptimal"
    BOUND_ONLY = "BoundOnly"
    LIMIT_REACHED = "LimitReached"


@dataclass
class SolverConfig:
    eps: float = DEFAULT_EPS
    tol_rc: float = TOL_RC
    max_rounds: int = 100_000
    cap: int = DEFAULT_CAP
    time_limit: float | None = None
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.tol_rc <= 0 or self.max_rounds < 1 or self.cap < 1 or self.threads < 1:
            raise ValueError("tolerances and limits must be positive")
        if self.time_limit is not None and self.time_limit < 0:
            raise ValueError("time_limit must be >= 0")


@dataclass
class DiveRecord:
    lots: tuple[LotType, ...]
    cutoff: int
    best_cost: int | None  # best cost below cutoff inside the set, None if none
    has_cut: bool
    escalated: bool = False

    def to_dict(self) -> dict:
        return {
            "lots": [list(l) for l in self.lots],
            "cutoff": self.cutoff,
            "best_cost": self.best_cost,
            "has_cut": self.has_cut,
            "escalated": self.escalated,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiveRecord":
        return cls(
            lots=tuple(tuple(l) for l in d["lots"]),
            cutoff=int(d["cutoff"]),
            best_cost=None if d["best_cost"] is None else int(d["best_cost"]),
            has_cut=bool(d["has_cut"]),
            escalated=bool(d.get("escalated", False)),
        )


@dataclass
class Certificate:
    incumbent_cost: int
    final_bound: float | None  # last RMP objective: inf when infeasible, None when no RMP was solved
    lower_bound: int  # certified global lower bound on the integer cost grid
    proven_clean: bool
    conclusion: Conclusion
    dives: list[DiveRecord]
    final_working_set: WorkingSet
    final_duals: Duals | None = None
    exhaustive: bool = False

    @property
    def gap(self) -> int:
        return max(self.incumbent_cost - self.lower_bound, 0)

    @property
    def cuts(self) -> list[DiveRecord]:
        return [d for d in self.dives if d.has_cut]

    def to_dict(self) -> dict:
        return {
            "incumbent_cost": self.incumbent_cost,
            "final_bound": None if self.final_bound is None or math.isinf(self.final_bound) else self.final_bound,
            "final_rmp_infeasible": self.final_bound is not None and math.isinf(self.final_bound),
            "lower_bound": self.lower_bound,
            "gap": self.gap,
            "proven_clean": self.proven_clean,
            "conclusion": self.conclusion.value,
            "exhaustive": self.exhaustive,
            "dives": [d.to_dict() for d in self.dives],
            "final_working_set": self.final_working_set.to_dict(),
            "final_duals": None if self.final_duals is None else self.final_duals.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        return cls(
            incumbent_cost=int(d["incumbent_cost"]),
            final_bound=_bound_from(d),
            lower_bound=int(d["lower_bound"]),
            proven_clean=bool(d["proven_clean"]),
            conclusion=Conclusion(d["conclusion"]),
            dives=[DiveRecord.from_dict(x) for x in d["dives"]],
            final_working_set=WorkingSet.from_dict(d["final_working_set"]),
            final_duals=None if d.get("final_duals") is None else Duals.from_dict(d["final_duals"]),
            exhaustive=bool(d.get("exhaustive", False)),
        )


def _bound_from(d: dict) -> float | None:
    if d["final_rmp_infeasible"]:
        return math.inf
    return None if d["final_bound"] is None else float(d["final_bound"])


@dataclass
class Counters:
    pricing_rounds: int = 0
    lp_solves: int = 0
    lp_iterations: int = 0
    dives: int = 0
    cover_cuts: int = 0
    columns_added: int = 0
    initial_lp_variables: int = 0
    initial_lp_constraints: int = 0
    final_lp_variables: int = 0
    final_lp_constraints: int = 0
    peak_pool: int = 0
    wall_time: float = 0.0


@dataclass
class SolveReport:
    assignment: Assignment
    certificate: Certificate
    counters: Counters
    config: SolverConfig = field(default_factory=SolverConfig)

    @property
    def conclusion(self) -> Conclusion:
        return self.certificate.conclusion

    def to_dict(self) -> dict:
        return {
            "assignment": self.assignment.to_dict(),
            "certificate": self.certificate.to_dict(),
            "counters": asdict(self.counters),
            "config": asdict(self.config),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveReport":
        return cls(
            assignment=Assignment.from_dict(d["assignment"]),
            certificate=Certificate.from_dict(d["certificate"]),
            counters=Counters(**d["counters"]),
            config=SolverConfig(**d["config"]),
        )


def certified_lower_bound(bound: float, inst: Instance, tol_rc: float) -> float:
    """Round an RMP optimum with clean pricing up to the integer cost grid.

    Pricing accepts reduced costs down to -tol_rc on x and y columns; x sums
    to |B| and y to at most k over any feasible point, so the full LP can sit
    at most tol_rc·(|B| + k) below the RMP optimum.  The remaining terms cover
    LP round-off.
    """
    if math.isinf(bound):
        return math.inf
    slack = tol_rc * (inst.num_branches + inst.k) + TOL_DUAL * inst.k + TOL_GAP * (1.0 + abs(bound))
    return max(0, math.ceil(bound - slack))


def _covered(lots, explored) -> bool:
    s = frozenset(lots)
    return any(s <= e for e in explored)


def _lot_reduced_costs(inst: Instance, ws: WorkingSet, duals: Duals, lots, costs: CostCache) -> list[float]:
    """Smallest reduced cost over (b, m) for each lot-type, admitted or not."""
    if not lots:
        return []
    table = costs.table(list(lots)).astype(float)  # (B, P, M)
    mults = np.array(inst.multiplicities, dtype=float)
    sizes = np.array([sum(l) for l in lots], dtype=float)
    beta = np.array([[duals.beta.get((b, l), 0.0) for l in lots] for b in range(inst.num_branches)])
    rc = table - duals.alpha[:, None, None] - duals.delta * mults[None, None, :] * sizes[None, :, None] + beta[:, :, None]
    return rc.min(axis=(0, 2)).tolist()


def _escalation_set(inst, ws, rmp: RmpSolution, lbar, explored, costs) -> tuple[frozenset | None, bool]:
    """A new dive set after pricing is clean but the bound still trails the incumbent.

    Returns (set, exhaustive): ``exhaustive`` means an explored set already holds
    every applicable lot-type, so nothing remains to search.
    """
    support = {l for l, v in rmp.y.items() if v > 1e-9}
    base = frozenset(lbar) | support
    if base and not _covered(base, explored):
        return base, False
    # the largest explored superset is maximal, so adding any outside lot-type
    # yields a set that no earlier dive covered
    host = min((e for e in explored if base <= e), key=lambda e: (-len(e), sorted(e)))
    outside = [l for l in ws.pool() if l not in host]
    if outside:
        rcs = _lot_reduced_costs(inst, ws, rmp.duals, outside, costs)
        best = min(zip(rcs, outside))[1]
        return host | {best}, False
    # the whole pool is explored; take the best unseen lot-type from the DP
    best_val, best_lot = math.inf, None
    for b in range(inst.num_branches):
        for m in inst.multiplicities:
            hit = best_outside(inst, rmp.duals, b, m, host)
            if hit is not None:
                rc = hit[0] - rmp.duals.alpha[b]
                if (rc, hit[1]) < (best_val, best_lot or ()):
                    best_val, best_lot = rc, hit[1]
    if best_lot is None:
        return None, True
    return host | {best_lot}, False


def _admit(inst: Instance, lot: LotType, costs: CostCache) -> NewLotType:
    """Column action that brings ``lot`` into the pool on the branch it fits best."""
    fit = costs.table([lot])[:, 0, :]  # (B, M)
    b, mi = np.unravel_index(int(np.argmin(fit)), fit.shape)
    m = inst.multiplicities[int(mi)]
    return NewLotType(int(b), lot, _new_multiplicities(inst, int(b), lot, m))


def solve(inst: Instance, config: SolverConfig | None = None) -> SolveReport:
    config = config or SolverConfig()
    t0 = time.perf_counter()
    costs = CostCache(inst)
    counters = Counters()

    incumbent = initial_incumbent(inst, costs)
    logger.info("heuristic incumbent cost %d", incumbent.total_cost)
    ws = initialize_working_set(inst, incumbent)
    ws.check(inst.multiplicities)
    explored: list[frozenset] = []
    dives: list[DiveRecord] = []

    warm = None
    lower_bound = 0
    final_bound: float | None = None
    final_ws = ws.copy()
    final_duals: Duals | None = None
    proven_clean = False
    exhaustive = False
    conclusion: Conclusion | None = None

    def over_limit() -> bool:
        if config.time_limit is not None and time.perf_counter() - t0 >= config.time_limit:
            return True
        return counters.lp_solves >= config.max_rounds

    def dive(lots, escalated=False) -> None:
        nonlocal incumbent
        lots = tuple(sorted(lots))
        cutoff = incumbent.total_cost
        res = solve_restricted(inst, lots, costs, cutoff=cutoff)
        has_cut = len(lots) >= inst.k
        dives.append(DiveRecord(lots, cutoff, None if res is None else res.total_cost, has_cut, escalated))
        explored.append(frozenset(lots))
        counters.dives += 1
        if res is not None and res.total_cost < incumbent.total_cost:
            logger.info("dive on %d lot-types improved incumbent %d -> %d", len(lots), incumbent.total_cost, res.total_cost)
            incumbent = res
        if has_cut:
            missing = [l for l in lots if l not in ws.lot_pool]
            apply_actions(ws, [_admit(inst, l, costs) for l in missing] + [AddCut(frozenset(lots))])
            counters.cover_cuts += 1

    while True:
        if incumbent.total_cost <= lower_bound:
            conclusion = Conclusion.PROVEN_OPTIMAL
            break
        if over_limit():
            conclusion = Conclusion.LIMIT_REACHED
            break

        lp = build_rmp(inst, ws, costs)
        t_lp = time.perf_counter()
        sol = solve_lp(lp, warm)
        if sol.status is LpStatus.FAILED and warm is not None:
            sol = solve_lp(lp)
        logger.debug(
            "RMP %d x %d: %s %.4f in %d iterations, %.2fs",
            lp.num_rows,
            lp.num_cols,
            sol.status.value,
            sol.objective,
            sol.iterations,
            time.perf_counter() - t_lp,
        )
        counters.lp_solves += 1
        counters.lp_iterations += sol.iterations
        if counters.lp_solves == 1:
            counters.initial_lp_variables, counters.initial_lp_constraints = lp.num_cols, lp.num_rows
        counters.final_lp_variables, counters.final_lp_constraints = lp.num_cols, lp.num_rows
        counters.peak_pool = max(counters.peak_pool, len(ws.lot_pool))
        if sol.status is LpStatus.FAILED or sol.status is LpStatus.UNBOUNDED:
            logger.error("RMP solve ended with status %s", sol.status.value)
            conclusion = Conclusion.LIMIT_REACHED
            break
        warm = sol.basis
        final_ws = ws.copy()
        proven_clean = False

        farkas = sol.status is LpStatus.INFEASIBLE
        if farkas:
            duals = extract_duals(lp, sol, ws)
            bound = math.inf
            rmp = None
        else:
            rmp = interpret(lp, sol, ws)
            duals = rmp.duals
            bound = sol.objective
        final_bound = bound
        final_duals = duals

        promising = not farkas and certified_lower_bound(bound, inst, config.tol_rc) < incumbent.total_cost
        lbar: list[LotType] = []
        if promising:
            assert rmp is not None
            lbar = fractional_support(rmp, config.eps)
            if lbar and not _covered(lbar, explored):
                dive(lbar)
                continue

        result = pricing_round(inst, ws, duals, config.tol_rc, config.cap, costs, farkas, config.threads)
        counters.pricing_rounds += 1
        if result.actions:
            before = ws.num_x_columns() + len(ws.lot_pool)
            apply_actions(ws, result.actions)
            counters.columns_added += ws.num_x_columns() + len(ws.lot_pool) - before
            continue

        proven_clean = True
        lb = certified_lower_bound(bound, inst, config.tol_rc)
        if lb >= incumbent.total_cost:
            lower_bound = incumbent.total_cost
            conclusion = Conclusion.PROVEN_OPTIMAL
            break
        lower_bound = max(lower_bound, int(lb))
        assert rmp is not None
        target, exhaustive = _escalation_set(inst, ws, rmp, lbar, explored, costs)
        if exhaustive:
            lower_bound = incumbent.total_cost
            conclusion = Conclusion.PROVEN_OPTIMAL
            break
        assert target is not None
        logger.info("clean pricing with bound %.3f < %d: escalating dive to %d lot-types", bound, incumbent.total_cost, len(target))
        dive(target, escalated=True)

    counters.wall_time = time.perf_counter() - t0
    if conclusion is Conclusion.PROVEN_OPTIMAL:
        lower_bound = incumbent.total_cost
    cert = Certificate(
        incumbent_cost=incumbent.total_cost,
        final_bound=final_bound,
        lower_bound=min(lower_bound, incumbent.total_cost),
        proven_clean=proven_clean,
        conclusion=conclusion,
        dives=dives,
        final_working_set=final_ws,
        final_duals=final_duals,
        exhaustive=exhaustive,
    )
    logger.info(
        "%s: cost %d, %d pricing rounds, %d dives, %d cuts, %.2fs",
        conclusion.value,
        incumbent.total_cost,
        counters.pricing_rounds,
        counters.dives,
        counters.cover_cuts,
        counters.wall_time,
    )
    return SolveReport(assignment=incumbent, certificate=cert, counters=counters, config=config)


@dataclass
class CertificateCheck:
    ok: bool
    reasons: list[str]

    def __bool__(self) -> bool:
        return self.ok


def verify_certificate(inst: Instance, report: SolveReport) -> CertificateCheck:
    """Re-derive every claim of a report independently of the run that produced it."""
    reasons: list[str] = []
    cert = report.certificate
    a = report.assignment
    costs = CostCache(inst)

    problems = a.problems(inst)
    reasons.extend(problems)
    if a.total_cost != cert.incumbent_cost:
        reasons.append("cost mismatch: assignment and certificate disagree")

    for d in cert.dives:
        res = solve_restricted(inst, d.lots, costs, cutoff=d.cutoff)
        got = None if res is None else res.total_cost
        if got != d.best_cost:
            reasons.append(f"dive mismatch on {len(d.lots)} lot-types: stored {d.best_cost}, recomputed {got}")
        if d.best_cost is not None and d.best_cost < cert.incumbent_cost:
            reasons.append("a dive found a solution cheaper than the incumbent")
        if d.cutoff < cert.incumbent_cost:
            reasons.append("dive cutoff below the final incumbent")
        if d.has_cut != (len(d.lots) >= inst.k):
            reasons.append("cut flag inconsistent with dive set size")

    ws = cert.final_working_set
    cut_sets = {frozenset(d.lots) for d in cert.dives if d.has_cut}
    ws_cuts = set(ws.cuts)
    if ws_cuts - cut_sets:
        reasons.append("unexplored support: a cover cut has no recorded dive")
    if cut_sets - ws_cuts:
        reasons.append("unexplored support: a recorded dive lacks its cover cut")
    try:
        ws.check(inst.multiplicities)
    except ValueError as exc:
        reasons.append(f"working set invalid: {exc}")
        return CertificateCheck(False, reasons)

    if cert.final_bound is None:
        # stopped before the first RMP solve, so no bound is claimed
        if cert.proven_clean:
            reasons.append("clean pricing claimed without an RMP solve")
        if cert.conclusion is Conclusion.PROVEN_OPTIMAL and cert.incumbent_cost != 0:
            reasons.append("ceiling test fails: no bound supports the proof")
        return CertificateCheck(not reasons, reasons)

    lp = build_rmp(inst, ws, costs)
    sol = solve_lp(lp)
    if sol.status is LpStatus.INFEASIBLE:
        bound = math.inf
    elif sol.status is LpStatus.OPTIMAL:
        bound = sol.objective
    else:
        reasons.append(f"final RMP re-solve ended with status {sol.status.value}")
        return CertificateCheck(False, reasons)
    if math.isinf(bound) != math.isinf(cert.final_bound) or (
        not math.isinf(bound) and abs(bound - cert.final_bound) > TOL_GAP * (1 + abs(bound))
    ):
        reasons.append(f"bound mismatch: stored {cert.final_bound}, recomputed {bound}")

    if cert.proven_clean:
        reasons.extend(_check_duals(inst, ws, cert, costs, report.config.tol_rc))

    if cert.conclusion is Conclusion.PROVEN_OPTIMAL:
        if cert.lower_bound < cert.incumbent_cost:
            reasons.append("proof claimed with a lower bound below the incumbent")
        trivial = cert.incumbent_cost == 0
        by_bound = cert.proven_clean and certified_lower_bound(cert.final_bound, inst, report.config.tol_rc) >= cert.incumbent_cost
        by_cover = cert.exhaustive and any(
            len(d.lots) >= count_applicable_lot_types(inst.params) for d in cert.dives
        )
        if not (trivial or by_bound or by_cover):
            reasons.append("ceiling test fails: bound does not reach the incumbent")
    return CertificateCheck(not reasons, reasons)


def _check_duals(inst: Instance, ws: WorkingSet, cert: Certificate, costs: CostCache, tol_rc: float) -> list[str]:
    """The stored duals must be feasible for every column, in the RMP or not, and price the bound."""
    duals = cert.final_duals
    if duals is None:
        return ["clean pricing claimed without stored duals"]
    reasons = []
    farkas = math.isinf(cert.final_bound)
    if len(duals.alpha) != inst.num_branches or len(duals.gamma) != len(ws.cuts):
        return ["stored duals do not match the final working set"]
    signed = [duals.kappa, duals.mu_lo, duals.mu_hi, *duals.beta.values(), *duals.gamma]
    if min(signed, default=0.0) < 0:
        reasons.append("stored duals violate sign conditions")
    rcs = duals.rmp_reduced_costs(inst, ws, costs, farkas)
    if min(rcs.values(), default=0.0) < -tol_rc:
        reasons.append("stored duals are not dual feasible on the final RMP")
    dual_obj = duals.objective(inst)
    if farkas:
        if dual_obj <= 0:
            reasons.append("stored Farkas ray does not certify infeasibility")
    elif abs(dual_obj - cert.final_bound) > TOL_GAP * (1 + abs(cert.final_bound)):
        reasons.append("stored duals do not reproduce the final bound")
    pr = pricing_round(inst, ws, duals, tol_rc, 1, costs, farkas)
    if not pr.proven_clean:
        reasons.append("pricing is not clean on the final RMP")
    return reasons
