"""Revised simplex for programs  min c'x  s.t.  A x (>= | =) b,  x >= 0.

Two phases with artificial variables, a sparse LU of the basis refreshed every
``REFACTOR_EVERY`` pivots with product-form eta updates in between, Dantzig
pricing and a Bland fallback once a run of degenerate pivots is detected.

Master problems of column generation are heavily degenerate, so the simplex
first runs on right-hand sides relaxed by tiny deterministic amounts (``>=``
rows only, which keeps feasible programs feasible).  The exact right-hand side
is then restored and the few rows it violates are repaired by dual simplex
pivots, so reported solutions are those of the unperturbed program.

Duals follow the sign convention of a minimization with ``>=`` rows: every
``>=`` row has a dual >= 0 at optimality, ``=`` rows are free.  When the
program is infeasible the returned duals are the phase-one multipliers, which
form a Farkas certificate: ``dual @ A <= 0`` column-wise and ``dual @ b > 0``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

TOL_FEAS = 1e-7
TOL_DUAL = 1e-7
TOL_GAP = 1e-6
TOL_PIVOT = 1e-9
REFACTOR_EVERY = 64
STALL_LIMIT = 50
PERTURB = 1e-6

GE = ">="
EQ = "="


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    FAILED = "failed"


@dataclass(frozen=True)
class LinearProgram:
    costs: np.ndarray
    matrix: sp.csc_matrix
    senses: tuple[str, ...]
    rhs: np.ndarray
    col_names: tuple[Hashable, ...] | None = None
    row_names: tuple[Hashable, ...] | None = None

    def __post_init__(self):
        m, n = self.matrix.shape
        if self.costs.shape != (n,) or self.rhs.shape != (m,) or len(self.senses) != m:
            raise ValueError("inconsistent program dimensions")
        if any(s not in (GE, EQ) for s in self.senses):
            raise ValueError("row senses must be '>=' or '='")
        if not (np.all(np.isfinite(self.costs)) and np.all(np.isfinite(self.rhs))):
            raise ValueError("non-finite cost or right-hand side")
        if not np.all(np.isfinite(self.matrix.data)):
            raise ValueError("non-finite coefficient")
        if self.col_names is not None and len(set(self.col_names)) != n:
            raise ValueError("column names must be unique")
        if self.row_names is not None and len(set(self.row_names)) != m:
            raise ValueError("row names must be unique")

    @classmethod
    def from_rows(
        cls,
        costs: Sequence[float],
        rows: Iterable[tuple[Mapping[int, float], str, float]],
        col_names: Sequence[Hashable] | None = None,
        row_names: Sequence[Hashable] | None = None,
    ) -> "LinearProgram":
        """Build from sparse rows given as ``({col: coef}, sense, rhs)``."""
        n = len(costs)
        ri, ci, vals, senses, rhs = [], [], [], [], []
        for i, (coefs, sense, b) in enumerate(rows):
            for j, a in coefs.items():
                if not 0 <= j < n:
                    raise ValueError(f"row {i} references column {j} outside 0..{n - 1}")
                if a != 0:
                    ri.append(i)
                    ci.append(j)
                    vals.append(float(a))
            senses.append(sense)
            rhs.append(float(b))
        matrix = sp.csc_matrix((vals, (ri, ci)), shape=(len(rhs), n))
        return cls(
            costs=np.asarray(costs, dtype=float),
            matrix=matrix,
            senses=tuple(senses),
            rhs=np.asarray(rhs, dtype=float),
            col_names=tuple(col_names) if col_names is not None else None,
            row_names=tuple(row_names) if row_names is not None else None,
        )

    @property
    def num_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_cols(self) -> int:
        return self.matrix.shape[1]

    def col_name(self, j: int) -> Hashable:
        return self.col_names[j] if self.col_names is not None else ("col", j)

    def row_name(self, i: int) -> Hashable:
        return self.row_names[i] if self.row_names is not None else ("row", i)


@dataclass
class LpSolution:
    status: LpStatus
    objective: float
    primal: np.ndarray
    dual: np.ndarray
    iterations: int
    basis: "WarmBasis | None" = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass(frozen=True)
class WarmBasis:
    """Basic variable keys of a solve plus the row names it was solved with."""

    keys: tuple[Hashable, ...]
    rows: frozenset


def reduced_cost_of_column(lp: LinearProgram, sol: LpSolution, cost: float, coefficients: Mapping[int, float]) -> float:
    """c_j - a_j' y for a column given as ``{row: coef}`` against ``sol``'s duals."""
    return float(cost - sum(a * sol.dual[i] for i, a in coefficients.items()))


def dual_objective(lp: LinearProgram, sol: LpSolution) -> float:
    return float(lp.rhs @ sol.dual)


class _Basis:
    """Sparse LU of the basis matrix plus an eta file of pivots since the last refactor."""

    def __init__(self, A: sp.csc_matrix, cols: np.ndarray):
        self.A = A
        self.m = A.shape[0]
        self.cols = cols
        B = A[:, cols].tocsc()
        self.lu = spla.splu(B, permc_spec="COLAMD")
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        x = self.lu.solve(a)
        for r, d in self.etas:
            xr = x[r] / d[r]
            x -= xr * d
            x[r] = xr
        return x

    def btran(self, c: np.ndarray) -> np.ndarray:
        w = c.astype(float, copy=True)
        for r, d in reversed(self.etas):
            w[r] = (w[r] - (w @ d - w[r] * d[r])) / d[r]
        return self.lu.solve(w, trans="T")

    def push(self, r: int, d: np.ndarray) -> None:
        self.etas.append((r, d))


class _Simplex:
    def __init__(self, lp: LinearProgram, perturb: bool = True):
        m, n = lp.matrix.shape
        self.lp = lp
        self.m, self.n = m, n
        ge_rows = [i for i, s in enumerate(lp.senses) if s == GE]
        self.ge_rows = ge_rows
        self.n_surplus = len(ge_rows)
        sign = np.where(lp.rhs >= 0, 1.0, -1.0)
        surplus = sp.csc_matrix(
            (-np.ones(len(ge_rows)), (ge_rows, np.arange(len(ge_rows)))), shape=(m, len(ge_rows))
        )
        art = sp.csc_matrix((sign, (np.arange(m), np.arange(m))), shape=(m, m))
        self.A = sp.hstack([lp.matrix.tocsc(), surplus, art], format="csc")
        self.AT = self.A.T.tocsr()
        self.N = self.A.shape[1]
        self.art0 = n + self.n_surplus
        self.b_exact = lp.rhs.astype(float)
        self.b = self.b_exact
        if perturb and ge_rows:
            self.b = self.b_exact.copy()
            u = np.random.default_rng(m).uniform(0.5, 1.0, size=len(ge_rows))
            self.b[ge_rows] -= PERTURB * u * (1.0 + np.abs(self.b[ge_rows]))
        self.surplus_of_row = {r: n + j for j, r in enumerate(ge_rows)}
        self.iterations = 0
        self.max_iterations = 50 * (m + n) + 1000

    # -- column helpers ---------------------------------------------------
    def column(self, j: int) -> np.ndarray:
        a = np.zeros(self.m)
        lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
        a[self.A.indices[lo:hi]] = self.A.data[lo:hi]
        return a

    def key_of(self, j: int) -> Hashable:
        if j < self.n:
            return self.lp.col_name(j)
        if j < self.art0:
            return ("surplus", self.lp.row_name(self.ge_rows[j - self.n]))
        return ("artificial", self.lp.row_name(j - self.art0))

    def index_of_keys(self) -> dict[Hashable, int]:
        return {self.key_of(j): j for j in range(self.N)}

    # -- basis management -------------------------------------------------
    def set_basis(self, cols: Sequence[int]) -> bool:
        self.basis = np.array(cols, dtype=np.int64)
        try:
            self.fac = _Basis(self.A, self.basis)
        except RuntimeError:
            return False
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.is_basic[self.basis] = True
        self.xB = self.fac.ftran(self.b)
        self.since_refactor = 0
        return bool(np.all(np.isfinite(self.xB)))

    def refactor(self) -> bool:
        return self.set_basis(self.basis)

    def cold_basis(self) -> list[int]:
        cols = []
        for i, s in enumerate(self.lp.senses):
            if s == GE and self.b[i] <= 0:
                cols.append(self.surplus_of_row[i])
            else:
                cols.append(self.art0 + i)
        return cols

    # -- main loop ----------------------------------------------------------
    def run(self, cost: np.ndarray, allowed: np.ndarray) -> LpStatus:
        bland = False
        degenerate = 0
        verified = False
        while True:
            if self.iterations >= self.max_iterations:
                logger.warning("simplex iteration limit reached (%d)", self.iterations)
                return LpStatus.FAILED
            if self.since_refactor >= REFACTOR_EVERY and not self.refactor():
                return LpStatus.FAILED
            y = self.fac.btran(cost[self.basis])
            rc = cost - self.AT @ y
            cand = allowed & ~self.is_basic & (rc < -TOL_DUAL)
            if not cand.any():
                if verified:
                    return LpStatus.OPTIMAL
                # confirm optimality on a fresh factorization
                if not self.refactor():
                    return LpStatus.FAILED
                verified = True
                continue
            verified = False
            if bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                masked = np.where(cand, rc, 0.0)
                q = int(np.argmin(masked))
            d = self.fac.ftran(self.column(q))
            rows = np.flatnonzero(d > TOL_PIVOT)
            if rows.size == 0:
                return LpStatus.UNBOUNDED
            ratios = np.maximum(self.xB[rows], 0.0) / d[rows]
            t = ratios.min()
            ties = rows[ratios <= t + 1e-12 * max(1.0, t)]
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(d[ties])])
            t = max(self.xB[r], 0.0) / d[r]
            self.pivot(q, r, d, t)
            if t * -rc[q] <= 1e-12:
                degenerate += 1
                if degenerate > STALL_LIMIT:
                    bland = True
            else:
                degenerate = 0
                bland = False

    def run_dual(self, cost: np.ndarray, allowed: np.ndarray) -> LpStatus:
        """Dual simplex from a dual-feasible basis until the basic values are non-negative.

        INFEASIBLE means no allowed column can repair some row; the caller
        treats that as "restart cold", since columns may have been held back.
        """
        while True:
            if self.iterations >= self.max_iterations:
                return LpStatus.FAILED
            if self.since_refactor >= REFACTOR_EVERY and not self.refactor():
                return LpStatus.FAILED
            r = int(np.argmin(self.xB))
            if self.xB[r] >= -TOL_FEAS:
                self.xB = np.maximum(self.xB, 0.0)
                return LpStatus.OPTIMAL
            e = np.zeros(self.m)
            e[r] = 1.0
            alpha = self.AT @ self.fac.btran(e)
            cand = np.flatnonzero(allowed & ~self.is_basic & (alpha < -TOL_PIVOT))
            if cand.size == 0:
                return LpStatus.INFEASIBLE
            y = self.fac.btran(cost[self.basis])
            rc = np.maximum(cost[cand] - self.AT[cand] @ y, 0.0)
            ratios = rc / -alpha[cand]
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12 * max(1.0, best)]
            q = int(ties[np.argmax(-alpha[ties])])
            d = self.fac.ftran(self.column(q))
            if d[r] >= -TOL_PIVOT:
                if not self.refactor():
                    return LpStatus.FAILED
                continue
            self.pivot(q, r, d, self.xB[r] / d[r], clamp=False)

    def restore_rhs(self, cost: np.ndarray, allowed: np.ndarray) -> LpStatus:
        """Re-optimise an optimal basis of the perturbed program for the exact one."""
        if self.b is self.b_exact:
            return LpStatus.OPTIMAL
        self.b = self.b_exact
        if not self.refactor():
            return LpStatus.FAILED
        art_basic = self.basis >= self.art0
        if np.any(np.abs(self.xB[art_basic]) > TOL_FEAS):
            return LpStatus.FAILED
        self.xB[art_basic] = 0.0
        status = self.run_dual(cost, allowed)
        if status is not LpStatus.OPTIMAL:
            return LpStatus.FAILED
        return self.run(cost, allowed)

    def pivot(self, q: int, r: int, d: np.ndarray, t: float, clamp: bool = True) -> None:
        self.xB -= t * d
        self.xB[r] = t
        if clamp:
            np.maximum(self.xB, np.where(self.xB > -1e-11, 0.0, self.xB), out=self.xB)
        leaving = self.basis[r]
        self.is_basic[leaving] = False
        self.is_basic[q] = True
        self.basis[r] = q
        self.fac.push(r, d)
        self.since_refactor += 1
        self.iterations += 1

    def drive_out_artificials(self) -> None:
        allowed = np.arange(self.N) < self.art0
        for r in range(self.m):
            if self.basis[r] < self.art0:
                continue
            e = np.zeros(self.m)
            e[r] = 1.0
            row = self.AT @ self.fac.btran(e)
            row[~allowed | self.is_basic] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) <= 1e-7:
                continue  # redundant row: artificial stays basic at zero
            d = self.fac.ftran(self.column(j))
            self.xB[r] = 0.0
            self.pivot(j, r, d, 0.0)

    # -- drivers ------------------------------------------------------------
    def solution(self, status: LpStatus, cost: np.ndarray, phase_one: bool = False) -> LpSolution:
        y = self.fac.btran(cost[self.basis])
        x = np.zeros(self.N)
        x[self.basis] = self.xB
        primal = x[: self.n]
        obj = float(self.lp.costs @ primal) if not phase_one else float("nan")
        return LpSolution(
            status=status,
            objective=obj,
            primal=primal,
            dual=y,
            iterations=self.iterations,
            basis=WarmBasis(
                tuple(self.key_of(int(j)) for j in self.basis),
                frozenset(self.lp.row_name(i) for i in range(self.m)),
            ),
        )

    def phase_two_cost(self) -> np.ndarray:
        cost = np.zeros(self.N)
        cost[: self.n] = self.lp.costs
        return cost

    def try_warm(self, warm: "WarmBasis") -> str | None:
        index = self.index_of_keys()
        cols = []
        for key in warm.keys:
            j = index.get(key)
            if j is None:
                return False
            cols.append(j)
        # rows added since the warm solve enter with their logical variable basic
        for i in range(self.m):
            if self.lp.row_name(i) not in warm.rows:
                cols.append(self.surplus_of_row.get(i, self.art0 + i))
        if len(cols) != self.m or len(set(cols)) != self.m:
            return None
        if not self.set_basis(cols):
            return None
        art_basic = self.basis >= self.art0
        if np.any(np.abs(self.xB[art_basic]) > TOL_FEAS):
            return None
        self.xB[art_basic] = 0.0
        if np.any(self.xB < -TOL_FEAS):
            # rows added since (cuts) are violated; usable by the dual simplex
            # only if no artificial is basic, as those must stay at zero
            return None if art_basic.any() else "dual"
        self.xB = np.maximum(self.xB, 0.0)
        return "primal"


def solve_lp(lp: LinearProgram, warm_start: WarmBasis | None = None) -> LpSolution:
    """Solve ``lp``, optionally starting from the basis of an earlier solve.

    Columns and rows may have been added since ``warm_start`` was produced.
    Added rows that cut off the old point are repaired by the dual simplex
    before primal pivoting resumes.  A warm basis that is singular or otherwise
    unusable is dropped in favour of a cold two-phase start, so warm starts
    never affect correctness.
    """
    if lp.num_rows == 0:
        primal = np.zeros(lp.num_cols)
        if np.any(lp.costs < -TOL_DUAL):
            return LpSolution(LpStatus.UNBOUNDED, float("-inf"), primal, np.zeros(0), 0)
        return LpSolution(LpStatus.OPTIMAL, 0.0, primal, np.zeros(0), 0)
    if warm_start is not None:
        sol = _solve_warm(lp, warm_start)
        if sol is not None:
            return sol
    sol = _solve_cold(lp, perturb=True)
    if sol.status is LpStatus.FAILED:
        logger.debug("perturbed solve failed, retrying on the exact program")
        sol = _solve_cold(lp, perturb=False)
    return sol


def _finish(s: _Simplex, status: LpStatus, cost: np.ndarray, allowed: np.ndarray) -> LpSolution | None:
    if status is LpStatus.OPTIMAL:
        status = s.restore_rhs(cost, allowed)
    if status is LpStatus.FAILED:
        return None
    return s.solution(status, cost)


def _solve_warm(lp: LinearProgram, warm: WarmBasis) -> LpSolution | None:
    s = _Simplex(lp)
    mode = s.try_warm(warm)
    if mode is None:
        return None
    phase2 = s.phase_two_cost()
    no_art = np.arange(s.N) < s.art0
    status = LpStatus.OPTIMAL
    if mode == "dual":
        # columns that are not dual feasible sit out the dual phase
        y = s.fac.btran(phase2[s.basis])
        dual_ok = phase2 - s.AT @ y >= -TOL_DUAL
        status = s.run_dual(phase2, no_art & dual_ok)
    if status is not LpStatus.OPTIMAL:
        # infeasibility seen by the dual phase may be due to held-back columns
        logger.debug("warm dual phase ended with %s, retrying cold", status.value)
        return None
    status = s.run(phase2, no_art)
    sol = _finish(s, status, phase2, no_art)
    if sol is None:
        logger.debug("warm start failed, retrying cold")
    return sol


def _solve_cold(lp: LinearProgram, perturb: bool) -> LpSolution:
    s = _Simplex(lp, perturb)
    failed = LpSolution(LpStatus.FAILED, float("nan"), np.zeros(s.n), np.zeros(s.m), s.iterations)
    phase2 = s.phase_two_cost()
    no_art = np.arange(s.N) < s.art0
    if not s.set_basis(s.cold_basis()):
        return failed
    phase1 = np.zeros(s.N)
    phase1[s.art0 :] = 1.0
    status = s.run(phase1, no_art)
    if status is not LpStatus.OPTIMAL:
        return failed
    infeasibility = float(s.xB[s.basis >= s.art0].sum())
    if infeasibility > TOL_FEAS * (1.0 + float(np.abs(s.b).max())):
        # the perturbation only relaxes >= rows, so the ray certifies the exact program too
        return s.solution(LpStatus.INFEASIBLE, phase1, phase_one=True)
    s.drive_out_artificials()
    if not s.refactor():
        return failed
    s.xB[s.basis >= s.art0] = 0.0
    status = s.run(phase2, no_art)
    sol = _finish(s, status, phase2, no_art)
    return failed if sol is None else sol
