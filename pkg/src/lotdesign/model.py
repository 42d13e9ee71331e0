"""Problem data, the lot-type space and the closed-form counts around it.

Demand is held as exact scaled integers (``demand[b, s] = d_{b,s} * 10**scale_exp``)
so every cost and every incumbent comparison is integer arithmetic.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

LotType = tuple[int, ...]

MAX_SCALE_EXP = 6
# sentinel for unreachable DP states; sums of two stay below 2**63
INF = 1 << 60


class InstanceValidationError(ValueError):
    def __init__(self, report: "ValidationReport"):
        super().__init__("; ".join(report.errors))
        self.report = report


class LotTypeSpaceTooLarge(RuntimeError):
    pass


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __str__(self) -> str:
        lines = [f"error: {e}" for e in self.errors] + [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) if lines else "ok"


@dataclass(frozen=True)
class LotTypeParams:
    num_sizes: int
    min_c: int
    max_c: int
    min_t: int
    max_t: int

    def problems(self) -> list[str]:
        out = []
        if self.num_sizes < 1:
            out.append("at least one size is required")
        if self.min_c < 0:
            out.append("min_c < 0")
        if self.min_c > self.max_c:
            out.append("min_c > max_c")
        if self.min_t < 0:
            out.append("min_t < 0")
        if self.min_t > self.max_t:
            out.append("min_t > max_t")
        return out

    @property
    def total_range(self) -> tuple[int, int]:
        """Totals that are actually reachable, intersected with [min_t, max_t]."""
        lo = max(self.min_t, self.num_sizes * self.min_c)
        hi = min(self.max_t, self.num_sizes * self.max_c)
        return lo, hi

    @property
    def is_empty(self) -> bool:
        lo, hi = self.total_range
        return lo > hi


@dataclass(frozen=True, eq=False)
class Instance:
    branches: tuple[str, ...]
    sizes: tuple[str, ...]
    demand: np.ndarray
    scale_exp: int
    multiplicities: tuple[int, ...]
    min_c: int
    max_c: int
    min_t: int
    max_t: int
    supply_lo: int
    supply_hi: int
    k: int

    def __post_init__(self):
        self.demand.setflags(write=False)

    @property
    def scale(self) -> int:
        return 10**self.scale_exp

    @property
    def num_branches(self) -> int:
        return len(self.branches)

    @property
    def num_sizes(self) -> int:
        return len(self.sizes)

    @property
    def params(self) -> LotTypeParams:
        return LotTypeParams(self.num_sizes, self.min_c, self.max_c, self.min_t, self.max_t)

    def is_applicable(self, lot: Sequence[int]) -> bool:
        return (
            len(lot) == self.num_sizes
            and all(self.min_c <= v <= self.max_c for v in lot)
            and self.min_t <= sum(lot) <= self.max_t
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.branches == other.branches
            and self.sizes == other.sizes
            and self.scale_exp == other.scale_exp
            and np.array_equal(self.demand, other.demand)
            and self.multiplicities == other.multiplicities
            and (self.min_c, self.max_c, self.min_t, self.max_t)
            == (other.min_c, other.max_c, other.min_t, other.max_t)
            and (self.supply_lo, self.supply_hi, self.k) == (other.supply_lo, other.supply_hi, other.k)
        )

    __hash__ = None  # type: ignore[assignment]


def _decimals(value: Decimal) -> int:
    exp = value.as_tuple().exponent
    assert isinstance(exp, int)
    places = max(0, -exp)
    if places > MAX_SCALE_EXP:
        exp = value.normalize().as_tuple().exponent
        assert isinstance(exp, int)
        places = max(0, -exp)
    return places


def _as_int(raw: Any, name: str, errors: list[str]) -> int | None:
    if isinstance(raw, bool) or not isinstance(raw, (int, str, float)):
        errors.append(f"{name}: expected an integer, got {raw!r}")
        return None
    try:
        value = Decimal(str(raw))
    except InvalidOperation:
        errors.append(f"{name}: expected an integer, got {raw!r}")
        return None
    if not value.is_finite() or value != value.to_integral_value():
        errors.append(f"{name}: expected an integer, got {raw!r}")
        return None
    return int(value)


def check_instance(raw: Mapping[str, Any]) -> tuple[ValidationReport, Instance | None]:
    """Validate a raw instance mapping; returns the report and the instance (None on error)."""
    report = ValidationReport()
    errors = report.errors

    for key in ("sizes", "demand", "multiplicities", "lot_bounds", "supply", "k"):
        if key not in raw:
            errors.append(f"missing field '{key}'")
    if errors:
        return report, None

    sizes = tuple(str(s) for s in raw["sizes"])
    if not sizes:
        errors.append("sizes: at least one size is required")
    if len(set(sizes)) != len(sizes):
        errors.append("sizes: duplicate labels")

    rows = raw["demand"]
    if not isinstance(rows, Sequence) or isinstance(rows, str) or not rows:
        errors.append("demand: expected a non-empty list of rows")
        rows = []
    branches = tuple(str(b) for b in raw.get("branches") or range(len(rows)))
    if len(branches) != len(rows):
        errors.append(f"branches: {len(branches)} labels for {len(rows)} demand rows")
    if len(set(branches)) != len(branches):
        errors.append("branches: duplicate labels")

    parsed: list[list[Decimal]] = []
    for b, row in enumerate(rows):
        if not isinstance(row, Sequence) or isinstance(row, str) or len(row) != len(sizes):
            errors.append(f"demand[{b}]: expected {len(sizes)} values")
            continue
        out = []
        for s, v in enumerate(row):
            try:
                d = Decimal(str(v))
            except InvalidOperation:
                errors.append(f"demand[{b}][{s}]: not a number: {v!r}")
                continue
            if not d.is_finite():
                errors.append(f"demand[{b}][{s}]: not finite")
            elif d < 0:
                errors.append(f"demand[{b}][{s}]: negative")
            elif _decimals(d) > MAX_SCALE_EXP:
                errors.append(f"demand[{b}][{s}]: more than {MAX_SCALE_EXP} decimal places")
            else:
                out.append(d)
        parsed.append(out)

    mults_raw = raw["multiplicities"]
    mults: list[int] = []
    for i, m in enumerate(mults_raw if isinstance(mults_raw, Sequence) else []):
        v = _as_int(m, f"multiplicities[{i}]", errors)
        if v is not None:
            if v < 1:
                errors.append(f"multiplicities: {v} < 1")
            mults.append(v)
    if not mults:
        errors.append("multiplicities: at least one multiplicity is required")

    bounds = raw["lot_bounds"] if isinstance(raw["lot_bounds"], Mapping) else {}
    supply = raw["supply"] if isinstance(raw["supply"], Mapping) else {}
    ints: dict[str, int | None] = {}
    for name, src, key in [
        ("min_c", bounds, "min_c"),
        ("max_c", bounds, "max_c"),
        ("min_t", bounds, "min_t"),
        ("max_t", bounds, "max_t"),
        ("supply_lo", supply, "lo"),
        ("supply_hi", supply, "hi"),
    ]:
        if key not in src:
            errors.append(f"missing field '{name}'")
            ints[name] = None
        else:
            ints[name] = _as_int(src[key], name, errors)
    k = _as_int(raw["k"], "k", errors)
    if k is not None and k < 1:
        errors.append("k < 1")

    if all(ints[n] is not None for n in ("min_c", "max_c", "min_t", "max_t")) and sizes:
        params = LotTypeParams(len(sizes), ints["min_c"], ints["max_c"], ints["min_t"], ints["max_t"])  # type: ignore[arg-type]
        errors.extend(params.problems())
        if not params.problems():
            if params.max_t < params.num_sizes * params.min_c:
                errors.append("max_t < |S|*min_c: no applicable lot-type")
            if params.min_t > params.num_sizes * params.max_c:
                errors.append("min_t > |S|*max_c: no applicable lot-type")
    lo, hi = ints["supply_lo"], ints["supply_hi"]
    if lo is not None and hi is not None:
        if lo > hi:
            errors.append("supply_lo > supply_hi")
        if hi < 0:
            errors.append("supply_hi < 0")

    if errors:
        return report, None

    exp = max((_decimals(d) for row in parsed for d in row), default=0)
    factor = Decimal(10) ** exp
    demand = np.array([[int(d * factor) for d in row] for row in parsed], dtype=np.int64)

    inst = Instance(
        branches=branches,
        sizes=sizes,
        demand=demand,
        scale_exp=exp,
        multiplicities=tuple(sorted(set(mults))),
        min_c=ints["min_c"],  # type: ignore[arg-type]
        max_c=ints["max_c"],  # type: ignore[arg-type]
        min_t=ints["min_t"],  # type: ignore[arg-type]
        max_t=ints["max_t"],  # type: ignore[arg-type]
        supply_lo=lo,  # type: ignore[arg-type]
        supply_hi=hi,  # type: ignore[arg-type]
        k=k,  # type: ignore[arg-type]
    )
    t_lo, t_hi = inst.params.total_range
    nb = inst.num_branches
    if nb * t_lo * min(inst.multiplicities) > inst.supply_hi:
        report.warnings.append("supply_hi is below the smallest possible total supply")
    if nb * t_hi * max(inst.multiplicities) < inst.supply_lo:
        report.warnings.append("supply_lo is above the largest possible total supply")
    for w in report.warnings:
        logger.warning(w)
    return report, inst


def validate_instance(raw: Mapping[str, Any]) -> Instance:
    """Normalize a raw instance mapping, raising InstanceValidationError listing every problem."""
    report, inst = check_instance(raw)
    if inst is None:
        raise InstanceValidationError(report)
    return inst


def instance_to_dict(inst: Instance) -> dict:
    """Inverse of validate_instance: demand is written with exactly scale_exp decimals."""
    return {
        "sizes": list(inst.sizes),
        "branches": list(inst.branches),
        "demand": [[str(Decimal(int(v)).scaleb(-inst.scale_exp)) for v in row] for row in inst.demand],
        "multiplicities": list(inst.multiplicities),
        "lot_bounds": {"min_c": inst.min_c, "max_c": inst.max_c, "min_t": inst.min_t, "max_t": inst.max_t},
        "supply": {"lo": inst.supply_lo, "hi": inst.supply_hi},
        "k": inst.k,
    }


def make_instance(
    demand: Sequence[Sequence[Any]],
    multiplicities: Sequence[int],
    *,
    min_c: int,
    max_c: int,
    min_t: int,
    max_t: int,
    supply: tuple[int, int],
    k: int,
    sizes: Sequence[str] | None = None,
    branches: Sequence[str] | None = None,
) -> Instance:
    """Build and validate an instance from Python values (demand entries as str/int/float)."""
    demand = [list(row) for row in demand]
    num_sizes = len(demand[0]) if demand else 0
    raw = {
        "sizes": list(sizes) if sizes is not None else [f"s{i}" for i in range(num_sizes)],
        "branches": list(branches) if branches is not None else [f"b{i}" for i in range(len(demand))],
        "demand": [[str(v) for v in row] for row in demand],
        "multiplicities": list(multiplicities),
        "lot_bounds": {"min_c": min_c, "max_c": max_c, "min_t": min_t, "max_t": max_t},
        "supply": {"lo": supply[0], "hi": supply[1]},
        "k": k,
    }
    return validate_instance(raw)


def lot_size(lot: Sequence[int]) -> int:
    return int(sum(lot))


def cost(inst: Instance, b: int, lot: Sequence[int], m: int) -> int:
    """Scaled deviation sum_s |d_{b,s} - m * l_s| as an exact integer."""
    d = inst.demand[b]
    return sum(abs(int(d[s]) - m * int(v) * inst.scale) for s, v in enumerate(lot))


def cost_table(inst: Instance, lots: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Costs for every (branch, lot, multiplicity) as an int64 array of shape (B, P, |M|)."""
    lots = np.asarray(lots, dtype=np.int64).reshape(-1, inst.num_sizes)
    mults = np.asarray(inst.multiplicities, dtype=np.int64)
    out = np.empty((inst.num_branches, len(lots), len(mults)), dtype=np.int64)
    d = inst.demand[:, None, None, :]
    for start in range(0, len(lots), chunk):
        block = lots[start : start + chunk]
        supply = mults[None, :, None] * block[:, None, :] * inst.scale  # (P, M, S)
        out[:, start : start + chunk, :] = np.abs(d - supply[None]).sum(axis=3)
    return out


class CostCache:
    """Per-lot-type cost rows (B x |M|), filled lazily and in batches."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self._rows: dict[LotType, np.ndarray] = {}

    def ensure(self, lots) -> None:
        missing = [l for l in lots if l not in self._rows]
        if not missing:
            return
        table = cost_table(self.inst, np.array(missing, dtype=np.int64))
        for i, l in enumerate(missing):
            self._rows[l] = table[:, i, :]

    def __getitem__(self, lot: LotType) -> np.ndarray:
        row = self._rows.get(lot)
        if row is None:
            self.ensure([lot])
            row = self._rows[lot]
        return row

    def table(self, lots: Sequence[LotType]) -> np.ndarray:
        self.ensure(lots)
        if not lots:
            return np.empty((self.inst.num_branches, 0, len(self.inst.multiplicities)), dtype=np.int64)
        return np.stack([self._rows[l] for l in lots], axis=1)

    def __len__(self) -> int:
        return len(self._rows)


def count_applicable_lot_types(p: LotTypeParams) -> int:
    """Exact size of the lot-type space by convolution over sizes; never enumerates."""
    if p.problems() or p.is_empty:
        return 0
    ways = [0] * (p.max_t + 1)
    ways[0] = 1
    for _ in range(p.num_sizes):
        nxt = [0] * (p.max_t + 1)
        for t, w in enumerate(ways):
            if w:
                for v in range(p.min_c, min(p.max_c, p.max_t - t) + 1):
                    nxt[t + v] += w
        ways = nxt
    return sum(ways[p.min_t :])


def enumerate_applicable_lot_types(p: LotTypeParams, cap: int = 100_000) -> Iterator[LotType]:
    """Lexicographic stream of all applicable lot-types; refuses spaces larger than ``cap``."""
    total = count_applicable_lot_types(p)
    if total > cap:
        raise LotTypeSpaceTooLarge(f"{total} applicable lot-types exceed the cap of {cap}")
    if total == 0:
        return iter(())
    n = p.num_sizes

    def rec(prefix: list[int], partial: int) -> Iterator[LotType]:
        left = n - len(prefix)
        if left == 0:
            if p.min_t <= partial <= p.max_t:
                yield tuple(prefix)
            return
        for v in range(p.min_c, p.max_c + 1):
            t = partial + v
            # remaining sizes must still be able to land the total in range
            if t + (left - 1) * p.min_c > p.max_t:
                break
            if t + (left - 1) * p.max_c < p.min_t:
                continue
            prefix.append(v)
            yield from rec(prefix, t)
            prefix.pop()

    return rec([], 0)


def complete_ilp_dimensions(num_branches: int, num_lot_types: int, num_multiplicities: int) -> tuple[int, int]:
    """Variables and constraints of the full assignment ILP.

    Variables: one x per (branch, lot-type, multiplicity) plus one y per lot-type.
    Constraints: one assignment row per branch, the k-row, two supply rows and
    one binding row per (branch, lot-type).
    """
    if min(num_branches, num_lot_types, num_multiplicities) < 1:
        raise ValueError("dimensions must be positive")
    variables = num_branches * num_lot_types * num_multiplicities + num_lot_types
    constraints = num_branches + 1 + 2 + num_branches * num_lot_types
    return variables, constraints


def best_multiplicity(inst: Instance, b: int, lot: Sequence[int]) -> int:
    """Multiplicity with the smallest cost for (b, lot); ties go to the smaller m."""
    mults = np.asarray(inst.multiplicities, dtype=np.int64)
    supply = mults[:, None] * np.asarray(lot, dtype=np.int64)[None, :] * inst.scale
    fits = np.abs(inst.demand[b][None, :] - supply).sum(axis=1)
    return int(mults[int(np.argmin(fits))])


def multiplicity_window(inst: Instance, m_hat: int) -> set[int]:
    return {m for m in (m_hat - 1, m_hat, m_hat + 1) if m in inst.multiplicities}


def entry_costs(inst: Instance, b: int, m: int) -> np.ndarray:
    """Per-size cost of each admissible entry value: shape (|S|, max_c - min_c + 1)."""
    values = np.arange(inst.min_c, inst.max_c + 1, dtype=np.int64)
    return np.abs(inst.demand[b][:, None] - m * values[None, :] * inst.scale)


def suffix_costs(costs: np.ndarray, min_c: int, max_t: int) -> np.ndarray:
    """h[s, r]: cheapest way to fill sizes s.. with exactly r pieces (INF if impossible).

    ``costs[s, j]`` is the separable cost of putting ``min_c + j`` pieces in size s.
    """
    num_sizes, width = costs.shape
    h = np.full((num_sizes + 1, max_t + 1), INF, dtype=np.int64)
    h[num_sizes, 0] = 0
    for s in reversed(range(num_sizes)):
        for j in range(width):
            v = min_c + j
            if v > max_t:
                break
            cand = h[s + 1, : max_t + 1 - v] + costs[s, j]
            np.minimum(h[s, v:], cand, out=h[s, v:])
        np.minimum(h[s], INF, out=h[s])
    return h


def iter_best_lot_types(
    costs: np.ndarray, min_c: int, t_lo: int, t_hi: int, slope: float = 0.0
) -> Iterator[tuple[float, LotType]]:
    """Lot vectors with total in [t_lo, t_hi] in increasing (value, vector) order.

    value(l) = float(sum_s costs[s, l_s - min_c]) - slope * |l|.  Best-first
    search over prefixes; a prefix's key is the exact value of its best
    completion, so keys never decrease along a path and the first completed
    vectors popped are the best ones, with ties resolved lexicographically.
    """
    num_sizes, width = costs.shape
    if t_lo > t_hi:
        return
    h = suffix_costs(costs, min_c, t_hi)
    totals = np.arange(t_hi + 1, dtype=float)

    def key(depth: int, pc: int, partial: int) -> float:
        r_lo, r_hi = max(t_lo - partial, 0), t_hi - partial
        if r_hi < r_lo:
            return math.inf
        tail = h[depth, r_lo : r_hi + 1]
        ok = tail < INF
        if not ok.any():
            return math.inf
        vals = (pc + tail[ok]).astype(float) - slope * totals[partial + r_lo : partial + r_hi + 1][ok]
        return float(vals.min())

    rows = costs.tolist()
    heap = [(key(0, 0, 0), (), 0, 0)]
    while heap:
        k, prefix, pc, partial = heapq.heappop(heap)
        if k == math.inf:
            return
        depth = len(prefix)
        if depth == num_sizes:
            yield k, prefix
            continue
        for j in range(width):
            v = min_c + j
            if partial + v > t_hi:
                break
            c = pc + rows[depth][j]
            ck = key(depth + 1, c, partial + v)
            if ck < math.inf:
                heapq.heappush(heap, (ck, prefix + (v,), c, partial + v))


def top_n_lot_types(inst: Instance, b: int, n: int) -> list[tuple[LotType, int]]:
    """The ``n`` lot-types with the smallest fit min_m cost(b, l, m), ties lexicographic."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = inst.params
    if p.is_empty:
        raise ValueError("empty applicable lot-type set")
    t_lo, t_hi = p.total_range
    fit: dict[LotType, int] = {}
    for m in inst.multiplicities:
        stream = iter_best_lot_types(entry_costs(inst, b, m), inst.min_c, t_lo, t_hi)
        for c, lot in itertools.islice(stream, n):
            c = int(c)
            if lot not in fit or c < fit[lot]:
                fit[lot] = c
    ranked = sorted(fit.items(), key=lambda kv: (kv[1], kv[0]))
    return ranked[:n]


def fmt_scaled(value: int | float, scale_exp: int) -> str:
    """Render a scaled cost back in demand units."""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if scale_exp == 0:
        return str(value)
    if isinstance(value, int):
        return str(Decimal(value).scaleb(-scale_exp))
    return f"{value / 10**scale_exp:.{scale_exp + 3}f}"
