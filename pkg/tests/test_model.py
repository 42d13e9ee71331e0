import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_lots, exact_cost, random_params

from lotdesign.model import (
    InstanceValidationError,
    LotTypeParams,
    LotTypeSpaceTooLarge,
    best_multiplicity,
    check_instance,
    complete_ilp_dimensions,
    cost,
    count_applicable_lot_types,
    enumerate_applicable_lot_types,
    instance_to_dict,
    iter_best_lot_types,
    entry_costs,
    lot_size,
    make_instance,
    top_n_lot_types,
    validate_instance,
)


def one_branch(demand, mults, min_c=0, max_c=5, min_t=0, max_t=30):
    return make_instance([demand], mults, min_c=min_c, max_c=max_c, min_t=min_t, max_t=max_t, supply=(0, 10**6), k=1)


def raw(**over):
    base = {
        "sizes": ["S", "M", "L", "XL"],
        "branches": ["a"],
        "demand": [["1.1", "2.0", "1.8", "0.9"]],
        "multiplicities": [1, 2, 3],
        "lot_bounds": {"min_c": 0, "max_c": 2, "min_t": 4, "max_t": 8},
        "supply": {"lo": 0, "hi": 100},
        "k": 1,
    }
    base.update(over)
    return base


# -- validation ---------------------------------------------------------------------


def test_min_c_above_max_c_is_reported():
    report, inst = check_instance(raw(lot_bounds={"min_c": 1, "max_c": 0, "min_t": 0, "max_t": 8}))
    assert inst is None
    assert any("min_c > max_c" in e for e in report.errors)


def test_scale_is_max_observed_decimals():
    inst = validate_instance(raw())
    assert inst.scale_exp == 1
    assert inst.demand.tolist() == [[11, 20, 18, 9]]
    mixed = validate_instance(raw(demand=[["1", "2.25", "0.5", "3"]]))
    assert mixed.scale_exp == 2
    assert mixed.demand.tolist() == [[100, 225, 50, 300]]


def test_large_instance_shape_is_accepted():
    demand = [["23.4"] * 12 for _ in range(682)]
    inst = make_instance(demand, [1, 2, 3], min_c=0, max_c=5, min_t=12, max_t=30, supply=(15500, 16200), k=5)
    assert (inst.num_branches, inst.num_sizes, inst.k) == (682, 12, 5)
    assert (inst.supply_lo, inst.supply_hi) == (15500, 16200)


def test_every_problem_is_listed():
    report, inst = check_instance(
        raw(
            multiplicities=[0, 2],
            supply={"lo": 9, "hi": 3},
            k=0,
            demand=[["-1", "x", "1", "1"]],
        )
    )
    assert inst is None
    text = " ".join(report.errors)
    for word in ("multiplicit", "supply", "k", "demand"):
        assert word in text
    assert len(report.errors) >= 4


def test_empty_lot_type_space_is_rejected():
    with pytest.raises(InstanceValidationError):
        validate_instance(raw(lot_bounds={"min_c": 0, "max_c": 1, "min_t": 5, "max_t": 8}))


def test_too_many_decimals_rejected():
    report, inst = check_instance(raw(demand=[["1.1234567", "1", "1", "1"]]))
    assert inst is None


def test_unreachable_supply_warns():
    report, inst = check_instance(raw(supply={"lo": 1000, "hi": 2000}))
    assert inst is not None
    assert report.warnings


@given(
    st.lists(
        st.lists(st.decimals(min_value=0, max_value=100, places=2, allow_nan=False), min_size=2, max_size=2),
        min_size=1,
        max_size=4,
    )
)
@settings(max_examples=60, deadline=None)
def test_dict_round_trip(demand):
    inst = make_instance(demand, [1, 2], min_c=0, max_c=3, min_t=1, max_t=5, supply=(0, 40), k=2)
    again = validate_instance(instance_to_dict(inst))
    assert again == inst
    assert again.scale_exp == inst.scale_exp


# -- lot-types and costs ----------------------------------------------------------------


def test_lot_size():
    assert lot_size((1, 2, 2, 1)) == 6
    assert lot_size((0, 0, 0, 0)) == 0
    assert lot_size((5,) * 6) == 30


def test_cost_examples():
    inst = one_branch(["1.1", "2.0", "1.8", "0.9"], [1, 2, 3])
    assert cost(inst, 0, (1, 2, 2, 1), 1) == 4  # 0.4 at scale 10
    inst = one_branch(["2", "4", "4", "2"], [1, 2, 3])
    assert cost(inst, 0, (1, 2, 2, 1), 2) == 0
    inst = one_branch(["0", "0", "0", "0"], [1, 2, 3])
    assert cost(inst, 0, (1, 2, 2, 1), 3) == 18


@given(st.lists(st.integers(0, 40), min_size=3, max_size=3), st.lists(st.integers(0, 5), min_size=3, max_size=3), st.integers(1, 3))
def test_cost_zero_iff_exact_match(d, lot, m):
    inst = one_branch([str(v) for v in d], [1, 2, 3])
    c = cost(inst, 0, lot, m)
    assert c >= 0
    assert (c == 0) == all(dv == m * lv for dv, lv in zip(d, lot))


def test_count_examples():
    assert count_applicable_lot_types(LotTypeParams(12, 0, 5, 12, 30)) == 1_159_533_584
    assert count_applicable_lot_types(LotTypeParams(4, 3, 3, 12, 12)) == 1
    assert count_applicable_lot_types(LotTypeParams(2, 0, 1, 0, 2)) == 4


def test_count_matches_enumeration_random():
    rng = np.random.default_rng(11)
    for _ in range(60):
        p = random_params(rng, max_sizes=4, max_count=2000)
        listed = list(enumerate_applicable_lot_types(p))
        assert len(listed) == count_applicable_lot_types(p)
        assert listed == brute_lots(p)


def test_enumeration_examples():
    assert list(enumerate_applicable_lot_types(LotTypeParams(2, 0, 1, 0, 2))) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert list(enumerate_applicable_lot_types(LotTypeParams(1, 2, 3, 2, 3))) == [(2,), (3,)]
    assert list(enumerate_applicable_lot_types(LotTypeParams(2, 0, 1, 3, 4))) == []


def test_enumeration_cap():
    with pytest.raises(LotTypeSpaceTooLarge):
        list(enumerate_applicable_lot_types(LotTypeParams(12, 0, 5, 12, 30), cap=1000))


def test_complete_ilp_dimensions():
    assert complete_ilp_dimensions(10, 50, 3) == (1550, 513)
    assert complete_ilp_dimensions(1328, 1290, 3) == (5_140_650, 1_714_451)
    assert complete_ilp_dimensions(1, 1, 1) == (2, 5)


# -- best fits -------------------------------------------------------------------------


def test_best_multiplicity_examples():
    assert best_multiplicity(one_branch(["2", "4", "4", "2"], [1, 2, 3]), 0, (1, 2, 2, 1)) == 2
    assert best_multiplicity(one_branch(["0.6", "1.2", "1.2", "0.6"], [1, 2]), 0, (1, 2, 2, 1)) == 1
    assert best_multiplicity(one_branch(["0", "0", "0", "0"], [1, 2, 3]), 0, (1, 2, 2, 1)) == 1


def test_top_n_single_size_tie():
    inst = one_branch(["1.0"], [1], min_c=0, max_c=2, min_t=0, max_t=2)
    assert top_n_lot_types(inst, 0, 3) == [((1,), 0), ((0,), 10), ((2,), 10)]


def test_top_n_zero_cost_first():
    inst = one_branch(["2", "4", "4", "2"], [1, 2, 3], max_c=2, min_t=4, max_t=8)
    assert top_n_lot_types(inst, 0, 1) == [((1, 2, 2, 1), 0)]


def brute_top(inst, b, n):
    scored = sorted(
        (min(exact_cost(inst, b, l, m) for m in inst.multiplicities), l) for l in brute_lots(inst.params)
    )
    return [(l, v) for v, l in scored[:n]]


def test_top_n_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(40):
        d = [f"{rng.uniform(0, 7):.1f}" for _ in range(3)]
        mults = sorted({int(x) for x in rng.integers(1, 4, size=2)})
        inst = one_branch(d, mults, min_c=0, max_c=2, min_t=2, max_t=4)
        for n in (1, 3, 7, 50):
            assert top_n_lot_types(inst, 0, n) == brute_top(inst, 0, n)


def test_top_n_larger_space_matches_brute_force():
    rng = np.random.default_rng(8)
    for _ in range(10):
        d = [f"{rng.uniform(0, 9):.2f}" for _ in range(5)]
        inst = one_branch(d, [1, 2, 3], min_c=0, max_c=4, min_t=3, max_t=12)
        assert top_n_lot_types(inst, 0, 25) == brute_top(inst, 0, 25)


def test_iter_best_lot_types_orders_with_slope():
    rng = np.random.default_rng(2)
    inst = one_branch(["1.5", "0.2", "3.3"], [1, 2], min_c=0, max_c=3, min_t=1, max_t=7)
    p = inst.params
    for m in (1, 2):
        costs = entry_costs(inst, 0, m)
        slope = float(rng.normal() * 5)
        got = list(iter_best_lot_types(costs, p.min_c, 1, 7, slope))
        want = sorted((exact_cost(inst, 0, l, m) - slope * sum(l), l) for l in brute_lots(p))
        assert [l for _, l in got] == [l for _, l in want]
        assert np.allclose([v for v, _ in got], [v for v, _ in want])


def test_count_is_fast():
    t = time.perf_counter()
    count_applicable_lot_types(LotTypeParams(12, 0, 5, 12, 30))
    assert time.perf_counter() - t < 1.0
