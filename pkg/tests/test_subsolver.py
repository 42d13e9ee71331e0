import itertools

import numpy as np
import pytest

from helpers import brute_lots, exact_cost, exhaustive_optimum, random_instance

from lotdesign.model import make_instance
from lotdesign.subsolver import (
    OracleBudgetExceeded,
    assign_optimal,
    brute_force_oracle,
    solve_restricted,
)


def with_window(inst, lo, hi):
    return make_instance(
        [[str(int(v) / inst.scale) for v in row] for row in inst.demand],
        inst.multiplicities,
        min_c=inst.min_c, max_c=inst.max_c, min_t=inst.min_t, max_t=inst.max_t,
        supply=(lo, hi), k=inst.k,
    )


def test_single_branch_exact_window():
    inst = make_instance([["1", "2", "2", "1"]], [1, 2], min_c=0, max_c=2, min_t=4, max_t=8, supply=(6, 6), k=1)
    a = assign_optimal(inst, [(1, 2, 2, 1)])
    assert a.multiplicities == (1,) and a.total_supply == 6 and a.total_cost == 0
    assert a.problems(inst) == []


def test_slack_window_is_per_branch_argmin():
    rng = np.random.default_rng(0)
    for _ in range(20):
        inst = with_window(random_instance(rng), 0, 10**5)
        lots = brute_lots(inst.params)[:4]
        a = assign_optimal(inst, lots)
        want = sum(
            min(exact_cost(inst, b, l, m) for l in lots for m in inst.multiplicities) for b in range(inst.num_branches)
        )
        assert a.total_cost == want


def exhaustive_assign(inst, lots):
    best = None
    options = [(l, m) for l in lots for m in inst.multiplicities]
    for combo in itertools.product(options, repeat=inst.num_branches):
        supply = sum(m * sum(l) for l, m in combo)
        if inst.supply_lo <= supply <= inst.supply_hi:
            c = sum(exact_cost(inst, b, l, m) for b, (l, m) in enumerate(combo))
            key = (c, supply)
            best = key if best is None or key < best else best
    return best


def test_assign_matches_exhaustive_tuples():
    rng = np.random.default_rng(1)
    for _ in range(60):
        inst = random_instance(rng, max_branches=4)
        all_lots = brute_lots(inst.params)
        lots = [all_lots[i] for i in rng.choice(len(all_lots), size=min(3, len(all_lots)), replace=False)]
        a = assign_optimal(inst, lots)
        want = exhaustive_assign(inst, sorted(lots))
        if want is None:
            assert a is None
        else:
            assert (a.total_cost, a.total_supply) == want
            # the k limit is enforced by callers, not by the assignment DP
            assert [p for p in a.problems(inst) if "selected" not in p] == []


def test_assign_infeasible_window():
    inst = make_instance([["1", "1"]], [1], min_c=1, max_c=1, min_t=2, max_t=2, supply=(3, 5), k=1)
    assert assign_optimal(inst, [(1, 1)]) is None


def test_supersets_never_cost_more():
    rng = np.random.default_rng(2)
    for _ in range(30):
        inst = random_instance(rng)
        lots = brute_lots(inst.params)
        small = lots[: max(1, len(lots) // 3)]
        a, big = assign_optimal(inst, small), assign_optimal(inst, lots)
        if a is not None:
            assert big.total_cost <= a.total_cost


def test_wider_window_never_costs_more():
    rng = np.random.default_rng(3)
    for _ in range(30):
        inst = random_instance(rng, max_branches=4)
        wide = with_window(inst, max(0, inst.supply_lo - 3), inst.supply_hi + 3)
        assert brute_force_oracle(wide).total_cost <= brute_force_oracle(inst).total_cost


def test_branch_order_does_not_matter():
    rng = np.random.default_rng(4)
    for _ in range(20):
        inst = random_instance(rng)
        perm = rng.permutation(inst.num_branches)
        shuffled = make_instance(
            [[str(int(v) / inst.scale) for v in inst.demand[b]] for b in perm],
            inst.multiplicities,
            min_c=inst.min_c, max_c=inst.max_c, min_t=inst.min_t, max_t=inst.max_t,
            supply=(inst.supply_lo, inst.supply_hi), k=inst.k,
        )
        assert brute_force_oracle(shuffled).total_cost == brute_force_oracle(inst).total_cost


def test_restricted_matches_exhaustive_subsets():
    rng = np.random.default_rng(5)
    for _ in range(40):
        inst = random_instance(rng, max_branches=3)
        all_lots = brute_lots(inst.params)
        lbar = [all_lots[i] for i in rng.choice(len(all_lots), size=min(5, len(all_lots)), replace=False)]
        res = solve_restricted(inst, lbar)
        want = exhaustive_optimum(inst, lbar)
        assert (None if res is None else res.total_cost) == want
        if res is not None:
            assert set(res.selected) <= set(lbar) and len(res.selected) <= inst.k


def test_restricted_small_set_equals_assignment():
    rng = np.random.default_rng(6)
    for _ in range(20):
        inst = with_window(random_instance(rng), 0, 10**5)
        lots = brute_lots(inst.params)[: inst.k]
        assert solve_restricted(inst, lots).total_cost == assign_optimal(inst, lots).total_cost


def test_restricted_on_incumbent_set_is_no_worse():
    rng = np.random.default_rng(7)
    for _ in range(20):
        inst = random_instance(rng)
        inc = brute_force_oracle(inst)
        assert solve_restricted(inst, inc.selected).total_cost <= inc.total_cost


def test_cutoff_semantics():
    rng = np.random.default_rng(8)
    for _ in range(20):
        inst = random_instance(rng)
        lots = brute_lots(inst.params)
        best = solve_restricted(inst, lots)
        assert solve_restricted(inst, lots, cutoff=best.total_cost) is None
        assert solve_restricted(inst, lots, cutoff=best.total_cost + 1).total_cost == best.total_cost


def test_oracle_matches_exhaustive():
    rng = np.random.default_rng(9)
    for _ in range(40):
        inst = random_instance(rng, max_branches=3)
        o = brute_force_oracle(inst)
        assert o.total_cost == exhaustive_optimum(inst)
        assert o.problems(inst) == []


def test_oracle_perfect_fit_is_zero():
    inst = make_instance(
        [["2", "4"], ["1", "2"], ["3", "6"]], [1, 2, 3], min_c=0, max_c=3, min_t=1, max_t=4, supply=(0, 100), k=1
    )
    assert brute_force_oracle(inst).total_cost == 0


def test_oracle_collapses_to_assignment_when_k_is_large():
    inst = make_instance([["2.5", "1"], ["0.4", "3.3"]], [1, 2], min_c=0, max_c=2, min_t=1, max_t=3, supply=(0, 100), k=20)
    lots = brute_lots(inst.params)
    assert brute_force_oracle(inst).total_cost == assign_optimal(inst, lots).total_cost


def test_oracle_budget():
    inst = make_instance([["1"] * 12], [1, 2, 3], min_c=0, max_c=5, min_t=12, max_t=30, supply=(0, 100), k=2)
    with pytest.raises(OracleBudgetExceeded):
        brute_force_oracle(inst)


def test_assignment_round_trip(toy):
    from lotdesign.subsolver import Assignment

    a = brute_force_oracle(toy)
    assert Assignment.from_dict(a.to_dict()) == a
