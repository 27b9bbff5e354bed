"""Value recursion and policy extraction against a brute-force oracle."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sknap import (
    DimensionMismatch,
    extract_policy,
    random_instance,
    solve_value_table,
    validate_instance,
    write_value_table,
)


def oracle(inst):
    """Plain recursive evaluation of the same recursion, memoised by hand."""
    n_periods, n_classes, max_batch = inst.theta.shape
    memo = {}

    def v(n, d):
        if n > n_periods:
            return 0.0
        key = (n, d)
        if key in memo:
            return memo[key]
        stay = v(n + 1, d)
        total = max(1.0 - inst.theta[n - 1].sum(), 0.0) * stay
        for i in range(n_classes):
            for j in range(1, max_batch + 1):
                mass = inst.theta[n - 1, i, j - 1]
                if j <= d:
                    total += mass * max(inst.prices[i] * j + v(n + 1, d - j), stay)
                else:
                    total += mass * stay
        memo[key] = total
        return total

    return v


def unit_instance(probs, price=1.0, inventory=1):
    theta = np.asarray(probs, dtype=float).reshape(-1, 1, 1)
    return validate_instance(
        {"horizon": theta.shape[0], "inventory": inventory,
         "prices": [price], "theta": theta})


class TestValueTable:
    def test_zero_inventory_is_worthless(self):
        inst = random_instance(3, 2, 6, 3, 0)
        table = solve_value_table(inst)
        assert table.values.shape == (7, 1)
        assert np.all(table.values == 0.0)

    def test_terminal_row_is_zero(self):
        inst = random_instance(4, 2, 5, 2, 7)
        table = solve_value_table(inst)
        assert np.all(table.values[-1] == 0.0)

    def test_single_period_sells_everything_fillable(self):
        theta = np.zeros((1, 1, 2))
        theta[0, 0, 0] = 0.3
        theta[0, 0, 1] = 0.4
        inst = validate_instance(
            {"horizon": 1, "inventory": 3, "prices": [2.0], "theta": theta})
        table = solve_value_table(inst)
        # 0.3 * 2 + 0.4 * 4
        assert table.value(1, 3) == pytest.approx(2.2, abs=1e-15)

    def test_two_period_unit_demand_by_hand(self):
        inst = unit_instance([0.5, 0.5])
        table = solve_value_table(inst)
        assert table.value(2, 1) == pytest.approx(0.5, abs=1e-15)
        assert table.value(1, 1) == pytest.approx(0.75, abs=1e-15)
        assert table.value(1, 0) == 0.0

    def test_value_accessor_bounds(self):
        table = solve_value_table(random_instance(1, 2, 3, 2, 4))
        with pytest.raises(IndexError):
            table.value(0, 0)
        with pytest.raises(IndexError):
            table.value(5, 0)
        with pytest.raises(IndexError):
            table.value(1, -1)
        with pytest.raises(IndexError):
            table.value(1, 5)

    def test_more_time_and_stock_never_hurt(self):
        inst = random_instance(8, 3, 7, 3, 9)
        v = solve_value_table(inst).values
        assert np.all(np.diff(v, axis=1) >= -1e-12)
        assert np.all(np.diff(v, axis=0) <= 1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.integers(1, 4),
           st.integers(1, 2), st.integers(0, 4))
    @settings(max_examples=40, deadline=None)
    def test_matches_recursive_oracle(self, seed, n_classes, horizon,
                                      max_batch, inventory):
        inst = random_instance(seed, n_classes, horizon, max_batch, inventory)
        table = solve_value_table(inst)
        v = oracle(inst)
        for n in range(1, horizon + 2):
            for d in range(inventory + 1):
                assert table.value(n, d) == pytest.approx(v(n, d), abs=1e-9)


class TestOptimalPolicy:
    def test_last_period_accepts_everything_fillable(self):
        inst = random_instance(6, 3, 5, 3, 6)
        policy = extract_policy(inst, solve_value_table(inst))
        for level in range(1, 7):
            for cls in range(1, 4):
                for size in range(1, min(level, 3) + 1):
                    assert policy.decide(5, level, cls, size)

    def test_batch_too_big_is_rejected(self):
        inst = random_instance(6, 2, 4, 3, 5)
        policy = extract_policy(inst, solve_value_table(inst))
        assert not policy.decide(1, 2, 1, 3)
        assert not policy.decide(1, 0, 1, 1)

    def test_exact_tie_resolves_to_accept(self):
        # period 2 sells the unit for sure, so the period-1 decision
        # compares 1 + 0 against 1 and must accept on the tie
        inst = unit_instance([0.5, 1.0])
        table = solve_value_table(inst)
        policy = extract_policy(inst, table)
        assert table.value(2, 1) == 1.0
        assert policy.decide(1, 1, 1, 1)

    def test_cheap_class_rejected_while_better_demand_is_coming(self):
        theta = np.zeros((2, 2, 1))
        theta[0, 1, 0] = 1.0  # class 2 arrives now
        theta[1, 0, 0] = 1.0  # class 1 arrives next
        inst = validate_instance(
            {"horizon": 2, "inventory": 1, "prices": [1.0, 0.4],
             "theta": theta})
        policy = extract_policy(inst, solve_value_table(inst))
        assert not policy.decide(1, 1, 2, 1)
        assert policy.decide(2, 1, 1, 1)

    def test_policy_agrees_with_oracle_decisions(self):
        inst = random_instance(13, 2, 4, 2, 5)
        table = solve_value_table(inst)
        policy = extract_policy(inst, table)
        v = oracle(inst)
        for n in range(1, 5):
            for d in range(6):
                for i in (1, 2):
                    for j in (1, 2):
                        if j > d:
                            assert not policy.decide(n, d, i, j)
                            continue
                        gain = inst.prices[i - 1] * j + v(n + 1, d - j)
                        want = gain >= v(n + 1, d) - 1e-12
                        assert policy.decide(n, d, i, j) == want

    def test_shape_mismatch_is_rejected(self):
        inst_a = random_instance(1, 2, 4, 2, 5)
        inst_b = random_instance(1, 2, 5, 2, 5)
        table_b = solve_value_table(inst_b)
        with pytest.raises(DimensionMismatch):
            extract_policy(inst_a, table_b)


class TestWriteValueTable:
    def test_grammar_and_row_order(self):
        inst = unit_instance([0.5, 0.5])
        table = solve_value_table(inst)
        lines = write_value_table(table).splitlines()
        assert len(lines) == 3 * 2
        assert lines[0].split() == ["1", "0", "0"]
        assert lines[1].split() == ["1", "1", "0.75"]
        assert lines[-1].split() == ["3", "1", "0"]

    def test_values_survive_the_round_trip(self):
        inst = random_instance(21, 2, 6, 3, 8)
        table = solve_value_table(inst)
        for line in write_value_table(table).splitlines():
            n, d, val = line.split()
            got = table.value(int(n), int(d))
            assert got == pytest.approx(float(val), rel=1e-14, abs=1e-14)
