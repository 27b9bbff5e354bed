"""Structural checks, the concavity counterexample, and the lift cross-check."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sknap import (
    PROPERTY_NAMES,
    check_properties,
    figure_instance,
    find_counterexample,
    lift_crosscheck,
    report_lines,
    solve_value_table,
    validate_instance,
)

UNIT_HOLDS = ("monotone_n", "monotone_d", "concave_d", "submodular",
              "submodular_plus", "multimodular")


def unit_instance(probs, inventory):
    theta = np.asarray(probs, dtype=float).reshape(-1, 1, 1)
    return validate_instance(
        {"horizon": theta.shape[0], "inventory": inventory,
         "prices": [1.0], "theta": theta})


class TestUnitDemand:
    def test_stationary_rates_pass_everything(self):
        report = check_properties(solve_value_table(unit_instance([0.4] * 6, 4)))
        assert report.all_pass
        for name in PROPERTY_NAMES:
            assert report[name].passed
            assert report[name].violations == ()

    def test_decreasing_rates_break_concavity_in_time_only(self):
        # d=1: the step V(1)-V(2) = 0.729 exceeds V(2)-V(3) = 0.09
        inst = unit_instance([0.9, 0.1, 0.1], 1)
        report = check_properties(solve_value_table(inst))
        assert not report.all_pass
        for name in UNIT_HOLDS:
            assert report[name].passed, name
        bad = report["concave_n"]
        assert not bad.passed
        (n, d, lhs, rhs, gap) = bad.violations[0]
        assert (n, d) == (2, 1)
        assert lhs == pytest.approx(0.729)
        assert rhs == pytest.approx(0.09)
        assert gap == pytest.approx(0.639)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_time_varying_unit_rates_keep_the_other_six(self, seed):
        rng = np.random.default_rng(seed)
        horizon = int(rng.integers(2, 7))
        inventory = int(rng.integers(1, 6))
        probs = rng.uniform(0.05, 0.95, size=horizon)
        report = check_properties(solve_value_table(unit_instance(probs, inventory)))
        for name in UNIT_HOLDS:
            assert report[name].passed, name

    def test_violations_are_recheckable_from_the_table(self):
        inst = unit_instance([0.9, 0.1, 0.1], 1)
        table = solve_value_table(inst)
        report = check_properties(table)
        for n, d, lhs, rhs, gap in report["concave_n"].violations:
            assert lhs == table.value(n - 1, d) - table.value(n, d)
            assert rhs == table.value(n, d) - table.value(n + 1, d)
            assert gap == pytest.approx(lhs - rhs, abs=1e-15)
            assert gap > report.tolerance

    def test_negative_tolerance_is_rejected(self):
        table = solve_value_table(unit_instance([0.5], 1))
        with pytest.raises(ValueError):
            check_properties(table, tol=-1.0)


class TestCounterexample:
    def test_uniform_batch_mix_breaks_concavity_in_stock(self):
        inst, where = find_counterexample()
        assert len(where) >= 1
        table = solve_value_table(inst)
        report = check_properties(table)
        assert not report["concave_d"].passed
        assert where == tuple((n, d) for n, d, *_ in report["concave_d"].violations)
        # each anchor violates V(n,d)-V(n,d-1) >= V(n,d+1)-V(n,d)
        for n, d in where:
            left = table.value(n, d) - table.value(n, d - 1)
            right = table.value(n, d + 1) - table.value(n, d)
            assert right > left + report.tolerance

    def test_size_one_truncation_restores_every_property(self):
        inst, _ = find_counterexample()
        truncated = validate_instance(
            {"horizon": inst.horizon, "inventory": inst.inventory,
             "prices": inst.prices, "theta": inst.theta[:, :, :1]})
        report = check_properties(solve_value_table(truncated))
        assert report.all_pass

    def test_search_is_deterministic(self):
        a, where_a = find_counterexample(seed=7)
        b, where_b = find_counterexample(seed=7)
        assert a == b
        assert where_a == where_b


class TestLiftCrosscheck:
    def test_agrees_on_batch_counterexample(self):
        inst, _ = find_counterexample()
        table = solve_value_table(inst)
        assert check_properties(table)["multimodular"].passed is False
        assert lift_crosscheck(table) is False

    def test_agrees_on_unit_demand(self):
        for seed in range(8):
            rng = np.random.default_rng(seed)
            probs = rng.uniform(0.05, 0.95, size=5)
            table = solve_value_table(unit_instance(probs, 4))
            assert check_properties(table)["multimodular"].passed
            assert lift_crosscheck(table) is True


class TestReportLines:
    def test_summaries_then_violation_rows(self):
        inst = unit_instance([0.9, 0.1, 0.1], 1)
        report = check_properties(solve_value_table(inst))
        lines = report_lines(report)
        head, tail = lines[:7], lines[7:]
        assert [ln.split()[1] for ln in head] == list(PROPERTY_NAMES)
        for name, ln in zip(PROPERTY_NAMES, head):
            word, count = ln.split()[2], int(ln.split()[3])
            assert word == ("pass" if report[name].passed else "fail")
            assert count == len(report[name].violations)
        assert len(tail) == sum(len(report[n].violations) for n in PROPERTY_NAMES)
        for ln in tail:
            name, n, d, lhs, rhs, gap = ln.split()
            assert name in PROPERTY_NAMES
            assert (int(n), int(d), float(lhs), float(rhs), float(gap)) \
                in report[name].violations
