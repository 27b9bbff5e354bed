"""Shared-stream simulation, report lines, and percentile banding."""

import math

import numpy as np
import pytest

from sknap import (
    SimResult,
    classify_percentile,
    draw_outcomes,
    extract_policy,
    make_schedule,
    random_instance,
    result_line,
    simulate_policy,
    solve_value_table,
    switchover_decision,
    validate_instance,
    PolicyState,
)


def result_with(mean=10.0, stderr=1.0, reps=1000):
    return SimResult(policy="x", replications=reps, mean=mean,
                     stdev=stderr * math.sqrt(reps), stderr=stderr,
                     quantiles=(1.0, 2.0, 3.0, 4.0, 5.0), seed=0)


class TestDrawOutcomes:
    def test_codes_stay_in_range_and_rerun_identically(self):
        inst = random_instance(3, 2, 8, 3, 10)
        a = draw_outcomes(inst, 500, seed=42)
        b = draw_outcomes(inst, 500, seed=42)
        assert a.shape == (500, 8) and a.dtype == np.int32
        np.testing.assert_array_equal(a, b)
        assert a.min() >= -1 and a.max() < 6
        assert not np.array_equal(a, draw_outcomes(inst, 500, seed=43))

    def test_cell_frequencies_match_the_masses(self):
        inst = random_instance(3, 2, 6, 2, 10)
        out = draw_outcomes(inst, 40000, seed=7)
        # class 2, size 1 in period 4 has code 1 * 2 + 1 - 1 = 2
        mass = inst.theta[3, 1, 0]
        freq = float((out[:, 3] == 2).mean())
        se = math.sqrt(mass * (1 - mass) / 40000)
        assert abs(freq - mass) < 4 * se

    def test_silent_market_never_arrives(self):
        inst = validate_instance(
            {"horizon": 5, "inventory": 4, "prices": [1.0, 0.5],
             "theta": np.zeros((5, 2, 2))})
        assert np.all(draw_outcomes(inst, 64, seed=0) == -1)


class TestSimulatePolicy:
    def test_silent_market_earns_nothing(self):
        inst = validate_instance(
            {"horizon": 5, "inventory": 4, "prices": [1.0, 0.5],
             "theta": np.zeros((5, 2, 2))})
        res = simulate_policy(inst, make_schedule(inst, [(2.0, 0.0)]),
                              reps=200, seed=1)
        assert res.mean == 0.0 and res.stdev == 0.0
        assert res.quantiles == (0.0,) * 5

    def test_matches_closed_form_when_stock_cannot_bind(self):
        inst = random_instance(5, 2, 6, 3, 100)
        want = sum(inst.prices[i] * (j + 1) * inst.theta[t, i, j]
                   for t in range(6) for i in range(2) for j in range(3))
        policy = extract_policy(inst, solve_value_table(inst))
        res = simulate_policy(inst, policy, reps=20000, seed=9)
        assert res.policy == "optimal"
        assert abs(res.mean - want) <= 4 * res.stderr

    def test_reruns_are_bit_identical(self):
        inst = random_instance(5, 2, 6, 3, 8)
        policy = extract_policy(inst, solve_value_table(inst))
        a = simulate_policy(inst, policy, reps=500, seed=3)
        b = simulate_policy(inst, policy, reps=500, seed=3)
        assert a == b
        assert a != simulate_policy(inst, policy, reps=500, seed=4)

    def test_callable_policy_agrees_with_the_table_walk(self):
        inst = random_instance(5, 2, 6, 3, 8)
        policy = extract_policy(inst, solve_value_table(inst))

        def shim(period, level, cls, size):
            return policy.decide(period, level, cls, size)

        a = simulate_policy(inst, policy, reps=800, seed=5)
        b = simulate_policy(inst, shim, reps=800, seed=5)
        assert b.policy == "custom"
        assert b.mean == pytest.approx(a.mean, abs=1e-12)
        assert b.quantiles == a.quantiles

    def test_schedule_walk_agrees_with_per_period_decisions(self):
        inst = random_instance(8, 3, 7, 2, 12)
        sched = make_schedule(inst, [(2.0, 3.0), (5.0, -np.inf)])
        res = simulate_policy(inst, sched, reps=1500, seed=6)
        assert res.policy == "switchover"
        outcomes = draw_outcomes(inst, 1500, seed=6)
        total = 0.0
        for row in outcomes:
            state = PolicyState(period=1, inventory=float(inst.inventory))
            for n in range(7):
                code = int(row[n])
                arrival = None if code < 0 else \
                    (code // 2 + 1, code % 2 + 1)
                accepted, state = switchover_decision(sched, state, arrival)
                if accepted:
                    total += inst.prices[arrival[0] - 1] * arrival[1]
        assert res.mean == pytest.approx(total / 1500, abs=1e-9)

    def test_single_replication_has_no_spread(self):
        inst = random_instance(5, 2, 6, 3, 8)
        policy = extract_policy(inst, solve_value_table(inst))
        res = simulate_policy(inst, policy, reps=1, seed=0)
        assert res.stdev == 0.0 and res.stderr == 0.0
        assert res.replications == 1

    def test_rejects_bad_inputs(self):
        inst = random_instance(5, 2, 6, 3, 8)
        with pytest.raises(ValueError):
            simulate_policy(inst, extract_policy(inst, solve_value_table(inst)),
                            reps=0, seed=0)
        with pytest.raises(TypeError):
            simulate_policy(inst, "not a policy", reps=10, seed=0)

    def test_optimal_policy_is_unbeaten_on_shared_streams(self):
        inst = random_instance(31, 2, 10, 4, 20)
        policy = extract_policy(inst, solve_value_table(inst))
        sched = make_schedule(inst, [(4.0, 2.0)])
        opt = simulate_policy(inst, policy, reps=4000, seed=13)
        swo = simulate_policy(inst, sched, reps=4000, seed=13)
        pooled = math.hypot(opt.stderr, swo.stderr)
        assert opt.mean >= swo.mean - 4 * pooled

    def test_simulated_optimum_tracks_the_exact_value(self):
        inst = random_instance(37, 2, 8, 3, 10)
        table = solve_value_table(inst)
        policy = extract_policy(inst, table)
        res = simulate_policy(inst, policy, reps=20000, seed=17)
        assert abs(res.mean - table.value(1, 10)) <= 4 * res.stderr


class TestResultLine:
    def test_field_layout(self):
        res = result_with()
        tokens = result_line(res).split()
        assert len(tokens) == 11
        assert tokens[0] == "x"
        assert float(tokens[1]) == res.mean
        assert float(tokens[3]) == res.stderr
        assert tuple(float(t) for t in tokens[4:9]) == res.quantiles
        assert tokens[9] == "1000" and tokens[10] == "0"


class TestClassifyPercentile:
    def test_band_edges(self):
        res = result_with(mean=10.0, stderr=1.0)
        assert classify_percentile(res, 10.0) == "97.5"
        assert classify_percentile(res, 5.0) == "97.5"
        assert classify_percentile(res, 10.0 + 1.2) == "95"
        assert classify_percentile(res, 10.0 + 1.5) == "90"
        assert classify_percentile(res, 10.0 + 1.9) == "85"
        assert classify_percentile(res, 10.0 + 10.0) == "above"

    def test_thresholds_are_inclusive(self):
        res = result_with(mean=0.0, stderr=1.0)
        assert classify_percentile(res, 1.0364333894937898) == "97.5"
        assert classify_percentile(res, 1.2815515655446004) == "95"

    def test_zero_spread_compares_directly(self):
        res = result_with(mean=10.0, stderr=0.0)
        assert classify_percentile(res, 10.0) == "97.5"
        assert classify_percentile(res, 9.0) == "97.5"
        assert classify_percentile(res, 10.1) == "above"

    def test_needs_enough_replications(self):
        res = result_with(reps=99)
        with pytest.raises(ValueError):
            classify_percentile(res, 10.0)
