"""Compiled and pure numpy kernels must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

from sknap import _backend
from sknap import _kernels_py as kp
from sknap import (
    draw_outcomes,
    extract_policy,
    make_schedule,
    random_instance,
    solve_value_table,
)

kc = pytest.importorskip("sknap._kernels_cy")


def theta0_of(inst):
    return np.maximum(1.0 - inst.theta.reshape(inst.horizon, -1).sum(axis=1), 0.0)


class TestNames:
    def test_backend_names(self):
        assert kp.backend_name() == "python"
        assert kc.backend_name() == "compiled"
        assert _backend.BACKEND == _backend.kernels.backend_name()
        assert _backend.BACKEND in ("python", "compiled")


class TestKernelEquality:
    def test_dp_sweep(self):
        for seed in range(6):
            inst = random_instance(seed, 2 + seed % 3, 4 + seed, 1 + seed % 4,
                                   3 * seed)
            a = kp.dp_sweep(inst.theta, inst.prices, theta0_of(inst),
                            inst.inventory)
            b = kc.dp_sweep(inst.theta, inst.prices, theta0_of(inst),
                            inst.inventory)
            np.testing.assert_array_equal(np.asarray(a), np.asarray(b))

    def test_table_walk(self):
        for seed in range(4):
            inst = random_instance(seed, 2, 8, 3, 9)
            accept = extract_policy(inst, solve_value_table(inst)).accept
            outcomes = draw_outcomes(inst, 700, seed=seed)
            a = kp.table_walk(outcomes, accept, inst.prices, inst.inventory,
                              inst.max_batch)
            b = kc.table_walk(outcomes, accept, inst.prices, inst.inventory,
                              inst.max_batch)
            np.testing.assert_array_equal(np.asarray(a), np.asarray(b))

    def test_switchover_walk(self):
        for seed, stages in ((0, [(2.0, 3.0), (5.0, -np.inf)]),
                             (1, [(0.0, 0.0), (8.0, 1.5)]),
                             (2, [(4.0, -np.inf), (4.0, -np.inf)])):
            inst = random_instance(seed, 3, 8, 2, 11)
            sched = make_schedule(inst, stages)
            outcomes = draw_outcomes(inst, 900, seed=seed)
            args = (outcomes, inst.prices, inst.inventory, inst.max_batch,
                    sched.times, sched.curves)
            np.testing.assert_array_equal(
                np.asarray(kp.switchover_walk(*args)),
                np.asarray(kc.switchover_walk(*args)))

    def test_fpt_step_sweep(self):
        rng = np.random.default_rng(5)
        levels = np.sort(rng.uniform(0.5, 6.0, size=5))
        n = 300
        xa = np.zeros(n)
        xb = np.zeros(n)
        ia = np.zeros(n, dtype=np.int64)
        ib = np.zeros(n, dtype=np.int64)
        ta = np.full((n, 5), np.inf)
        tb = np.full((n, 5), np.inf)
        for k in range(60):
            z = rng.standard_normal(n)
            kp.fpt_step(xa, z, 0.08, 0.3, levels, ia, ta, 0.1 * (k + 1))
            kc.fpt_step(xb, z, 0.08, 0.3, levels, ib, tb, 0.1 * (k + 1))
        np.testing.assert_array_equal(xa, xb)
        np.testing.assert_array_equal(ia, ib)
        np.testing.assert_array_equal(ta, tb)
        assert ia.max() > 0  # the sweep actually crossed something


class TestBackendSelection:
    def run_probe(self, env_value):
        env = dict(os.environ)
        if env_value is None:
            env.pop("SKNAP_BACKEND", None)
        else:
            env["SKNAP_BACKEND"] = env_value
        return subprocess.run(
            [sys.executable, "-c",
             "from sknap._backend import BACKEND; print(BACKEND)"],
            capture_output=True, text=True, env=env)

    def test_env_forces_each_backend(self):
        assert self.run_probe("python").stdout.strip() == "python"
        assert self.run_probe("compiled").stdout.strip() == "compiled"
        assert self.run_probe(None).stdout.strip() == "compiled"

    def test_unknown_value_fails_the_import(self):
        probe = self.run_probe("gpu")
        assert probe.returncode != 0
        assert "SKNAP_BACKEND" in probe.stderr

    def test_results_match_across_backends_end_to_end(self):
        script = (
            "from sknap import random_instance, solve_value_table, "
            "extract_policy, simulate_policy\n"
            "inst = random_instance(77, 2, 10, 4, 20)\n"
            "table = solve_value_table(inst)\n"
            "policy = extract_policy(inst, table)\n"
            "res = simulate_policy(inst, policy, reps=2000, seed=5)\n"
            "print(repr(table.value(1, 20)), repr(res.mean))\n")
        outs = set()
        for backend in ("python", "compiled"):
            env = dict(os.environ, SKNAP_BACKEND=backend)
            probe = subprocess.run([sys.executable, "-c", script],
                                   capture_output=True, text=True, env=env)
            assert probe.returncode == 0, probe.stderr
            outs.add(probe.stdout)
        assert len(outs) == 1
