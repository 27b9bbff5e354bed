"""Policy simulation on shared demand streams.

Demand outcomes are drawn once per (instance, seed, replications)
triple, so different policies evaluated with the same seed face the
same arrival streams and their revenue gaps are paired.  The walk over
a stream runs in the compute backend; an arbitrary callable policy
falls back to a per-period loop.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .dp import OptimalPolicy
from .policy import SwitchoverSchedule

__all__ = [
    "PERCENTILE_BANDS",
    "SimResult",
    "draw_outcomes",
    "simulate_policy",
    "result_line",
    "classify_percentile",
]

# (z threshold on (value - mean) / stderr, percentile label)
PERCENTILE_BANDS = (
    (1.0364333894937898, "97.5"),
    (1.2815515655446004, "95"),
    (1.6448536269514722, "90"),
    (1.959963984540054, "85"),
)

QUANTILE_POINTS = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class SimResult:
    """Summary of one simulation run.

    quantiles holds the (5, 25, 50, 75, 95) percent revenue quantiles.
    stdev uses the one-delta degrees of freedom correction and is 0 for
    a single replication.
    """

    policy: str
    replications: int
    mean: float
    stdev: float
    stderr: float
    quantiles: tuple
    seed: int


def draw_outcomes(inst, reps, seed):
    """Draw per-period arrival codes for every replication.

    Each period makes one joint draw over the class/size cells in
    class-major order; the code is class_index * max_batch + size - 1,
    or -1 when no arrival occurs.

    Returns:
        (reps, horizon) int32 array.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    u = rng.random((reps, inst.horizon))
    cells = inst.n_classes * inst.max_batch
    out = np.empty((reps, inst.horizon), dtype=np.int32)
    for n in range(inst.horizon):
        cdf = np.cumsum(inst.theta[n].ravel())
        k = np.searchsorted(cdf, u[:, n], side="right")
        out[:, n] = np.where(k >= cells, -1, k)
    return out


def simulate_policy(inst, policy, reps, seed):
    """Estimate the expected revenue of a policy by simulation.

    Args:
        inst: Instance.
        policy: an OptimalPolicy, a SwitchoverSchedule, or a callable
            policy(period, level, class_id, size) -> accept applied to
            arrivals that already fit the remaining inventory.
        reps: number of replications.
        seed: stream seed; equal seeds mean equal demand streams.

    Returns:
        SimResult.
    """
    if reps < 1:
        raise ValueError("need at least one replication")
    outcomes = draw_outcomes(inst, reps, seed)
    if isinstance(policy, OptimalPolicy):
        label = "optimal"
        revenue = kernels.table_walk(outcomes, policy.accept, inst.prices,
                                     inst.inventory, inst.max_batch)
    elif isinstance(policy, SwitchoverSchedule):
        label = policy.label
        revenue = kernels.switchover_walk(outcomes, inst.prices, inst.inventory,
                                          inst.max_batch, policy.times,
                                          policy.curves)
    elif callable(policy):
        label = getattr(policy, "label", "custom")
        revenue = _walk_callable(inst, policy, outcomes)
    else:
        raise TypeError("unsupported policy type %r" % type(policy).__name__)
    mean = float(revenue.mean())
    stdev = float(revenue.std(ddof=1)) if reps > 1 else 0.0
    return SimResult(
        policy=label, replications=reps, mean=mean, stdev=stdev,
        stderr=stdev / math.sqrt(reps),
        quantiles=tuple(float(q) for q in np.quantile(revenue, QUANTILE_POINTS)),
        seed=int(seed))


def _walk_callable(inst, policy, outcomes):
    reps, n_periods = outcomes.shape
    max_batch = inst.max_batch
    revenue = np.zeros(reps)
    for r in range(reps):
        level = inst.inventory
        for n in range(n_periods):
            o = outcomes[r, n]
            if o < 0:
                continue
            cls = o // max_batch + 1
            size = o % max_batch + 1
            if size <= level and policy(n + 1, level, cls, size):
                revenue[r] += inst.prices[cls - 1] * size
                level -= size
    return revenue


def result_line(result):
    """One-line report: policy, moments, quantiles, replications, seed."""
    fields = [result.policy]
    fields += [format(x, ".12g") for x in
               (result.mean, result.stdev, result.stderr) + result.quantiles]
    fields += [str(result.replications), str(result.seed)]
    return " ".join(fields)


def classify_percentile(result, value):
    """Band the gap between a reference value and a simulated mean.

    The standardized gap g = (value - mean) / stderr is mapped to the
    percentile label of the first band whose threshold it does not
    exceed, "above" when it exceeds them all.  Small or negative gaps
    therefore land in the top band, so the labels rank how tightly the
    simulated revenue tracks the reference value.

    Raises:
        ValueError: fewer than 100 replications.
    """
    if result.replications < 100:
        raise ValueError("percentile bands need at least 100 replications")
    diff = value - result.mean
    if result.stderr == 0.0:
        gap = math.inf if diff > 0.0 else 0.0
    else:
        gap = diff / result.stderr
    for z, label in PERCENTILE_BANDS:
        if gap <= z:
            return label
    return "above"
