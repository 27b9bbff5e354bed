"""Unit-demand relaxation and its upper bound on the value function.

Each original period expands into M unit-demand sub-periods whose
class-i arrival probability is the expected class-i quantity divided by
M, preserving per-class expected volume.  The relaxed value function v
dominates the original one: V(n,d) <= v(alpha(n), d) with
alpha(n) = (n-1)*M + 1.
"""

from dataclasses import dataclass

import numpy as np

from .dp import solve_value_table
from .model import Instance


class IndexOutOfRange(IndexError):
    """Queried state outside the instance's period or inventory range."""


@dataclass(frozen=True, eq=False)
class Relaxation:
    base_horizon: int
    periods_per_block: int
    unit_instance: Instance

    def alpha(self, period: int) -> int:
        return (period - 1) * self.periods_per_block + 1


def unit_relaxation(inst: Instance) -> Relaxation:
    n_periods, n_classes, max_batch = inst.theta.shape
    sizes = np.arange(1, max_batch + 1, dtype=float)
    rate = inst.theta @ sizes / max_batch  # (N, I) expected quantity / M
    # always a valid sub-period law: sum_i rate <= sum_{i,j} theta <= 1
    unit_theta = np.repeat(rate, max_batch, axis=0)[:, :, None]
    unit = Instance(horizon=n_periods * max_batch, inventory=inst.inventory,
                    prices=inst.prices.copy(), theta=unit_theta)
    return Relaxation(base_horizon=n_periods, periods_per_block=max_batch,
                      unit_instance=unit)


def bound_table(inst: Instance) -> np.ndarray:
    """v(alpha(n), d) for n = 1..N+1, d = 0..W as an (N+1, W+1) array."""
    relax = unit_relaxation(inst)
    unit_values = solve_value_table(relax.unit_instance).values
    return unit_values[::relax.periods_per_block, :].copy()


def upper_bound(inst: Instance, period: int, level: int) -> float:
    if not 1 <= period <= inst.horizon:
        raise IndexOutOfRange(
            f"period {period} outside 1..{inst.horizon}")
    if not 0 <= level <= inst.inventory:
        raise IndexOutOfRange(
            f"level {level} outside 0..{inst.inventory}")
    return float(bound_table(inst)[period - 1, level])


def dominance_gaps(inst: Instance) -> np.ndarray:
    """v(alpha(n),d) - V(n,d) over all states; negative entries break
    the dominance claim."""
    original = solve_value_table(inst).values
    return bound_table(inst) - original
