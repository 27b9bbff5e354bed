"""Exact value iteration for the batch-demand admission problem.

Solves the backward recursion

    V(n,d) = V(n+1,d) * [no-arrival mass + mass of unfillable batches]
           + sum over fillable (i,j) of theta[n][i][j]
             * max(p_i * j + V(n+1,d-j), V(n+1,d))

with a zero terminal row, and extracts the optimal accept/reject table.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .model import Instance


class DimensionMismatch(ValueError):
    """Value table and instance shapes disagree."""


@dataclass(frozen=True, eq=False)
class ValueTable:
    """Dense value function.

    values has shape (N+1, W+1); row index k holds period n = k+1, the
    final row is the zero terminal convention, so values[0] is the full
    horizon and value(1, W) is the optimal expected revenue.
    """

    horizon: int
    inventory: int
    values: np.ndarray

    def value(self, period: int, level: int) -> float:
        if not 1 <= period <= self.horizon + 1:
            raise IndexError(f"period {period} outside 1..{self.horizon + 1}")
        if not 0 <= level <= self.inventory:
            raise IndexError(f"level {level} outside 0..{self.inventory}")
        return float(self.values[period - 1, level])


@dataclass(frozen=True, eq=False)
class OptimalPolicy:
    """Accept table indexed [period-1, level, class-1, size-1].

    Realizations with size > level are rejected outright and stored as 0.
    """

    horizon: int
    inventory: int
    accept: np.ndarray

    def decide(self, period: int, level: int, cls: int, size: int) -> bool:
        if size > level:
            return False
        return bool(self.accept[period - 1, level, cls - 1, size - 1])


def solve_value_table(inst: Instance) -> ValueTable:
    theta0 = np.maximum(
        1.0 - inst.theta.reshape(inst.horizon, -1).sum(axis=1), 0.0)
    values = kernels.dp_sweep(inst.theta, inst.prices, theta0, inst.inventory)
    return ValueTable(horizon=inst.horizon, inventory=inst.inventory,
                      values=values)


def extract_policy(inst: Instance, table: ValueTable) -> OptimalPolicy:
    """Greedy decisions from the solved table; ties resolve to accept."""
    expected = (inst.horizon + 1, inst.inventory + 1)
    if table.horizon != inst.horizon or table.inventory != inst.inventory \
            or table.values.shape != expected:
        raise DimensionMismatch(
            f"table shape {table.values.shape} does not match instance "
            f"(horizon {inst.horizon}, inventory {inst.inventory})")
    n_periods, n_classes, max_batch = inst.theta.shape
    width = inst.inventory + 1
    accept = np.zeros((n_periods, width, n_classes, max_batch), dtype=np.uint8)
    for k in range(n_periods):
        v_next = table.values[k + 1]
        for i in range(n_classes):
            for j in range(1, max_batch + 1):
                if j >= width:
                    continue
                gain = inst.prices[i] * j + v_next[:width - j]
                accept[k, j:, i, j - 1] = gain >= v_next[j:]
    return OptimalPolicy(horizon=inst.horizon, inventory=inst.inventory,
                         accept=accept)


def write_value_table(table: ValueTable) -> str:
    """Row-major `n d value` lines at 15 significant digits."""
    lines = []
    for k in range(table.horizon + 1):
        for d in range(table.inventory + 1):
            lines.append(f"{k + 1} {d} {table.values[k, d]:.15g}")
    return "\n".join(lines) + "\n"
