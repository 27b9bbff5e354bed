"""Pure numpy compute kernels.

Fallback twin of the compiled extension ``_kernels_cy``.  Both
implementations execute their floating point operations in the same
order, element for element, so switching backends never changes a
result bit.  Any change here must be mirrored in the .pyx file.
"""

import numpy as np


def backend_name():
    return "python"


def dp_sweep(theta, prices, theta0, inventory):
    """Backward value recursion.

    theta: (N, I, M) batch probabilities, theta0: (N,) no-arrival mass
    per period, prices: (I,).  Returns an (N+1, W+1) table whose row k
    holds the value over periods k+1..N; the last row is the zero
    terminal row.
    """
    n_periods, n_classes, max_batch = theta.shape
    width = inventory + 1
    values = np.zeros((n_periods + 1, width))
    for k in range(n_periods - 1, -1, -1):
        v_next = values[k + 1]
        acc = theta0[k] * v_next
        for i in range(n_classes):
            for j in range(1, max_batch + 1):
                th = theta[k, i, j - 1]
                pij = prices[i] * j
                if j < width:
                    gain = pij + v_next[:width - j]
                    acc[j:] += th * np.maximum(gain, v_next[j:])
                    acc[:j] += th * v_next[:j]
                else:
                    # batch larger than any feasible level: always rejected
                    acc += th * v_next
        values[k] = acc
    return values


def table_walk(outcomes, accept, prices, inventory, max_batch):
    """Simulate an accept-table policy on precomputed demand outcomes.

    outcomes: (reps, N) int32, -1 for no arrival, else i*M + (j-1).
    accept: (N, W+1, I, M) uint8.  Returns per-replication revenue.
    """
    reps, n_periods = outcomes.shape
    revenue = np.zeros(reps)
    level = np.full(reps, inventory, dtype=np.int64)
    rows = np.arange(reps)
    for n in range(n_periods):
        o = outcomes[:, n]
        present = o >= 0
        if not present.any():
            continue
        code = np.where(present, o, 0)
        cls = code // max_batch
        size = code - cls * max_batch + 1
        feasible = present & (size <= level)
        if not feasible.any():
            continue
        idx = rows[feasible]
        take = accept[n, level[idx], cls[idx], size[idx] - 1] != 0
        sel = idx[take]
        revenue[sel] += prices[cls[sel]] * size[sel]
        level[sel] -= size[sel]
    return revenue


def switchover_walk(outcomes, prices, inventory, max_batch, stage_times,
                    stage_curves):
    """Simulate a switch-over schedule on precomputed demand outcomes.

    stage_times: (S,) thresholds t_m; stage_curves: (S, N) per-period
    curve values c_m.  Stage k admits classes 1..k and latches upward:
    it advances past stage m once the period exceeds t_m or inventory
    falls to c_m of the current period.
    """
    reps, n_periods = outcomes.shape
    n_stages = stage_times.shape[0]
    revenue = np.zeros(reps)
    level = np.full(reps, inventory, dtype=np.int64)
    stage = np.ones(reps, dtype=np.int64)
    for n in range(1, n_periods + 1):
        for _ in range(n_stages):
            can = stage <= n_stages
            if not can.any():
                break
            m = np.where(can, stage, 1) - 1
            open_m = (n > stage_times[m]) | (level <= stage_curves[m, n - 1])
            adv = can & open_m
            if not adv.any():
                break
            stage[adv] += 1
        o = outcomes[:, n - 1]
        present = o >= 0
        if not present.any():
            continue
        code = np.where(present, o, 0)
        cls = code // max_batch
        size = code - cls * max_batch + 1
        take = present & (cls + 1 <= stage) & (size <= level)
        if take.any():
            revenue[take] += prices[cls[take]] * size[take]
            level[take] -= size[take]
    return revenue


def fpt_step(x, z, drift_inc, noise_scale, levels, level_idx, times, t_next):
    """Advance active diffusion paths one step, recording level crossings.

    x, z: (n_active,) path values and standard normal draws; levels is
    ascending; level_idx[p] indexes the next uncrossed level of path p;
    times: (n_active, n_levels) records the first time the running path
    reaches each level.  The caller compacts finished paths.
    """
    x += drift_inc + noise_scale * z
    n_levels = levels.shape[0]
    while True:
        alive = level_idx < n_levels
        if not alive.any():
            break
        current = levels[np.minimum(level_idx, n_levels - 1)]
        hit = alive & (x >= current)
        if not hit.any():
            break
        rows = np.nonzero(hit)[0]
        times[rows, level_idx[rows]] = t_next
        level_idx[rows] += 1
