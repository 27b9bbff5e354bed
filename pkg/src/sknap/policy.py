"""Switch-over admission policies.

A switch-over policy opens the classes one at a time.  Stage m admits
classes 1..m, and the policy moves to stage m+1 when the switch time
t_m has passed or the inventory falls to the stage's reserve curve.
The curve of stage m is flat: the reserve w_m plus the expected volume
of the classes already open over the remaining horizon, so hitting it
means the open classes alone are no longer expected to sell the rest.
Parameters come from the diffusion search, one stage at a time.
"""

from dataclasses import dataclass

import numpy as np

from .diffusion import OptimizerFailure, optimize_switchover
from .model import PeriodOutOfRange, demand_moments

__all__ = [
    "ScheduleSyntaxError",
    "SwitchoverSchedule",
    "PolicyState",
    "expected_volume",
    "switchover_curves",
    "make_schedule",
    "switchover_decision",
    "build_schedule",
    "write_schedule",
    "parse_schedule",
]


class ScheduleSyntaxError(ValueError):
    """A schedule file line could not be parsed."""

    def __init__(self, line, text):
        self.line = line
        super().__init__("line %d: %s" % (line, text))


@dataclass(frozen=True, eq=False)
class SwitchoverSchedule:
    """Frozen parameters of one switch-over policy.

    times and levels hold one entry per switch (n_classes - 1 of them);
    level -inf marks a time-only switch whose curve never fires.
    curves has one row per switch sampled at periods 1..horizon.
    """

    horizon: int
    inventory: int
    n_classes: int
    times: np.ndarray
    levels: np.ndarray
    curves: np.ndarray
    label: str = "switchover"

    @property
    def n_switches(self):
        return len(self.times)


@dataclass(frozen=True)
class PolicyState:
    """Execution state between periods: next period, stock, open stage."""

    period: int
    inventory: float
    stage: int = 1


def expected_volume(inst, classes, start, end):
    """Expected demand volume of a class pool over the window (start, end].

    Fractional endpoints prorate the enclosing period linearly.
    """
    cums = np.zeros(inst.horizon + 1, dtype=np.float64)
    for t in range(1, inst.horizon + 1):
        cums[t] = cums[t - 1] + demand_moments(inst, classes, t).mean
    grid = np.arange(inst.horizon + 1, dtype=np.float64)
    lo = min(max(float(start), 0.0), float(inst.horizon))
    hi = min(max(float(end), 0.0), float(inst.horizon))
    if hi < lo:
        raise ValueError("window end precedes its start")
    return float(np.interp(hi, grid, cums) - np.interp(lo, grid, cums))


def switchover_curves(inst, times, levels):
    """Flat reserve curves for the given switch times and levels.

    Row m holds w_m plus the expected volume of classes 1..m+1 over the
    periods after t_m, constant across periods; a -inf level yields a
    -inf row.
    """
    times = np.asarray(times, dtype=np.float64)
    levels = np.asarray(levels, dtype=np.float64)
    curves = np.empty((len(times), inst.horizon), dtype=np.float64)
    for m in range(len(times)):
        if levels[m] == -np.inf:
            curves[m, :] = -np.inf
            continue
        pool = list(range(1, m + 2))
        tail = expected_volume(inst, pool, times[m], inst.horizon)
        curves[m, :] = levels[m] + tail
    return curves


def make_schedule(inst, stages, label="switchover"):
    """Assemble a schedule from per-switch (time, level) pairs.

    Args:
        inst: Instance the schedule is for.
        stages: n_classes - 1 pairs (t_m, w_m) with nondecreasing times
            in [0, horizon] and levels that are nonnegative or -inf.
        label: free-form tag carried into reports.
    """
    stages = [(float(t), float(w)) for t, w in stages]
    if len(stages) != inst.n_classes - 1:
        raise ValueError("need exactly one switch per class after the first")
    prev = 0.0
    for t, w in stages:
        if not 0.0 <= t <= inst.horizon:
            raise ValueError("switch time %g outside [0, horizon]" % t)
        if t < prev:
            raise ValueError("switch times must be nondecreasing")
        if w != -np.inf and not w >= 0.0:
            raise ValueError("reserve level must be nonnegative or -inf")
        prev = t
    times = np.array([t for t, _ in stages], dtype=np.float64)
    levels = np.array([w for _, w in stages], dtype=np.float64)
    return SwitchoverSchedule(
        horizon=inst.horizon, inventory=inst.inventory,
        n_classes=inst.n_classes, times=times, levels=levels,
        curves=switchover_curves(inst, times, levels), label=label)


def switchover_decision(schedule, state, realization):
    """Apply one period of the policy.

    The stage first advances along the latched chain: while the current
    switch has either timed out (period strictly beyond t_m) or been
    tripped (inventory at or below its curve), the next class opens.
    The arrival is then accepted iff its class is open and its size
    fits the remaining inventory.

    Args:
        schedule: SwitchoverSchedule.
        state: PolicyState before the arrival of state.period.
        realization: (class_id, size) of this period's arrival, or None.

    Returns:
        (accepted, next_state).
    """
    if not 1 <= state.period <= schedule.horizon:
        raise PeriodOutOfRange(state.period, schedule.horizon)
    stage = state.stage
    level = state.inventory
    n = state.period
    while stage <= schedule.n_switches and (
            n > schedule.times[stage - 1]
            or level <= schedule.curves[stage - 1, n - 1]):
        stage += 1
    accepted = False
    if realization is not None:
        cls, size = realization
        if not 1 <= cls <= schedule.n_classes:
            raise ValueError("class id %r out of range" % (cls,))
        if size < 1:
            raise ValueError("batch size must be positive")
        accepted = cls <= stage and size <= level
    next_level = level - realization[1] if accepted else level
    return accepted, PolicyState(period=n + 1, inventory=next_level, stage=stage)


def build_schedule(inst, optimizer=None, two_dim=True, config=None):
    """Search switch parameters stage by stage.

    Stage i reduces the problem to two pools, class i against the pool
    i+1..I, starting where the previous switch ended with the inventory
    discounted by the expected class-i volume sold meanwhile (floored at
    zero, in which case the remaining switches collapse to the start).

    Args:
        inst: Instance.
        optimizer: callable with the optimize_switchover signature,
            defaulting to optimize_switchover.
        two_dim: search reserves as well as times when True.
        config: DiffusionConfig forwarded to the optimizer.

    Returns:
        SwitchoverSchedule labeled switchover-2d or switchover-1d.

    Raises:
        OptimizerFailure: tagged with the failing stage.
    """
    opt = optimizer or optimize_switchover
    stages = []
    start = 0.0
    stock = float(inst.inventory)
    for i in range(1, inst.n_classes):
        high = (i,)
        low = tuple(range(i + 1, inst.n_classes + 1))
        try:
            t_i, w_i, _ = opt(inst, high, low, config=config,
                              start_time=start, inventory=stock,
                              two_dim=two_dim)
        except OptimizerFailure as exc:
            raise OptimizerFailure(str(exc), stage=i) from exc
        stages.append((t_i, w_i))
        stock = max(stock - expected_volume(inst, [i], start, t_i), 0.0)
        start = t_i
    label = "switchover-2d" if two_dim else "switchover-1d"
    return make_schedule(inst, stages, label=label)


def _fmt(x):
    return format(float(x), ".17g")


def write_schedule(schedule):
    """Render a schedule as text; parse_schedule inverts it exactly."""
    lines = [
        "# switch-over schedule",
        "label %s" % schedule.label,
        "horizon %d" % schedule.horizon,
        "inventory %d" % schedule.inventory,
        "classes %d" % schedule.n_classes,
    ]
    for m in range(schedule.n_switches):
        lines.append("stage %d %s %s" % (
            m + 1, _fmt(schedule.times[m]), _fmt(schedule.levels[m])))
    for m in range(schedule.n_switches):
        for t in range(1, schedule.horizon + 1):
            lines.append("curve %d %d %s" % (
                m + 1, t, _fmt(schedule.curves[m, t - 1])))
    return "\n".join(lines) + "\n"


def parse_schedule(text):
    """Parse the text produced by write_schedule."""
    header = {}
    label = "switchover"
    stage_rows = {}
    curve_rows = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0]
        try:
            if key == "label" and len(parts) == 2:
                label = parts[1]
            elif key in ("horizon", "inventory", "classes") and len(parts) == 2:
                header[key] = int(parts[1])
            elif key == "stage" and len(parts) == 4:
                stage_rows[int(parts[1])] = (float(parts[2]), float(parts[3]))
            elif key == "curve" and len(parts) == 4:
                curve_rows[(int(parts[1]), int(parts[2]))] = float(parts[3])
            else:
                raise ValueError
        except ValueError:
            raise ScheduleSyntaxError(lineno, raw.strip()) from None
    for key in ("horizon", "inventory", "classes"):
        if key not in header:
            raise ScheduleSyntaxError(0, "missing %s header" % key)
    horizon = header["horizon"]
    n_classes = header["classes"]
    n_sw = n_classes - 1
    if sorted(stage_rows) != list(range(1, n_sw + 1)):
        raise ScheduleSyntaxError(0, "stage lines do not cover 1..%d" % n_sw)
    times = np.array([stage_rows[m][0] for m in range(1, n_sw + 1)])
    levels = np.array([stage_rows[m][1] for m in range(1, n_sw + 1)])
    curves = np.empty((n_sw, horizon), dtype=np.float64)
    for m in range(1, n_sw + 1):
        for t in range(1, horizon + 1):
            if (m, t) not in curve_rows:
                raise ScheduleSyntaxError(0, "missing curve sample %d %d" % (m, t))
            curves[m - 1, t - 1] = curve_rows[(m, t)]
    return SwitchoverSchedule(
        horizon=horizon, inventory=header["inventory"], n_classes=n_classes,
        times=times, levels=levels, curves=curves, label=label)
