"""Diffusion demand approximations and switch-over parameter search.

The accept/reject dynamics of a threshold policy are approximated by a
Brownian demand flow with piecewise linear drift and variance fitted to
the per-period demand moments.  Selling out under such a policy becomes
a first-passage event, so the expected revenue of a candidate switch
time t1 and reserve level w1 splits into two phase integrals against a
first-passage law.  This module provides the fitted process objects,
the passage densities (two closed forms plus a simulation estimate),
the two-phase revenue evaluator, and a grid-plus-refinement optimizer
over (t1, w1).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.optimize import brentq, minimize
from scipy.special import ndtr

from ._backend import kernels
from .model import EmptyClassSet, InvalidInstance, demand_moments

__all__ = [
    "DegenerateVariance",
    "QuadratureNonConvergence",
    "OptimizerFailure",
    "DiffusionConfig",
    "DiffusionSpec",
    "PassageProblem",
    "FirstPassageHistogram",
    "fit_diffusion",
    "superpose",
    "first_passage_density",
    "mc_passage_times",
    "mc_first_passage",
    "phase_revenues",
    "optimize_switchover",
]

DENSITY_MODES = ("paper", "classic", "mc")


class DegenerateVariance(ArithmeticError):
    """A passage density was requested where the accumulated variance is zero."""


class QuadratureNonConvergence(RuntimeError):
    """Adaptive quadrature reported an error estimate above the requested tolerance."""

    def __init__(self, achieved, requested):
        self.achieved = float(achieved)
        self.requested = float(requested)
        super().__init__(
            "quadrature error %.3g exceeds requested tolerance %.3g"
            % (self.achieved, self.requested)
        )


class OptimizerFailure(RuntimeError):
    """The switch-over search could not produce a usable candidate."""

    def __init__(self, message, stage=None):
        self.stage = stage
        super().__init__(message if stage is None else "stage %d: %s" % (stage, message))


@dataclass(frozen=True)
class DiffusionConfig:
    """Tuning knobs for passage evaluation and the parameter search.

    density picks the passage law used inside objectives: "paper" and
    "classic" are closed forms, "mc" estimates passage times by
    simulating the fitted process.  grid_t and grid_w set the coarse
    search grid, refine_iters bounds the local simplex polish, and
    tmax_sigmas fixes the evaluation window at
    horizon + tmax_sigmas * sqrt(total variance).
    """

    density: str = "mc"
    grid_t: int = 41
    grid_w: int = 41
    quad_tol: float = 1e-8
    tmax_sigmas: float = 10.0
    mc_paths: int = 4096
    mc_step: float = 0.05
    seed: int = 0
    refine_iters: int = 200
    start_knots: int = 17
    time_grid: int = 1001

    def __post_init__(self):
        if self.density not in DENSITY_MODES:
            raise ValueError("density must be one of %s" % (DENSITY_MODES,))
        if self.grid_t < 2 or self.grid_w < 2:
            raise ValueError("search grid needs at least 2 points per axis")
        if self.quad_tol <= 0 or self.mc_step <= 0 or self.tmax_sigmas <= 0:
            raise ValueError("tolerances, steps and window widths must be positive")
        if self.mc_paths < 2 or self.start_knots < 2 or self.time_grid < 3:
            raise ValueError("sample and grid sizes are too small")


class DiffusionSpec:
    """Drift and variance curves for one demand flow.

    Both curves are piecewise linear between anchors placed at integer
    times 0..horizon, with the 0 anchor duplicating the first period so
    the curves are constant on [0, 1], and constant extension beyond the
    horizon.  Cumulative integrals are exact per piece.
    """

    def __init__(self, knots, drift, variance, horizon=None):
        knots = np.asarray(knots, dtype=np.float64)
        drift = np.asarray(drift, dtype=np.float64)
        variance = np.asarray(variance, dtype=np.float64)
        if knots.ndim != 1 or knots.size < 2:
            raise ValueError("need at least two knots")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if drift.shape != knots.shape or variance.shape != knots.shape:
            raise ValueError("drift and variance must match the knot grid")
        if np.any(variance < 0):
            raise ValueError("variance anchors must be nonnegative")
        self.knots = knots
        self.drift = drift
        self.variance = variance
        self.horizon = float(knots[-1] if horizon is None else horizon)
        self._cum_drift = _anchor_cumulative(knots, drift)
        self._cum_var = _anchor_cumulative(knots, variance)

    def gamma(self, t):
        """Instantaneous drift at time t (clamped to the anchor range)."""
        return np.interp(t, self.knots, self.drift)

    def sigma2(self, t):
        """Instantaneous variance rate at time t."""
        return np.interp(t, self.knots, self.variance)

    def cum_drift(self, t):
        """Integral of the drift curve over [0, t]."""
        return _cumulative_eval(self.knots, self.drift, self._cum_drift, t)

    def cum_var(self, t):
        """Integral of the variance curve over [0, t]."""
        return _cumulative_eval(self.knots, self.variance, self._cum_var, t)


def _anchor_cumulative(knots, vals):
    # trapezoid per piece is exact for piecewise linear anchors
    steps = 0.5 * (vals[1:] + vals[:-1]) * np.diff(knots)
    out = np.empty(knots.size, dtype=np.float64)
    out[0] = 0.0
    np.cumsum(steps, out=out[1:])
    return out


def _cumulative_eval(knots, vals, cums, t):
    t = np.asarray(t, dtype=np.float64)
    scalar = t.ndim == 0
    tc = np.maximum(np.atleast_1d(t), 0.0)
    inside = np.minimum(tc, knots[-1])
    i = np.clip(np.searchsorted(knots, inside, side="right") - 1, 0, knots.size - 2)
    dt = inside - knots[i]
    slope = (vals[i + 1] - vals[i]) / (knots[i + 1] - knots[i])
    out = cums[i] + vals[i] * dt + 0.5 * slope * dt * dt
    out += vals[-1] * (tc - inside)
    return float(out[0]) if scalar else out


def fit_diffusion(inst, classes):
    """Fit a DiffusionSpec to the pooled demand of a class subset.

    Anchors at t = 1..N carry the exact mean and variance of the
    subset's volume in that period; the t = 0 anchor repeats period 1.
    """
    ids = sorted(set(int(c) for c in classes))
    if not ids:
        raise EmptyClassSet()
    n = inst.horizon
    means = np.empty(n + 1, dtype=np.float64)
    variances = np.empty(n + 1, dtype=np.float64)
    for t in range(1, n + 1):
        m = demand_moments(inst, ids, t)
        means[t] = m.mean
        variances[t] = m.variance
    means[0] = means[1]
    variances[0] = variances[1]
    return DiffusionSpec(np.arange(n + 1, dtype=np.float64), means, variances)


def superpose(a, b):
    """Combine two flows on the same knot grid by adding drift and variance."""
    if a.knots.shape != b.knots.shape or not np.allclose(a.knots, b.knots):
        raise ValueError("cannot superpose flows on different knot grids")
    return DiffusionSpec(a.knots, a.drift + b.drift, a.variance + b.variance,
                         horizon=max(a.horizon, b.horizon))


@dataclass(frozen=True, eq=False)
class PassageProblem:
    """First passage of a fitted flow over a fixed level.

    The clock is lagged: time u in density and sampling calls means
    absolute time start + u, and the flow accumulates from start.
    """

    spec: DiffusionSpec
    level: float
    start: float = 0.0


def first_passage_density(prob, t, mode="paper"):
    """Closed-form passage density at lag t (scalar or array).

    Two variants are supported.  "paper" evaluates
        sigma2(t) (a + L(t)) / sqrt(4 pi S(t)^3) exp(-(a + L(t))^2 / (4 S(t)))
    and "classic" the drifted hitting form
        sigma2(t) a / sqrt(2 pi S(t)^3) exp(-(a - L(t))^2 / (2 S(t)))
    where a is the level and L, S are the accumulated drift and
    variance since start.  For constant coefficients "classic" is the
    inverse Gaussian density.  Entries at t <= 0 evaluate to 0; a
    positive lag with zero accumulated variance raises
    DegenerateVariance.
    """
    if mode not in ("paper", "classic"):
        raise ValueError("mode must be 'paper' or 'classic'")
    t = np.asarray(t, dtype=np.float64)
    scalar = t.ndim == 0
    tv = np.atleast_1d(t).astype(np.float64)
    out = np.zeros_like(tv)
    a = float(prob.level)
    pos = tv > 0.0
    if a == np.inf or not np.any(pos):
        return float(out[0]) if scalar else out
    if a <= 0.0:
        # passage is immediate; the law is a point mass at 0, not a density
        return float(out[0]) if scalar else out
    spec, s0 = prob.spec, prob.start
    lam = spec.cum_drift(s0 + tv[pos]) - spec.cum_drift(s0)
    sig = spec.cum_var(s0 + tv[pos]) - spec.cum_var(s0)
    if np.any(sig <= 0.0):
        raise DegenerateVariance(
            "accumulated variance vanishes on the requested lag range")
    rate = spec.sigma2(s0 + tv[pos])
    if mode == "paper":
        dens = rate * (a + lam) / np.sqrt(4.0 * np.pi * sig**3) \
            * np.exp(-((a + lam) ** 2) / (4.0 * sig))
    else:
        dens = rate * a / np.sqrt(2.0 * np.pi * sig**3) \
            * np.exp(-((a - lam) ** 2) / (2.0 * sig))
    out[pos] = dens
    return float(out[0]) if scalar else out


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def default_t_max(spec, start=0.0, sigmas=10.0):
    """Lag window covering the horizon plus a dispersion allowance."""
    spread = math.sqrt(max(spec.cum_var(spec.horizon), 0.0))
    return max(spec.horizon + sigmas * spread - start, 0.0)


def mc_passage_times(spec, levels, paths, step, seed, start=0.0, t_max=None):
    """Simulate the flow once and record first crossings of many levels.

    Increments over each step use the exact integrals of drift and
    variance, so the discretization touches only the crossing check.
    Paths that clear every level are dropped from the sweep once more
    than a quarter of the block is done.

    Args:
        spec: DiffusionSpec to simulate.
        levels: level values; nonpositive entries cross at lag 0.
        paths: number of sample paths.
        step: time step of the sweep.
        seed: int or numpy SeedSequence.
        start: absolute start time of the flow.
        t_max: lag window; defaults to the horizon plus ten deviations.

    Returns:
        (times, crossed): times has shape (paths, len(levels)) holding
        crossing lags, with t_max substituted where a level was not
        reached inside the window; crossed is the matching bool mask.
    """
    levels = np.asarray(levels, dtype=np.float64)
    if levels.ndim != 1 or levels.size == 0:
        raise ValueError("levels must be a nonempty 1d array")
    if t_max is None:
        t_max = default_t_max(spec, start)
    t_max = float(t_max)
    order = np.argsort(levels, kind="stable")
    sorted_levels = levels[order]

    times = np.full((paths, levels.size), np.inf, dtype=np.float64)
    live_cols = sorted_levels > 0.0
    times[:, order[~live_cols]] = 0.0
    active_levels = np.ascontiguousarray(sorted_levels[live_cols])
    if active_levels.size and t_max > 0.0:
        n_steps = max(int(math.ceil(t_max / step - 1e-12)), 1)
        grid = np.minimum(np.arange(n_steps + 1, dtype=np.float64) * step, t_max)
        lam = spec.cum_drift(start + grid) - spec.cum_drift(start)
        sig = spec.cum_var(start + grid) - spec.cum_var(start)
        drift_inc = np.diff(lam)
        noise_scale = np.sqrt(np.maximum(np.diff(sig), 0.0))

        rng = np.random.Generator(np.random.Philox(_seed_sequence(seed)))
        x = np.zeros(paths, dtype=np.float64)
        idx = np.zeros(paths, dtype=np.int64)
        rows = np.arange(paths, dtype=np.int64)
        rec = np.full((paths, active_levels.size), np.inf, dtype=np.float64)
        for k in range(n_steps):
            if x.size == 0:
                break
            z = rng.standard_normal(x.size)
            kernels.fpt_step(x, z, float(drift_inc[k]), float(noise_scale[k]),
                             active_levels, idx, rec, float(grid[k + 1]))
            done = idx >= active_levels.size
            if done.any() and (k == n_steps - 1 or done.mean() > 0.25):
                sel = rows[done]
                times[sel[:, None], order[live_cols][None, :]] = rec[done]
                keep = ~done
                x = np.ascontiguousarray(x[keep])
                idx = np.ascontiguousarray(idx[keep])
                rec = np.ascontiguousarray(rec[keep])
                rows = rows[keep]
        if rows.size:
            times[rows[:, None], order[live_cols][None, :]] = rec
    crossed = np.isfinite(times)
    times[~crossed] = t_max
    return times, crossed


@dataclass(frozen=True, eq=False)
class FirstPassageHistogram:
    """Binned simulation estimate of a passage law.

    density integrates to the crossed fraction over [0, t_max]; times
    holds per-path crossing lags with t_max where no crossing happened.
    """

    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    times: np.ndarray
    crossed: np.ndarray
    crossed_fraction: float
    paths: int
    step: float
    seed: int
    t_max: float


def mc_first_passage(prob, paths, step, seed, bins=200, t_max=None):
    """Histogram the passage law of a single-level problem by simulation."""
    if t_max is None:
        t_max = default_t_max(prob.spec, prob.start)
    t_max = float(t_max)
    times, crossed = mc_passage_times(
        prob.spec, np.array([prob.level]), paths, step, seed,
        start=prob.start, t_max=t_max)
    times = times[:, 0]
    crossed = crossed[:, 0]
    edges = np.linspace(0.0, t_max, bins + 1)
    counts, _ = np.histogram(times[crossed], bins=edges)
    width = edges[1] - edges[0]
    density = counts / (paths * width)
    return FirstPassageHistogram(
        edges=edges, counts=counts, density=density, times=times,
        crossed=crossed, crossed_fraction=float(crossed.mean()),
        paths=paths, step=float(step),
        seed=seed if isinstance(seed, int) else -1, t_max=t_max)


def _volume_cums(inst, ids):
    # cumulative expected volume of the class subset at integer times 0..N
    cums = np.zeros(inst.horizon + 1, dtype=np.float64)
    for t in range(1, inst.horizon + 1):
        cums[t] = cums[t - 1] + demand_moments(inst, ids, t).mean
    return cums


def _weighted_price(inst, ids, a, b):
    """Volume-weighted price of a class pool over the window (a, b]."""
    total = 0.0
    weighted = 0.0
    grid = np.arange(inst.horizon + 1, dtype=np.float64)
    for i in ids:
        cums = _volume_cums(inst, [i])
        vol = np.interp(b, grid, cums) - np.interp(a, grid, cums)
        total += vol
        weighted += inst.prices[i - 1] * vol
    return weighted / total if total > 0.0 else 0.0


def _capped_sales(mean, var, cap):
    """Moments of selling against a finite stock.

    For demand X ~ N(mean, var) and stock cap, returns
    (E[min(X, cap)], E[(cap - X)^+]), the expected volume sold and the
    expected stock left over; the two always sum to cap.  Zero variance
    falls back to the deterministic split.
    """
    mean = np.asarray(mean, dtype=np.float64)
    scalar = mean.ndim == 0
    m = np.atleast_1d(mean)
    s = np.sqrt(np.maximum(np.broadcast_to(
        np.asarray(var, dtype=np.float64), m.shape), 0.0))
    live = s > 0.0
    z = np.where(live, (cap - m) / np.where(live, s, 1.0), 0.0)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    leftover = np.where(live, s * (z * ndtr(z) + phi), np.maximum(cap - m, 0.0))
    sold = cap - leftover
    if scalar:
        return float(sold[0]), float(leftover[0])
    return sold, leftover


def _integer_lags(spec, start, t_max):
    """Lag offsets of the integer time knots inside (0, t_max).

    The fitted coefficients are piecewise linear between integer times,
    so passage densities are only piecewise smooth; handing these
    breakpoints to the adaptive quadrature keeps it convergent.
    """
    lo = math.ceil(start)
    hi = min(math.floor(start + t_max), int(round(spec.horizon)))
    if hi < lo:
        return ()
    return tuple(float(k) - start for k in range(lo, hi + 1))


def _first_crossing(spec, start, level, lag_max):
    """Smallest lag with accumulated drift >= level, or None inside the window."""
    if level <= 0.0:
        return 0.0
    base = spec.cum_drift(start)

    def gap(u):
        return spec.cum_drift(start + u) - base - level

    if gap(lag_max) < 0.0:
        return None
    return float(brentq(gap, 0.0, lag_max, xtol=1e-12))


class _PhaseModel:
    """Shared scaffolding for the two-phase revenue of one stage.

    Bundles the fitted flows of the priority pool (sold in phase 1) and
    the full pool (sold after the switch), the pooled prices, and the
    passage problem of the phase-1 stopping rule.  Lags are measured
    from the stage start.
    """

    def __init__(self, inst, classes_high, classes_low, start, inventory, config):
        if classes_high is None:
            classes_high = (1,)
        if classes_low is None:
            classes_low = tuple(range(2, inst.n_classes + 1))
        self.ids_hi = sorted(set(int(c) for c in classes_high))
        self.ids_lo = sorted(set(int(c) for c in classes_low))
        if not self.ids_hi:
            raise EmptyClassSet()
        pool = self.ids_hi + self.ids_lo
        if len(set(pool)) != len(pool):
            raise InvalidInstance([("overlapping_pools", tuple(pool))])
        self.inst = inst
        self.config = config
        self.start = float(start)
        self.horizon = float(inst.horizon)
        if not 0.0 <= self.start <= self.horizon:
            raise ValueError("stage start must lie inside [0, horizon]")
        self.inventory = float(inst.inventory if inventory is None else inventory)
        self.span = self.horizon - self.start

        self.spec_hi = fit_diffusion(inst, self.ids_hi)
        if self.ids_lo:
            self.spec_all = superpose(self.spec_hi, fit_diffusion(inst, self.ids_lo))
        else:
            self.spec_all = self.spec_hi
        # phase-1 stopping flow: drift of both pools, variance of the priority pool
        self.spec_y = DiffusionSpec(
            self.spec_hi.knots,
            self.spec_hi.drift + self.spec_all.drift,
            self.spec_hi.variance,
            horizon=self.spec_hi.horizon)
        self.price_hi = _weighted_price(inst, self.ids_hi, self.start, self.horizon)
        self.price_all = _weighted_price(
            inst, self.ids_hi + self.ids_lo, self.start, self.horizon)
        self.tail_all = self.spec_all.cum_drift(self.horizon) \
            - self.spec_all.cum_drift(self.start)
        self.lag_max = max(
            default_t_max(self.spec_y, self.start, config.tmax_sigmas), 0.0)
        self._y_var_total = self.spec_y.cum_var(self.start + self.lag_max) \
            - self.spec_y.cum_var(self.start)

    def level(self, w):
        return self.inventory - w - self.tail_all

    def lam_hi(self, b):
        return self.spec_hi.cum_drift(self.start + b) - self.spec_hi.cum_drift(self.start)

    def var_hi(self, b):
        return self.spec_hi.cum_var(self.start + b) - self.spec_hi.cum_var(self.start)

    def priority_split(self, b):
        """Expected priority volume sold by lag b and expected stock left.

        Gaussian moment matching of the accumulated priority demand
        against the stage inventory; smooth in b and bounded by the
        inventory, unlike the raw fluid volume.
        """
        return _capped_sales(self.lam_hi(b), self.var_hi(b), self.inventory)

    def pool_volume(self, b, u):
        """Expected pooled volume over lag (b, b + u], truncated at the horizon."""
        lo = self.start + b
        hi = np.minimum(lo + u, self.horizon)
        return self.spec_all.cum_drift(hi) - self.spec_all.cum_drift(lo)

    def y_problem(self, w):
        return PassageProblem(self.spec_y, self.level(w), self.start)

    def y_deterministic(self):
        return self._y_var_total <= 0.0

    # phase-2 yield after switching at lag b on the stock quantity `left`

    def fluid_left(self, b):
        return max(self.inventory - self.lam_hi(b), 0.0)

    def _phase2_setup(self, b, left):
        window = max(self.span - b, 0.0)
        cap = min(self.pool_volume(b, window), left)
        return window, cap

    def phase2_quad(self, b, left, mode, quad):
        """Adaptive-quadrature phase-2 revenue for a switch at lag b."""
        window, cap = self._phase2_setup(b, left)
        if left <= 0.0 or window <= 0.0 or self.price_all <= 0.0:
            return 0.0
        start2 = self.start + b
        t2_max = max(default_t_max(self.spec_all, start2,
                                   self.config.tmax_sigmas), window)
        var2 = self.spec_all.cum_var(start2 + t2_max) - self.spec_all.cum_var(start2)
        if var2 <= 0.0:
            hit = _first_crossing(self.spec_all, start2, left, t2_max)
            vol = cap if hit is None else min(self.pool_volume(b, hit), left)
            return self.price_all * vol
        prob = PassageProblem(self.spec_all, left, start2)
        pts = _integer_lags(self.spec_all, start2, t2_max) + (min(window, t2_max),)

        def integrand(u):
            vol = min(self.pool_volume(b, min(u, window)), left)
            return self.price_all * vol * first_passage_density(prob, u, mode)

        head = quad(integrand, 0.0, t2_max, points=pts)
        mass = quad(lambda u: first_passage_density(prob, u, mode), 0.0, t2_max,
                    points=pts)
        defect = max(1.0 - mass, 0.0)
        return head + defect * self.price_all * cap

    def phase2_grid(self, b, left, mode):
        """Fixed-grid phase-2 revenue used by the optimizer."""
        window, cap = self._phase2_setup(b, left)
        if left <= 0.0 or window <= 0.0 or self.price_all <= 0.0:
            return 0.0
        start2 = self.start + b
        t2_max = max(default_t_max(self.spec_all, start2,
                                   self.config.tmax_sigmas), window)
        var2 = self.spec_all.cum_var(start2 + t2_max) - self.spec_all.cum_var(start2)
        if var2 <= 0.0:
            hit = _first_crossing(self.spec_all, start2, left, t2_max)
            vol = cap if hit is None else min(self.pool_volume(b, hit), left)
            return self.price_all * vol
        prob = PassageProblem(self.spec_all, left, start2)
        u = np.linspace(0.0, t2_max, self.config.time_grid)
        dens = first_passage_density(prob, u, mode)
        vol = np.minimum(self.pool_volume(b, np.minimum(u, window)), left)
        mass = np.trapezoid(dens, u)
        head = np.trapezoid(dens * vol, u)
        defect = max(1.0 - mass, 0.0)
        return self.price_all * (head + defect * cap)

    def phase2_mc(self, b, left, seed):
        """Simulation phase-2 revenue used by the optimizer."""
        window, cap = self._phase2_setup(b, left)
        if left <= 0.0 or window <= 0.0 or self.price_all <= 0.0:
            return 0.0
        start2 = self.start + b
        t2_max = max(default_t_max(self.spec_all, start2,
                                   self.config.tmax_sigmas), window)
        times, _ = mc_passage_times(
            self.spec_all, np.array([left]), self.config.mc_paths,
            self.config.mc_step, seed, start=start2, t_max=t2_max)
        vol = np.minimum(self.pool_volume(b, np.minimum(times[:, 0], window)), left)
        return self.price_all * float(vol.mean())

    def phase2_mc_multi(self, b, lefts, seed):
        """Simulation phase-2 revenue at one lag for several stock levels.

        One path sweep records the passage times of every level, so the
        cost matches a single phase2_mc call and the levels share paths.
        """
        lefts = np.asarray(lefts, dtype=np.float64)
        out = np.zeros(lefts.shape)
        window = max(self.span - b, 0.0)
        if window <= 0.0 or self.price_all <= 0.0:
            return out
        pos = np.unique(lefts[lefts > 0.0])
        if pos.size == 0:
            return out
        start2 = self.start + b
        t2_max = max(default_t_max(self.spec_all, start2,
                                   self.config.tmax_sigmas), window)
        times, _ = mc_passage_times(
            self.spec_all, pos, self.config.mc_paths,
            self.config.mc_step, seed, start=start2, t_max=t2_max)
        capped = np.minimum(times, window)
        revs = np.empty(pos.size)
        for j in range(pos.size):
            vol = np.minimum(self.pool_volume(b, capped[:, j]), pos[j])
            revs[j] = self.price_all * float(vol.mean())
        mask = lefts > 0.0
        out[mask] = revs[np.searchsorted(pos, lefts[mask])]
        return out

def _checked_quad(tol):
    """Adaptive quadrature closure enforcing the configured tolerance."""

    def quad(func, a, b, points=None):
        if b <= a:
            return 0.0
        pts = None
        if points:
            pts = [p for p in points if a < p < b]
            pts = pts or None
        # full_output silences the warning path; the error check below replaces it
        val, err = integrate.quad(func, a, b, points=pts, epsabs=tol,
                                  epsrel=tol, limit=200, full_output=1)[:2]
        if err > 10.0 * tol * max(1.0, abs(val)):
            raise QuadratureNonConvergence(err, tol)
        return val

    return quad


def phase_revenues(inst, t1, w1, classes_high=None, classes_low=None,
                   start_time=0.0, inventory=None, config=None):
    """Expected revenue of both phases for one (t1, w1) candidate.

    Phase 1 sells only the priority pool until its stopping rule fires
    (accumulated pooled demand reaches inventory - w1 - remaining pooled
    volume) or the switch time t1 passes.  Phase 2 opens the full pool
    on whatever the fluid approximation of phase 1 left behind.  Phase 1
    revenue follows the fluid volume of the priority pool without an
    inventory cap; the optimizer applies its own capped variant.

    w1 may be -inf, which disables the stopping rule so the switch
    happens at t1 exactly.

    Returns:
        (revenue_phase1, revenue_phase2) floats.
    """
    config = config or DiffusionConfig()
    model = _PhaseModel(inst, classes_high, classes_low, start_time, inventory, config)
    if not model.start <= t1 <= model.horizon:
        raise ValueError("t1 must lie in [start_time, horizon]")
    if w1 != -np.inf and not w1 >= 0.0:
        raise ValueError("w1 must be nonnegative or -inf")
    t1_lag = float(t1) - model.start
    quad = _checked_quad(config.quad_tol)

    def revenue_hi(b):
        return model.price_hi * model.lam_hi(b)

    if config.density == "mc":
        def phase2(b):
            seed = _seed_sequence((config.seed, 901, int(round(b * 4096))))
            return model.phase2_mc(b, model.fluid_left(b), seed)
    else:
        def phase2(b):
            return model.phase2_quad(b, model.fluid_left(b), config.density, quad)

    if w1 == -np.inf:
        # disabled stopping rule: the switch happens at t1 exactly
        return revenue_hi(t1_lag), phase2(t1_lag)

    level = model.level(w1)
    if level <= 0.0:
        return 0.0, phase2(0.0)

    if model.y_deterministic():
        hit = _first_crossing(model.spec_y, model.start, level, model.lag_max)
        b = t1_lag if hit is None else min(hit, t1_lag)
        return revenue_hi(b), phase2(b)

    knots = np.unique(np.concatenate(
        [np.linspace(0.0, t1_lag, config.start_knots), [t1_lag]]))
    table = np.array([phase2(float(bk)) for bk in knots])

    if config.density == "mc":
        times, _ = mc_passage_times(
            model.spec_y, np.array([level]), config.mc_paths, config.mc_step,
            _seed_sequence((config.seed, 11)), start=model.start, t_max=model.lag_max)
        b = np.minimum(times[:, 0], t1_lag)
        v1 = model.price_hi * float(model.lam_hi(b).mean())
        v2 = float(np.interp(b, knots, table).mean())
        return v1, v2

    prob = model.y_problem(w1)
    pts = _integer_lags(model.spec_y, model.start, model.lag_max) + (t1_lag,)

    def dens(u):
        return first_passage_density(prob, u, config.density)

    mass_tail = quad(dens, t1_lag, model.lag_max, points=pts)
    mass_head = quad(dens, 0.0, t1_lag, points=pts)
    defect = max(1.0 - mass_head - mass_tail, 0.0)
    stuck = mass_tail + defect

    v1 = quad(lambda u: revenue_hi(u) * dens(u), 0.0, t1_lag, points=pts)
    v1 += revenue_hi(t1_lag) * stuck
    # phase 2 enters through its knot table: each direct evaluation runs
    # its own quadrature, too costly inside another integrand
    v2 = quad(lambda u: float(np.interp(u, knots, table)) * dens(u),
              0.0, t1_lag, points=pts + tuple(knots))
    v2 += float(table[-1]) * stuck
    return float(v1), float(v2)


class _Objective:
    """Capped switch-over objective on interpolation tables.

    The payoff of ending phase 1 at lag b treats the accumulated
    priority demand D as Gaussian with the fitted moments and caps it
    at the stage inventory W:
        h(b) = E[ price_hi * min(D, W) + phase2(b, (W - D)^+) ]
    with the phase-2 term integrated over the leftover law by a
    Gauss-Hermite rule.  This keeps h smooth and strictly shaped past
    the fluid sell-out lag (where the raw fluid payoff goes flat and
    stops ranking candidates) and prices the spread of the leftover
    stock rather than its mean alone.  h is tabulated once on a dense
    lag grid, phase 2 itself on a coarse knot table; each density mode
    then reduces the objective at (t, w) to an expectation of h at the
    capped passage lag of the level implied by w.
    """

    GH_NODES = 8

    def __init__(self, model):
        self.model = model
        config = model.config
        span = model.span
        self.b_dense = np.linspace(0.0, span, 401) if span > 0 else np.zeros(1)
        knots = np.linspace(0.0, span, config.start_knots) if span > 0 else np.zeros(1)
        mode = config.density
        nodes, gh_w = np.polynomial.hermite_e.hermegauss(self.GH_NODES)
        gh_w = gh_w / gh_w.sum()
        means = np.atleast_1d(model.lam_hi(knots))
        sigmas = np.sqrt(np.maximum(np.atleast_1d(model.var_hi(knots)), 0.0))
        table = np.empty(knots.size)
        for k, b in enumerate(knots):
            if sigmas[k] > 0.0:
                lefts = np.clip(model.inventory - means[k] - sigmas[k] * nodes,
                                0.0, model.inventory)
                weights = gh_w
            else:
                lefts = np.array([max(model.inventory - means[k], 0.0)])
                weights = np.ones(1)
            if mode == "mc":
                revs = model.phase2_mc_multi(
                    float(b), lefts, _seed_sequence((config.seed, 200 + k)))
            else:
                revs = np.array([
                    model.phase2_grid(float(b), float(lf), mode) for lf in lefts])
            table[k] = float(np.dot(weights, revs))
        g_dense = np.interp(self.b_dense, knots, table)
        sold, _ = model.priority_split(self.b_dense)
        self.h_dense = model.price_hi * sold + g_dense
        self._y_cache = {}
        if mode == "mc":
            self._y_levels = None
            self._y_times = None

    def payoff(self, b):
        return np.interp(b, self.b_dense, self.h_dense)

    def sentinel(self, t):
        """Objective of the time-only rule: switch exactly at t."""
        return float(self.payoff(t - self.model.start))

    def prepare_mc_levels(self, levels):
        """One master sweep recording the passage lags of every level."""
        model, config = self.model, self.model.config
        pos = np.unique(levels[levels > 0.0])
        if pos.size == 0:
            self._y_levels = pos
            self._y_times = np.zeros((config.mc_paths, 0))
            return
        times, _ = mc_passage_times(
            model.spec_y, pos, config.mc_paths, config.mc_step,
            _seed_sequence((config.seed, 101)), start=model.start,
            t_max=model.lag_max)
        self._y_levels = pos
        self._y_times = times

    def _mc_lags(self, level):
        levels, times = self._y_levels, self._y_times
        if level <= 0.0:
            return np.zeros(times.shape[0] if times is not None else 1)
        j = np.searchsorted(levels, level)
        if j < levels.size and levels[j] == level:
            return times[:, j]
        if j >= levels.size:
            return times[:, -1]
        if j == 0:
            return times[:, 0] * (level / levels[0])
        frac = (level - levels[j - 1]) / (levels[j] - levels[j - 1])
        return times[:, j - 1] + frac * (times[:, j] - times[:, j - 1])

    def value(self, t, w):
        """Objective at switch time t (absolute) and reserve w."""
        model = self.model
        t_lag = min(max(t - model.start, 0.0), model.span)
        if w == -np.inf:
            return self.sentinel(t)
        level = model.level(w)
        if level <= 0.0:
            return float(self.payoff(0.0))
        if model.y_deterministic():
            hit = _first_crossing(model.spec_y, model.start, level, model.lag_max)
            b = t_lag if hit is None else min(hit, t_lag)
            return float(self.payoff(b))
        if model.config.density == "mc":
            lags = self._mc_lags(level)
            return float(self.payoff(np.minimum(lags, t_lag)).mean())
        u, weights, tail = self._closed_law(level)
        hvals = self.payoff(np.minimum(u, t_lag))
        return float(np.dot(weights, hvals)) + tail * float(self.payoff(t_lag))

    def _closed_law(self, level):
        key = float(level)
        if key in self._y_cache:
            return self._y_cache[key]
        model = self.model
        prob = PassageProblem(model.spec_y, level, model.start)
        u = np.linspace(0.0, model.lag_max, model.config.time_grid)
        dens = first_passage_density(prob, u, model.config.density)
        step = u[1] - u[0]
        weights = np.full(u.size, step)
        weights[0] = weights[-1] = 0.5 * step
        weights *= dens
        mass = float(weights.sum())
        tail = max(1.0 - mass, 0.0)
        law = (u, weights, tail)
        if len(self._y_cache) < 4096:
            self._y_cache[key] = law
        return law


def optimize_switchover(inst, classes_high=None, classes_low=None, config=None,
                        start_time=0.0, inventory=None, two_dim=True):
    """Search for the best switch time and reserve level of one stage.

    Scans a coarse grid over switch times in [start_time, horizon] and
    reserves in [0, inventory], always including the time-only rule
    (reserve -inf, scanned before the finite reserves of each time), and
    polishes the best cell with a bounded simplex refinement.  Ties keep
    the earliest time, then the smallest reserve.  The refined point is
    accepted only when it strictly beats the grid.

    Args:
        inst: Instance.
        classes_high: priority pool, default (1,).
        classes_low: pool opened at the switch, default the rest.
        config: DiffusionConfig, default DiffusionConfig().
        start_time: absolute stage start.
        inventory: stage inventory override, default inst.inventory.
        two_dim: when False only the time-only family is searched.

    Returns:
        (t1, w1, value); w1 is -inf when the time-only rule wins.

    Raises:
        OptimizerFailure: no candidate produced a finite objective.
    """
    config = config or DiffusionConfig()
    inv = float(inst.inventory if inventory is None else inventory)
    if inv <= 0.0:
        return float(start_time), 0.0, 0.0
    model = _PhaseModel(inst, classes_high, classes_low, start_time, inv, config)
    objective = _Objective(model)

    t_grid = np.unique(np.linspace(model.start, model.horizon, config.grid_t))
    if two_dim:
        w_grid = np.unique(np.linspace(0.0, inv, config.grid_w))
        if config.density == "mc" and not model.y_deterministic():
            objective.prepare_mc_levels(model.level(w_grid))
        w_candidates = np.concatenate([[-np.inf], w_grid])
    else:
        w_candidates = np.array([-np.inf])

    best = None
    for t in t_grid:
        for w in w_candidates:
            val = objective.value(float(t), float(w))
            if not np.isfinite(val):
                continue
            if best is None or val > best[2]:
                best = (float(t), float(w), float(val))
    if best is None:
        raise OptimizerFailure("every candidate evaluation was non-finite")

    refined = _refine(objective, best, t_grid, w_candidates, config)
    if refined is not None and refined[2] > best[2]:
        best = refined
    return best


def _refine(objective, best, t_grid, w_candidates, config):
    """Deterministic simplex polish around the best grid cell."""
    if config.refine_iters <= 0:
        return None
    model = objective.model
    t0, w0, _ = best
    lo_t, hi_t = model.start, model.horizon
    dt = (hi_t - lo_t) / max(len(t_grid) - 1, 1)
    if dt <= 0.0:
        dt = 0.0

    if w0 == -np.inf or len(w_candidates) == 1:
        if dt == 0.0:
            return None

        def neg(x):
            return -objective.value(min(max(x[0], lo_t), hi_t), -np.inf)

        simplex = np.array([[t0], [min(t0 + dt, hi_t)]])
        if simplex[1, 0] == simplex[0, 0]:
            simplex[1, 0] = max(t0 - dt, lo_t)
        res = minimize(neg, np.array([t0]), method="Nelder-Mead",
                       options={"maxiter": config.refine_iters,
                                "initial_simplex": simplex,
                                "xatol": 1e-10, "fatol": 1e-12})
        t = min(max(float(res.x[0]), lo_t), hi_t)
        return t, -np.inf, float(objective.value(t, -np.inf))

    inv = model.inventory
    dw = inv / max(len(w_candidates) - 2, 1)

    def neg(x):
        t = min(max(x[0], lo_t), hi_t)
        w = min(max(x[1], 0.0), inv)
        return -objective.value(t, w)

    p0 = np.array([t0, w0])
    p1 = np.array([min(t0 + dt, hi_t) if t0 + dt <= hi_t else max(t0 - dt, lo_t), w0])
    p2 = np.array([t0, min(w0 + dw, inv) if w0 + dw <= inv else max(w0 - dw, 0.0)])
    simplex = np.array([p0, p1, p2])
    if np.linalg.matrix_rank(simplex[1:] - simplex[0]) < 2:
        return None
    res = minimize(neg, p0, method="Nelder-Mead",
                   options={"maxiter": config.refine_iters,
                            "initial_simplex": simplex,
                            "xatol": 1e-10, "fatol": 1e-12})
    t = min(max(float(res.x[0]), lo_t), hi_t)
    w = min(max(float(res.x[1]), 0.0), inv)
    return t, w, float(objective.value(t, w))
