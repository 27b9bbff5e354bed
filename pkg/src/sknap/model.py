"""Problem instances for the finite-horizon stochastic knapsack.

An instance describes a seller holding ``inventory`` identical units over
``horizon`` discrete periods.  In each period at most one demand batch
arrives: with probability ``theta[n][i][j]`` it belongs to price class
``i`` (per-unit price ``prices[i]``) and requests ``j`` units, and with
the complementary probability ``1 - sum(theta[n])`` nothing arrives.
Batches are all-or-nothing: a request for more units than remain cannot
be partially filled.

Periods, classes, and sizes are 1-based in every public signature; the
underlying arrays are 0-based.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ClassMoments",
    "Instance",
    "InstanceError",
    "InstanceSyntaxError",
    "InvalidInstance",
    "EmptyClassSet",
    "PeriodOutOfRange",
    "demand_moments",
    "parse_instance",
    "random_instance",
    "validate_instance",
    "write_instance",
]


class InstanceError(ValueError):
    """Base class for every instance-related failure."""


class InvalidInstance(InstanceError):
    """Candidate data violates the instance invariants.

    Attributes:
        violations: list of (code, detail) pairs, one per violated
            invariant, in a deterministic order.  All violations are
            collected before raising, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = ", ".join(f"{code}: {detail}" for code, detail in self.violations)
        super().__init__(f"invalid instance ({lines})")


class InstanceSyntaxError(InstanceError):
    """A line of an instance file could not be parsed.

    Attributes:
        line: 1-based line number of the offending input line.
    """

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class PeriodOutOfRange(InstanceError):
    def __init__(self, period, horizon):
        self.period = period
        self.horizon = horizon
        super().__init__(f"period {period} outside 1..{horizon}")


class EmptyClassSet(InstanceError):
    def __init__(self):
        super().__init__("class subset must be non-empty")


@dataclass(frozen=True, eq=False)
class Instance:
    """A validated stochastic knapsack instance.

    Attributes:
        horizon: number of selling periods N >= 1.
        inventory: starting stock W >= 0 (integer units).
        prices: per-unit prices, shape (I,), strictly decreasing, > 0.
        theta: batch arrival probabilities, shape (N, I, M);
            theta[n-1, i-1, j-1] is the probability that period n sees a
            class-i batch of exactly j units.  Row sums never exceed 1.

    Construct through validate_instance, parse_instance, or
    random_instance; direct construction performs no checking.
    """

    horizon: int
    inventory: int
    prices: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=np.float64))
        object.__setattr__(
            self, "theta", np.ascontiguousarray(self.theta, dtype=np.float64)
        )

    @property
    def n_classes(self):
        return self.theta.shape[1]

    @property
    def max_batch(self):
        return self.theta.shape[2]

    def no_arrival_prob(self, t):
        """Probability that period t sees no demand at all."""
        if not 1 <= t <= self.horizon:
            raise PeriodOutOfRange(t, self.horizon)
        return 1.0 - float(self.theta[t - 1].sum())

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and self.inventory == other.inventory
            and self.prices.shape == other.prices.shape
            and self.theta.shape == other.theta.shape
            and bool(np.all(self.prices == other.prices))
            and bool(np.all(self.theta == other.theta))
        )

    def __repr__(self):
        return (
            f"Instance(horizon={self.horizon}, inventory={self.inventory}, "
            f"classes={self.n_classes}, max_batch={self.max_batch})"
        )


@dataclass(frozen=True)
class ClassMoments:
    """Per-period demand volume moments for a class subset."""

    mean: float
    variance: float


def validate_instance(data):
    """Check candidate instance data and return a validated Instance.

    Args:
        data: an Instance or a mapping with keys ``horizon``,
            ``inventory``, ``prices``, and ``theta``.

    Raises:
        InvalidInstance: carrying the full list of violations.
    """
    if isinstance(data, Instance):
        horizon, inventory = data.horizon, data.inventory
        prices, theta = data.prices, data.theta
    else:
        try:
            horizon = data["horizon"]
            inventory = data["inventory"]
            prices = data["prices"]
            theta = data["theta"]
        except (KeyError, TypeError) as exc:
            raise InvalidInstance([("missing_field", str(exc))]) from exc

    violations = []
    prices = np.asarray(prices, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)

    if not (isinstance(horizon, (int, np.integer)) and horizon >= 1):
        violations.append(("empty_horizon", f"horizon={horizon!r}"))
    if not (isinstance(inventory, (int, np.integer)) and inventory >= 0):
        violations.append(("negative_inventory", f"inventory={inventory!r}"))
    if prices.ndim != 1 or prices.size < 1:
        violations.append(("bad_dimensions", f"prices shape {prices.shape}"))
    if theta.ndim != 3:
        violations.append(("bad_dimensions", f"theta shape {theta.shape}"))
    if violations:
        raise InvalidInstance(violations)

    n, i_count, m = theta.shape
    if n != horizon:
        violations.append(("bad_dimensions", f"theta has {n} periods, horizon {horizon}"))
    if i_count != prices.size:
        violations.append(
            ("bad_dimensions", f"theta has {i_count} classes, prices {prices.size}")
        )
    if m < 1:
        violations.append(("bad_dimensions", "max batch size must be >= 1"))

    if np.any(prices <= 0.0):
        violations.append(("nonpositive_price", prices.min()))
    if np.any(np.diff(prices) >= 0.0):
        violations.append(("prices_not_decreasing", tuple(prices.tolist())))

    neg = np.argwhere(theta < 0.0)
    for idx in neg[:16]:
        violations.append(
            ("negative_mass", (int(idx[0]) + 1, int(idx[1]) + 1, int(idx[2]) + 1))
        )
    if not violations or not neg.size:
        sums = theta.reshape(theta.shape[0], -1).sum(axis=1)
        for t in np.nonzero(sums > 1.0 + 1e-12)[0]:
            violations.append(("mass_exceeds_one", int(t) + 1))

    if violations:
        raise InvalidInstance(violations)
    return Instance(int(horizon), int(inventory), prices, theta)


def demand_moments(inst, classes, t):
    """Mean and variance of the period-t volume carried by a class subset.

    The demand volume attributed to subset S in one period is j when the
    single joint draw lands in a class of S with size j, and 0 otherwise
    (no arrival, or a class outside S).

    Args:
        inst: Instance.
        classes: non-empty iterable of 1-based class ids.
        t: 1-based period.

    Returns:
        ClassMoments(mean, variance).
    """
    ids = sorted(set(int(c) for c in classes))
    if not ids:
        raise EmptyClassSet()
    if any(c < 1 or c > inst.n_classes for c in ids):
        raise InvalidInstance([("unknown_class", tuple(ids))])
    if not 1 <= t <= inst.horizon:
        raise PeriodOutOfRange(t, inst.horizon)

    sizes = np.arange(1, inst.max_batch + 1, dtype=np.float64)
    block = inst.theta[t - 1, [c - 1 for c in ids], :]
    mean = float(block @ sizes.T if block.ndim == 1 else (block * sizes).sum())
    second = float((block * sizes**2).sum())
    return ClassMoments(mean=mean, variance=second - mean * mean)


def random_instance(seed, n_classes, horizon, max_batch, inventory):
    """Draw a random instance, reproducible from the seed.

    The top price is fixed at 1; the remaining n_classes - 1 prices are
    uniform on (0, 1), sorted into strictly decreasing order (redrawn on
    the measure-zero event of a tie or a zero).  Each period receives
    n_classes * max_batch + 1 uniform weights normalised to sum to one;
    the last weight is the no-arrival probability and the rest fill
    theta in class-major, size-minor order.
    """
    if n_classes < 2:
        raise InvalidInstance([("bad_dimensions", "random_instance needs >= 2 classes")])
    if horizon < 1 or max_batch < 1 or inventory < 0:
        raise InvalidInstance(
            [("bad_dimensions", f"horizon={horizon}, max_batch={max_batch}, inventory={inventory}")]
        )
    rng = np.random.default_rng(seed)
    while True:
        rest = rng.uniform(size=n_classes - 1)
        prices = np.concatenate([[1.0], np.sort(rest)[::-1]])
        if np.all(prices > 0.0) and np.all(np.diff(prices) < 0.0):
            break
    cells = n_classes * max_batch + 1
    weights = rng.uniform(size=(horizon, cells))
    weights /= weights.sum(axis=1, keepdims=True)
    theta = weights[:, : cells - 1].reshape(horizon, n_classes, max_batch)
    return validate_instance(
        {
            "horizon": horizon,
            "inventory": inventory,
            "prices": prices,
            "theta": theta,
        }
    )


def _format(x):
    # 17 significant digits round-trips any float64 exactly.
    return format(float(x), ".17g")


def write_instance(inst):
    """Serialise an instance to the line-oriented text format.

    Zero cells of theta are omitted; parse_instance(write_instance(x))
    reproduces x bit for bit.
    """
    lines = [
        f"horizon {inst.horizon}",
        f"inventory {inst.inventory}",
        f"max_batch {inst.max_batch}",
        "prices " + " ".join(_format(p) for p in inst.prices),
    ]
    for n in range(inst.horizon):
        for i in range(inst.n_classes):
            for j in range(inst.max_batch):
                p = inst.theta[n, i, j]
                if p != 0.0:
                    lines.append(f"theta {n + 1} {i + 1} {j + 1} {_format(p)}")
    return "\n".join(lines) + "\n"


def parse_instance(text):
    """Parse the text format produced by write_instance.

    Lines hold whitespace-separated tokens; ``#`` starts a comment and
    blank lines are skipped.  Keys ``horizon``, ``inventory``,
    ``max_batch``, and ``prices`` must each appear exactly once before
    any use; ``theta n i j prob`` lines fill cells, and omitted cells
    are zero.

    Raises:
        InstanceSyntaxError: malformed line, unknown key, duplicate cell.
        PeriodOutOfRange: theta line with a period outside 1..horizon.
        InvalidInstance: parsed data violates instance invariants.
    """
    header = {}
    prices = None
    theta_lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        key = tokens[0]
        try:
            if key in ("horizon", "inventory", "max_batch"):
                if key in header:
                    raise InstanceSyntaxError(lineno, f"duplicate {key}")
                if len(tokens) != 2:
                    raise InstanceSyntaxError(lineno, f"{key} takes one value")
                header[key] = int(tokens[1])
            elif key == "prices":
                if prices is not None:
                    raise InstanceSyntaxError(lineno, "duplicate prices")
                if len(tokens) < 2:
                    raise InstanceSyntaxError(lineno, "prices takes at least one value")
                prices = [float(tok) for tok in tokens[1:]]
            elif key == "theta":
                if len(tokens) != 5:
                    raise InstanceSyntaxError(lineno, "theta takes n i j prob")
                n, i, j = int(tokens[1]), int(tokens[2]), int(tokens[3])
                theta_lines.append((lineno, n, i, j, float(tokens[4])))
            else:
                raise InstanceSyntaxError(lineno, f"unknown key {key!r}")
        except ValueError as exc:
            raise InstanceSyntaxError(lineno, f"bad number: {exc}") from exc

    missing = [k for k in ("horizon", "inventory", "max_batch") if k not in header]
    if missing:
        raise InvalidInstance([("missing_field", k) for k in missing])
    if prices is None:
        raise InvalidInstance([("missing_field", "prices")])

    horizon = header["horizon"]
    max_batch = header["max_batch"]
    n_classes = len(prices)
    if horizon < 1 or max_batch < 1:
        raise InvalidInstance([("empty_horizon", f"horizon={horizon}, max_batch={max_batch}")])
    theta = np.zeros((horizon, n_classes, max_batch), dtype=np.float64)
    seen = set()
    for lineno, n, i, j, p in theta_lines:
        if not 1 <= n <= horizon:
            raise PeriodOutOfRange(n, horizon)
        if not 1 <= i <= n_classes:
            raise InstanceSyntaxError(lineno, f"class {i} outside 1..{n_classes}")
        if not 1 <= j <= max_batch:
            raise InstanceSyntaxError(lineno, f"size {j} outside 1..{max_batch}")
        if (n, i, j) in seen:
            raise InstanceSyntaxError(lineno, f"duplicate theta cell {(n, i, j)}")
        seen.add((n, i, j))
        theta[n - 1, i - 1, j - 1] = p

    return validate_instance(
        {
            "horizon": horizon,
            "inventory": header["inventory"],
            "prices": np.asarray(prices),
            "theta": theta,
        }
    )
