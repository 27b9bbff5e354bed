"""Structural property checks for solved value tables.

Seven checks: first order monotonicity in each argument, concavity in
each argument, submodularity, the submodular-plus cross inequality, and
their multimodularity composite.  Each check reports weak-inequality
violations whose gap exceeds the tolerance, re-checkable from the table
alone.
"""

from dataclasses import dataclass

import numpy as np

from .dp import ValueTable, solve_value_table
from .model import Instance

PROPERTY_NAMES = (
    "monotone_n",
    "monotone_d",
    "concave_n",
    "concave_d",
    "submodular",
    "submodular_plus",
    "multimodular",
)

DEFAULT_COUNTEREXAMPLE_SEED = 7


class NoViolationFound(RuntimeError):
    """The counterexample search grid was exhausted without a violation."""


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    violations: tuple
    tolerance: float


@dataclass(frozen=True, eq=False)
class PropertyReport:
    checks: dict
    tolerance: float

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def __getitem__(self, name: str) -> PropertyCheck:
        return self.checks[name]


def _violations(gap, n_of_row, d_of_col, lhs, rhs, tol):
    """Collect (n, d, lhs, rhs, gap) where the inequality slack exceeds tol.

    gap is oriented so that positive means violated; n_of_row/d_of_col
    map array coordinates to table indices.
    """
    bad = np.argwhere(gap > tol)
    out = []
    for r, c in bad:
        out.append((n_of_row(int(r)), d_of_col(int(c)),
                    float(lhs[r, c]), float(rhs[r, c]), float(gap[r, c])))
    return tuple(out)


def check_properties(table: ValueTable, tol: float = 1e-9) -> PropertyReport:
    """Evaluate all seven checks on the full index range of the table.

    Violation tuples hold the (n, d) anchor of the inequality's left
    hand side.  Weak inequalities throughout; a violation needs a gap
    strictly above tol.
    """
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    v = table.values
    checks = {}

    # (i) V(n,d) >= V(n+1,d), anchor (n,d), n = 1..N
    lhs, rhs = v[:-1, :], v[1:, :]
    checks["monotone_n"] = _check("monotone_n", lhs, rhs, rhs - lhs,
                                  lambda r: r + 1, lambda c: c, tol)
    # (i) V(n,d) <= V(n,d+1), anchor (n,d), d = 0..W-1
    lhs, rhs = v[:, :-1], v[:, 1:]
    checks["monotone_d"] = _check("monotone_d", lhs, rhs, lhs - rhs,
                                  lambda r: r + 1, lambda c: c, tol)
    # (ii) V(n-1,d)-V(n,d) <= V(n,d)-V(n+1,d), anchor (n,d), n = 2..N
    dn = v[:-1, :] - v[1:, :]
    lhs, rhs = dn[:-1, :], dn[1:, :]
    checks["concave_n"] = _check("concave_n", lhs, rhs, lhs - rhs,
                                 lambda r: r + 2, lambda c: c, tol)
    # (iii) V(n,d)-V(n,d-1) >= V(n,d+1)-V(n,d), anchor (n,d), d = 1..W-1
    dd = v[:, 1:] - v[:, :-1]
    lhs, rhs = dd[:, :-1], dd[:, 1:]
    checks["concave_d"] = _check("concave_d", lhs, rhs, rhs - lhs,
                                 lambda r: r + 1, lambda c: c + 1, tol)
    # (iv) V(n,d)-V(n,d-1) >= V(n+1,d)-V(n+1,d-1), anchor (n,d), n = 1..N
    lhs, rhs = dd[:-1, :], dd[1:, :]
    checks["submodular"] = _check("submodular", lhs, rhs, rhs - lhs,
                                  lambda r: r + 1, lambda c: c + 1, tol)
    # (v) V(n,d+1)-V(n,d) <= V(n+1,d)-V(n+1,d-1), anchor (n,d), d = 1..W-1
    lhs, rhs = dd[:-1, 1:], dd[1:, :-1]
    checks["submodular_plus"] = _check("submodular_plus", lhs, rhs, lhs - rhs,
                                       lambda r: r + 1, lambda c: c + 1, tol)

    parts = ("concave_d", "submodular", "submodular_plus")
    combined = tuple(x for p in parts for x in checks[p].violations)
    checks["multimodular"] = PropertyCheck(
        name="multimodular",
        passed=all(checks[p].passed for p in parts),
        violations=combined,
        tolerance=tol,
    )
    return PropertyReport(checks=checks, tolerance=tol)


def _check(name, lhs, rhs, gap, n_of_row, d_of_col, tol):
    viol = _violations(gap, n_of_row, d_of_col, lhs, rhs, tol)
    return PropertyCheck(name=name, passed=not viol, violations=viol,
                         tolerance=tol)


def lift_crosscheck(table: ValueTable, tol: float = 1e-9) -> bool:
    """Cross-check the multimodularity composite on the lifted function.

    The lift g(x0, x1, x2) = V(x1 - x0, x2 - x1) turns the composite
    into lattice inequalities on unit windows.  For coordinate pairs
    (0,2) and (1,2) the window inequality

        g(x + e_a) + g(x + e_b) >= g(x) + g(x + e_a + e_b)

    is algebraically identical to the submodular and submodular-plus
    differences, so agreement with the composite verdict is exact where
    both windows fit inside the table domain.  Pair (0,1) reduces to a
    diagonal inequality that depends on the arrival pattern over time
    (it can fail even when the composite holds), so it is not part of
    the verdict.
    """
    v = table.values
    n_rows, width = v.shape
    ok = True
    # pair (0,2): V(n,d) + V(n-1,d+1) >= V(n-1,d) + V(n,d+1), n=2..N+1
    if n_rows >= 2 and width >= 2:
        lhs = v[1:, :-1] + v[:-1, 1:]
        rhs = v[:-1, :-1] + v[1:, 1:]
        ok &= bool((rhs - lhs <= tol).all())
    # pair (1,2): V(n,d) + V(n+1,d) >= V(n+1,d-1) + V(n,d+1), n=1..N
    if n_rows >= 2 and width >= 3:
        lhs = v[:-1, 1:-1] + v[1:, 1:-1]
        rhs = v[1:, :-2] + v[:-1, 2:]
        ok &= bool((rhs - lhs <= tol).all())
    return ok


def figure_instance(low_price: float, horizon: int,
                    inventory: int) -> Instance:
    """Two classes, sizes {1..4} with uniform joint mass 1/8 every period."""
    theta = np.full((horizon, 2, 4), 0.125)
    prices = np.array([1.0, float(low_price)])
    return Instance(horizon=horizon, inventory=inventory, prices=prices,
                    theta=theta)


def find_counterexample(seed: int = DEFAULT_COUNTEREXAMPLE_SEED):
    """Search the (horizon, inventory) grid for a concavity-in-d failure.

    The low price is drawn from the seed; returns the first violating
    instance together with its violating (n, d) index set.
    """
    rng = np.random.default_rng(seed)
    low = float(rng.uniform())
    while not 0.0 < low < 1.0:
        low = float(rng.uniform())
    for horizon in range(5, 16):
        for inventory in range(5, 26):
            inst = figure_instance(low, horizon, inventory)
            report = check_properties(solve_value_table(inst))
            bad = report["concave_d"]
            if not bad.passed:
                return inst, tuple((n, d) for n, d, *_ in bad.violations)
    raise NoViolationFound(
        f"no concavity-in-d violation on the search grid for low price {low!r}")


def report_lines(report: PropertyReport) -> list:
    """Summary line per property, then `property n d lhs rhs gap` rows."""
    lines = []
    for name in PROPERTY_NAMES:
        chk = report[name]
        word = "pass" if chk.passed else "fail"
        lines.append(f"summary {name} {word} {len(chk.violations)}")
    for name in PROPERTY_NAMES:
        for n, d, lhs, rhs, gap in report[name].violations:
            lines.append(f"{name} {n} {d} {lhs:.17g} {rhs:.17g} {gap:.17g}")
    return lines
