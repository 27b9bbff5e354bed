"""Command line surface.

Seven subcommands tie the modules into reproducible experiments:
solve, check-structure, bound, optimize-policy, simulate, benchmark,
and counterexample.  Every command reads the line-oriented instance
format, writes delimited text to --out or stdout, and exits 0 on
success, 1 on a domain failure (a violated property, a failed search),
2 on bad usage or unreadable input.  Reruns with identical flags
produce identical bytes.
"""

import argparse
import sys
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .bounds import bound_table
from .diffusion import DiffusionConfig
from .dp import extract_policy, solve_value_table, write_value_table
from .model import Instance, InstanceError, parse_instance, write_instance
from .policy import ScheduleSyntaxError, build_schedule, parse_schedule, write_schedule
from .sim import classify_percentile, result_line, simulate_policy
from .structure import (
    DEFAULT_COUNTEREXAMPLE_SEED,
    check_properties,
    find_counterexample,
    report_lines,
)

__all__ = ["BenchmarkConfig", "run_benchmark", "main"]

_CLASS_LABELS = ("97.5", "95", "90", "85", "above")

_DIFFUSION_KEYS = {
    "density": str,
    "grid_t": int,
    "grid_w": int,
    "quad_tol": float,
    "tmax_sigmas": float,
    "mc_paths": int,
    "mc_step": float,
    "seed": int,
    "refine_iters": int,
    "start_knots": int,
    "time_grid": int,
}

_BENCHMARK_KEYS = {
    "classes": int,
    "horizons": "int_list",
    "inventory": int,
    "max_batch": int,
    "sets": int,
    "instances_per_set": int,
    "reps": int,
    "seed": int,
    "density": str,
}


@dataclass(frozen=True)
class BenchmarkConfig:
    """Deterministic description of one benchmark sweep.

    Each parameter set draws one price structure and cycles through the
    horizons; each set carries instances_per_set independently drawn
    demand patterns.  The defaults regenerate the two-class group:
    25 sets x 5 instances = 125 systems.
    """

    classes: int = 2
    horizons: tuple = (10, 20, 30)
    inventory: int = 20
    max_batch: int = 4
    sets: int = 25
    instances_per_set: int = 5
    reps: int = 10000
    seed: int = 12345
    density: str = "mc"
    diffusion: DiffusionConfig = None

    def __post_init__(self):
        if self.classes < 2 or self.sets < 1 or self.instances_per_set < 1:
            raise ValueError("benchmark needs >= 2 classes and >= 1 system")
        if not self.horizons:
            raise ValueError("need at least one horizon")
        if self.reps < 100:
            raise ValueError("percentile bands need reps >= 100")


def _child_seed(*key):
    return int(np.random.SeedSequence(key).generate_state(1, dtype=np.uint64)[0])


def _rng(*key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def _draw_prices(rng, n_classes):
    # same recipe as random_instance: top price 1, rest strictly decreasing
    while True:
        rest = rng.uniform(size=n_classes - 1)
        prices = np.concatenate([[1.0], np.sort(rest)[::-1]])
        if np.all(prices > 0.0) and np.all(np.diff(prices) < 0.0):
            return prices


def _draw_theta(rng, horizon, n_classes, max_batch):
    cells = n_classes * max_batch + 1
    weights = rng.uniform(size=(horizon, cells))
    weights /= weights.sum(axis=1, keepdims=True)
    return weights[:, : cells - 1].reshape(horizon, n_classes, max_batch)


def run_benchmark(config):
    """Run the sweep and render its report.

    Per system: solve the value table, build the one- and
    two-dimensional switch-over schedules, simulate all three policies
    on one shared demand stream, and band each simulated mean against
    the exact value.  The report is one header block, one line per
    system in index order, and a summary block; every number in it can
    be recomputed from the header parameters.
    """
    template = config.diffusion or DiffusionConfig()
    lines = [
        "# switch-over benchmark",
        "classes %d" % config.classes,
        "inventory %d" % config.inventory,
        "max_batch %d" % config.max_batch,
        "sets %d" % config.sets,
        "instances_per_set %d" % config.instances_per_set,
        "horizons %s" % " ".join(str(h) for h in config.horizons),
        "reps %d" % config.reps,
        "seed %d" % config.seed,
        "density %s" % config.density,
        "grid_t %d" % template.grid_t,
        "grid_w %d" % template.grid_w,
        "mc_paths %d" % template.mc_paths,
        "mc_step %s" % format(template.mc_step, ".12g"),
        "start_knots %d" % template.start_knots,
        "refine_iters %d" % template.refine_iters,
        "# system set instance horizon prices[2..I] value"
        " optimal_mean optimal_class dim1_mean dim1_class"
        " dim2_mean dim2_class relative_gap",
    ]
    counts = {label: Counter() for label in ("optimal", "switchover-1d",
                                             "switchover-2d")}
    gaps = []
    wins = 0
    index = 0
    for s in range(config.sets):
        horizon = config.horizons[s % len(config.horizons)]
        prices = _draw_prices(_rng(config.seed, s), config.classes)
        for k in range(config.instances_per_set):
            index += 1
            theta = _draw_theta(_rng(config.seed, s, k, 1), horizon,
                                config.classes, config.max_batch)
            inst = Instance(horizon=horizon, inventory=config.inventory,
                            prices=prices, theta=theta)
            table = solve_value_table(inst)
            value = table.value(1, inst.inventory)
            dconf = replace(template, density=config.density,
                            seed=_child_seed(config.seed, s, k, 2))
            schedule_2d = build_schedule(inst, two_dim=True, config=dconf)
            schedule_1d = build_schedule(inst, two_dim=False, config=dconf)
            sim_seed = _child_seed(config.seed, s, k, 3)
            results = [
                simulate_policy(inst, extract_policy(inst, table),
                                config.reps, sim_seed),
                simulate_policy(inst, schedule_1d, config.reps, sim_seed),
                simulate_policy(inst, schedule_2d, config.reps, sim_seed),
            ]
            labels = [classify_percentile(r, value) for r in results]
            for result, label in zip(results, labels):
                counts[result.policy][label] += 1
            mean_1d = results[1].mean
            mean_2d = results[2].mean
            if mean_1d != 0.0:
                gap = (mean_2d - mean_1d) / mean_1d
            else:
                gap = 0.0 if mean_2d <= 0.0 else float("inf")
            gaps.append(gap)
            wins += mean_2d >= mean_1d
            fields = ["system", str(index), str(s), str(k), str(horizon)]
            fields += [format(p, ".12g") for p in prices[1:]]
            fields.append(format(value, ".12g"))
            for result, label in zip(results, labels):
                fields.append(format(result.mean, ".12g"))
                fields.append(label)
            fields.append(format(gap, ".12g"))
            lines.append(" ".join(fields))
    total = index
    gaps = np.array(gaps)
    quant = np.quantile(gaps, (0.0, 0.25, 0.5, 0.75, 1.0))
    lines.append("summary systems %d" % total)
    lines.append("summary two-dim-wins %d %s" % (wins, format(wins / total, ".12g")))
    lines.append("summary relative-gap %s" % " ".join(
        format(q, ".12g") for q in quant))
    lines.append("summary nonnegative-gap-fraction %s"
                 % format(float((gaps >= 0.0).mean()), ".12g"))
    for policy in ("optimal", "switchover-1d", "switchover-2d"):
        parts = ["summary classes", policy]
        for label in _CLASS_LABELS:
            parts += [label, str(counts[policy][label])]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def _read_text(path):
    with open(path, "r") as fh:
        return fh.read()


def _load_instance(path):
    return parse_instance(_read_text(path))


def _parse_config_entries(path):
    entries = {}
    for lineno, raw in enumerate(_read_text(path).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ValueError("config line %d needs a key and a value" % lineno)
        entries[parts[0]] = parts[1:]
    return entries


def _coerce(key, kind, tokens):
    try:
        if kind == "int_list":
            return tuple(int(t) for t in tokens)
        if len(tokens) != 1:
            raise ValueError
        return kind(tokens[0])
    except ValueError:
        raise ValueError("config key %s has a malformed value %r"
                         % (key, " ".join(tokens))) from None


def _extract(entries, keymap):
    taken = {}
    for key, tokens in list(entries.items()):
        if key in keymap:
            taken[key] = _coerce(key, keymap[key], tokens)
            del entries[key]
    return taken


def _diffusion_from(args, entries):
    kwargs = _extract(entries, _DIFFUSION_KEYS)
    if entries:
        raise ValueError("unknown config keys: %s" % ", ".join(sorted(entries)))
    config = DiffusionConfig(**kwargs)
    if getattr(args, "density", None):
        config = replace(config, density=args.density)
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    return config


def _cmd_solve(args):
    table = solve_value_table(_load_instance(args.instance))
    return write_value_table(table), True


def _cmd_check_structure(args):
    table = solve_value_table(_load_instance(args.instance))
    report = check_properties(table, tol=args.tol)
    return "\n".join(report_lines(report)) + "\n", report.all_pass


def _cmd_bound(args):
    inst = _load_instance(args.instance)
    exact = solve_value_table(inst).values
    relaxed = bound_table(inst)
    lines = []
    worst = 0.0
    for n in range(exact.shape[0]):
        for d in range(exact.shape[1]):
            gap = relaxed[n, d] - exact[n, d]
            worst = min(worst, gap)
            lines.append("%d %d %s %s %s" % (
                n + 1, d, format(exact[n, d], ".17g"),
                format(relaxed[n, d], ".17g"), format(gap, ".17g")))
    return "\n".join(lines) + "\n", worst >= -args.tol


def _cmd_optimize_policy(args):
    inst = _load_instance(args.instance)
    entries = _parse_config_entries(args.config) if args.config else {}
    config = _diffusion_from(args, entries)
    schedule = build_schedule(inst, two_dim=not args.one_dim, config=config)
    return write_schedule(schedule), True


def _cmd_simulate(args):
    inst = _load_instance(args.instance)
    if args.schedule:
        policy = parse_schedule(_read_text(args.schedule))
    else:
        policy = extract_policy(inst, solve_value_table(inst))
    result = simulate_policy(inst, policy, args.reps, args.seed)
    return result_line(result) + "\n", True


def _cmd_benchmark(args):
    entries = _parse_config_entries(args.config) if args.config else {}
    bench_kwargs = _extract(entries, _BENCHMARK_KEYS)
    diff_kwargs = _extract(entries, dict(_DIFFUSION_KEYS))
    if entries:
        raise ValueError("unknown config keys: %s" % ", ".join(sorted(entries)))
    diff_kwargs.pop("seed", None)
    diff_kwargs.pop("density", None)
    if diff_kwargs:
        bench_kwargs["diffusion"] = DiffusionConfig(**diff_kwargs)
    if args.reps is not None:
        bench_kwargs["reps"] = args.reps
    if args.seed is not None:
        bench_kwargs["seed"] = args.seed
    if args.density:
        bench_kwargs["density"] = args.density
    return run_benchmark(BenchmarkConfig(**bench_kwargs)), True


def _cmd_counterexample(args):
    seed = DEFAULT_COUNTEREXAMPLE_SEED if args.seed is None else args.seed
    inst, cells = find_counterexample(seed)
    note = "# concavity-in-level violations at (n, d):%s" % "".join(
        " (%d,%d)" % cell for cell in cells)
    return note + "\n" + write_instance(inst), True


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sknap",
        description="Finite-horizon stochastic knapsack: exact values, "
                    "structure checks, bounds, switch-over policies.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, helptext):
        p = sub.add_parser(name, help=helptext)
        p.set_defaults(handler=handler)
        p.add_argument("--out", help="write output here instead of stdout")
        return p

    p = add("solve", _cmd_solve, "solve the value table of an instance")
    p.add_argument("--instance", required=True)

    p = add("check-structure", _cmd_check_structure,
            "verify structural properties of the value surface")
    p.add_argument("--instance", required=True)
    p.add_argument("--tol", type=float, default=1e-9)

    p = add("bound", _cmd_bound, "unit-demand relaxation upper bound")
    p.add_argument("--instance", required=True)
    p.add_argument("--tol", type=float, default=1e-9)

    p = add("optimize-policy", _cmd_optimize_policy,
            "search switch-over parameters and write the schedule")
    p.add_argument("--instance", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--density", choices=("paper", "mc"))
    p.add_argument("--one-dim", action="store_true",
                   help="search switch times only")

    p = add("simulate", _cmd_simulate,
            "simulate a schedule file, or the exact policy by default")
    p.add_argument("--instance", required=True)
    p.add_argument("--schedule")
    p.add_argument("--reps", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)

    p = add("benchmark", _cmd_benchmark,
            "regenerate the switch-over benchmark sweep")
    p.add_argument("--config")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--density", choices=("paper", "mc"))

    p = add("counterexample", _cmd_counterexample,
            "search for a value surface that is not concave in inventory")
    p.add_argument("--seed", type=int)
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        text, ok = args.handler(args)
    except (RuntimeError, ArithmeticError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except (OSError, InstanceError, ScheduleSyntaxError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
