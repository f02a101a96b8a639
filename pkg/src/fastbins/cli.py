"""Command-line front end: ``fastbins {generate,simulate,validate,bench}``.

Results go to stdout as JSON lines (CSV for ``bench``), diagnostics to
stderr.  Exit status: 0 success, 1 a validation check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

from . import bench
from .cardinalities import auto_kstar, generate_bin_cardinalities, naive_cardinalities
from .errors import ParameterError
from .rng import SEED_MASK, RandomSource
from .twosample import (
    naive_count_thinning, naive_twosample, one_choice, simulate_count_thinning,
    simulate_twosample_fast, threshold, two_choice,
)
from .validation import SUITES, run_suite

SEED_ENV = "FASTBINS_SEED"


class UsageError(Exception):
    pass


def parse_process(text: str):
    """``one-choice | two-choice | threshold:<f> | thinning-count:<f>``.

    Returns ``(kind, rule_or_f)``.
    """
    if text == "one-choice":
        return "twosample", one_choice()
    if text == "two-choice":
        return "twosample", two_choice()
    name, _, arg = text.partition(":")
    if name in ("threshold", "thinning-count") and arg.isdigit():
        if name == "threshold":
            return "twosample", threshold(int(arg))
        return "thinning", int(arg)
    raise UsageError(f"unknown process {text!r}")


def _emit(obj, deterministic: bool, elapsed: int):
    if not deterministic:
        obj["elapsed_ns"] = elapsed
    print(json.dumps(obj, separators=(",", ":")))


def cmd_generate(args) -> int:
    n, m = args.bins, args.balls
    if n >= 3 and not n <= m <= n * math.log(n):
        print(f"warning: m={m} lies outside [n, n ln n]; output stays exact", file=sys.stderr)
    kstar = None
    if args.mode == "fast":
        kstar = args.kstar if args.kstar is not None else auto_kstar(n, m)
    for i in range(args.trials):
        seed = (args.seed + i) & SEED_MASK
        rng = RandomSource(seed)
        t0 = time.perf_counter_ns()
        if args.mode == "fast":
            x = generate_bin_cardinalities(n, m, rng, kstar=kstar)
        else:
            x = naive_cardinalities(n, m, rng)
        elapsed = time.perf_counter_ns() - t0
        _emit({"n": n, "m": m, "seed": seed, "kstar": kstar, "counts": list(x.counts),
               "max_load": x.max_load}, args.deterministic, elapsed)
    return 0


def cmd_simulate(args) -> int:
    kind, rule = parse_process(args.process)
    for i in range(args.trials):
        seed = (args.seed + i) & SEED_MASK
        rng = RandomSource(seed)
        t0 = time.perf_counter_ns()
        if kind == "thinning":
            if args.mode == "fast":
                state = simulate_count_thinning(args.bins, args.balls, rule, rng, kstar=args.kstar)
            else:
                state = naive_count_thinning(args.bins, args.balls, rule, rng)
        elif args.mode == "fast":
            state = simulate_twosample_fast(args.bins, args.balls, rule, rng, kstar=args.kstar)
        else:
            state = naive_twosample(args.bins, args.balls, rule, rng)
        elapsed = time.perf_counter_ns() - t0
        _emit({"process": args.process, "mode": args.mode, "n": args.bins, "m": args.balls,
               "seed": seed, "classes": {str(k): v for k, v in state.classes.items()},
               "max_load": state.max_load}, args.deterministic, elapsed)
    return 0


def cmd_validate(args) -> int:
    trials = args.trials if args.trials_given else None
    ok = True
    for rec in run_suite(args.suite, args.seed, trials):
        ok &= rec["passed"]
        print(json.dumps(rec, separators=(",", ":"), default=str))
    return 0 if ok else 1


def cmd_bench(args) -> int:
    engines = [e.strip() for e in args.engines.split(",") if e.strip()]
    unknown = [e for e in engines if e not in bench.ENGINES]
    if unknown:
        raise UsageError(f"unknown engine(s) {', '.join(unknown)}")
    sizes = bench.grid(args.min_bins, args.max_bins, args.factor)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(bench.HEADER)
    for row in bench.sweep(engines, sizes, args.trials, args.seed, args.balls_per_bin):
        if args.deterministic:
            row.update(median_ns="", p10_ns="", p90_ns="")
        writer.writerow([row[k] for k in bench.HEADER])
        sys.stdout.flush()
    return 0


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _count(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _kstar(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"kstar must be positive, got {text}")
    return value


def _seed(text):
    value = int(text)
    if not 0 <= value <= SEED_MASK:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    env_seed = os.environ.get(SEED_ENV, "0")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None,
                        help=f"base seed; trial i uses seed + i (default ${SEED_ENV} or 0)")
    common.add_argument("--trials", type=_positive, default=None)
    common.add_argument("--deterministic", action="store_true",
                        help="omit wall-clock fields so output is byte-stable")
    common.add_argument("--format", choices=("json", "csv"), default=None)

    size = argparse.ArgumentParser(add_help=False)
    size.add_argument("--bins", "-n", type=_positive, required=True)
    size.add_argument("--balls", "-m", type=_count, required=True)
    size.add_argument("--mode", choices=("fast", "naive"), default="fast")
    size.add_argument("--kstar", type=_kstar, default=None,
                      help="work parameter of the generator (default: automatic)")

    parser = argparse.ArgumentParser(prog="fastbins", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common, size],
                   help="bin cardinalities of m balls in n bins")
    p = sub.add_parser("simulate", parents=[common, size], help="run a TwoSample process")
    p.add_argument("--process", default="two-choice",
                   help="one-choice | two-choice | threshold:<f> | thinning-count:<f>")
    p = sub.add_parser("validate", parents=[common], help="run a validation suite")
    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p = sub.add_parser("bench", parents=[common], help="time fast vs naive engines")
    p.add_argument("--engines", default="cardinalities-fast,cardinalities-naive",
                   help=f"comma list of {', '.join(bench.ENGINES)}")
    p.add_argument("--min-bins", type=_positive, default=10**4)
    p.add_argument("--max-bins", type=_positive, default=10**8)
    p.add_argument("--factor", type=float, default=10.0)
    p.add_argument("--balls-per-bin", type=float, default=1.0)
    parser.set_defaults(env_seed=env_seed)
    return parser


COMMANDS = {
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is None:
            args.seed = _seed(args.env_seed)
        args.trials_given = args.trials is not None
        if args.trials is None:
            args.trials = 5 if args.command == "bench" else 1
        wanted = "csv" if args.command == "bench" else "json"
        if args.format not in (None, wanted):
            raise UsageError(f"{args.command} only writes {wanted}")
        return COMMANDS[args.command](args)
    except (UsageError, ParameterError, argparse.ArgumentTypeError, ValueError) as exc:
        print(f"fastbins: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
