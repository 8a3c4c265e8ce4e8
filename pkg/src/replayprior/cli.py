"""Command-line entry point: ``replayprior <command> [options]``.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 folding-oracle error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import bench
from .prior import BiasProvider, load_prior, save_prior
from .problem import CorruptPairError, OracleError, ParseError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ORACLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args, **extra):
    overrides = {
        "family": args.family, "n": args.n, "k": getattr(args, "k", None),
        "fraction": getattr(args, "fraction", None), "tau": getattr(args, "tau", None),
        "alpha": getattr(args, "alpha", None), "level": getattr(args, "level", None),
        "seed": args.seed, "workers": getattr(args, "workers", None),
        "prior": getattr(args, "prior", None), "fold_cmd": getattr(args, "fold_cmd", None),
        "min_length": getattr(args, "min_length", None),
    }
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip().replace("-", "_")] = value.strip()
    overrides.update(extra)
    try:
        return bench.make_config(getattr(args, "config", None), **overrides)
    except ParseError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def cmd_generate(args) -> int:
    cfg = _config(args)
    pairs = bench.generate_pairs(cfg, args.count, bench.TEST_STREAM if args.test else bench.TRAIN_STREAM)
    _emit(bench.family(cfg.family).format_corpus(pairs), args.out)
    print(f"{len(pairs)} {cfg.family} pairs", file=sys.stderr)
    return EXIT_OK


def cmd_learn_prior(args) -> int:
    pairs, bad_records = bench.read_corpus(args.family, args.corpus)
    table, skipped = bench.learn_prior(args.family, pairs, args.tau)
    skipped = [(line, f"line {line}: {why}") for line, why in bad_records] + skipped
    for _, why in skipped[:10]:
        print(f"skipped: {why}", file=sys.stderr)
    total = len(pairs) + len(bad_records)
    if args.out:
        save_prior(table, args.out)
    print(bench.histogram_summary(table))
    if total and len(skipped) > 0.01 * total:
        print(f"error: {len(skipped)} of {total} pairs skipped (more than 1%)", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def _read_instance(family: str, path: str):
    return bench.family(family).parse_instance(Path(path).read_text())


def cmd_solve(args) -> int:
    if args.budget is None and args.time_limit is None:
        raise UsageError("solve needs --budget or --time-limit")
    needs_prior = args.algorithm.endswith("+prior")
    if needs_prior and not args.prior:
        raise UsageError(f"{args.algorithm} needs --prior")
    instance = _read_instance(args.family, args.instance)
    prior = None
    if needs_prior:
        table = load_prior(args.prior)
        tau = args.tau if args.tau is not None else (table.tau or bench.DEFAULT_TAU[args.family])
        prior = BiasProvider(table, tau)
    problem = bench.make_problem(args.family, args.fold_cmd)
    rec = bench.solve(problem, instance, args.algorithm, budget=args.budget, time_limit=args.time_limit,
                      prior=prior, alpha=args.alpha, level=args.level, seed=args.seed)
    _emit(json.dumps(rec, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    extra = {}
    if args.budget is not None:
        extra["budgets"] = args.budget
    if args.time_limit is not None:
        extra["budgets"] = args.time_limit
        extra["budget_unit"] = "seconds"
    if args.count is not None:
        extra["test"] = args.count
    cfg = _config(args, **extra)
    result = bench.run_bench(cfg, progress=lambda m: print(m, file=sys.stderr))
    out = args.out or cfg.out
    if out:
        bench.write_bench(cfg, result, out)
    sys.stdout.write(result.csv())
    return EXIT_OK


def cmd_histogram(args) -> int:
    table = load_prior(args.prior_file)
    rows = bench.histogram_rows(table, args.width)
    _emit(bench.rows_csv(rows, ["lo", "hi", "count"]), args.out)
    return EXIT_OK


def cmd_phase_sweep(args) -> int:
    if args.fractions:
        fractions = [float(x) for x in args.fractions.replace(",", " ").split()]
    else:
        fractions = [round(0.30 + 0.01 * i, 2) for i in range(26)]
    rows = bench.phase_sweep(args.n, fractions, args.count, args.budget, args.seed)
    text = bench.rows_csv(rows, ["fraction", "median_playouts", "mean_playouts", "censored", "instances"])
    _emit(text, args.out)
    print(f"peak at {bench.sweep_peak(rows):.2f}", file=sys.stderr)
    return EXIT_OK


def _budgets(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty budget list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="replayprior", description="NRPA/GNRPA with priors learned from solved instances.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, family_required=True):
        sp.add_argument("--family", choices=sorted(bench.FAMILIES), required=family_required)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")

    def shape(sp):
        sp.add_argument("--n", type=int)
        sp.add_argument("--k", type=int)
        sp.add_argument("--fraction", type=float)
        sp.add_argument("--min-length", type=int, help="rna: shortest generated target (longest is --n)")

    def search(sp):
        sp.add_argument("--tau", type=float)
        sp.add_argument("--alpha", type=float, default=1.0)
        sp.add_argument("--level", type=int, default=2)
        sp.add_argument("--prior")
        sp.add_argument("--fold-cmd", help="external folding command (rna); default built-in Nussinov")

    g = sub.add_parser("generate", help="write a corpus of instance/solution pairs")
    common(g)
    shape(g)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--test", action="store_true", help="draw from the test seed stream")
    g.set_defaults(func=cmd_generate)

    lp = sub.add_parser("learn-prior", help="replay a corpus into a prior file")
    lp.add_argument("corpus")
    lp.add_argument("--family", choices=sorted(bench.FAMILIES), required=True)
    lp.add_argument("--tau", type=float)
    lp.add_argument("--out")
    lp.set_defaults(func=cmd_learn_prior)

    s = sub.add_parser("solve", help="run one algorithm on one instance, print a JSON record")
    s.add_argument("instance")
    common(s)
    search(s)
    s.add_argument("--algorithm", choices=bench.ALGORITHMS, default="gnrpa+prior")
    s.add_argument("--budget", type=int)
    s.add_argument("--time-limit", type=float)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="solved counts per algorithm and budget (CSV)")
    common(b, family_required=False)
    shape(b)
    search(b)
    b.add_argument("--config", help="key = value configuration file")
    b.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a configuration key")
    b.add_argument("--count", type=int, help="number of test instances")
    b.add_argument("--budget", type=_budgets, help="playout budget ladder, e.g. 1024,2048,4096")
    b.add_argument("--time-limit", type=_budgets, help="time ladder in seconds instead of playouts")
    b.add_argument("--workers", type=int)
    b.set_defaults(func=cmd_bench, alpha=None, level=None, seed=None)

    h = sub.add_parser("histogram", help="frequency histogram of a prior file (CSV)")
    h.add_argument("prior_file")
    h.add_argument("--width", type=float, default=0.1)
    h.add_argument("--out")
    h.set_defaults(func=cmd_histogram)

    ps = sub.add_parser("phase-sweep", help="median uniform playouts per empty fraction (LSC)")
    ps.add_argument("--n", type=int, default=20)
    ps.add_argument("--fractions", help="comma separated fractions (default 0.30..0.55 by 0.01)")
    ps.add_argument("--count", type=int, default=200, help="instances per fraction")
    ps.add_argument("--budget", type=int, default=10000, help="playout cap per instance")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out")
    ps.set_defaults(func=cmd_phase_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"replayprior: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleError as exc:
        print(f"replayprior: folding oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ParseError, CorruptPairError, FileNotFoundError, IsADirectoryError, ValueError) as exc:
        print(f"replayprior: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
