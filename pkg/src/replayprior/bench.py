"""Experiment harness: corpora, priors, single solves and budget sweeps.

All randomness is derived from one master seed. Training pairs, test
instances and search runs use disjoint seed streams, so a rerun with the
same configuration reproduces every number (wall-clock budgets aside).
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import kakuro, latin, rna
from .policy import SearchParams, flat_sampling, gnrpa
from .prior import BiasProvider, PriorTable, frequency_histogram, replay_corpus
from .problem import InstanceSolutionPair, ParseError

log = logging.getLogger(__name__)

TRAIN_STREAM = 0
TEST_STREAM = 1
SEARCH_STREAM = 2

ALGORITHMS = ("sampling", "sampling+prior", "nrpa", "gnrpa+prior")
DEFAULT_TAU = {"lsc": 4.0, "kakuro": 4.0, "rna": 6.0}
DEFAULT_N = {"lsc": 20, "kakuro": 10, "rna": 40}


def derive_seed(master: int, stream: int, index: int) -> int:
    """Independent 63-bit seed for item ``index`` of ``stream``."""
    ss = np.random.SeedSequence(master, spawn_key=(stream, index))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def rng_from(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


# --- families --------------------------------------------------------------

@dataclass(frozen=True)
class Family:
    name: str
    problem: Callable[..., Any]
    generate: Callable[[np.random.Generator, "ExperimentConfig"], InstanceSolutionPair]
    format_corpus: Callable[[Sequence[InstanceSolutionPair]], str]
    parse_corpus: Callable[[str], tuple[list[InstanceSolutionPair], list[tuple[int, str]]]]
    parse_instance: Callable[[str], Any]


def _strict(parse):
    def wrapped(text):
        return parse(text), []
    return wrapped


def _lsc_generate(rng, cfg):
    return latin.generate_pair(cfg.n, cfg.fraction, rng)


def _kakuro_generate(rng, cfg):
    return kakuro.generate_kakuro(cfg.n, cfg.k if cfg.k else cfg.n + 1, rng)


def _rna_generate(rng, cfg):
    lo = cfg.min_length if cfg.min_length else cfg.n
    length = int(rng.integers(lo, cfg.n + 1)) if lo < cfg.n else cfg.n
    return rna.generate_rna_pair(length, rng)


def _instance_only(parse):
    def wrapped(text):
        return parse(text).instance
    return wrapped


FAMILIES = {
    "lsc": Family("lsc", latin.LatinSquare, _lsc_generate, latin.format_corpus,
                  _strict(latin.parse_corpus), _instance_only(latin.parse_instance)),
    "kakuro": Family("kakuro", kakuro.Kakuro, _kakuro_generate, kakuro.format_corpus,
                     _strict(kakuro.parse_corpus), _instance_only(kakuro.parse_instance)),
    "rna": Family("rna", rna.RnaDesign, _rna_generate, rna.format_corpus,
                  rna.parse_corpus, rna.parse_puzzle),
}


def family(name: str) -> Family:
    try:
        return FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r} (choose from {', '.join(FAMILIES)})") from None


def make_problem(name: str, fold_cmd: str | None = None):
    if name == "rna":
        return rna.RnaDesign(rna.default_folder(fold_cmd))
    return family(name).problem()


# --- configuration ---------------------------------------------------------

@dataclass
class ExperimentConfig:
    family: str = "lsc"
    n: int | None = None  # None: family default
    k: int = 0  # kakuro values; 0 means n + 1
    fraction: float = 0.42
    min_length: int = 0  # rna: lengths drawn from [min_length, n]; 0 means n
    train: int = 10000
    test: int = 100
    algorithms: tuple[str, ...] = ALGORITHMS
    budgets: tuple[float, ...] = (1024, 2048, 4096, 8192, 16384)
    budget_unit: str = "playouts"  # or "seconds"
    tau: float | None = None  # None: family default
    alpha: float = 1.0
    level: int = 2
    iterations: int = 100  # nested iterations when the budget is in seconds
    seed: int = 0
    workers: int = 0  # 0: CPU count
    prior: str | None = None
    train_corpus: str | None = None
    test_corpus: str | None = None
    fold_cmd: str | None = None
    out: str | None = None

    def __post_init__(self):
        family(self.family)
        if self.n is None:
            self.n = DEFAULT_N[self.family]
        self.validate()

    @property
    def temperature(self) -> float:
        return DEFAULT_TAU[self.family] if self.tau is None else float(self.tau)

    def validate(self) -> None:
        family(self.family)
        if any(b <= a for a, b in zip(self.budgets, self.budgets[1:])):
            raise ValueError("budgets must be strictly increasing")
        if not self.budgets or self.budgets[0] <= 0:
            raise ValueError("budgets must be positive")
        if self.budget_unit not in ("playouts", "seconds"):
            raise ValueError("budget_unit must be 'playouts' or 'seconds'")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithm {bad[0]!r} (choose from {', '.join(ALGORITHMS)})")
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must be in [0, 1]")


_LISTS = {"algorithms": str, "budgets": float}


def _coerce(name: str, raw: Any) -> Any:
    ftype = {f.name: f.type for f in fields(ExperimentConfig)}[name]
    if name in _LISTS:
        items = raw if isinstance(raw, (list, tuple)) else [s for s in str(raw).replace(",", " ").split() if s]
        conv = _LISTS[name]
        out = tuple(conv(x) for x in items)
        if name == "budgets":
            out = tuple(int(x) if float(x).is_integer() else x for x in out)
        return out
    if raw is None:
        return None
    if isinstance(raw, str) and raw.strip().lower() in ("", "none"):
        if "None" in str(ftype):
            return None
    if ftype.startswith("int"):
        return int(raw)
    if ftype.startswith("float"):
        return float(raw)
    return str(raw)


def parse_config(text: str) -> dict[str, Any]:
    """``key = value`` lines; '#' starts a comment."""
    names = {f.name for f in fields(ExperimentConfig)}
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in names:
            raise ParseError(f"unknown key {key!r}", lineno)
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            raise ParseError(f"{key}: {exc}", lineno) from None
    return out


def make_config(path: str | os.PathLike | None = None, **overrides: Any) -> ExperimentConfig:
    values: dict[str, Any] = {}
    if path is not None:
        values.update(parse_config(Path(path).read_text()))
    for key, value in overrides.items():
        if value is not None:
            values[key] = _coerce(key, value)
    return ExperimentConfig(**values)


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        lines.append(f"{f.name} = {'none' if v is None else v}")
    return "\n".join(lines) + "\n"


# --- corpora and priors ----------------------------------------------------

def generate_pairs(cfg: ExperimentConfig, count: int, stream: int = TRAIN_STREAM) -> list[InstanceSolutionPair]:
    fam = family(cfg.family)
    out = []
    for i in range(count):
        seed = derive_seed(cfg.seed, stream, i)
        pair = fam.generate(rng_from(seed), cfg)
        out.append(InstanceSolutionPair(pair.instance, pair.solution, seed))
    return out


def held_out_pairs(cfg: ExperimentConfig, count: int,
                   train: Sequence[InstanceSolutionPair]) -> list[InstanceSolutionPair]:
    """``count`` test-stream pairs, skipping any instance that also occurs in ``train``.

    Small generated instances (short RNA targets) collide now and then; each kept
    pair still carries its own derived seed.
    """
    fam = family(cfg.family)
    seen = {p.instance for p in train}
    out: list[InstanceSolutionPair] = []
    i = 0
    while len(out) < count:
        if i >= 100 * count + 1000:
            raise RuntimeError(f"only {len(out)} of {count} test instances differ from the training corpus")
        seed = derive_seed(cfg.seed, TEST_STREAM, i)
        pair = fam.generate(rng_from(seed), cfg)
        i += 1
        if pair.instance not in seen:
            out.append(InstanceSolutionPair(pair.instance, pair.solution, seed))
    return out


def regenerate(cfg: ExperimentConfig, seed: int) -> InstanceSolutionPair:
    """The pair recorded with ``seed`` in a generated corpus."""
    pair = family(cfg.family).generate(rng_from(seed), cfg)
    return InstanceSolutionPair(pair.instance, pair.solution, seed)


def read_corpus(name: str, path: str | os.PathLike) -> tuple[list[InstanceSolutionPair], list[tuple[int, str]]]:
    return family(name).parse_corpus(Path(path).read_text())


def learn_prior(name: str, pairs: Sequence[InstanceSolutionPair], tau: float | None = None,
                params: dict[str, Any] | None = None) -> tuple[PriorTable, list[tuple[int, str]]]:
    """Replay every pair (NGRAM replay for RNA); returns the table and the skipped pairs."""
    missing = [(i, "record has no solution") for i, p in enumerate(pairs) if p.solution is None]
    usable = [p for p in pairs if p.solution is not None]
    if name == "rna":
        table, skipped = rna.ngram_replay([p.instance.target for p in usable], [p.solution for p in usable])
    else:
        table, skipped = replay_corpus(family(name).problem(), usable)
    if missing:
        # report indices in the caller's numbering
        index = [i for i, p in enumerate(pairs) if p.solution is not None]
        skipped = sorted(missing + [(index[i], why) for i, why in skipped])
    table.family = name
    table.tau = DEFAULT_TAU[name] if tau is None else float(tau)
    if params:
        table.params.update({k: str(v) for k, v in params.items()})
    return table, skipped


def histogram_rows(table: PriorTable, width: float = 0.1) -> list[dict[str, Any]]:
    return [{"lo": lo, "hi": hi, "count": c} for (lo, hi), c in frequency_histogram(table, width)]


def histogram_summary(table: PriorTable, width: float = 0.1) -> str:
    parts = []
    for (lo, hi), c in frequency_histogram(table, width):
        label = "1.0" if lo == hi else f"[{lo:.2f},{hi:.2f})"
        parts.append(f"{label}:{c}")
    return f"{len(table)} codes, {table.instances} instances; " + " ".join(parts)


# --- solving ---------------------------------------------------------------

def solve(problem: Any, instance: Any, algorithm: str, *, budget: int | None = None,
          time_limit: float | None = None, prior: BiasProvider | None = None, alpha: float = 1.0,
          level: int = 2, iterations: int | None = None, seed: int = 0) -> dict[str, Any]:
    """One run; returns ``{solved, score, playouts_used, wall_time, seed}`` (plus ``solved_at``)."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if budget is None and time_limit is None:
        raise ValueError("a budget or a time limit is required")
    uses_prior = algorithm.endswith("+prior")
    if uses_prior and prior is None:
        raise ValueError(f"{algorithm} needs a prior")
    bias = prior if uses_prior else None
    rng = rng_from(seed)
    target = problem.solved_score(instance)
    if algorithm.startswith("sampling"):
        res = flat_sampling(problem, instance, bias, budget=budget, time_limit=time_limit, rng=rng,
                            stop_score=target)
    else:
        if iterations is None:
            params = SearchParams.for_budget(budget, level=level, alpha=alpha, stop_score=target,
                                             time_limit=time_limit)
        else:
            params = SearchParams(level=level, iterations=iterations, alpha=alpha, stop_score=target,
                                  budget=budget, time_limit=time_limit)
        res = gnrpa(level, None, params, problem, instance, bias, rng)
    return {
        "solved": bool(res.solved),
        "score": float(res.score),
        "playouts_used": int(res.solved_at_playout if res.solved else res.playouts),
        "wall_time": float(res.solved_at_time if res.solved else res.elapsed),
        "seed": int(seed),
    }


# worker-side state, set once per process
_W: dict[str, Any] = {}


def _init_worker(family_name: str, fold_cmd: str | None, table: PriorTable | None, tau: float) -> None:
    _W["problem"] = make_problem(family_name, fold_cmd)
    _W["prior"] = None if table is None else BiasProvider(table, tau)


def _run_task(task: tuple) -> tuple[str, int, dict[str, Any]]:
    algorithm, index, instance, seed, kw = task
    rec = solve(_W["problem"], instance, algorithm, prior=_W["prior"], seed=seed, **kw)
    return algorithm, index, rec


def _map(tasks: list, workers: int, init_args: tuple) -> list:
    if workers <= 1 or len(tasks) <= 1:
        _init_worker(*init_args)
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=init_args) as ex:
        return list(ex.map(_run_task, tasks, chunksize=1))


@dataclass
class BenchResult:
    rows: list[dict[str, Any]]
    runs: list[dict[str, Any]] = field(default_factory=list)
    table: PriorTable | None = None

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["algorithm", "budget", "solved", "total"], lineterminator="\n")
        w.writeheader()
        w.writerows(self.rows)
        return buf.getvalue()

    def solved(self, algorithm: str, budget: float) -> int:
        for r in self.rows:
            if r["algorithm"] == algorithm and r["budget"] == budget:
                return r["solved"]
        raise KeyError((algorithm, budget))


def tabulate(runs: Sequence[dict[str, Any]], algorithms: Sequence[str], budgets: Sequence[float],
             unit: str, total: int) -> list[dict[str, Any]]:
    """Cumulative solved counts per budget rung from one run per instance."""
    key = "playouts_used" if unit == "playouts" else "wall_time"
    rows = []
    for a in algorithms:
        mine = [r for r in runs if r["algorithm"] == a]
        for b in budgets:
            solved = sum(1 for r in mine if r["solved"] and r[key] <= b)
            rows.append({"algorithm": a, "budget": b, "solved": solved, "total": total})
    return rows


def _test_pairs(cfg: ExperimentConfig, train: Sequence[InstanceSolutionPair] = ()) -> list[InstanceSolutionPair]:
    if cfg.test_corpus:
        pairs, _ = read_corpus(cfg.family, cfg.test_corpus)
        pairs = pairs[: cfg.test] if cfg.test else pairs
        check_disjoint(train, pairs)
        return pairs
    return held_out_pairs(cfg, cfg.test, train)


def _training(cfg: ExperimentConfig) -> tuple[PriorTable, list[InstanceSolutionPair]]:
    from .prior import load_prior
    if cfg.prior:
        return load_prior(cfg.prior), []
    if cfg.train_corpus:
        pairs, _ = read_corpus(cfg.family, cfg.train_corpus)
    else:
        pairs = generate_pairs(cfg, cfg.train, TRAIN_STREAM)
    table, skipped = learn_prior(cfg.family, pairs, cfg.temperature)
    if skipped:
        log.warning("%d training pairs skipped", len(skipped))
    return table, pairs


def check_disjoint(train: Sequence[InstanceSolutionPair], test: Sequence[InstanceSolutionPair]) -> None:
    seen = {hash(p.instance) for p in train}
    clash = [i for i, p in enumerate(test) if hash(p.instance) in seen and any(p.instance == q.instance for q in train)]
    if clash:
        raise RuntimeError(f"test instance {clash[0]} also appears in the training corpus")


def run_bench(cfg: ExperimentConfig, progress: Callable[[str], None] | None = None) -> BenchResult:
    """Every algorithm on every test instance, once, at the largest budget."""
    needs_prior = any(a.endswith("+prior") for a in cfg.algorithms)
    table, train_pairs = _training(cfg) if needs_prior else (None, [])
    test_pairs = _test_pairs(cfg, train_pairs)
    top = cfg.budgets[-1]
    if cfg.budget_unit == "playouts":
        kw = {"budget": int(top), "alpha": cfg.alpha, "level": cfg.level}
    else:
        kw = {"time_limit": float(top), "alpha": cfg.alpha, "level": cfg.level, "iterations": cfg.iterations}
    tasks = []
    for a in cfg.algorithms:
        for i, pair in enumerate(test_pairs):
            tasks.append((a, i, pair.instance, derive_seed(cfg.seed, SEARCH_STREAM, i), kw))
    workers = cfg.workers or os.cpu_count() or 1
    t0 = time.perf_counter()
    results = _map(tasks, workers, (cfg.family, cfg.fold_cmd, table, cfg.temperature))
    runs = []
    for a, i, rec in sorted(results, key=lambda r: (cfg.algorithms.index(r[0]), r[1])):
        runs.append({"algorithm": a, "instance": i, **rec})
    if progress:
        progress(f"{len(tasks)} runs in {time.perf_counter() - t0:.1f}s")
    rows = tabulate(runs, cfg.algorithms, cfg.budgets, cfg.budget_unit, len(test_pairs))
    return BenchResult(rows, runs, table)


def write_bench(cfg: ExperimentConfig, result: BenchResult, out: str | os.PathLike) -> Path:
    """CSV at ``out``, the resolved config and the per-run records next to it."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(result.csv())
    out.with_suffix(".config").write_text(format_config(replace(cfg, out=str(out))))
    with out.with_suffix(".runs.jsonl").open("w") as fh:
        for r in result.runs:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    return out


# --- phase transition ------------------------------------------------------

def phase_sweep(n: int, fractions: Sequence[float], per_point: int, cap: int, seed: int = 0,
                hidden_singles: bool = False) -> list[dict[str, Any]]:
    """Median uniform playouts to solve LSC instances, per empty fraction."""
    def rng_for(fi, i):
        return rng_from(derive_seed(seed, 10 + fi, i))
    return latin.phase_transition_sweep(n, fractions, per_point, cap, rng_for, hidden_singles)


def sweep_peak(rows: Sequence[dict[str, Any]]) -> float:
    """Fraction of the hardest point: highest median, then most censored runs, then mean."""
    best = max(rows, key=lambda r: (r["median_playouts"], r["censored"], r.get("mean_playouts", 0.0)))
    return float(best["fraction"])


def rows_csv(rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
