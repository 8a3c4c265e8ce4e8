"""Learning playout biases from solved instances.

A :class:`PriorTable` holds, for every prior code, how often a move with
that code was the solution move (``count``) and how often it was legal
(``nb``). :class:`BiasProvider` turns the ratio into ``tau * log(count/nb)``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from .policy import EXCLUDED
from .problem import CorruptPairError, InstanceSolutionPair, ParseError, SearchProblem


@dataclass
class PriorTable:
    counters: dict[int, list[int]] = field(default_factory=dict)
    family: str = ""
    instances: int = 0
    tau: float | None = None
    params: dict[str, str] = field(default_factory=dict)

    def add(self, code: int, count: int = 0, nb: int = 0) -> None:
        c = self.counters.get(code)
        if c is None:
            self.counters[code] = [count, nb]
        else:
            c[0] += count
            c[1] += nb

    def count(self, code: int) -> int:
        c = self.counters.get(code)
        return 0 if c is None else c[0]

    def nb(self, code: int) -> int:
        c = self.counters.get(code)
        return 0 if c is None else c[1]

    def frequency(self, code: int) -> float | None:
        c = self.counters.get(code)
        if c is None or c[1] == 0:
            return None
        return c[0] / c[1]

    def frequencies(self) -> np.ndarray:
        return np.array([c / n for c, n in self.counters.values()], dtype=float)

    def merge(self, other: "PriorTable") -> "PriorTable":
        """Component-wise sum; replay is order independent so this is exact."""
        out = PriorTable({k: list(v) for k, v in self.counters.items()}, self.family or other.family,
                         self.instances + other.instances, self.tau, dict(self.params))
        for code, (c, n) in other.counters.items():
            out.add(code, c, n)
        return out

    def check(self) -> None:
        for code, (c, n) in self.counters.items():
            if code < 0 or c < 0 or n < 1 or c > n:
                raise ValueError(f"code {code}: invalid counters count={c} nb={n}")

    def __len__(self) -> int:
        return len(self.counters)


@dataclass(frozen=True)
class BiasProvider:
    """``bias(code) = tau * ln(count / nb)``.

    Absent codes are neutral (0). Codes seen but never chosen get
    ``tau * ln(frequency_floor)``, or :data:`EXCLUDED` when ``hard_exclusion``.
    A zero temperature gives 0 everywhere.
    """

    table: PriorTable
    tau: float
    frequency_floor: float = 1e-6
    hard_exclusion: bool = False

    def bias(self, code: int) -> Any:
        if self.tau == 0.0:
            return 0.0
        c = self.table.counters.get(code)
        if c is None:
            return 0.0
        count, nb = c
        if count >= 1:
            return self.tau * math.log(count / nb)
        if self.hard_exclusion:
            return EXCLUDED
        return self.tau * math.log(self.frequency_floor)

    def dense(self, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Bias vector and excluded mask over codes ``0..size-1`` for compiled engines."""
        bias = np.zeros(size)
        excluded = np.zeros(size, dtype=np.bool_)
        if self.tau == 0.0:
            return bias, excluded
        for code in self.table.counters:
            if code >= size:
                raise ValueError(f"prior code {code} outside the code space of size {size}")
            b = self.bias(code)
            if b is EXCLUDED:
                excluded[code] = True
            else:
                bias[code] = b
        return bias, excluded


def replay(problem: SearchProblem, instance: Any, solution: Any, table: PriorTable) -> PriorTable:
    """Walk the solution trajectory and update ``count``/``nb`` in ``table``.

    The move at each step is the solution's value for the variable the
    problem's selection rule picks. On a corrupt pair the table is left
    unchanged and :class:`CorruptPairError` is raised.
    """
    inc: dict[int, list[int]] = {}
    state = problem.root(instance)
    step = 0
    while not problem.is_terminal(state):
        moves = problem.legal_moves(state)
        b = problem.solution_move(state, solution)
        if b not in moves:
            raise CorruptPairError(f"solution move {b!r} illegal at step {step}", step)
        for m in moves:
            code = problem.prior_code(state, m)
            slot = inc.setdefault(code, [0, 0])
            slot[1] += 1
            if m == b:
                slot[0] += 1
        state = problem.play(state, b)
        step += 1
    if problem.score(state) != problem.solved_score(instance):
        raise CorruptPairError(f"solution replay ends unsolved after {step} steps", step)
    for code, (c, n) in inc.items():
        table.add(code, c, n)
    table.instances += 1
    return table


def replay_corpus(problem: SearchProblem, pairs: Iterable[InstanceSolutionPair],
                  table: PriorTable | None = None) -> tuple[PriorTable, list[tuple[int, str]]]:
    """Replay every pair; corrupt pairs are skipped and returned as (index, reason)."""
    if table is None:
        table = PriorTable()
    skipped = []
    for i, pair in enumerate(pairs):
        try:
            replay(problem, pair.instance, pair.solution, table)
        except CorruptPairError as exc:
            skipped.append((i, str(exc)))
    return table, skipped


def frequency_histogram(table: PriorTable, bucket_width: float = 0.1) -> list[tuple[tuple[float, float], int]]:
    """Counts of ``count/nb`` per bucket ``[lo, hi)``; exact 1.0 is its own ``(1.0, 1.0)`` bucket."""
    if not 0.0 < bucket_width <= 1.0:
        raise ValueError("bucket_width must be in (0, 1]")
    if not table.counters:
        return []
    nbuckets = int(math.ceil(1.0 / bucket_width - 1e-9))
    counts = [0] * (nbuckets + 1)
    for c, n in table.counters.values():
        if c == n:
            counts[nbuckets] += 1
        else:
            counts[min(int((c / n) / bucket_width), nbuckets - 1)] += 1
    out = []
    for i in range(nbuckets):
        lo = round(i * bucket_width, 12)
        hi = min(1.0, round((i + 1) * bucket_width, 12))
        out.append(((lo, hi), counts[i]))
    out.append(((1.0, 1.0), counts[nbuckets]))
    return out


def save_prior(table: PriorTable, path: str | os.PathLike) -> None:
    lines = [f"#family {table.family or '-'}", f"#instances {table.instances}"]
    if table.tau is not None:
        lines.append(f"#tau {table.tau!r}")
    for k in sorted(table.params):
        lines.append(f"#param {k} {table.params[k]}")
    for code in sorted(table.counters):
        c, n = table.counters[code]
        lines.append(f"{code} {c} {n}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_prior(path: str | os.PathLike) -> PriorTable:
    table = PriorTable()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, rest = line[1:].partition(" ")
                rest = rest.strip()
                try:
                    if key == "family":
                        table.family = "" if rest == "-" else rest
                    elif key == "instances":
                        table.instances = int(rest)
                    elif key == "tau":
                        table.tau = float(rest)
                    elif key == "param":
                        name, _, value = rest.partition(" ")
                        table.params[name] = value
                    else:
                        raise ParseError(f"unknown header {key!r}", lineno)
                except ValueError as exc:
                    if isinstance(exc, ParseError):
                        raise
                    raise ParseError(f"bad header value {rest!r}", lineno) from None
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"expected '<code> <count> <nb>', got {line!r}", lineno)
            try:
                code, c, n = (int(p) for p in parts)
            except ValueError:
                raise ParseError(f"non-integer field in {line!r}", lineno) from None
            if code < 0 or c < 0 or n < 1 or c > n:
                raise ParseError(f"invalid counters count={c} nb={n}", lineno)
            if code in table.counters:
                raise ParseError(f"duplicate code {code}", lineno)
            table.counters[code] = [c, n]
    return table
