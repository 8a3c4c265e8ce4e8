"""Softmax playouts, the adapt step and nested search (NRPA / GNRPA).

Everything here is generic over :class:`~replayprior.problem.SearchProblem`.
A domain may additionally expose ``engine(instance, prior)`` returning a
compiled object with the same ``playout``/``adapt`` semantics; the nested
search uses it when available and produces bit-identical trajectories.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .problem import ContractViolation, Move, SearchProblem


class _Excluded:
    __slots__ = ()

    def __repr__(self) -> str:
        return "EXCLUDED"

    def __reduce__(self):
        return "EXCLUDED"


#: Bias value for a hard-excluded move (probability 0 unless every move is excluded).
EXCLUDED = _Excluded()


class Policy:
    """Move-code -> weight table. Unknown codes read as 0.0.

    Backed by a growable float64 array so compiled engines can use it in place.
    """

    __slots__ = ("weights",)

    def __init__(self, weights: np.ndarray | None = None):
        self.weights = np.zeros(0) if weights is None else np.asarray(weights, dtype=np.float64)

    def __getitem__(self, code: int) -> float:
        if code < self.weights.shape[0]:
            return float(self.weights[code])
        return 0.0

    def __setitem__(self, code: int, value: float) -> None:
        if code >= self.weights.shape[0]:
            self.reserve(max(code + 1, 2 * self.weights.shape[0]))
        self.weights[code] = value

    def reserve(self, size: int) -> None:
        if size > self.weights.shape[0]:
            grown = np.zeros(size)
            grown[: self.weights.shape[0]] = self.weights
            self.weights = grown

    def copy(self) -> "Policy":
        return Policy(self.weights.copy())

    def nonzero(self) -> dict[int, float]:
        idx = np.flatnonzero(self.weights)
        return {int(i): float(self.weights[i]) for i in idx}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Policy):
            return NotImplemented
        return self.nonzero() == other.nonzero()

    def __repr__(self) -> str:
        return f"Policy({self.nonzero()})"


@dataclass
class PlayoutResult:
    score: float
    sequence: Sequence[Move]


@dataclass
class SearchParams:
    level: int = 2
    iterations: int = 100
    alpha: float = 1.0
    # temperature used when the caller builds a BiasProvider; the search itself
    # only sees the provider
    tau: float = 0.0
    seed: int = 0
    stop_score: float | None = None
    budget: int | None = None
    time_limit: float | None = None
    compiled: bool = True

    @classmethod
    def for_budget(cls, budget: int, level: int = 2, **kw: Any) -> "SearchParams":
        """Nested parameters with ``iterations ** level`` <= budget (largest such N)."""
        if level == 0:
            n = 1
        else:
            n = max(1, int(round(budget ** (1.0 / level))))
            while n > 1 and n ** level > budget:
                n -= 1
            while (n + 1) ** level <= budget:
                n += 1
        return cls(level=level, iterations=n, budget=budget, **kw)


@dataclass
class SearchResult:
    score: float
    sequence: Sequence[Move]
    playouts: int
    elapsed: float
    solved: bool = False
    solved_at_playout: int | None = None
    solved_at_time: float | None = None

    def __iter__(self):
        yield self.score
        yield self.sequence


def softmax_distribution(entries: Sequence[tuple[float, Any]]) -> list[float]:
    """Probabilities proportional to ``exp(weight + bias)``.

    A bias equal to :data:`EXCLUDED` gets probability 0; if every entry is
    excluded the distribution falls back to uniform.
    """
    if not entries:
        raise ContractViolation("softmax over an empty move list")
    xs: list[float | None] = []
    top: float | None = None
    for w, b in entries:
        if b is EXCLUDED:
            xs.append(None)
            continue
        x = w + b
        xs.append(x)
        if top is None or x > top:
            top = x
    if top is None:
        return [1.0 / len(entries)] * len(entries)
    o = [0.0 if x is None else math.exp(x - top) for x in xs]
    z = 0.0
    for v in o:
        z += v
    return [v / z for v in o]


def sample_index(probs: Sequence[float], u: float) -> int:
    """Inverse-CDF draw for ``u`` in [0, 1); never returns a zero-probability slot."""
    acc = 0.0
    last = 0
    for i, p in enumerate(probs):
        if p > 0.0:
            acc += p
            last = i
            if u < acc:
                return i
    return last


def _bias(prior: Any, code: int) -> Any:
    return 0.0 if prior is None else prior.bias(code)


def _step_distribution(problem: SearchProblem, state: Any, moves: Sequence[Move],
                       policy: Policy, prior: Any) -> list[float]:
    entries = []
    for m in moves:
        w = policy[problem.policy_code(state, m)]
        b = 0.0 if prior is None else prior.bias(problem.prior_code(state, m))
        entries.append((w, b))
    return softmax_distribution(entries)


def playout(problem: SearchProblem, instance: Any, policy: Policy, prior: Any,
            rng: np.random.Generator) -> PlayoutResult:
    """One Gibbs-sampled walk from the root to a terminal state.

    Consumes exactly one ``rng.random()`` per decision.
    """
    state = problem.root(instance)
    sequence: list[Move] = []
    while not problem.is_terminal(state):
        moves = problem.legal_moves(state)
        if not moves:
            raise ContractViolation(f"non-terminal state without legal moves after {len(sequence)} steps")
        probs = _step_distribution(problem, state, moves, policy, prior)
        move = moves[sample_index(probs, rng.random())]
        sequence.append(move)
        state = problem.play(state, move)
    return PlayoutResult(float(problem.score(state)), sequence)


def adapt(policy: Policy, best_sequence: Sequence[Move], problem: SearchProblem,
          instance: Any, prior: Any, alpha: float) -> Policy:
    """Reinforce ``best_sequence``; returns the updated copy, ``policy`` is untouched.

    Probabilities at every step are computed with the incoming policy, updates
    accumulate on the copy.
    """
    polp = policy.copy()
    state = problem.root(instance)
    for step, b in enumerate(best_sequence):
        if problem.is_terminal(state):
            raise ContractViolation(f"sequence not replayable: terminal state reached before step {step}")
        moves = problem.legal_moves(state)
        if b not in moves:
            raise ContractViolation(f"sequence not replayable: move {b!r} illegal at step {step}")
        probs = _step_distribution(problem, state, moves, policy, prior)
        for m, p in zip(moves, probs):
            code = problem.policy_code(state, m)
            delta = 1.0 if m == b else 0.0
            polp[code] = polp[code] - alpha * (p - delta)
        state = problem.play(state, b)
    return polp


class GenericEngine:
    """Playout/adapt bound to one (problem, instance, prior)."""

    def __init__(self, problem: SearchProblem, instance: Any, prior: Any):
        self.problem = problem
        self.instance = instance
        self.prior = prior

    def playout(self, policy: Policy, rng: np.random.Generator) -> PlayoutResult:
        return playout(self.problem, self.instance, policy, self.prior, rng)

    def adapt(self, policy: Policy, sequence: Sequence[Move], alpha: float) -> Policy:
        return adapt(policy, sequence, self.problem, self.instance, self.prior, alpha)


def make_engine(problem: SearchProblem, instance: Any, prior: Any, compiled: bool = True):
    if compiled:
        factory = getattr(problem, "engine", None)
        if factory is not None:
            eng = factory(instance, prior)
            if eng is not None:
                return eng
    return GenericEngine(problem, instance, prior)


class _Stop(Exception):
    pass


@dataclass
class _Run:
    engine: Any
    rng: np.random.Generator
    stop_score: float | None
    budget: int | None
    deadline: float | None
    start: float
    callback: Callable[[PlayoutResult], None] | None = None
    playouts: int = 0
    best: PlayoutResult | None = None
    solved_at_playout: int | None = None
    solved_at_time: float | None = None
    stopped: bool = field(default=False)

    def playout(self, policy: Policy) -> PlayoutResult:
        if self.budget is not None and self.playouts >= self.budget:
            raise _Stop
        if self.deadline is not None and time.perf_counter() >= self.deadline:
            raise _Stop
        res = self.engine.playout(policy, self.rng)
        self.playouts += 1
        if self.callback is not None:
            self.callback(res)
        if self.best is None or res.score >= self.best.score:
            self.best = res
        if self.stop_score is not None and res.score >= self.stop_score:
            self.solved_at_playout = self.playouts
            self.solved_at_time = time.perf_counter() - self.start
            raise _Stop
        return res


def _nested(run: _Run, level: int, policy: Policy, iterations: int, alpha: float) -> PlayoutResult:
    if level == 0:
        return run.playout(policy)
    pol = policy.copy()
    best: PlayoutResult | None = None
    for _ in range(iterations):
        res = _nested(run, level - 1, pol, iterations, alpha)
        if best is None or res.score >= best.score:
            best = res
        pol = run.engine.adapt(pol, best.sequence, alpha)
    return best


def _result(run: _Run, best: PlayoutResult | None) -> SearchResult:
    if best is None:
        best = run.best
    elapsed = time.perf_counter() - run.start
    if best is None:
        return SearchResult(-math.inf, [], run.playouts, elapsed)
    return SearchResult(best.score, best.sequence, run.playouts, elapsed,
                        solved=run.solved_at_playout is not None,
                        solved_at_playout=run.solved_at_playout,
                        solved_at_time=run.solved_at_time)


def gnrpa(level: int, policy: Policy | None, params: SearchParams, problem: SearchProblem,
          instance: Any, prior: Any = None, rng: np.random.Generator | None = None,
          callback: Callable[[PlayoutResult], None] | None = None) -> SearchResult:
    """Nested policy adaptation with an optional bias provider.

    With ``prior=None`` this is plain NRPA. The run stops early when a playout
    reaches ``params.stop_score`` or when the budget / time limit is spent,
    returning the best playout seen so far.
    """
    if level < 0:
        raise ContractViolation("level must be >= 0")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    start = time.perf_counter()
    run = _Run(make_engine(problem, instance, prior, params.compiled), rng, params.stop_score,
               params.budget,
               None if params.time_limit is None else start + params.time_limit,
               start, callback)
    try:
        best = _nested(run, level, Policy() if policy is None else policy,
                       params.iterations, params.alpha)
    except _Stop:
        best = None
    return _result(run, best)


def flat_sampling(problem: SearchProblem, instance: Any, prior: Any = None,
                  budget: int | None = None, time_limit: float | None = None,
                  rng: np.random.Generator | None = None, stop_score: float | None = None,
                  compiled: bool = True) -> SearchResult:
    """Independent playouts with an all-zero policy, stopping once solved.

    ``stop_score`` defaults to the instance's solved score.
    """
    if budget is None and time_limit is None:
        raise ContractViolation("flat_sampling needs a budget or a time limit")
    if rng is None:
        rng = np.random.default_rng()
    if stop_score is None:
        stop_score = problem.solved_score(instance)
    start = time.perf_counter()
    run = _Run(make_engine(problem, instance, prior, compiled), rng, stop_score, budget,
               None if time_limit is None else start + time_limit, start)
    policy = Policy()
    try:
        while True:
            run.playout(policy)
    except _Stop:
        pass
    return _result(run, None)
