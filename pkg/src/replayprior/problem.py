"""The contract every search domain implements, plus pair validation.

policy-core and the prior learner only ever talk to a domain through
:class:`SearchProblem`, so adding a new combinatorial problem means writing
one class with the methods below.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Hashable, Protocol, Sequence, runtime_checkable

import numpy as np

Move = Hashable
State = Any


class ContractViolation(RuntimeError):
    """A domain or caller broke a documented precondition."""


class CorruptPairError(ValueError):
    """An instance/solution pair whose solution cannot be replayed."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class ParseError(ValueError):
    """Malformed input file; carries the offending line number (1-based)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OracleError(RuntimeError):
    """The folding oracle is unavailable or violated its line protocol."""


@runtime_checkable
class SearchProblem(Protocol):
    def root(self, instance: Any) -> State: ...

    def is_terminal(self, state: State) -> bool: ...

    def legal_moves(self, state: State) -> Sequence[Move]: ...

    def play(self, state: State, move: Move) -> State: ...

    def score(self, state: State) -> float: ...

    def solved_score(self, instance: Any) -> float: ...

    def policy_code(self, state: State, move: Move) -> int: ...

    def prior_code(self, state: State, move: Move) -> int: ...

    def solution_move(self, state: State, solution: Any) -> Move:
        """Move the solution makes at ``state`` (the variable is the one the
        problem's own selection rule picks)."""
        ...

    def check_solution(self, instance: Any, solution: Any) -> str | None:
        """Static check of a complete assignment; a message or None."""
        ...


@dataclass(frozen=True)
class InstanceSolutionPair:
    instance: Any
    solution: Any
    seed: int | None = None


def walk_solution(problem: SearchProblem, instance: Any, solution: Any) -> tuple[State, list]:
    """Replay ``solution`` from the root; returns the terminal state and the
    derived move list. Raises CorruptPairError at the first illegal step."""
    state = problem.root(instance)
    moves = []
    step = 0
    while not problem.is_terminal(state):
        legal = problem.legal_moves(state)
        b = problem.solution_move(state, solution)
        if b not in legal:
            raise CorruptPairError(f"solution move {b!r} illegal at step {step}", step)
        moves.append(b)
        state = problem.play(state, b)
        step += 1
    return state, moves


def validate_pair(problem: SearchProblem, pair: InstanceSolutionPair) -> str | None:
    """Return None when the pair is sound, else a report of the first
    violated constraint."""
    msg = problem.check_solution(pair.instance, pair.solution)
    if msg is not None:
        return msg
    try:
        state, _ = walk_solution(problem, pair.instance, pair.solution)
    except CorruptPairError as exc:
        return str(exc)
    score = problem.score(state)
    if score != problem.solved_score(pair.instance):
        return f"solution replay ends with score {score}, not the solved score"
    return None


def conformance_report(problem: SearchProblem, instance: Any, rng: np.random.Generator,
                       walks: int = 10) -> list[str]:
    """Random-walk checks of the contract; returns a list of problems found.

    Checks terminal/legal-move consistency, determinism of ``play``, purity of
    both code functions and that ``score`` is total on terminal states.
    """
    issues: list[str] = []
    for w in range(walks):
        state = problem.root(instance)
        depth = 0
        while True:
            if problem.is_terminal(state):
                try:
                    s = float(problem.score(state))
                    if s != s:
                        issues.append(f"walk {w}: NaN score at depth {depth}")
                except Exception as exc:  # noqa: BLE001
                    issues.append(f"walk {w}: score raised {exc!r}")
                break
            moves = list(problem.legal_moves(state))
            if not moves:
                issues.append(f"walk {w}: no legal moves at non-terminal depth {depth}")
                break
            if moves != list(problem.legal_moves(state)):
                issues.append(f"walk {w}: legal_moves not deterministic at depth {depth}")
            for m in moves:
                if problem.policy_code(state, m) != problem.policy_code(state, m):
                    issues.append(f"walk {w}: impure policy_code at depth {depth}")
                if problem.prior_code(state, m) != problem.prior_code(state, m):
                    issues.append(f"walk {w}: impure prior_code at depth {depth}")
            m = moves[int(rng.integers(len(moves)))]
            a = problem.play(state, m)
            b = problem.play(state, m)
            if a != b:
                issues.append(f"walk {w}: play not deterministic at depth {depth}")
            state = a
            depth += 1
    return issues
