"""Latin Square Completion.

Model: forward checking on rows/columns, channeled with the dual view (for
every row/column and value, the cells still able to take it). A value left
with no candidate cell in a line is a wipeout. Decisions are taken on the
empty cell with the fewest candidates. A state is terminal when
the square is complete or propagation wiped out a domain/support; the score
is minus the number of empty cells.

Moves are integers ``cell * n + (value - 1)``; they double as policy codes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import _latin_jit as jit
from .policy import Policy, PlayoutResult, flat_sampling
from .problem import ContractViolation, InstanceSolutionPair, ParseError
from .textio import format_grid, iter_records, parse_ints


@dataclass(frozen=True, eq=False)
class LatinInstance:
    n: int
    grid: np.ndarray  # flat, 0 = empty

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.int64).reshape(-1)
        if g.shape[0] != self.n * self.n:
            raise ValueError("grid size does not match n")
        object.__setattr__(self, "grid", g)

    @property
    def empty_fraction(self) -> float:
        return float(np.count_nonzero(self.grid == 0)) / (self.n * self.n)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LatinInstance) and self.n == other.n and np.array_equal(self.grid, other.grid)

    def __hash__(self) -> int:
        return hash((self.n, self.grid.tobytes()))


class LatinState:
    __slots__ = ("n", "grid", "dom", "rowsup", "colsup", "meta")

    def __init__(self, n, grid, dom, rowsup, colsup, meta):
        self.n = n
        self.grid = grid
        self.dom = dom
        self.rowsup = rowsup
        self.colsup = colsup
        self.meta = meta

    @property
    def arrays(self):
        return self.grid, self.dom, self.rowsup, self.colsup, self.meta

    @property
    def wipeout(self) -> bool:
        return bool(self.meta[1])

    @property
    def empty(self) -> int:
        return int(self.meta[0])

    def copy(self) -> "LatinState":
        return LatinState(self.n, *(a.copy() for a in self.arrays))

    def domain(self, r: int, c: int) -> list[int]:
        d = int(self.dom[r * self.n + c])
        return [v + 1 for v in range(self.n) if d >> v & 1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LatinState):
            return NotImplemented
        return self.n == other.n and all(np.array_equal(a, b) for a, b in zip(self.arrays, other.arrays))


def propagate(n: int, grid: Sequence[int], order: Sequence[int] | None = None,
              hidden_singles: bool = False) -> LatinState:
    """State reached by placing every given (in ``order``) and propagating.

    Check ``.wipeout`` on the result.
    """
    g = np.asarray(grid, dtype=np.int64).reshape(-1)
    if order is None:
        order = np.arange(n * n, dtype=np.int64)
    return LatinState(n, *jit.root_state(n, g, np.asarray(order, dtype=np.int64), hidden_singles))


def select_variable(state: LatinState) -> tuple[int, int]:
    cell = int(jit.select_cell(state.n, state.grid, state.dom))
    return divmod(cell, state.n)


def lsc_score(state: LatinState) -> float:
    return float(jit.score(state.meta))


def dual_supports(state: LatinState, move: int) -> tuple[int, int]:
    """(candidate cells for the value in the move's row, same in its column)."""
    n = state.n
    cell, v = divmod(int(move), n)
    r, c = divmod(cell, n)
    return (int(jit.popcount(state.rowsup[r * n + v])), int(jit.popcount(state.colsup[c * n + v])))


def dual_prior_code(state: LatinState, move: int) -> int:
    n = state.n
    cell, v = divmod(int(move), n)
    return int(jit.prior_code(n, state.rowsup, state.colsup, cell, v))


def unpack_dual_code(code: int, n: int) -> tuple[int, int]:
    sr, sc = divmod(code, n)
    return sr + 1, sc + 1


class LatinSquare:
    """SearchProblem plugin for Latin Square Completion.

    ``hidden_singles=True`` also places a value as soon as it has a single
    candidate cell left in a row or column. That rule makes order-20
    instances near the 42% transition easy for plain sampling, so it is off
    by default.
    """

    family = "lsc"

    def __init__(self, hidden_singles: bool = False):
        self.hidden_singles = hidden_singles

    def root(self, instance: LatinInstance) -> LatinState:
        return propagate(instance.n, instance.grid, hidden_singles=self.hidden_singles)

    def is_terminal(self, state: LatinState) -> bool:
        return bool(state.meta[1]) or state.meta[0] == 0

    def legal_moves(self, state: LatinState) -> list[int]:
        n = state.n
        cell = int(jit.select_cell(n, state.grid, state.dom))
        d = int(state.dom[cell])
        return [cell * n + v for v in range(n) if d >> v & 1]

    def play(self, state: LatinState, move: int) -> LatinState:
        s = state.copy()
        n = s.n
        cell, v = divmod(int(move), n)
        if s.grid[cell] != 0 or not (int(s.dom[cell]) >> v) & 1:
            raise ContractViolation(f"illegal move {move}")
        size = 3 * n * n + 1
        jit.assign(n, *s.arrays[:4], s.meta, cell, v, np.empty(size, np.int64), np.empty(size, np.int64),
                   self.hidden_singles)
        return s

    def score(self, state: LatinState) -> float:
        return lsc_score(state)

    def solved_score(self, instance: LatinInstance) -> float:
        return 0.0

    def policy_code(self, state: LatinState, move: int) -> int:
        return int(move)

    def prior_code(self, state: LatinState, move: int) -> int:
        return dual_prior_code(state, move)

    def solution_move(self, state: LatinState, solution: np.ndarray) -> int:
        n = state.n
        cell = int(jit.select_cell(n, state.grid, state.dom))
        return cell * n + int(np.asarray(solution).reshape(-1)[cell]) - 1

    def check_solution(self, instance: LatinInstance, solution: Any) -> str | None:
        n = instance.n
        sol = np.asarray(solution, dtype=np.int64).reshape(-1)
        if sol.shape[0] != n * n:
            return "solution has the wrong size"
        return check_square(sol.reshape(n, n), instance.grid.reshape(n, n))

    # sizes of the code spaces, used by the compiled engine and dense priors
    def policy_code_space(self, instance: LatinInstance) -> int:
        return instance.n ** 3

    def prior_code_space(self, instance: LatinInstance) -> int:
        return instance.n ** 2

    def engine(self, instance: LatinInstance, prior: Any) -> "LatinEngine":
        return LatinEngine(instance, prior, self.hidden_singles)


def check_square(square: np.ndarray, givens: np.ndarray | None = None) -> str | None:
    """First violated constraint of a complete square, or None."""
    square = np.asarray(square)
    n = square.shape[0]
    if square.min() < 1 or square.max() > n:
        return "value out of range 1..n"
    want = np.arange(1, n + 1)
    for r in range(n):
        if not np.array_equal(np.sort(square[r]), want):
            return f"row {r} has a repeated value"
    for c in range(n):
        if not np.array_equal(np.sort(square[:, c]), want):
            return f"column {c} has a repeated value"
    if givens is not None:
        g = np.asarray(givens).reshape(n, n)
        bad = np.argwhere((g != 0) & (g != square))
        if len(bad):
            r, c = bad[0]
            return f"cell ({r}, {c}) disagrees with the given value"
    return None


class LatinEngine:
    """Compiled playout/adapt for one instance; trajectories match the generic path."""

    def __init__(self, instance: LatinInstance, prior: Any = None, hidden_singles: bool = False):
        n = instance.n
        self.n = n
        self.hidden_singles = hidden_singles
        self.root = LatinSquare(hidden_singles).root(instance).arrays
        self.size = n ** 3
        if prior is None:
            self.bias, self.excluded, self.use_bias = np.zeros(1), np.zeros(1, np.bool_), False
        else:
            self.bias, self.excluded = prior.dense(n * n)
            self.use_bias = True
        self.seq = np.empty(n * n, np.int64)
        self.grid_out = np.empty(n * n, np.int64)

    def playout(self, policy: Policy, rng: np.random.Generator) -> PlayoutResult:
        policy.reserve(self.size)
        score, length = jit.playout(self.n, self.hidden_singles, self.root, policy.weights, self.bias, self.excluded,
                                    self.use_bias, rng, self.seq, self.grid_out)
        return PlayoutResult(float(score), self.seq[:length].copy())

    def adapt(self, policy: Policy, sequence: Sequence[int], alpha: float) -> Policy:
        policy.reserve(self.size)
        out = policy.copy()
        seq = np.asarray(sequence, dtype=np.int64)
        bad = jit.adapt(self.n, self.hidden_singles, self.root, policy.weights, out.weights, self.bias, self.excluded,
                        self.use_bias, seq, len(seq), alpha)
        if bad >= 0:
            raise ContractViolation(f"sequence not replayable at step {bad}")
        return out


def sample_square(n: int, rng: np.random.Generator, hidden_singles: bool = False) -> tuple[np.ndarray, int]:
    """Uniform playouts from the empty grid until one completes; (square, attempts)."""
    eng = LatinEngine(LatinInstance(n, np.zeros(n * n, np.int64)), None, hidden_singles)
    policy = Policy(np.zeros(n ** 3))
    attempts = 0
    while True:
        attempts += 1
        score, _ = jit.playout(n, hidden_singles, eng.root, policy.weights, eng.bias, eng.excluded, False,
                               rng, eng.seq, eng.grid_out)
        if score == 0:
            return eng.grid_out.reshape(n, n).copy(), attempts


def generate_complete_square(n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return sample_square(n, rng)[0]


def blank_count(n: int, empty_fraction: float) -> int:
    return int(math.floor(empty_fraction * n * n + 0.5))


def make_instance(square: np.ndarray, empty_fraction: float, rng: np.random.Generator) -> InstanceSolutionPair:
    """Blank ``round(fraction * n^2)`` uniformly chosen cells of a full square."""
    if not 0.0 <= empty_fraction <= 1.0:
        raise ValueError("empty_fraction must be in [0, 1]")
    square = np.asarray(square, dtype=np.int64)
    n = square.shape[0]
    grid = square.reshape(-1).copy()
    grid[rng.permutation(n * n)[: blank_count(n, empty_fraction)]] = 0
    return InstanceSolutionPair(LatinInstance(n, grid), square.copy())


def generate_pair(n: int, empty_fraction: float, rng: np.random.Generator) -> InstanceSolutionPair:
    return make_instance(generate_complete_square(n, rng), empty_fraction, rng)


def phase_transition_sweep(n: int, fractions: Sequence[float], instances_per_point: int,
                           playout_cap: int, rng_for: Any, hidden_singles: bool = False) -> list[dict]:
    """Median number of uniform playouts needed to solve, per empty fraction.

    ``rng_for(i_fraction, i_instance)`` returns the generator for one run.
    Runs hitting the cap count as ``playout_cap``.
    """
    problem = LatinSquare(hidden_singles)
    rows = []
    for fi, f in enumerate(fractions):
        used = []
        censored = 0
        for i in range(instances_per_point):
            rng = rng_for(fi, i)
            pair = generate_pair(n, f, rng)
            res = flat_sampling(problem, pair.instance, None, budget=playout_cap, rng=rng)
            if res.solved:
                used.append(res.solved_at_playout)
            else:
                used.append(playout_cap)
                censored += 1
        rows.append({"fraction": f, "median_playouts": float(np.median(used)) if used else float("nan"),
                     "mean_playouts": float(np.mean(used)) if used else float("nan"),
                     "censored": censored, "instances": instances_per_point})
    return rows


# --- text format ---------------------------------------------------------

def format_instance(pair_or_instance: Any, solution: Any = None) -> str:
    if isinstance(pair_or_instance, InstanceSolutionPair):
        inst, solution = pair_or_instance.instance, pair_or_instance.solution
    else:
        inst = pair_or_instance
    lines = [str(inst.n)] + format_grid(inst.grid, inst.n)
    if solution is not None:
        lines.append("---")
        lines += format_grid(np.asarray(solution).reshape(-1), inst.n)
    return "\n".join(lines) + "\n"


def _parse_block(lines: list[tuple[int, str]], seed: int | None = None) -> InstanceSolutionPair:
    if not lines:
        raise ParseError("empty record")
    lineno, first = lines[0]
    try:
        n = int(first.split()[0])
    except (ValueError, IndexError):
        raise ParseError("first line must hold n", lineno) from None
    if n < 1:
        raise ParseError("n must be >= 1", lineno)
    body = lines[1:]
    if len(body) < n:
        raise ParseError(f"expected {n} grid rows", lines[-1][0])
    grid = []
    for ln, text in body[:n]:
        row = parse_ints(text, ln, n)
        if any(v < 0 or v > n for v in row):
            raise ParseError("cell value out of range", ln)
        grid += row
    solution = None
    rest = body[n:]
    if rest:
        ln, sep = rest[0]
        if sep.strip() != "---":
            raise ParseError("expected '---' before the solution grid", ln)
        if len(rest) != n + 1:
            raise ParseError(f"expected {n} solution rows", rest[-1][0])
        sol = []
        for ln, text in rest[1:]:
            sol += parse_ints(text, ln, n)
        solution = np.array(sol, dtype=np.int64).reshape(n, n)
    return InstanceSolutionPair(LatinInstance(n, np.array(grid, dtype=np.int64)), solution, seed)


def parse_instance(text: str) -> InstanceSolutionPair:
    records = list(iter_records(text))
    if len(records) != 1:
        raise ParseError(f"expected one instance, found {len(records)}")
    _, lines, seed = records[0]
    return _parse_block(lines, seed)


def parse_corpus(text: str) -> list[InstanceSolutionPair]:
    return [_parse_block(lines, seed) for _, lines, seed in iter_records(text)]


def format_corpus(pairs: Sequence[InstanceSolutionPair]) -> str:
    out = []
    for p in pairs:
        head = f"#seed {p.seed}\n" if p.seed is not None else ""
        out.append(head + format_instance(p))
    return "\n".join(out)
