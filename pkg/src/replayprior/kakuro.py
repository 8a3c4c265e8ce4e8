"""Kakuro on a full n x n board with one sum hint per row and column.

Values range over 1..k and may occur at most once per line. Forward
checking removes a placed value from its line peers, then prunes any value
the remaining cells could not complement to the line's remaining sum (the
min/max of distinct unused values). Decisions are taken on the empty cell
with the fewest candidates, ties to the lowest index.

Moves are integers ``cell * k + (value - 1)``; they double as policy codes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import _kakuro_jit as jit
from ._latin_jit import popcount
from .policy import Policy, PlayoutResult
from .problem import ContractViolation, InstanceSolutionPair, ParseError
from .textio import format_grid, iter_records, parse_ints


@dataclass(frozen=True, eq=False)
class KakuroInstance:
    n: int
    k: int
    row_sums: np.ndarray
    col_sums: np.ndarray

    def __post_init__(self):
        for name in ("row_sums", "col_sums"):
            a = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1)
            if a.shape[0] != self.n:
                raise ValueError(f"{name} must have n entries")
            object.__setattr__(self, name, a)
        if self.k < self.n:
            raise ValueError("k must be >= n")

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, KakuroInstance) and (self.n, self.k) == (other.n, other.k)
                and np.array_equal(self.row_sums, other.row_sums)
                and np.array_equal(self.col_sums, other.col_sums))

    def __hash__(self) -> int:
        return hash((self.n, self.k, self.row_sums.tobytes(), self.col_sums.tobytes()))


class KakuroState:
    __slots__ = ("n", "k", "grid", "dom", "used", "rem", "empty", "meta")

    def __init__(self, n, k, grid, dom, used, rem, empty, meta):
        self.n, self.k = n, k
        self.grid, self.dom, self.used, self.rem, self.empty, self.meta = grid, dom, used, rem, empty, meta

    @property
    def arrays(self):
        return self.grid, self.dom, self.used, self.rem, self.empty, self.meta

    @property
    def wipeout(self) -> bool:
        return bool(self.meta[1])

    def copy(self) -> "KakuroState":
        return KakuroState(self.n, self.k, *(a.copy() for a in self.arrays))

    def domain(self, r: int, c: int) -> list[int]:
        d = int(self.dom[r * self.n + c])
        return [v + 1 for v in range(self.k) if d >> v & 1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KakuroState):
            return NotImplemented
        return (self.n, self.k) == (other.n, other.k) and all(
            np.array_equal(a, b) for a, b in zip(self.arrays, other.arrays))


def _buffers(k: int):
    return np.empty(k, np.int64), np.empty(k + 1, np.int64), np.empty(k + 1, np.int64)


def kakuro_forward_check(state: KakuroState, cell: int, value: int, sums: bool = True) -> KakuroState:
    """Successor after placing ``value`` at ``cell``; check ``.wipeout``."""
    s = state.copy()
    jit.assign(s.n, s.k, *s.arrays, cell, value - 1, sums, *_buffers(s.k))
    return s


def kakuro_score(state: KakuroState) -> float:
    return float(jit.score(state.n, state.meta, state.rem))


def score_grid(instance: KakuroInstance, grid: np.ndarray) -> float:
    """Score of a terminal assignment given as a grid (0 = unassigned)."""
    g = np.asarray(grid, dtype=np.int64).reshape(instance.n, instance.n)
    missing = int(np.count_nonzero(g == 0))
    if missing:
        return -float(missing)
    ok = int(np.sum(g.sum(axis=1) == instance.row_sums)) + int(np.sum(g.sum(axis=0) == instance.col_sums))
    return float(ok)


def sum_cap(k: int) -> int:
    return k * (k + 1) // 2


def unpack_prior_code(code: int, k: int) -> tuple[int, int, int, int, int]:
    """(value, occ_row, occ_col, rem_row, rem_col)."""
    base = sum_cap(k) + 1
    rest, rem_c = divmod(code, base)
    rest, rem_r = divmod(rest, base)
    rest, occ_c = divmod(rest, 2)
    v1, occ_r = divmod(rest, 2)
    return v1 + 1, occ_r, occ_c, rem_r, rem_c


class Kakuro:
    """SearchProblem plugin; ``sums=False`` drops the hint pruning (used to sample squares)."""

    family = "kakuro"

    def __init__(self, sums: bool = True):
        self.sums = sums

    def root(self, instance: KakuroInstance) -> KakuroState:
        return KakuroState(instance.n, instance.k,
                           *jit.root_state(instance.n, instance.k, instance.row_sums, instance.col_sums, self.sums))

    def is_terminal(self, state: KakuroState) -> bool:
        return bool(state.meta[1]) or state.meta[0] == 0

    def legal_moves(self, state: KakuroState) -> list[int]:
        cell = int(jit.select_cell(state.n, state.grid, state.dom))
        d = int(state.dom[cell])
        k = state.k
        return [cell * k + v for v in range(k) if d >> v & 1]

    def play(self, state: KakuroState, move: int) -> KakuroState:
        cell, v = divmod(int(move), state.k)
        if state.grid[cell] != 0 or not (int(state.dom[cell]) >> v) & 1:
            raise ContractViolation(f"illegal move {move}")
        return kakuro_forward_check(state, cell, v + 1, self.sums)

    def score(self, state: KakuroState) -> float:
        return kakuro_score(state)

    def solved_score(self, instance: KakuroInstance) -> float:
        return float(2 * instance.n)

    def policy_code(self, state: KakuroState, move: int) -> int:
        return int(move)

    def prior_code(self, state: KakuroState, move: int) -> int:
        cell, v = divmod(int(move), state.k)
        return int(jit.prior_code(state.n, state.k, state.used, state.rem, cell, v))

    def solution_move(self, state: KakuroState, solution: Any) -> int:
        cell = int(jit.select_cell(state.n, state.grid, state.dom))
        return cell * state.k + int(np.asarray(solution).reshape(-1)[cell]) - 1

    def check_solution(self, instance: KakuroInstance, solution: Any) -> str | None:
        return check_solution(instance, solution)

    def policy_code_space(self, instance: KakuroInstance) -> int:
        return instance.n * instance.n * instance.k

    def prior_code_space(self, instance: KakuroInstance) -> int:
        return instance.k * 4 * (sum_cap(instance.k) + 1) ** 2

    def engine(self, instance: KakuroInstance, prior: Any) -> "KakuroEngine":
        return KakuroEngine(instance, prior, self.sums)


def check_solution(instance: KakuroInstance, solution: Any) -> str | None:
    n, k = instance.n, instance.k
    g = np.asarray(solution, dtype=np.int64)
    if g.size != n * n:
        return "solution has the wrong size"
    g = g.reshape(n, n)
    if g.min() < 1 or g.max() > k:
        return f"value out of range 1..{k}"
    for r in range(n):
        if len(set(g[r].tolist())) != n:
            return f"row {r} has a repeated value"
        if g[r].sum() != instance.row_sums[r]:
            return f"row {r} does not sum to its hint"
    for c in range(n):
        if len(set(g[:, c].tolist())) != n:
            return f"column {c} has a repeated value"
        if g[:, c].sum() != instance.col_sums[c]:
            return f"column {c} does not sum to its hint"
    return None


class KakuroEngine:
    def __init__(self, instance: KakuroInstance, prior: Any = None, sums: bool = True):
        self.n, self.k, self.sums = instance.n, instance.k, sums
        self.root = Kakuro(sums).root(instance).arrays
        self.size = instance.n * instance.n * instance.k
        if prior is None:
            self.bias, self.excluded, self.use_bias = np.zeros(1), np.zeros(1, np.bool_), False
        else:
            self.bias, self.excluded = prior.dense(Kakuro().prior_code_space(instance))
            self.use_bias = True
        self.seq = np.empty(self.n * self.n, np.int64)
        self.grid_out = np.empty(self.n * self.n, np.int64)

    def playout(self, policy: Policy, rng: np.random.Generator) -> PlayoutResult:
        policy.reserve(self.size)
        score, length = jit.playout(self.n, self.k, self.sums, self.root, policy.weights, self.bias,
                                    self.excluded, self.use_bias, rng, self.seq, self.grid_out)
        return PlayoutResult(float(score), self.seq[:length].copy())

    def adapt(self, policy: Policy, sequence: Sequence[int], alpha: float) -> Policy:
        policy.reserve(self.size)
        out = policy.copy()
        seq = np.asarray(sequence, dtype=np.int64)
        bad = jit.adapt(self.n, self.k, self.sums, self.root, policy.weights, out.weights, self.bias,
                        self.excluded, self.use_bias, seq, len(seq), alpha)
        if bad >= 0:
            raise ContractViolation(f"sequence not replayable at step {bad}")
        return out


def sample_square(n: int, k: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Uniform playouts (line-distinct values, no sums) until one fills the board."""
    inst = KakuroInstance(n, k, np.zeros(n, np.int64), np.zeros(n, np.int64))
    eng = KakuroEngine(inst, None, sums=False)
    weights = np.zeros(eng.size)
    attempts = 0
    while True:
        attempts += 1
        _, length = jit.playout(n, k, False, eng.root, weights, eng.bias, eng.excluded, False,
                                rng, eng.seq, eng.grid_out)
        if np.all(eng.grid_out != 0):
            return eng.grid_out.reshape(n, n).copy(), attempts


def generate_kakuro(n: int, k: int, rng: np.random.Generator) -> InstanceSolutionPair:
    """Sample a valid square, read off the line sums, erase the values."""
    if k < n:
        raise ValueError("k must be >= n")
    square, _ = sample_square(n, k, rng)
    return InstanceSolutionPair(KakuroInstance(n, k, square.sum(axis=1), square.sum(axis=0)), square)


# --- text format ---------------------------------------------------------

def format_instance(pair_or_instance: Any, solution: Any = None) -> str:
    if isinstance(pair_or_instance, InstanceSolutionPair):
        inst, solution = pair_or_instance.instance, pair_or_instance.solution
    else:
        inst = pair_or_instance
    lines = [f"{inst.n} {inst.k}", " ".join(map(str, inst.col_sums)), " ".join(map(str, inst.row_sums))]
    if solution is not None:
        lines.append("---")
        lines += format_grid(np.asarray(solution).reshape(-1), inst.n)
    return "\n".join(lines) + "\n"


def _parse_block(lines: list[tuple[int, str]], seed: int | None = None) -> InstanceSolutionPair:
    if len(lines) < 3:
        raise ParseError("expected 'n k', column sums and row sums", lines[0][0] if lines else None)
    ln, head = lines[0]
    nk = parse_ints(head, ln, 2)
    n, k = nk
    if n < 1 or k < n:
        raise ParseError("need 1 <= n <= k", ln)
    col = parse_ints(lines[1][1], lines[1][0], n)
    row = parse_ints(lines[2][1], lines[2][0], n)
    solution = None
    rest = lines[3:]
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
    return InstanceSolutionPair(KakuroInstance(n, k, np.array(row), np.array(col)), solution, seed)


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


def domain_size(state: KakuroState, cell: int) -> int:
    return int(popcount(state.dom[cell]))
