"""Inverse RNA folding.

A puzzle is a dot-bracket target, optionally with some bases imposed. A
playout scans the target left to right: a '.' takes one of the four
nucleotides, a '(' takes one of the six allowed pairs (both ends at once),
a ')' is skipped since its partner already set it. The finished sequence is
folded by a folding oracle and scored by minus the number of positions where
the folded structure differs from the target.

Moves are token indices 0..9 (see :data:`TOKENS`). Policy codes are
``position * 10 + token``; prior codes are NGRAMs
``(previous token + 1) * 10 + token`` where the first decision uses the
start sentinel (codes 0..9).
"""
from __future__ import annotations

import os
import shlex
import subprocess
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import _rna_jit as jit
from .policy import Policy, PlayoutResult
from .prior import PriorTable
from .problem import ContractViolation, CorruptPairError, InstanceSolutionPair, OracleError, ParseError
from .textio import iter_records

NUCLEOTIDES = "ACGU"
TOKENS = ("A", "C", "G", "U", "CG", "GC", "GU", "UG", "AU", "UA")
UNPAIRED_TOKENS = (0, 1, 2, 3)
PAIR_TOKENS = (4, 5, 6, 7, 8, 9)
SENTINEL = -1
FOLD_CMD_ENV = "REPLAYPRIOR_FOLD_CMD"

_PAIR_INDEX = {TOKENS[t]: t for t in PAIR_TOKENS}


@dataclass(frozen=True)
class TargetStructure:
    chars: str
    pair_map: tuple[int, ...]  # partner index, -1 when unpaired

    def __len__(self) -> int:
        return len(self.chars)

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j in enumerate(self.pair_map) if j > i]

    @property
    def decision_positions(self) -> list[int]:
        return [i for i, c in enumerate(self.chars) if c != ")"]


def parse_dotbracket(text: str) -> TargetStructure:
    chars = text.strip()
    stack: list[int] = []
    pair = [-1] * len(chars)
    for i, ch in enumerate(chars):
        if ch == "(":
            stack.append(i)
        elif ch == ")":
            if not stack:
                raise ParseError(f"position {i}: unmatched ')'")
            j = stack.pop()
            pair[i], pair[j] = j, i
        elif ch != ".":
            raise ParseError(f"position {i}: unexpected character {ch!r}")
    if stack:
        raise ParseError(f"position {stack[-1]}: unmatched '('")
    return TargetStructure(chars, tuple(pair))


def structure_from_partner(partner: Sequence[int]) -> str:
    return "".join("." if p < 0 else ("(" if p > i else ")") for i, p in enumerate(partner))


def hamming(a: str, b: str) -> int:
    if len(a) != len(b):
        raise ValueError("structures differ in length")
    return sum(x != y for x, y in zip(a, b))


def encode(sequence: str) -> np.ndarray:
    try:
        return np.array([NUCLEOTIDES.index(ch) for ch in sequence], dtype=np.int64)
    except ValueError:
        raise ValueError(f"sequence must use only {NUCLEOTIDES}") from None


# --- folding oracles -------------------------------------------------------

class NussinovFolder:
    """Maximum base pairing with hairpin loops of at least 3 unpaired bases."""

    compiled = True

    def fold(self, sequence: str) -> str:
        seq = encode(sequence)
        partner = np.empty(len(seq), np.int64)
        jit.nussinov_fold(seq, partner)
        return structure_from_partner(partner)

    def pair_count(self, sequence: str) -> int:
        seq = encode(sequence)
        return int(jit.nussinov_table(seq)[0, len(seq) - 1]) if len(seq) else 0


class ExternalFolder:
    """Folding by an external program speaking a line protocol.

    The program reads one sequence per line on stdin and answers with one
    dot-bracket line of the same length on stdout. One process is kept per
    folder object. Any failure raises :class:`OracleError`.
    """

    compiled = False

    def __init__(self, command: str | Sequence[str], timeout: float = 60.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise OracleError("empty folding command")
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None

    def _start(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                              stderr=subprocess.DEVNULL, text=True, bufsize=1)
            except OSError as exc:
                raise OracleError(f"cannot start folding command {self.command[0]!r}: {exc}") from exc
        return self._proc

    def fold(self, sequence: str) -> str:
        proc = self._start()
        try:
            proc.stdin.write(sequence + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (OSError, ValueError) as exc:
            self.close()
            raise OracleError(f"folding command failed: {exc}") from exc
        if not line:
            self.close()
            raise OracleError("folding command closed its output")
        # tolerate RNAfold-style trailing energies: keep the first token
        out = line.split()[0] if line.split() else ""
        if len(out) != len(sequence) or set(out) - set(".()"):
            raise OracleError(f"folding command returned {line.strip()!r} for a sequence of length {len(sequence)}")
        try:
            parse_dotbracket(out)
        except ParseError as exc:
            raise OracleError(f"folding command returned an unbalanced structure: {exc}") from exc
        return out

    def close(self) -> None:
        if self._proc is not None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.terminate()
                self._proc.wait(timeout=5)
            except Exception:  # noqa: BLE001
                pass
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        self.close()


def default_folder(command: str | None = None):
    """External folder when a command is given (or set in the environment), else Nussinov."""
    command = command or os.environ.get(FOLD_CMD_ENV)
    return ExternalFolder(command) if command else NussinovFolder()


def fold(sequence: str, oracle: Any = None) -> str:
    return (oracle or NussinovFolder()).fold(sequence)


# --- puzzles and states ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class RnaPuzzle:
    target: TargetStructure
    mask: str | None = None  # 'N' = free, a nucleotide letter = imposed
    allowed: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        chars = self.target.chars
        mask = self.mask
        if mask is not None:
            if len(mask) != len(chars):
                raise ValueError("constraint mask length differs from the target")
            if set(mask) - set("NACGU"):
                raise ValueError("constraint mask may only contain N, A, C, G, U")
        allowed = []
        for i in self.target.decision_positions:
            if chars[i] == ".":
                toks = tuple(t for t in UNPAIRED_TOKENS if mask is None or mask[i] in ("N", TOKENS[t]))
            else:
                j = self.target.pair_map[i]
                toks = tuple(t for t in PAIR_TOKENS
                             if mask is None or (mask[i] in ("N", TOKENS[t][0]) and mask[j] in ("N", TOKENS[t][1])))
            if not toks:
                raise ValueError(f"position {i}: no move satisfies the constraint mask")
            allowed.append(toks)
        object.__setattr__(self, "allowed", tuple(allowed))

    @classmethod
    def from_text(cls, structure: str, mask: str | None = None) -> "RnaPuzzle":
        return cls(parse_dotbracket(structure), mask)

    def __len__(self) -> int:
        return len(self.target)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RnaPuzzle) and self.target.chars == other.target.chars and self.mask == other.mask

    def __hash__(self) -> int:
        return hash((self.target.chars, self.mask))


class RnaState:
    __slots__ = ("puzzle", "nuc", "cursor", "prev")

    def __init__(self, puzzle: RnaPuzzle, nuc: list[str | None], cursor: int = 0, prev: int = SENTINEL):
        self.puzzle = puzzle
        self.nuc = nuc
        self.cursor = cursor
        self.prev = prev

    @property
    def position(self) -> int:
        return self.puzzle.target.decision_positions[self.cursor]

    @property
    def sequence(self) -> str:
        return "".join(ch or "N" for ch in self.nuc)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RnaState):
            return NotImplemented
        return (self.puzzle == other.puzzle and self.nuc == other.nuc
                and self.cursor == other.cursor and self.prev == other.prev)


def rna_moves(state: RnaState) -> list[int]:
    return list(state.puzzle.allowed[state.cursor])


def ngram_code(prev: int, token: int) -> int:
    return (prev + 1) * 10 + token


def unpack_ngram_code(code: int) -> tuple[int, int]:
    """(previous token or SENTINEL, token)."""
    p, t = divmod(code, 10)
    return p - 1, t


class RnaDesign:
    """SearchProblem plugin; ``folder`` is any object with ``fold(str) -> str``."""

    family = "rna"

    def __init__(self, folder: Any = None):
        self.folder = folder if folder is not None else NussinovFolder()

    def root(self, instance: RnaPuzzle) -> RnaState:
        return RnaState(instance, [None] * len(instance))

    def is_terminal(self, state: RnaState) -> bool:
        return state.cursor >= len(state.puzzle.allowed)

    def legal_moves(self, state: RnaState) -> list[int]:
        return rna_moves(state)

    def play(self, state: RnaState, move: int) -> RnaState:
        if self.is_terminal(state) or move not in state.puzzle.allowed[state.cursor]:
            raise ContractViolation(f"illegal move {move!r}")
        nuc = list(state.nuc)
        i = state.position
        tok = TOKENS[move]
        if move < 4:
            nuc[i] = tok
        else:
            nuc[i], nuc[state.puzzle.target.pair_map[i]] = tok[0], tok[1]
        return RnaState(state.puzzle, nuc, state.cursor + 1, move)

    def score(self, state: RnaState) -> float:
        return rna_score(state, self.folder)

    def solved_score(self, instance: RnaPuzzle) -> float:
        return 0.0

    def policy_code(self, state: RnaState, move: int) -> int:
        return state.position * 10 + int(move)

    def prior_code(self, state: RnaState, move: int) -> int:
        return ngram_code(state.prev, int(move))

    def solution_move(self, state: RnaState, solution: str) -> int:
        i = state.position
        if state.puzzle.target.chars[i] == ".":
            return NUCLEOTIDES.find(solution[i])
        return _PAIR_INDEX.get(solution[i] + solution[state.puzzle.target.pair_map[i]], -1)

    def check_solution(self, instance: RnaPuzzle, solution: Any) -> str | None:
        return check_sequence(instance, solution)

    def policy_code_space(self, instance: RnaPuzzle) -> int:
        return len(instance) * 10

    def prior_code_space(self, instance: RnaPuzzle) -> int:
        return 110

    def engine(self, instance: RnaPuzzle, prior: Any) -> "RnaEngine | None":
        if not getattr(self.folder, "compiled", False):
            return None
        return RnaEngine(instance, prior)


def rna_score(state: RnaState, oracle: Any) -> float:
    if any(ch is None for ch in state.nuc):
        raise ContractViolation("scoring an incomplete sequence")
    return -float(hamming(oracle.fold(state.sequence), state.puzzle.target.chars))


def check_sequence(puzzle: RnaPuzzle, sequence: Any) -> str | None:
    """First violated design constraint of a full sequence, or None (folding not checked)."""
    if not isinstance(sequence, str) or len(sequence) != len(puzzle):
        return "sequence length differs from the target"
    bad = [i for i, ch in enumerate(sequence) if ch not in NUCLEOTIDES]
    if bad:
        return f"position {bad[0]}: not a nucleotide"
    for i, j in puzzle.target.pairs():
        if sequence[i] + sequence[j] not in _PAIR_INDEX:
            return f"positions {i} and {j}: {sequence[i]}{sequence[j]} is not an allowed pair"
    if puzzle.mask is not None:
        for i, (m, ch) in enumerate(zip(puzzle.mask, sequence)):
            if m != "N" and m != ch:
                return f"position {i}: imposed base {m} not respected"
    return None


class RnaEngine:
    """Compiled playout/adapt with the built-in Nussinov oracle."""

    def __init__(self, instance: RnaPuzzle, prior: Any = None):
        self.puzzle = instance
        pos = instance.target.decision_positions
        nd = len(pos)
        self.positions = np.array(pos, dtype=np.int64)
        self.allowed = np.zeros((max(nd, 1), 6), np.int64)
        self.counts = np.zeros(max(nd, 1), np.int64)
        for d, toks in enumerate(instance.allowed):
            self.allowed[d, : len(toks)] = toks
            self.counts[d] = len(toks)
        self.partner = np.array(instance.target.pair_map, dtype=np.int64)
        self.size = len(instance) * 10
        if prior is None:
            self.bias, self.excluded, self.use_bias = np.zeros(1), np.zeros(1, np.bool_), False
        else:
            self.bias, self.excluded = prior.dense(110)
            self.use_bias = True
        self.seq = np.empty(max(nd, 1), np.int64)
        self.nuc = np.zeros(len(instance), np.int64)
        self.fold_out = np.empty(len(instance), np.int64)

    def playout(self, policy: Policy, rng: np.random.Generator) -> PlayoutResult:
        policy.reserve(self.size)
        score, length = jit.playout(self.positions, self.allowed, self.counts, self.partner, self.partner,
                                    policy.weights, self.bias, self.excluded, self.use_bias, rng,
                                    self.seq, self.nuc, self.fold_out)
        return PlayoutResult(float(score), [int(t) for t in self.seq[:length]])

    def adapt(self, policy: Policy, sequence: Sequence[int], alpha: float) -> Policy:
        policy.reserve(self.size)
        out = policy.copy()
        seq = np.asarray(sequence, dtype=np.int64)
        bad = jit.adapt(self.positions, self.allowed, self.counts, policy.weights, out.weights, self.bias,
                        self.excluded, self.use_bias, seq, len(seq), alpha)
        if bad >= 0:
            raise ContractViolation(f"sequence not replayable at step {bad}")
        return out

    def sequence_of(self, moves: Sequence[int]) -> str:
        return sequence_from_moves(self.puzzle, moves)


def sequence_from_moves(puzzle: RnaPuzzle, moves: Sequence[int]) -> str:
    problem = RnaDesign()
    state = problem.root(puzzle)
    for m in moves:
        state = problem.play(state, int(m))
    return state.sequence


# --- NGRAM prior -----------------------------------------------------------

def ngram_replay_one(target: TargetStructure | str, sequence: str, table: PriorTable) -> PriorTable:
    """Add the NGRAM counts of one structure/sequence pair; the table is unchanged on error."""
    if isinstance(target, str):
        target = parse_dotbracket(target)
    if len(sequence) != len(target):
        raise CorruptPairError(f"sequence length {len(sequence)} differs from structure length {len(target)}")
    puzzle = RnaPuzzle(target)
    msg = check_sequence(puzzle, sequence)
    if msg is not None:
        raise CorruptPairError(msg)
    problem = RnaDesign()
    inc: dict[int, list[int]] = {}
    state = problem.root(puzzle)
    while not problem.is_terminal(state):
        b = problem.solution_move(state, sequence)
        for m in problem.legal_moves(state):
            slot = inc.setdefault(ngram_code(state.prev, m), [0, 0])
            slot[1] += 1
            if m == b:
                slot[0] += 1
        state = problem.play(state, b)
    for code, (c, n) in inc.items():
        table.add(code, c, n)
    table.instances += 1
    return table


def ngram_replay(targets: Iterable[Any], sequences: Iterable[str],
                 table: PriorTable | None = None) -> tuple[PriorTable, list[tuple[int, str]]]:
    """NGRAM counts over a corpus; bad pairs are skipped and returned as (index, reason)."""
    targets, sequences = list(targets), list(sequences)
    if len(targets) != len(sequences):
        raise ValueError(f"{len(targets)} structures but {len(sequences)} sequences")
    if table is None:
        table = PriorTable()
    skipped = []
    for i, (t, s) in enumerate(zip(targets, sequences)):
        try:
            ngram_replay_one(t, s, table)
        except (CorruptPairError, ParseError) as exc:
            skipped.append((i, str(exc)))
    return table, skipped


# --- generation ------------------------------------------------------------

def random_sequence(length: int, rng: np.random.Generator) -> str:
    return "".join(NUCLEOTIDES[i] for i in rng.integers(0, 4, size=length))


def generate_rna_pair(length: int, rng: np.random.Generator, folder: Any = None) -> InstanceSolutionPair:
    """Fold a random sequence; the fold is the target and the sequence a known solution."""
    seq = random_sequence(length, rng)
    target = fold(seq, folder)
    return InstanceSolutionPair(RnaPuzzle(parse_dotbracket(target)), seq)


# --- text formats ----------------------------------------------------------

def format_puzzle(puzzle: RnaPuzzle) -> str:
    lines = [puzzle.target.chars]
    if puzzle.mask is not None:
        lines.append(puzzle.mask)
    return "\n".join(lines) + "\n"


def parse_puzzle(text: str) -> RnaPuzzle:
    puzzles = parse_puzzles(text)
    if len(puzzles) != 1:
        raise ParseError(f"expected one puzzle, found {len(puzzles)}")
    return puzzles[0]


def parse_puzzles(text: str) -> list[RnaPuzzle]:
    out = []
    for start, lines, _ in iter_records(text):
        if len(lines) > 2:
            raise ParseError("a puzzle has a structure line and at most one mask line", lines[2][0])
        lineno, structure = lines[0]
        try:
            target = parse_dotbracket(structure)
        except ParseError as exc:
            raise ParseError(str(exc), lineno) from None
        mask = lines[1][1].strip() if len(lines) == 2 else None
        try:
            out.append(RnaPuzzle(target, mask))
        except ValueError as exc:
            raise ParseError(str(exc), lines[-1][0]) from None
    return out


def format_corpus(pairs: Sequence[InstanceSolutionPair]) -> str:
    blocks = []
    for p in pairs:
        head = f"#seed {p.seed}\n" if p.seed is not None else ""
        blocks.append(f"{head}{p.instance.target.chars}\n{p.solution}\n")
    return "\n".join(blocks)


def parse_corpus(text: str) -> tuple[list[InstanceSolutionPair], list[tuple[int, str]]]:
    """Structure/sequence records; malformed ones are skipped and reported as (line, reason)."""
    pairs, skipped = [], []
    for start, lines, seed in iter_records(text):
        if len(lines) != 2:
            skipped.append((start, f"expected 2 lines, found {len(lines)}"))
            continue
        structure, sequence = lines[0][1].strip(), lines[1][1].strip().upper().replace("T", "U")
        try:
            target = parse_dotbracket(structure)
        except ParseError as exc:
            skipped.append((lines[0][0], str(exc)))
            continue
        puzzle = RnaPuzzle(target)
        msg = check_sequence(puzzle, sequence)
        if msg is not None:
            skipped.append((lines[1][0], msg))
            continue
        pairs.append(InstanceSolutionPair(puzzle, sequence, seed))
    return pairs, skipped
