import itertools

import numpy as np
import pytest

from replayprior import kakuro
from replayprior.kakuro import Kakuro, KakuroInstance
from replayprior.policy import Policy
from replayprior.prior import replay_corpus
from replayprior.problem import ParseError


def backtrack_solvable(inst):
    """Row-by-row search over permutations of distinct values meeting the row hint."""
    n, k = inst.n, inst.k
    rows = [[p for p in itertools.permutations(range(1, k + 1), n) if sum(p) == inst.row_sums[r]] for r in range(n)]

    def rec(r, cols):
        if r == n:
            return all(sum(col) == inst.col_sums[c] for c, col in enumerate(cols))
        for p in rows[r]:
            if all(p[c] not in cols[c] for c in range(n)):
                if rec(r + 1, [cols[c] + (p[c],) for c in range(n)]):
                    return True
        return False

    return rec(0, [()] * n)


def tree_solvable(problem, state, solved):
    if problem.is_terminal(state):
        return problem.score(state) == solved
    return any(tree_solvable(problem, problem.play(state, m), solved) for m in problem.legal_moves(state))


def random_instance(n, k, rng):
    """Generated hints, sometimes nudged so the instance may be unsolvable."""
    inst = kakuro.generate_kakuro(n, k, rng).instance
    rows, cols = inst.row_sums.copy(), inst.col_sums.copy()
    if rng.random() < 0.5:
        rows[rng.integers(n)] += int(rng.choice([-1, 1]))
        cols[rng.integers(n)] += int(rng.choice([-1, 1]))
    return KakuroInstance(n, k, rows, cols)


# --- generation ----------------------------------------------------------------

def test_trivial_instance():
    pair = kakuro.generate_kakuro(1, 1, np.random.default_rng(0))
    assert pair.solution.tolist() == [[1]]
    assert pair.instance.row_sums.tolist() == [1] and pair.instance.col_sums.tolist() == [1]


def test_generation_usually_one_playout():
    rng = np.random.default_rng(1)
    attempts = [kakuro.sample_square(10, 11, rng)[1] for _ in range(50)]
    assert np.median(attempts) == 1


def test_hints_in_range_for_k_n_plus_one(rng):
    total = 11 * 12 // 2
    for _ in range(50):
        inst = kakuro.generate_kakuro(10, 11, rng).instance
        assert all(total - 11 <= h <= total - 1 for h in list(inst.row_sums) + list(inst.col_sums))


def test_k_below_n_rejected():
    with pytest.raises(ValueError):
        kakuro.generate_kakuro(4, 3, np.random.default_rng(0))


# --- forward checking ------------------------------------------------------------

def test_last_cell_forced_to_remaining_sum(rng):
    pair = kakuro.generate_kakuro(4, 5, rng)
    problem = Kakuro()
    state = problem.root(pair.instance)
    for c in range(3):
        state = kakuro.kakuro_forward_check(state, c, int(pair.solution[0, c]))
    assert not state.wipeout
    assert state.domain(0, 3) == [int(pair.solution[0, 3])]


def test_duplicates_never_offered(rng):
    problem = Kakuro()
    for _ in range(30):
        state = problem.root(kakuro.generate_kakuro(6, 7, rng).instance)
        while not problem.is_terminal(state):
            moves = problem.legal_moves(state)
            cell = moves[0] // state.k
            r, c = divmod(cell, state.n)
            line_vals = set(state.grid.reshape(6, 6)[r].tolist()) | set(state.grid.reshape(6, 6)[:, c].tolist())
            assert not {m % state.k + 1 for m in moves} & line_vals
            state = problem.play(state, moves[int(rng.integers(len(moves)))])
            if not state.wipeout:
                assert (state.rem >= 0).all()


def test_sum_pruning_keeps_solvability():
    rng = np.random.default_rng(2)
    with_sums, without = Kakuro(), Kakuro(sums=False)
    for i in range(40):
        inst = random_instance(3 + i % 2, 4 + i % 2, rng)
        want = backtrack_solvable(inst)
        solved = 2 * inst.n
        assert tree_solvable(with_sums, with_sums.root(inst), solved) == want
        if inst.n == 3:  # the unpruned tree is too large beyond that
            assert tree_solvable(without, without.root(inst), solved) == want


# --- score ---------------------------------------------------------------------

def test_score_examples(rng):
    pair = kakuro.generate_kakuro(10, 11, rng)
    inst, sol = pair.instance, pair.solution
    assert kakuro.score_grid(inst, sol) == 20.0
    partial = sol.copy()
    partial.reshape(-1)[[3, 40, 77]] = 0
    assert kakuro.score_grid(inst, partial) == -3.0
    # put the row's missing value into one cell: one row and one column break
    wrong = sol.copy()
    missing = (set(range(1, 12)) - set(wrong[4].tolist())).pop()
    wrong[4, 6] = missing
    assert kakuro.score_grid(inst, wrong) == 18.0


def test_score_bounds_on_playouts(rng):
    problem = Kakuro()
    for _ in range(50):
        inst = kakuro.generate_kakuro(5, 6, rng).instance
        state = problem.root(inst)
        while not problem.is_terminal(state):
            moves = problem.legal_moves(state)
            state = problem.play(state, moves[int(rng.integers(len(moves)))])
        s = problem.score(state)
        assert -25 <= s <= -1 or 0 <= s <= 10
        if s == 10:
            assert kakuro.check_solution(inst, state.grid) is None


# --- prior code ------------------------------------------------------------------

def test_code_packs_value(rng):
    problem = Kakuro()
    state = problem.root(kakuro.generate_kakuro(5, 6, rng).instance)
    moves = problem.legal_moves(state)
    codes = [problem.prior_code(state, m) for m in moves]
    assert len(set(codes)) == len(codes)
    for m, code in zip(moves, codes):
        v, occ_r, occ_c, rr, rc = kakuro.unpack_prior_code(code, 6)
        r, c = divmod(m // 6, 5)
        assert (v, occ_r, occ_c) == (m % 6 + 1, 0, 0)
        assert (rr, rc) == (state.rem[r], state.rem[5 + c])


def test_replayed_codes_forced_and_impossible():
    rng = np.random.default_rng(3)
    problem = Kakuro()
    table, skipped = replay_corpus(problem, [kakuro.generate_kakuro(6, 7, rng) for _ in range(300)])
    assert not skipped
    seen_forced = False
    for code, (c, n) in table.counters.items():
        v, occ_r, occ_c, rr, rc = kakuro.unpack_prior_code(code, 7)
        assert occ_r == occ_c == 0
        assert v <= rr and v <= rc  # larger values are pruned before they reach the table
        if v == rr or v == rc:  # last cell of a line
            assert c == n
            seen_forced = True
    assert seen_forced
    freqs = table.frequencies()
    assert (freqs == 1.0).sum() > 0 and (freqs == 0.0).sum() > 0


# --- engine and text -----------------------------------------------------------------

def test_engine_playouts_replay(rng):
    inst = kakuro.generate_kakuro(8, 9, rng).instance
    eng = kakuro.KakuroEngine(inst)
    problem = Kakuro()
    for _ in range(20):
        res = eng.playout(Policy(), rng)
        state = problem.root(inst)
        for m in res.sequence:
            state = problem.play(state, int(m))
        assert problem.is_terminal(state) and problem.score(state) == res.score


def test_format_roundtrip(rng):
    pairs = [kakuro.generate_kakuro(4, 5, rng) for _ in range(3)]
    back = kakuro.parse_corpus(kakuro.format_corpus(pairs))
    assert [p.instance for p in back] == [p.instance for p in pairs]
    assert all(np.array_equal(a.solution, b.solution) for a, b in zip(back, pairs))


def test_parse_layout_and_errors():
    pair = kakuro.parse_instance("2 3\n4 5\n3 6\n")
    assert pair.instance.col_sums.tolist() == [4, 5] and pair.instance.row_sums.tolist() == [3, 6]
    with pytest.raises(ParseError, match="line 1"):
        kakuro.parse_instance("3 2\n1 1 1\n1 1 1\n")
    with pytest.raises(ParseError, match="line 3"):
        kakuro.parse_instance("2 3\n4 5\n3\n")
