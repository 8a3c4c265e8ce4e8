import math

import numpy as np
import pytest

from replayprior import kakuro, latin
from replayprior.policy import EXCLUDED
from replayprior.prior import (
    BiasProvider, PriorTable, frequency_histogram, load_prior, replay, replay_corpus, save_prior,
)
from replayprior.problem import CorruptPairError, InstanceSolutionPair, ParseError


def test_bias_examples():
    t = PriorTable()
    t.add(1, 7, 7)
    t.add(2, 10083, 1000000)
    assert BiasProvider(t, 4.0).bias(1) == 0.0
    assert BiasProvider(t, 6.0).bias(2) == pytest.approx(-27.58, abs=0.01)
    assert BiasProvider(t, 4.0).bias(99) == 0.0


def test_bias_zero_count_floor_or_excluded():
    t = PriorTable()
    t.add(3, 0, 5)
    assert BiasProvider(t, 2.0).bias(3) == pytest.approx(2.0 * math.log(1e-6))
    assert BiasProvider(t, 2.0, hard_exclusion=True).bias(3) is EXCLUDED
    assert BiasProvider(t, 0.0, hard_exclusion=True).bias(3) == 0.0


def test_dense_matches_bias():
    t = PriorTable()
    t.add(0, 1, 4)
    t.add(2, 0, 3)
    bp = BiasProvider(t, 3.0, hard_exclusion=True)
    bias, excluded = bp.dense(4)
    assert bias[0] == pytest.approx(3.0 * math.log(0.25))
    assert list(excluded) == [False, False, True, False]
    with pytest.raises(ValueError):
        bp.dense(2)


def test_forced_chain_gives_frequency_one():
    sq = latin.generate_complete_square(4, np.random.default_rng(0))
    grid = sq.reshape(-1).copy()
    grid[[0, 5, 10]] = 0  # three cells, each alone in its row and column
    table = replay(latin.LatinSquare(), latin.LatinInstance(4, grid), sq, PriorTable())
    assert table.instances == 1 and len(table) > 0
    assert all(c == n for c, n in table.counters.values())


def test_replay_increments_recount(rng):
    problem = latin.LatinSquare()
    for _ in range(5):
        pair = latin.generate_pair(6, 0.5, rng)
        table = replay(problem, pair.instance, pair.solution, PriorTable())
        # independent walk: one count per step, nb sums the branching factors
        state = problem.root(pair.instance)
        steps = branching = 0
        while not problem.is_terminal(state):
            moves = problem.legal_moves(state)
            branching += len(moves)
            steps += 1
            state = problem.play(state, problem.solution_move(state, pair.solution))
        assert sum(c for c, _ in table.counters.values()) == steps
        assert sum(n for _, n in table.counters.values()) == branching


def test_replay_order_independent_and_merge(rng):
    problem = latin.LatinSquare()
    pairs = [latin.generate_pair(5, 0.5, rng) for _ in range(12)]
    whole, _ = replay_corpus(problem, pairs)
    rev, _ = replay_corpus(problem, pairs[::-1])
    a, _ = replay_corpus(problem, pairs[:5])
    b, _ = replay_corpus(problem, pairs[5:])
    merged = a.merge(b)
    assert whole.counters == rev.counters == merged.counters
    assert merged.instances == 12


def test_corrupt_pair_skipped_table_untouched(rng):
    problem = latin.LatinSquare()
    good = latin.generate_pair(5, 0.5, rng)
    bad_sol = good.solution.copy()
    bad_sol[0, :] = bad_sol[1, :]
    bad = InstanceSolutionPair(good.instance, bad_sol)
    table = PriorTable()
    with pytest.raises(CorruptPairError):
        replay(problem, bad.instance, bad.solution, table)
    assert len(table) == 0 and table.instances == 0
    table, skipped = replay_corpus(problem, [good, bad, good])
    assert [i for i, _ in skipped] == [1] and table.instances == 2


def test_kakuro_replay_touched_codes():
    rng = np.random.default_rng(8)
    problem = kakuro.Kakuro()
    pair = kakuro.generate_kakuro(5, 6, rng)
    table = replay(problem, pair.instance, pair.solution, PriorTable())
    table.check()
    assert sum(c for c, _ in table.counters.values()) == 25


def test_histogram_buckets():
    assert frequency_histogram(PriorTable()) == []
    t = PriorTable()
    t.add(0, 0, 5)     # 0.0
    t.add(1, 1, 20)    # 0.05
    t.add(2, 1, 2)     # 0.5
    t.add(3, 9, 10)    # 0.9
    t.add(4, 4, 4)     # 1.0
    h = dict(frequency_histogram(t, 0.1))
    assert h[(0.0, 0.1)] == 2 and h[(0.5, 0.6)] == 1 and h[(0.9, 1.0)] == 1 and h[(1.0, 1.0)] == 1
    assert sum(h.values()) == 5
    with pytest.raises(ValueError):
        frequency_histogram(t, 0.0)


def test_save_load_roundtrip(tmp_path, rng):
    problem = latin.LatinSquare()
    table, _ = replay_corpus(problem, [latin.generate_pair(5, 0.5, rng) for _ in range(4)])
    table.family, table.tau, table.params = "lsc", 4.0, {"n": "5", "fraction": "0.5"}
    path = tmp_path / "p.prior"
    save_prior(table, path)
    assert load_prior(path) == table


def test_load_empty_and_invalid(tmp_path):
    p = tmp_path / "e.prior"
    p.write_text("")
    assert load_prior(p) == PriorTable()
    p.write_text("#family lsc\n1 2 3\n4 5 3\n")
    with pytest.raises(ParseError, match="line 3"):
        load_prior(p)
    p.write_text("1 2\n")
    with pytest.raises(ParseError, match="line 1"):
        load_prior(p)
    p.write_text("1 1 2\n1 1 2\n")
    with pytest.raises(ParseError, match="duplicate"):
        load_prior(p)
    p.write_text("#bogus 1\n")
    with pytest.raises(ParseError):
        load_prior(p)
