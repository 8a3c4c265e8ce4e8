"""Full-scale acceptance criteria.

Each test prints one ``criterion N: PASS|FAIL ...`` line (also collected in
the terminal summary). Deselect with ``-m "not acceptance"``; the whole
module takes roughly 25 minutes on one core.
"""
import math
import time
from collections import Counter

import numpy as np
import pytest

from replayprior import bench, kakuro, latin, rna
from replayprior.policy import Policy, SearchParams, gnrpa, make_engine, softmax_distribution
from replayprior.prior import BiasProvider, frequency_histogram, load_prior, replay_corpus, save_prior

from conftest import ACCEPTANCE
from test_kakuro import backtrack_solvable as kakuro_backtrack
from test_kakuro import random_instance as kakuro_random_instance
from test_kakuro import tree_solvable as kakuro_tree
from test_latin import backtrack_solvable as latin_backtrack
from test_latin import random_partial
from test_latin import tree_solvable as latin_tree

pytestmark = pytest.mark.acceptance


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE.append(line)
    return ok


# --- shared corpora ------------------------------------------------------------------

@pytest.fixture(scope="module")
def kakuro_run():
    cfg = bench.ExperimentConfig(family="kakuro", n=10, k=11, train=10000, test=100, tau=4.0, budgets=(1024,),
                                 algorithms=("sampling", "sampling+prior", "nrpa", "gnrpa+prior"), workers=1, seed=0)
    t0 = time.perf_counter()
    result = bench.run_bench(cfg)
    return cfg, result, time.perf_counter() - t0


@pytest.fixture(scope="module")
def rna_corpus():
    cfg = bench.ExperimentConfig(family="rna", n=40, min_length=12, seed=0)
    return cfg, bench.generate_pairs(cfg, 10000, bench.TRAIN_STREAM)


# --- 1. algorithmic invariants ------------------------------------------------------

def _domains():
    rng = np.random.default_rng(100)
    lsc = latin.LatinSquare()
    kk = kakuro.Kakuro()
    rd = rna.RnaDesign()
    lsc_pairs = [latin.generate_pair(8, 0.45, rng) for _ in range(30)]
    kk_pairs = [kakuro.generate_kakuro(6, 7, rng) for _ in range(30)]
    rna_pairs = [rna.generate_rna_pair(24, rng) for _ in range(50)]
    lsc_table, _ = replay_corpus(lsc, lsc_pairs)
    kk_table, _ = replay_corpus(kk, kk_pairs)
    rna_table, _ = rna.ngram_replay([p.instance.target for p in rna_pairs], [p.solution for p in rna_pairs])
    return [
        ("lsc", lsc, [latin.generate_pair(8, 0.45, rng).instance for _ in range(10)], lsc_table),
        ("kakuro", kk, [kakuro.generate_kakuro(6, 7, rng).instance for _ in range(10)], kk_table),
        ("rna", rd, [rna.generate_rna_pair(24, rng).instance for _ in range(10)], rna_table),
    ]


def _adapt_check(problem, inst, policy, prior, seq, alpha):
    """Worst per-step sum of deltas and the smallest chosen-move delta."""
    worst_sum, min_chosen = 0.0, math.inf
    state = problem.root(inst)
    for b in seq:
        moves = problem.legal_moves(state)
        entries = [(policy[problem.policy_code(state, m)],
                    0.0 if prior is None else prior.bias(problem.prior_code(state, m))) for m in moves]
        probs = softmax_distribution(entries)
        deltas = [-alpha * (p - (1.0 if m == b else 0.0)) for m, p in zip(moves, probs)]
        worst_sum = max(worst_sum, abs(sum(deltas)))
        min_chosen = min(min_chosen, deltas[moves.index(b)])
        state = problem.play(state, b)
    return worst_sum, min_chosen


def test_criterion_1_invariants():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_norm = 0.0
    for _ in range(20000):
        k = int(rng.integers(1, 30))
        entries = list(zip(rng.normal(0, 5, k), rng.normal(0, 20, k)))
        worst_norm = max(worst_norm, abs(sum(softmax_distribution(entries)) - 1.0))

    worst_sum, min_chosen = 0.0, math.inf
    mismatches = 0
    runs = 0
    for name, problem, instances, table in _domains():
        prior = BiasProvider(table, 4.0)
        for i, inst in enumerate(instances):
            pol = Policy(rng.normal(0, 1, problem.policy_code_space(inst)))
            eng = make_engine(problem, inst, prior)
            seq = eng.playout(pol, rng).sequence
            s, c = _adapt_check(problem, inst, pol, prior, seq, 1.0)
            worst_sum, min_chosen = max(worst_sum, s), min(min_chosen, c)
        zero = BiasProvider(table, 0.0)
        for seed in range(100):
            inst = instances[seed % len(instances)]
            logs = []
            for bias in (zero, None):
                log = []
                res = gnrpa(2, None, SearchParams(level=2, iterations=5), problem, inst, bias,
                            np.random.default_rng(seed), callback=lambda r: log.append((r.score, list(r.sequence))))
                logs.append((log, res.score, list(res.sequence)))
            mismatches += logs[0] != logs[1]
            runs += 1
    elapsed = time.perf_counter() - t0
    ok = worst_norm <= 1e-12 and worst_sum <= 1e-9 and min_chosen >= 0.0 and mismatches == 0 and elapsed < 60
    report(1, ok, f"max|sum p - 1|={worst_norm:.1e} max|step sum dw|={worst_sum:.1e} min dw_b={min_chosen:.3g} "
                  f"tau=0 vs NRPA mismatches={mismatches}/{runs} ({elapsed:.0f}s)")
    assert ok


# --- 2. oracle equivalence ------------------------------------------------------------

def _leaf_probabilities(problem, inst, policy, prior):
    out = {}

    def rec(state, seq, p):
        if problem.is_terminal(state):
            out[tuple(seq)] = p
            return
        moves = problem.legal_moves(state)
        probs = softmax_distribution([(policy[problem.policy_code(state, m)], prior.bias(problem.prior_code(state, m)))
                                      for m in moves])
        for m, q in zip(moves, probs):
            rec(problem.play(state, m), seq + [int(m)], p * q)

    rec(problem.root(inst), [], 1.0)
    return out


def _sampling_check(problem, inst, prior, samples, rng):
    policy = Policy(rng.normal(0, 0.7, problem.policy_code_space(inst)))
    exact = _leaf_probabilities(problem, inst, policy, prior)
    eng = make_engine(problem, inst, prior)
    counts = Counter(tuple(int(m) for m in eng.playout(policy, rng).sequence) for _ in range(samples))
    # per-leaf z is reported; the pass statistic is a standardized chi-square so that
    # 96 simultaneous comparisons do not turn "3 sigma" into a coin flip.
    # leaves expected fewer than 5 times are pooled into one cell
    worst, chi2, cells, rare_exp, rare_obs = 0.0, 0.0, 0, 0.0, 0
    for leaf, p in exact.items():
        seen = counts.get(leaf, 0)
        sigma = math.sqrt(samples * p * (1 - p)) or 1.0
        worst = max(worst, abs(seen - samples * p) / sigma)
        if samples * p >= 5:
            chi2 += (seen - samples * p) ** 2 / (samples * p)
            cells += 1
        else:
            rare_exp, rare_obs = rare_exp + samples * p, rare_obs + seen
    if rare_exp > 0:
        chi2 += (rare_obs - rare_exp) ** 2 / rare_exp
        cells += 1
    df = cells - 1
    return len(exact), worst, (chi2 - df) / math.sqrt(2 * df), set(counts) <= set(exact)


def test_criterion_2_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    lsc_bad = 0
    lsc_problem = latin.LatinSquare()
    for i in range(200):
        n = 4 + i % 3
        grid = random_partial(n, rng, int(rng.integers(n * n // 3, n * n // 2 + 1)))
        lsc_bad += latin_tree(lsc_problem, lsc_problem.root(latin.LatinInstance(n, grid))) != latin_backtrack(n, grid)
    kk_bad = 0
    kk_problem = kakuro.Kakuro()
    for i in range(200):
        n = 3 + i % 2
        inst = kakuro_random_instance(n, n + 1, rng)
        kk_bad += kakuro_tree(kk_problem, kk_problem.root(inst), 2 * n) != kakuro_backtrack(inst)

    # a small RNA puzzle with a non-uniform policy and an NGRAM prior
    pairs = [rna.generate_rna_pair(16, rng) for _ in range(50)]
    table, _ = rna.ngram_replay([p.instance.target for p in pairs], [p.solution for p in pairs])
    leaves, worst, chi_z, closed = _sampling_check(rna.RnaDesign(), rna.RnaPuzzle.from_text("(.)."),
                                            BiasProvider(table, 2.0), 10 ** 6, rng)
    elapsed = time.perf_counter() - t0
    ok = lsc_bad == 0 and kk_bad == 0 and leaves <= 200 and abs(chi_z) <= 3.0 and closed and elapsed < 600
    report(2, ok, f"lsc disagreements={lsc_bad}/200 kakuro disagreements={kk_bad}/200 "
                  f"leaves={leaves} chi-square z={chi_z:.2f} (max leaf z={worst:.2f}) over 1e6 playouts ({elapsed:.0f}s)")
    assert ok


# --- 3. phase transition ----------------------------------------------------------------

def test_criterion_3_phase_transition():
    t0 = time.perf_counter()
    fractions = [round(0.30 + 0.01 * i, 2) for i in range(26)]
    rows = bench.phase_sweep(20, fractions, 200, 10 ** 4, seed=0)
    peak = bench.sweep_peak(rows)
    curve = " ".join(f"{r['fraction']:.2f}:{r['median_playouts']:.0f}" for r in rows)
    ok = 0.40 <= peak <= 0.45
    report(3, ok, f"peak at {peak:.2f} (medians {curve}) ({time.perf_counter() - t0:.0f}s)")
    assert ok


# --- 4. Latin square table ---------------------------------------------------------------

def test_criterion_4_lsc_table():
    t0 = time.perf_counter()
    cfg = bench.ExperimentConfig(family="lsc", n=20, fraction=0.42, train=10000, test=100, tau=4.0,
                                 budgets=(1024, 2048, 4096, 8192, 16384), workers=1, seed=0)
    res = bench.run_bench(cfg)
    s = {a: [res.solved(a, b) for b in cfg.budgets] for a in cfg.algorithms}
    order = all(s["gnrpa+prior"][i] > s["nrpa"][i] and s["sampling+prior"][i] > s["sampling"][i]
                for i in range(len(cfg.budgets)))
    m1 = s["gnrpa+prior"][-1] - s["nrpa"][-1]
    m2 = s["sampling+prior"][-1] - s["sampling"][-1]
    ok = order and m1 >= 10 and m2 >= 10
    table = " ".join(f"{a}={'/'.join(map(str, v))}" for a, v in s.items())
    report(4, ok, f"solved at {'/'.join(str(int(b)) for b in cfg.budgets)}: {table}; "
                  f"margins at 16384: {m1}, {m2} ({time.perf_counter() - t0:.0f}s)")
    assert ok


# --- 5. Kakuro table ------------------------------------------------------------------------

def test_criterion_5_kakuro_table(kakuro_run):
    cfg, res, elapsed = kakuro_run
    s = {a: res.solved(a, 1024) for a in cfg.algorithms}
    ok = s["sampling+prior"] >= 95 and s["gnrpa+prior"] >= 95 and s["sampling"] == 0
    report(5, ok, "solved at 1024: " + " ".join(f"{a}={v}" for a, v in s.items()) + f" ({elapsed:.0f}s)")
    assert ok


# --- 6. prior shapes -----------------------------------------------------------------------

def test_criterion_6_prior_shapes(kakuro_run, rna_corpus):
    t0 = time.perf_counter()
    table = kakuro_run[1].table
    hist = frequency_histogram(table, 0.1)
    zero = int(sum(1 for c, _ in table.counters.values() if c == 0))
    one = hist[-1][1]
    others = [c for (lo, hi), c in hist[1:-1]]
    kk_ok = zero > max(others) and one > max(others)

    _, pairs = rna_corpus
    rtable, skipped = bench.learn_prior("rna", pairs)
    freqs = [c / n for code, (c, n) in rtable.counters.items() if code >= 10]
    rna_ok = len(pairs) >= 10 ** 4 and not skipped and len(freqs) <= 100 and all(0 < f <= 0.5 for f in freqs)
    ok = kk_ok and rna_ok
    report(6, ok, f"kakuro zero={zero} one={one} max other bucket={max(others)} "
                  f"(buckets {[c for _, c in hist]}); rna codes={len(freqs)} "
                  f"freq range=[{min(freqs):.6f}, {max(freqs):.6f}] ({time.perf_counter() - t0:.0f}s)")
    assert ok


# --- 7. RNA substitute for the design table ---------------------------------------------------

def test_criterion_7_rna(rna_corpus):
    t0 = time.perf_counter()
    cfg, pairs = rna_corpus
    table, _ = bench.learn_prior("rna", pairs[:5000])
    prior = BiasProvider(table, cfg.temperature)
    problem = rna.RnaDesign()
    tests = bench.held_out_pairs(cfg, 50, pairs[:5000])
    bench.check_disjoint(pairs[:5000], tests)
    solved = {}
    for a in ("sampling", "gnrpa+prior"):
        recs = [bench.solve(problem, p.instance, a, budget=2000, prior=prior,
                            seed=bench.derive_seed(cfg.seed, bench.SEARCH_STREAM, i)) for i, p in enumerate(tests)]
        solved[a] = sum(r["solved"] for r in recs)
    ok = solved["gnrpa+prior"] > solved["sampling"]
    report(7, ok, f"50 targets (length 12-40), 2000 playouts: gnrpa+prior={solved['gnrpa+prior']} "
                  f"sampling={solved['sampling']} ({time.perf_counter() - t0:.0f}s)")
    assert ok


# --- 8. round trip and determinism -----------------------------------------------------------

def test_criterion_8_roundtrip(tmp_path, kakuro_run):
    table = kakuro_run[1].table
    save_prior(table, tmp_path / "k.prior")
    same_prior = load_prior(tmp_path / "k.prior") == table

    cfg = bench.ExperimentConfig(family="lsc", n=12, fraction=0.42, train=200, test=10, budgets=(64, 256, 1024),
                                 workers=1, seed=8)
    paths = []
    for run in range(2):
        out = tmp_path / f"run{run}" / "bench.csv"
        bench.write_bench(cfg, bench.run_bench(cfg), out)
        paths.append(out)
    same_csv = paths[0].read_bytes() == paths[1].read_bytes()
    ok = same_prior and same_csv
    report(8, ok, f"prior save/load identical={same_prior} ({len(table)} codes); "
                  f"bench CSV byte-identical on rerun={same_csv}")
    assert ok
