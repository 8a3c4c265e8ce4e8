"""Design a sequence that folds into a target structure.

Run: python3 demos/rna_design.py

The folding oracle is the built-in base-pair maximization (set
REPLAYPRIOR_FOLD_CMD to use an external folder). The NGRAM prior counts which
token follows which in solved designs, so GC/CG stacks get a strong push.
"""
import numpy as np

from replayprior import bench, rna
from replayprior.prior import BiasProvider

rng = np.random.default_rng(7)
train = [rna.generate_rna_pair(int(rng.integers(12, 41)), rng) for _ in range(2000)]
table, _ = rna.ngram_replay([p.instance.target for p in train], [p.solution for p in train])
print(f"NGRAM prior: {len(table)} codes from {table.instances} designs")

names = rna.TOKENS
top = sorted((c for c in table.counters if c >= 10), key=table.frequency, reverse=True)[:5]
for code in top:
    prev, tok = rna.unpack_ngram_code(code)
    print(f"  {names[prev]:>2s} -> {names[tok]:<2s} {table.frequency(code):.3f}")

target = "((((...))))..(((....)))"
puzzle = rna.RnaPuzzle.from_text(target)
problem = rna.RnaDesign()
prior = BiasProvider(table, 6.0)
print(f"\ntarget   {target}")
for algo in ("sampling", "nrpa", "gnrpa+prior"):
    rec = bench.solve(problem, puzzle, algo, budget=3000, prior=prior, seed=2)
    print(f"{algo:12s} distance {abs(rec['score']):.0f} after {rec['playouts_used']} playouts")
