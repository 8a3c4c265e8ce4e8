"""Look inside a Kakuro prior: which (value, occurrence, remainder) moves are kept.

Run: python3 demos/kakuro_codes.py

The code packs the value placed, how often it already occurs in the row and
column, and the sums left to fill. Forced moves (the last empty cell of a row
takes exactly what remains) come out with frequency 1.0, while most other
codes are seldom or never chosen.
"""
import numpy as np

from replayprior import bench, kakuro

rng = np.random.default_rng(4)
n, k = 6, 7
pairs = [kakuro.generate_kakuro(n, k, rng) for _ in range(300)]
table, skipped = bench.learn_prior("kakuro", pairs)
print(f"{table.instances} grids replayed, {len(skipped)} skipped, {len(table)} codes")
print(bench.histogram_summary(table, 0.1))

print("\nsample of forced codes:")
forced = [c for c in table.counters if table.frequency(c) == 1.0]
for code in sorted(forced)[:6]:
    v, occ_r, occ_c, rem_r, rem_c = kakuro.unpack_prior_code(code, k)
    print(f"  value {v} (row has it {occ_r}x, column {occ_c}x) with {rem_r}/{rem_c} left: "
          f"{table.count(code)} of {table.nb(code)}")

# one puzzle solved with and without the prior
pair = kakuro.generate_kakuro(n, k, rng)
problem = kakuro.Kakuro()
print()
print(kakuro.format_instance(pair.instance))
from replayprior.prior import BiasProvider  # noqa: E402

prior = BiasProvider(table, 4.0)
for algo in ("sampling", "nrpa", "gnrpa+prior"):
    rec = bench.solve(problem, pair.instance, algo, budget=2000, prior=prior, seed=0)
    print(f"{algo:12s} score {rec['score']:5.1f} after {rec['playouts_used']} playouts")
