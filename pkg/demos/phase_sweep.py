"""Where are Latin square completions hardest for uniform playouts?

Run: python3 demos/phase_sweep.py  (a few seconds)

Each point is the median number of uniform playouts needed to complete a
random partial square (capped). Too few blanks leaves nothing to do, too many
leaves so much freedom that almost any playout works; the peak sits between.
"""
from replayprior import bench

fractions = [round(0.30 + 0.03 * i, 2) for i in range(9)]
rows = bench.phase_sweep(15, fractions, per_point=40, cap=3000, seed=0)
top = max(row["median_playouts"] for row in rows)
for row in rows:
    bar = "#" * round(50 * row["median_playouts"] / top)
    print(f"{row['fraction']:.2f} {row['median_playouts']:7.0f} {bar}")
print(f"peak at {bench.sweep_peak(rows):.2f}")
