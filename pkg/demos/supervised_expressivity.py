"""Small-scale replica of the supervised expressivity comparison.

Fits the linear-game feedback target on the 10-vertex star with all three
architectures, a few runs each, and prints the score spread.  The
graph-masked network trains stably; the spectral GCN's spread is wide
(occasionally diverging), which is the instability phenomenon the full
benchmark measures.

Run:  python3 demos/supervised_expressivity.py   (2-3 minutes)
"""

import numpy as np

from graphgames.benchmark import run_benchmark
from graphgames.graphs import make_graph
from graphgames.rng import RandomSource

g = make_graph("star", 10)
cells = [(arch, "S10", g, "LQ") for arch in ("fnn", "ntm", "cheb")]
report = run_benchmark(cells, n_runs=4, rng_source=RandomSource(1), n_test=8000)

print(report.summary())
print("per-run log10 relative MSE:")
for arch in ("fnn", "ntm", "cheb"):
    vals = report.cell(arch, "S10", "LQ")
    logs = [f"{np.log10(v):+.2f}" if np.isfinite(v) else "diverged" for v in vals]
    print(f"  {arch:5s} {logs}")

print("\ntrainable parameter counts at this size:")
from graphgames.benchmark import make_benchmark_net
from graphgames.networks import count_params

for arch in ("fnn", "ntm", "cheb"):
    net = make_benchmark_net(arch, g, np.random.default_rng(0))
    print(f"  {arch:5s} {count_params(net)}")
