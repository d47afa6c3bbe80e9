"""Supervised expressivity and stability benchmark.

Four scalar targets on the unit hypercube, built from the equilibrium
feedback of the linear game (with and without multi-hop interaction) and
two synthetic graph-structured nonlinearities.  Training draws a fresh
Latin hypercube batch per epoch and minimizes mean squared error; the
score is the relative squared error on a fresh test sample,

    rmse = sum (phi(y) - f(y))^2 / (sum f(y)^2 + 1e-8).

Divergent runs score ``inf`` instead of raising: instability is one of the
measured phenomena.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .baselines import solve_lq_riccati
from .games import LQParams
from .graphs import Graph, laplacian, multi_hop_operator
from .networks import FNN, NTM, ChebGCN
from .rng import RandomSource

TARGET_IDS = ("LQ", "LQMH", "NL", "NLM")

# the benchmark's fixed coefficient set
BENCH_PARAMS = LQParams(a=0.1, sigma=0.5, q=0.0, epsilon=1.0, c=1.0, horizon=1.0)
BENCH_ELL = 3
RMSE_FLOOR = 1e-8


@dataclass
class TargetFunction:
    id: str
    graph: Graph
    fn: callable  # [B, N] -> [B]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.fn(x)


def make_target(target_id: str, g: Graph, params: LQParams = BENCH_PARAMS,
                ell: int = BENCH_ELL, grid_steps: int = 1000) -> TargetFunction:
    """Build one of the four benchmark targets on graph ``g`` (player 1)."""
    L = laplacian(g)
    n = g.n
    if target_id == "LQ":
        sol = solve_lq_riccati(g, params, grid_steps)
        row = params.q * L[0] + sol.P[0][0, 0, :]
        fn = lambda x: -(x @ row)
    elif target_id == "LQMH":
        M = multi_hop_operator(L, ell)
        sol = solve_lq_riccati(g, params, grid_steps, interaction=M)
        row_f = sol.P[0][0, 0, :]
        row_q = params.q * M[0]
        fn = lambda x: -(x @ (row_q + row_f))
    elif target_id == "NL":
        A = np.linalg.det(0.5 * np.eye(n) + L) * L \
            + np.linalg.norm(np.linalg.inv(np.eye(n) + L), 2) * (L @ L)
        row = A[0]
        fn = lambda x: (x * x) @ row
    elif target_id == "NLM":
        powers = [np.linalg.matrix_power(L, k) for k in range(n + 1)]
        det_half = np.linalg.det(0.5 * np.eye(n) + L)
        rows = []
        for i in range(1, n + 1):
            mat = det_half * powers[i] \
                + np.trace(np.linalg.inv(np.eye(n) + i * L)) * powers[n + 1 - i]
            rows.append(mat[i - 1] / np.linalg.norm(mat, 2))
        rows = np.asarray(rows)  # [n, n]
        expo = np.arange(1, n + 1)[:, None] / n  # [n, 1]

        def fn(x):
            out = np.zeros(x.shape[0])
            s = np.sin(2.0 * math.pi * x)
            for i in range(n):
                out += (s * (1.0 + x) ** expo[i]) @ rows[i]
            return 10.0 * out
    else:
        raise ValueError(f"unknown target {target_id!r}")
    return TargetFunction(target_id, g, fn)


def lhs_sample(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube on [0,1]^dim: one point per stratum per dimension."""
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n}")
    base = (np.arange(n)[:, None] + rng.uniform(size=(n, dim))) / n
    for d in range(dim):
        base[:, d] = base[rng.permutation(n), d]
    return base


# Appendix-style hyperparameters: lr per (architecture, test case), epochs 2000*j
_LRS = {
    "fnn": {"LQ": 0.001, "LQMH": 0.001, "NL": 0.005, "NLM": 0.01},
    "ntm": {"LQ": 0.001, "LQMH": 0.001, "NL": 0.005, "NLM": 0.01},
    "cheb": {"LQ": 0.002, "LQMH": 0.002, "NL": 0.01, "NLM": 0.02},
}


@dataclass
class SupervisedHyper:
    epochs: int
    lr: float
    batch: int = 256
    decay_gamma: float = None   # per-epoch step decay (Chebyshev GCN only)
    decay_tau: int = None
    n_test: int = 25000


def default_hyper(arch: str, target_id: str, n_test: int = 25000) -> SupervisedHyper:
    j = TARGET_IDS.index(target_id) + 1
    hyper = SupervisedHyper(epochs=2000 * j, lr=_LRS[arch][target_id], n_test=n_test)
    if arch == "cheb":
        hyper.decay_gamma = 0.5
        hyper.decay_tau = 500
    return hyper


def make_benchmark_net(arch: str, g: Graph, rng: np.random.Generator, player: int = 0):
    """The benchmark architectures: all 4 layers deep."""
    if arch == "fnn":
        return FNN([g.n, 32, 32, 1], activation="tanh", rng=rng)
    if arch == "ntm":
        return NTM(g, player=player, depth=3, channels=3, activation="relu", rng=rng)
    if arch == "cheb":
        return ChebGCN(g, feature_dims=(1, 64, 1), activation="relu", rng=rng)
    raise ValueError(f"unknown architecture {arch!r}")


def rmse_score(net, target: TargetFunction, n_test: int, rng: np.random.Generator) -> float:
    x = lhs_sample(n_test, target.graph.n, rng)
    y = target(x)
    pred = net.forward(x)[:, 0]
    return float(((pred - y) ** 2).sum() / ((y ** 2).sum() + RMSE_FLOOR))


def train_and_score(net, target: TargetFunction, hyper: SupervisedHyper,
                    rng: np.random.Generator) -> float:
    """Train on fresh LHS batches; return the test RMSE (inf on divergence)."""
    params = net.parameters()
    try:
        for e in range(hyper.epochs):
            lr = hyper.lr
            if hyper.decay_gamma is not None:
                lr = ad.lr_schedule(hyper.lr, e, hyper.decay_gamma, hyper.decay_tau)
            x = lhs_sample(hyper.batch, target.graph.n, rng)
            y = target(x)[:, None]
            with ad.Tape() as tape:
                pred = net.forward(x, tape)
                loss = ad.tmean(ad.square(ad.sub(pred, y)))
                grads = ad.backward(loss)
            if not np.isfinite(loss.value):
                return math.inf
            ad.adam_step(params, grads, lr)
        score = rmse_score(net, target, hyper.n_test, rng)
    except ad.GradientError:
        return math.inf
    return score if np.isfinite(score) else math.inf


@dataclass
class BenchmarkReport:
    rows: list  # dicts: arch, graph, target, run, seed, final_rmse, epochs, wall_ms

    def csv(self) -> str:
        lines = ["arch,graph,target,run,seed,final_rmse,epochs,wall_ms"]
        for r in self.rows:
            lines.append(f"{r['arch']},{r['graph']},{r['target']},{r['run']},"
                         f"{r['seed']},{r['final_rmse']!r},{r['epochs']},{r['wall_ms']}")
        return "\n".join(lines) + "\n"

    def cell(self, arch: str, graph: str, target: str) -> list:
        return [r["final_rmse"] for r in self.rows
                if r["arch"] == arch and r["graph"] == graph and r["target"] == target]

    def summary(self) -> str:
        lines = []
        seen = []
        for r in self.rows:
            key = (r["arch"], r["graph"], r["target"])
            if key in seen:
                continue
            seen.append(key)
            vals = np.asarray(self.cell(*key))
            finite = vals[np.isfinite(vals)]
            med = np.median(vals) if len(finite) == len(vals) else math.inf
            lines.append(
                f"{key[0]:5s} {key[1]:8s} {key[2]:5s} runs={len(vals)} "
                f"min={vals.min():.3e} median={med:.3e} max={vals.max():.3e}")
        return "\n".join(lines) + "\n"


def run_benchmark(cells, n_runs: int, rng_source: RandomSource,
                  n_test: int = 25000, epochs_override: int = None,
                  player: int = 0) -> BenchmarkReport:
    """Train/evaluate each (arch, graph_name, graph, target_id) cell n_runs times.

    Each run gets an independent substream; targets are built once per cell
    (the interaction matrix depends on the graph, so the feedback matrix is
    re-solved per graph).
    """
    rows = []
    for (arch, graph_name, g, target_id) in cells:
        target = make_target(target_id, g)
        hyper = default_hyper(arch, target_id, n_test=n_test)
        if epochs_override is not None:
            hyper.epochs = epochs_override
        for run in range(n_runs):
            seed = rng_source.stream("bench", arch, graph_name, target_id, run)
            net = make_benchmark_net(arch, g, seed, player=player)
            t0 = time.perf_counter()
            score = train_and_score(net, target, hyper, seed)
            wall_ms = int(1000 * (time.perf_counter() - t0))
            rows.append({"arch": arch, "graph": graph_name, "target": target_id,
                         "run": run, "seed": f"{arch}/{graph_name}/{target_id}/{run}",
                         "final_rmse": score, "epochs": hyper.epochs, "wall_ms": wall_ms})
    return BenchmarkReport(rows)
