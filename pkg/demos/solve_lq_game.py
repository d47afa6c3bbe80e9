"""Solve a small linear game by fictitious play and compare against the
Riccati equilibrium.

Uses a deliberately tiny budget (5 players, a few rounds) so the script
finishes in about a minute; the full reduced-scale study lives in the
acceptance tests.

Run:  python3 demos/solve_lq_game.py
"""

import numpy as np

from graphgames.baselines import solve_lq_riccati
from graphgames.games import LQParams, lq_model
from graphgames.graphs import make_graph
from graphgames.metrics import evaluate_strategies
from graphgames.rng import RandomSource
from graphgames.solvers import TrainConfig, dfp_train

g = make_graph("complete", 5)
params = LQParams()
model = lq_model(g, params)

cfg = TrainConfig(n_t=10, rounds=6, epochs=60, batch=256, arch="ntm", solver="dp", seed=1)
print(f"training {cfg.arch}-{cfg.solver}: {cfg.rounds} rounds x {model.n_players} players "
      f"x {cfg.epochs} epochs ...")
result = dfp_train(model, cfg)
print(f"done in {result.wall_seconds:.0f}s")

by_round = {}
for (r, i, e, loss) in result.history:
    by_round.setdefault(r, []).append(loss)
print("median loss by round:", [f"{np.median(by_round[r]):.4f}" for r in sorted(by_round)])

baseline = solve_lq_riccati(g, params, grid_steps=1000)
res = evaluate_strategies(model, baseline.feedback, result.strategy(),
                          n_paths=2000, rng_source=RandomSource(0),
                          fine_steps=1000, coarse_steps=cfg.n_t)
floor = evaluate_strategies(model, baseline.feedback, baseline.feedback,
                            n_paths=2000, rng_source=RandomSource(0),
                            fine_steps=1000, coarse_steps=cfg.n_t)
print(f"pathwise relative errors vs the Riccati equilibrium: "
      f"states {res.rmse_x:.4f}, strategies {res.rmse_alpha:.4f}")
print(f"(the exact equilibrium held on this coarse grid already scores "
      f"{floor.rmse_alpha:.4f}: most of the gap is grid hold error)")
print(f"max relative value error across players: {res.mre:.4f}")

x = np.zeros((1, 5))
x[0, 0] = 1.0
print("\nfeedback at a unit shock on player 1, t = 0:")
print("  learned :", np.round(result.strategy()(0.0, x)[0], 3))
print("  Riccati :", np.round(baseline.feedback(0.0, x)[0], 3))
