"""Semi-explicit equilibria used as ground truth by the solvers.

The linear mean-reversion game has a coupled-Riccati feedback; on the
complete graph the system collapses to one scalar gain, which makes a
sharp cross-check.  The portfolio game has a constant equilibrium from a
single linear solve, validated here by Monte Carlo.

Run:  python3 demos/equilibrium_baselines.py
"""

import numpy as np

from graphgames.baselines import (lq_value_at_zero, portfolio_constant_ne,
                                  portfolio_value_at_zero, solve_lq_riccati)
from graphgames.games import LQParams, PortfolioParams, lq_model, portfolio_model
from graphgames.graphs import laplacian, make_graph
from graphgames.rng import RandomSource

print("== Riccati feedback for the linear game ==")
g = make_graph("star", 10)
p = LQParams()
sol = solve_lq_riccati(g, p, grid_steps=1000)
x = np.linspace(-1, 1, 10)[None, :]
for t in (0.0, 0.5, 0.9):
    a = sol.feedback(t, x)
    print(f"t={t:.1f}  alpha[center]={a[0, 0]:+.4f}  alpha[leaf 2]={a[0, 1]:+.4f}")
print(f"expected equilibrium cost of player 1: {lq_value_at_zero(sol)[0]:.5f}")

print("\n== complete-graph sanity check ==")
k10 = make_graph("complete", 10)
solk = solve_lq_riccati(k10, p, grid_steps=1000)
L = laplacian(k10)
gain = solk.feedback_rows[0, 0, 1] / L[0, 1]  # scalar eta at t=0
print(f"feedback at t=0 is a single gain on the deviation: eta_0 = {gain:.6f}")
print("rows proportional to Laplacian rows:",
      np.allclose(solk.feedback_rows[0], gain * L, atol=1e-10))

print("\n== portfolio constant equilibrium ==")
g = make_graph("cycle", 10)
params = PortfolioParams.sample(10, RandomSource(42).stream("model-params"))
base = portfolio_constant_ne(g, params)
print("alpha:", np.round(base.alpha, 4))
print(f"linear-system residual: {base.residual:.2e}")

model = portfolio_model(g, params)
rng = RandomSource(7).stream("mc")
n = 20_000
x0 = rng.uniform(-params.delta0, params.delta0, (n, 10))
w = rng.standard_normal((n, 10))
w0 = rng.standard_normal((n, 1))
T = params.horizon
xt = (x0 + params.mu * base.alpha * T + params.nu * base.alpha * np.sqrt(T) * w
      + params.sigma * base.alpha * np.sqrt(T) * w0)
mc = model.terminal_cost(xt).mean(axis=0)
pred = portfolio_value_at_zero(g, params, base)
print("Monte-Carlo value vs exponential-factor value (player 1..3):")
for i in range(3):
    print(f"  player {i + 1}: mc {mc[i]:.5f}   predicted {pred[i]:.5f}")
