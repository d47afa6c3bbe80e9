"""Pathwise relative errors and the value-based maximum relative error.

Both metrics compare a candidate strategy against a baseline on shared
noise, so they measure strategy error rather than sampling noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import GameModel
from .rng import RandomSource
from .simulate import PathBundle, simulate_coupled


@dataclass
class MetricResult:
    rmse_x: float
    rmse_alpha: float
    mre: float = None
    baseline_values: np.ndarray = None
    candidate_values: np.ndarray = None


def pathwise_rmse(baseline: PathBundle, candidate: PathBundle) -> tuple:
    """Relative squared errors of states and strategies over the fine grid.

    Sums run over (player, grid node, path); states use the left endpoints
    {0, ..., steps-1}, matching the strategy nodes.
    """
    if baseline.grid != candidate.grid:
        raise ValueError("bundles live on different grids")
    if baseline.states.shape != candidate.states.shape:
        raise ValueError(f"state shapes differ: {baseline.states.shape} vs {candidate.states.shape}")
    if baseline.noise is not candidate.noise and not np.array_equal(baseline.noise, candidate.noise):
        raise ValueError("bundles do not share noise")
    ks = baseline.grid.steps

    def ratio(hat, tilde):
        num = ((hat - tilde) ** 2).sum()
        return 0.0 if num == 0.0 else float(num / (hat ** 2).sum())

    rmse_x = ratio(baseline.states[:, :ks, :], candidate.states[:, :ks, :])
    rmse_a = ratio(baseline.actions, candidate.actions)
    return rmse_x, rmse_a


def pathwise_cost(game: GameModel, bundle: PathBundle) -> np.ndarray:
    """Monte-Carlo expected cost per player along simulated paths: [N]."""
    h = bundle.grid.h
    total = np.zeros((bundle.n_paths, game.n_players))
    for k in range(bundle.grid.steps):
        total += game.running_cost(k * h, bundle.states[:, k, :], bundle.actions[:, k, :]) * h
    total += game.terminal_cost(bundle.states[:, -1, :])
    return total.mean(axis=0)


def mre(game: GameModel, baseline_strategy, candidate_strategy, n_paths: int,
        rng_source: RandomSource, fine_steps: int = 1000, coarse_steps: int = 50,
        stream: tuple = ("mre",)) -> MetricResult:
    """Max over players of |(V_tilde - V_hat) / V_hat| on shared noise."""
    base, cand = simulate_coupled(game, baseline_strategy, candidate_strategy,
                                  fine_steps, coarse_steps, n_paths, rng_source, stream)
    v_hat = pathwise_cost(game, base)
    v_tld = pathwise_cost(game, cand)
    if np.any(np.abs(v_hat) < 1e-10):
        raise ZeroDivisionError("baseline expected cost too close to zero for a relative error")
    rel = np.abs((v_tld - v_hat) / v_hat)
    rmse_x, rmse_a = pathwise_rmse(base, cand)
    return MetricResult(rmse_x, rmse_a, float(rel.max()), v_hat, v_tld)


def evaluate_strategies(game: GameModel, baseline_strategy, candidate_strategy,
                        n_paths: int, rng_source: RandomSource,
                        fine_steps: int = 1000, coarse_steps: int = 50,
                        stream: tuple = ("evaluate",)) -> MetricResult:
    """RMSE_X, RMSE_alpha, and MRE in one coupled simulation."""
    return mre(game, baseline_strategy, candidate_strategy, n_paths, rng_source,
               fine_steps, coarse_steps, stream)
