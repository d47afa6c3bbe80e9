"""Euler-Maruyama simulation of the controlled state dynamics.

Paths are simulated on a left-endpoint grid; strategies are evaluated at
the left node and held across the subinterval.  ``simulate_coupled`` runs a
baseline on a fine grid and a candidate on a coarse grid from the *same*
Brownian increments (fine increments summed into coarse ones), then reports
both on the fine grid so pathwise metrics compare strategies, not noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import GameModel
from .rng import RandomSource


class SimulationError(RuntimeError):
    """State became non-finite during the Euler recursion."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, T] with ``steps`` intervals."""

    horizon: float
    steps: int

    def __post_init__(self):
        if self.steps < 1 or self.horizon <= 0:
            raise ValueError(f"bad grid: T={self.horizon}, steps={self.steps}")

    @property
    def h(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        """Left endpoints {k h : k = 0..steps-1}."""
        return np.arange(self.steps) * self.h


@dataclass
class PathBundle:
    """States, strategies, and driving noise of a simulation batch.

    states  [n_paths, steps+1, N]
    actions [n_paths, steps, N]
    noise   [n_paths, steps, N+1], column 0 is the common noise.
    """

    grid: TimeGrid
    states: np.ndarray
    actions: np.ndarray
    noise: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]


def draw_initial_states(game: GameModel, n_paths: int, rng: np.random.Generator) -> np.ndarray:
    """X_0^i iid uniform on (-delta0, delta0), independent of the noise."""
    return rng.uniform(-game.x0_halfwidth, game.x0_halfwidth, size=(n_paths, game.n_players))


def draw_noise(n_paths: int, steps: int, n_players: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((n_paths, steps, n_players + 1))


def euler_path(game: GameModel, strategy, grid: TimeGrid,
               x0: np.ndarray, noise: np.ndarray) -> PathBundle:
    """Euler recursion with a given strategy ``(t, x) -> [B, N]``."""
    n = game.n_players
    B = x0.shape[0]
    h = grid.h
    sqh = np.sqrt(h)
    states = np.empty((B, grid.steps + 1, n))
    actions = np.empty((B, grid.steps, n))
    states[:, 0] = x0
    x = x0
    for k in range(grid.steps):
        t = k * h
        alpha = strategy(t, x)
        drift = game.drift(t, x, alpha)
        own = game.diffusion_own(t, x, alpha)
        common = game.diffusion_common(t, x, alpha)
        x = (x + drift * h + own * (sqh * noise[:, k, 1:])
             + common * (sqh * noise[:, k, :1]))
        if not np.all(np.isfinite(x)):
            bad = np.argwhere(~np.isfinite(x))[0]
            raise SimulationError(f"non-finite state at step {k + 1}, path {bad[0]}")
        states[:, k + 1] = x
        actions[:, k] = alpha
    return PathBundle(grid, states, actions, noise)


def simulate(game: GameModel, strategy, grid: TimeGrid, n_paths: int,
             rng_source: RandomSource, stream: tuple = ("simulate",)) -> PathBundle:
    """Simulate ``n_paths`` with initial states and noise from named substreams."""
    x0 = draw_initial_states(game, n_paths, rng_source.stream(*stream, "x0"))
    noise = draw_noise(n_paths, grid.steps, game.n_players, rng_source.stream(*stream, "noise"))
    return euler_path(game, strategy, grid, x0, noise)


def simulate_coupled(game: GameModel, baseline_strategy, candidate_strategy,
                     fine_steps: int, coarse_steps: int, n_paths: int,
                     rng_source: RandomSource, stream: tuple = ("coupled",)):
    """Baseline on the fine grid, candidate on the coarse grid, shared noise.

    Returns (baseline_bundle, candidate_bundle), both on the fine grid; the
    candidate's states and strategies are held constant within each coarse
    subinterval.  The candidate bundle carries the same fine noise array.
    """
    if fine_steps % coarse_steps != 0:
        raise ValueError(f"fine_steps={fine_steps} not divisible by coarse_steps={coarse_steps}")
    ratio = fine_steps // coarse_steps
    fine = TimeGrid(game.horizon, fine_steps)
    coarse = TimeGrid(game.horizon, coarse_steps)
    x0 = draw_initial_states(game, n_paths, rng_source.stream(*stream, "x0"))
    fine_noise = draw_noise(n_paths, fine_steps, game.n_players, rng_source.stream(*stream, "noise"))
    baseline = euler_path(game, baseline_strategy, fine, x0, fine_noise)

    # sum of `ratio` fine standard normals, rescaled to a coarse standard normal
    agg = fine_noise.reshape(n_paths, coarse_steps, ratio, game.n_players + 1).sum(axis=2)
    coarse_noise = agg / np.sqrt(ratio)
    cand = euler_path(game, candidate_strategy, coarse, x0, coarse_noise)

    held_states = np.repeat(cand.states[:, :-1, :], ratio, axis=1)
    held_states = np.concatenate([held_states, cand.states[:, -1:, :]], axis=1)
    held_actions = np.repeat(cand.actions, ratio, axis=1)
    cand_fine = PathBundle(fine, held_states, held_actions, fine_noise)
    return baseline, cand_fine


def paths_to_csv(bundle: PathBundle) -> str:
    """CSV dump: path, t, player, state, strategy rows on the bundle's grid."""
    lines = ["path,t,player,state,strategy"]
    h = bundle.grid.h
    for m in range(bundle.n_paths):
        for k in range(bundle.grid.steps):
            t = k * h
            for i in range(bundle.states.shape[2]):
                lines.append(f"{m},{t!r},{i + 1},{bundle.states[m, k, i]!r},"
                             f"{bundle.actions[m, k, i]!r}")
    return "\n".join(lines) + "\n"
