"""Dynamic game models on graphs behind one coefficient interface.

Every model exposes vectorized per-player coefficients over states
``x [B, N]`` and controls ``alpha [B, N]``: drift b^i, idiosyncratic
diffusion, common-noise diffusion, running cost f^i, terminal cost g^i.
The interaction enters through the neighborhood deviation, which equals
``-(L x)_i`` per player.

Coefficient functions are written with the autodiff primitives, so they
accept plain arrays or tape tensors alike.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .graphs import Graph, laplacian


def neighborhood_deviation(L: np.ndarray, x):
    """Vector of (mean-of-neighbors - own state): -(L x) for all players."""
    return ad.scale(ad.matmul(x, L), -1.0)


@dataclass
class GameModel:
    """Coefficients, costs, and the optional explicit Hamiltonian minimizer."""

    name: str
    graph: Graph
    horizon: float
    x0_halfwidth: float
    drift: callable            # (t, x, alpha) -> [B, N]
    diffusion_own: callable    # (t, x, alpha) -> [B, N]
    diffusion_common: callable
    running_cost: callable     # (t, x, alpha) -> [B, N]
    terminal_cost: callable    # (x) -> [B, N]
    minimizer: callable = None         # (t, x, z) -> [B, N], z adjoint rows
    reference_control: callable = None  # (t, x) -> [B, N]
    sigma_const: float = None  # scalar sigma when diffusion is uncontrolled
    params: dict = field(default_factory=dict)

    @property
    def n_players(self) -> int:
        return self.graph.n

    @property
    def controlled_diffusion(self) -> bool:
        return self.sigma_const is None


@dataclass(frozen=True)
class LQParams:
    """Mean-reversion game coefficients; convexity needs epsilon >= q^2."""

    a: float = 0.1
    sigma: float = 0.5
    q: float = 0.0
    epsilon: float = 1.0
    c: float = 1.0
    delta0: float = 0.5
    horizon: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.epsilon < self.q ** 2:
            raise ValueError(f"need epsilon >= q^2, got epsilon={self.epsilon}, q={self.q}")
        if self.c < 0:
            raise ValueError(f"c must be >= 0, got {self.c}")


def _lq_like_model(name: str, g: Graph, p: LQParams, drift_fn) -> GameModel:
    L = laplacian(g)
    a, sig, q, eps, c = p.a, p.sigma, p.q, p.epsilon, p.c

    def diffusion_own(t, x, alpha):
        base = np.broadcast_to(np.float64(sig), np.shape(ad._val(x)))
        return base

    def diffusion_common(t, x, alpha):
        return np.zeros(np.shape(ad._val(x)))

    def running_cost(t, x, alpha):
        dev = neighborhood_deviation(L, x)
        quad = ad.scale(ad.square(alpha), 0.5)
        cross = ad.scale(ad.hadamard(alpha, dev), -q)
        track = ad.scale(ad.square(dev), eps / 2.0)
        return ad.add(ad.add(quad, cross), track)

    def terminal_cost(x):
        dev = neighborhood_deviation(L, x)
        return ad.scale(ad.square(dev), c / 2.0)

    def minimizer(t, x, z):
        dev = neighborhood_deviation(L, x)
        return ad.add(ad.scale(dev, q), ad.scale(z, -1.0 / sig))

    def reference_control(t, x):
        return ad.scale(neighborhood_deviation(L, x), q)

    return GameModel(
        name=name, graph=g, horizon=p.horizon, x0_halfwidth=p.delta0,
        drift=drift_fn(L, a), diffusion_own=diffusion_own,
        diffusion_common=diffusion_common, running_cost=running_cost,
        terminal_cost=terminal_cost, minimizer=minimizer,
        reference_control=reference_control, sigma_const=sig,
        params={"a": a, "sigma": sig, "q": q, "epsilon": eps, "c": c,
                "delta0": p.delta0, "T": p.horizon})


def lq_model(g: Graph, p: LQParams) -> GameModel:
    """Linear mean reversion toward the degree-weighted neighbor average."""

    def make_drift(L, a):
        def drift(t, x, alpha):
            return ad.add(ad.scale(neighborhood_deviation(L, x), a), alpha)
        return drift

    return _lq_like_model("lq", g, p, make_drift)


def nonlq_model(g: Graph, p: LQParams) -> GameModel:
    """Cubic mean reversion; costs and minimizer as in the linear model."""

    def make_drift(L, a):
        def drift(t, x, alpha):
            dev = neighborhood_deviation(L, x)
            return ad.add(ad.scale(ad.power(dev, 3.0), a), alpha)
        return drift

    return _lq_like_model("nonlq", g, p, make_drift)


@dataclass(frozen=True)
class PortfolioParams:
    """Per-player market and preference coefficients (all positive where noted)."""

    mu: np.ndarray
    nu: np.ndarray
    sigma: np.ndarray
    delta: np.ndarray
    theta: np.ndarray
    delta0: float = 0.3
    horizon: float = 1.0

    def __post_init__(self):
        for nm in ("nu", "sigma", "delta", "theta"):
            if np.any(getattr(self, nm) <= 0):
                raise ValueError(f"{nm} entries must be positive")

    @staticmethod
    def sample(n: int, rng: np.random.Generator, delta0: float = 0.3,
               horizon: float = 1.0) -> "PortfolioParams":
        """The documented uniform ranges, sampled once and then fixed."""
        return PortfolioParams(
            mu=rng.uniform(0.05, 0.1, n),
            nu=rng.uniform(0.2, 0.25, n),
            sigma=rng.uniform(0.15, 0.2, n),
            delta=rng.uniform(0.8, 1.2, n),
            theta=rng.uniform(0.4, 0.6, n),
            delta0=delta0, horizon=horizon)

    def as_dict(self) -> dict:
        out = {"delta0": self.delta0, "T": self.horizon}
        for nm in ("mu", "nu", "sigma", "delta", "theta"):
            for i, v in enumerate(getattr(self, nm)):
                out[f"{nm}.{i + 1}"] = float(v)
        return out


def portfolio_model(g: Graph, p: PortfolioParams) -> GameModel:
    """Wealth game with CARA relative-performance objective.

    The terminal objective is the cost form of the negated utility:
    g^i(x) = exp{-(1/delta_i)[(1-theta_i) x^i + theta_i (L x)_i]};
    drift and both diffusions are linear in the own control, so Deep BSDE
    does not apply (controlled diffusion).
    """
    L = laplacian(g)
    mu, nu, sig, dlt, th = p.mu, p.nu, p.sigma, p.delta, p.theta

    def drift(t, x, alpha):
        return ad.hadamard(alpha, mu)

    def diffusion_own(t, x, alpha):
        return ad.hadamard(alpha, nu)

    def diffusion_common(t, x, alpha):
        return ad.hadamard(alpha, sig)

    def running_cost(t, x, alpha):
        return np.zeros(np.shape(ad._val(x)))

    def terminal_cost(x):
        xl = ad.matmul(x, L)
        inner = ad.add(ad.hadamard(x, 1.0 - th), ad.hadamard(xl, th))
        return ad.exp(ad.hadamard(inner, -1.0 / dlt))

    return GameModel(
        name="portfolio", graph=g, horizon=p.horizon, x0_halfwidth=p.delta0,
        drift=drift, diffusion_own=diffusion_own, diffusion_common=diffusion_common,
        running_cost=running_cost, terminal_cost=terminal_cost,
        minimizer=None, reference_control=None, sigma_const=None,
        params=p.as_dict())
