"""Semi-explicit baseline equilibria.

For the linear mean-reversion game, the quadratic value ansatz
v^i(t,x) = x' P^i_t x / 2 + r^i_t turns the HJB system into coupled matrix
Riccati ODEs.  With the per-player feedback rows S[j,:] = (qL + P^j)[j,:]
and the closed-loop drift matrix D = -S - aL, each player's matrix solves

    dP^i/dt = -( D' P^i + P^i D + s_i s_i' - q (s_i l_i' + l_i s_i')
                 + eps l_i l_i' ),        P^i_T = c l_i l_i',

where s_i = S[i,:], l_i = L[i,:].  The equilibrium feedback is
alpha_i(t,x) = -(q L x)_i - (P^i_t x)_i.  Integration is backward RK4 on a
fine grid; accuracy is guarded by an HJB-residual invariant in the tests.

The portfolio game has a constant-in-(t,x) equilibrium from one linear
solve, and a scalar value factor rho^i_t = exp(kappa_i (T - t)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import GameModel, LQParams, PortfolioParams
from .graphs import Graph, laplacian


class RiccatiBlowupError(RuntimeError):
    """Solution norm exceeded the blow-up guard; horizon or parameters bad."""


@dataclass
class RiccatiSolution:
    """Backward Riccati path on an ascending time grid."""

    times: np.ndarray          # [steps+1], 0..T
    P: np.ndarray              # [steps+1, N, N, N] (time, player, row, col)
    feedback_rows: np.ndarray  # [steps+1, N, N]: alpha(t,x) = -x @ rows(t).T
    interaction: np.ndarray    # the matrix playing L's role
    params: LQParams

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def rows_at(self, t: float) -> np.ndarray:
        """Feedback rows at time t, linear interpolation between nodes."""
        T = self.horizon
        if not -1e-12 <= t <= T + 1e-12:
            raise ValueError(f"t={t} outside horizon [0, {T}]")
        pos = np.clip(t, 0.0, T) / (self.times[1] - self.times[0])
        k = int(np.floor(pos))
        if k >= len(self.times) - 1:
            return self.feedback_rows[-1]
        w = pos - k
        return (1.0 - w) * self.feedback_rows[k] + w * self.feedback_rows[k + 1]

    def feedback(self, t: float, x: np.ndarray) -> np.ndarray:
        """Equilibrium strategies for states x [B, N] -> [B, N]."""
        return -x @ self.rows_at(t).T

    def value_offsets(self, sigma: float) -> np.ndarray:
        """r^i_t = (sigma^2 / 2) int_t^T Tr P^i_s ds, trapezoid rule; [steps+1, N]."""
        traces = np.trace(self.P, axis1=2, axis2=3)  # [steps+1, N]
        h = self.times[1] - self.times[0]
        partial = np.concatenate([
            np.zeros((1, traces.shape[1])),
            np.cumsum(0.5 * (traces[1:] + traces[:-1]) * h, axis=0)], axis=0)
        return 0.5 * sigma ** 2 * (partial[-1] - partial)


def _riccati_rhs(P: np.ndarray, L: np.ndarray, a: float, q: float, eps: float) -> np.ndarray:
    n = L.shape[0]
    idx = np.arange(n)
    S = q * L + P[idx, idx, :]          # S[i,:] = row i of (qL + P^i)
    D = -S - a * L
    ssT = np.einsum("ia,ib->iab", S, S)
    slT = np.einsum("ia,ib->iab", S, L)
    lsT = np.swapaxes(slT, 1, 2)
    llT = np.einsum("ia,ib->iab", L, L)
    coupling = D.T[None] @ P + P @ D[None]
    return -(coupling + ssT - q * (slT + lsT) + eps * llT)


def solve_lq_riccati(g: Graph, p: LQParams, grid_steps: int = 1000,
                     interaction: np.ndarray = None) -> RiccatiSolution:
    """Backward RK4 integration of the coupled Riccati system.

    ``interaction`` replaces the normalized Laplacian everywhere when given
    (used by the multi-hop supervised targets).
    """
    L = laplacian(g) if interaction is None else np.asarray(interaction, dtype=np.float64)
    n = L.shape[0]
    T = p.horizon
    h = T / grid_steps
    llT = np.einsum("ia,ib->iab", L, L)
    P = p.c * llT  # terminal condition per player
    path = np.empty((grid_steps + 1, n, n, n))
    path[grid_steps] = P
    rhs = lambda mat: _riccati_rhs(mat, L, p.a, p.q, p.epsilon)
    for k in range(grid_steps, 0, -1):
        k1 = rhs(P)
        k2 = rhs(P - 0.5 * h * k1)
        k3 = rhs(P - 0.5 * h * k2)
        k4 = rhs(P - h * k3)
        P = P - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        P = 0.5 * (P + np.swapaxes(P, 1, 2))  # symmetrize off rounding
        if not np.all(np.isfinite(P)) or np.max(np.abs(P)) > 1e6:
            raise RiccatiBlowupError(
                f"Riccati norm exceeded 1e6 at t={(k - 1) * h:.4f}; check horizon/parameters")
        path[k - 1] = P
    idx = np.arange(n)
    rows = p.q * L[None] + path[:, idx, idx, :]
    times = np.linspace(0.0, T, grid_steps + 1)
    return RiccatiSolution(times, path, rows, L, p)


def lq_baseline_feedback(sol: RiccatiSolution, t: float, x: np.ndarray) -> np.ndarray:
    return sol.feedback(t, x)


def lq_value_at_zero(sol: RiccatiSolution) -> np.ndarray:
    """E[v^i(0, X_0)] with X_0 iid U(-delta0, delta0): players' expected costs."""
    p = sol.params
    r0 = sol.value_offsets(p.sigma)[0]
    var0 = p.delta0 ** 2 / 3.0
    quad = 0.5 * var0 * np.trace(sol.P[0], axis1=1, axis2=2)
    return quad + r0


@dataclass
class PortfolioBaseline:
    """Constant equilibrium and the exponential value factor."""

    alpha: np.ndarray    # [N]
    kappa: np.ndarray    # [N]
    horizon: float
    residual: float      # linear-system residual at alpha

    def rho(self, t) -> np.ndarray:
        """Value factor rho^i_t = exp(kappa_i (T - t)); rho_T = 1."""
        return np.exp(np.outer(np.atleast_1d(self.horizon - np.asarray(t)), self.kappa)).squeeze()

    def strategy(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.alpha, x.shape).copy()


class EquilibriumSystemError(RuntimeError):
    """The equilibrium linear system is singular (existence condition violated)."""


def portfolio_constant_ne(g: Graph, p: PortfolioParams) -> PortfolioBaseline:
    """Solve (nu_i^2 + sigma_i^2) a_i - sigma_i theta_i sum_{j!=i} (-L_ij) sigma_j a_j = delta_i mu_i."""
    L = laplacian(g)
    n = g.n
    off = L - np.eye(n)
    A = np.diag(p.nu ** 2 + p.sigma ** 2) + (p.sigma * p.theta)[:, None] * off * p.sigma[None, :]
    b = p.delta * p.mu
    try:
        alpha = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as err:
        raise EquilibriumSystemError(
            "portfolio equilibrium system is singular; no constant NE") from err
    residual = float(np.max(np.abs(A @ alpha - b)))

    # kappa_i from the exact Gaussian expectation of the terminal cost: with
    # sensitivity c_k = d/dx_k [(1-theta_i) x_i + theta_i (Lx)_i] (c_i = 1,
    # c_k = theta_i L_ik on neighbors), the idiosyncratic term carries c_k^2.
    kappa = np.empty(n)
    for i in range(n):
        c = p.theta[i] * L[i].copy()
        c[i] = 1.0
        kappa[i] = (-(c * p.mu * alpha).sum() / p.delta[i]
                    + (c ** 2 * p.nu ** 2 * alpha ** 2).sum() / (2.0 * p.delta[i] ** 2)
                    + ((c * p.sigma * alpha).sum()) ** 2 / (2.0 * p.delta[i] ** 2))
    return PortfolioBaseline(alpha, kappa, p.horizon, residual)


def portfolio_value_at_zero(g: Graph, p: PortfolioParams, base: PortfolioBaseline) -> np.ndarray:
    """rho^i_0 E[exp(-(x^i - theta_i xbar^(-i))/delta_i)] for X_0 iid U(-d0, d0).

    The exponent is linear in the coordinates, so the expectation factors
    into per-coordinate sinh terms.
    """
    L = laplacian(g)
    n = g.n
    rho0 = base.rho(0.0)
    out = np.empty(n)
    for i in range(n):
        coeffs = -((1.0 - p.theta[i]) * np.eye(n)[i] + p.theta[i] * L[i]) / p.delta[i]
        factors = np.where(
            np.abs(coeffs) < 1e-14, 1.0,
            np.sinh(coeffs * p.delta0) / np.where(np.abs(coeffs) < 1e-14, 1.0, coeffs * p.delta0))
        out[i] = rho0[i] * np.prod(factors)
    return out


def nonlq_baseline(g: Graph, p: LQParams, train_cfg, rng_seed: int = 0):
    """FNN-parameterized equilibrium of the cubic game, trained by direct
    parameterization; serves as the baseline profile where no semi-explicit
    solution exists.  Returns the solver's TrainResult."""
    from .games import nonlq_model
    from .solvers import dfp_train

    cfg = train_cfg
    if cfg.arch != "fnn" or cfg.solver != "dp":
        raise ValueError("the cubic-game baseline is defined as FNN-DP")
    model = nonlq_model(g, p)
    return dfp_train(model, cfg, seed=rng_seed)
