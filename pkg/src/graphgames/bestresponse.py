"""Best-response fixed points on graphs and their exact NTM realization.

A static game is summarized by its joint best-response map A acting on
action profiles.  When A is a sup-norm contraction, iterating it from the
zero profile converges geometrically to the equilibrium profile, and a
multi-dimensional NTM with ReLU channels can execute K-1 iteration steps
exactly, up to the approximation error of the per-player response nets.
The resulting sup-norm error obeys  delta/(1-rho) + rho^(K-1) * |phi_hat(x)|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graphs import Graph
from .networks import NTM


@dataclass
class BestResponseNet:
    """Per-player one-hidden-layer ReLU response nets.

    For player p and channel r: beta[p][r], eta[p][r] are (d_out,) vectors;
    gamma_x[p][r] maps neighbor-or-self index j to a (d_out, d_in) matrix for
    j in {p} union N(p); gamma_a[p][r] maps j in N(p) to (d_out, d_out).
    """

    graph: Graph
    d_in: int
    d_out: int
    channels: int
    beta: list
    eta: list
    gamma_x: list
    gamma_a: list

    def evaluate(self, x: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Apply every player's response net: [B, N d_in], [B, N d_out] -> [B, N d_out]."""
        n = self.graph.n
        B = x.shape[0]
        out = np.zeros((B, n * self.d_out))
        for p in range(n):
            acc = np.zeros((B, self.d_out))
            for r in range(self.channels):
                u = np.broadcast_to(self.eta[p][r], (B, self.d_out)).copy()
                for j, gx in self.gamma_x[p][r].items():
                    u += x[:, j * self.d_in:(j + 1) * self.d_in] @ gx.T
                for j, ga in self.gamma_a[p][r].items():
                    u += a[:, j * self.d_out:(j + 1) * self.d_out] @ ga.T
                acc += self.beta[p][r] * np.maximum(u, 0.0)
            out[:, p * self.d_out:(p + 1) * self.d_out] = acc
        return out


@dataclass
class ContractionGame:
    """Joint best-response map with a known sup-norm contraction modulus."""

    graph: Graph
    response: callable  # (x [B, N d_in], a [B, N d_out]) -> [B, N d_out]
    rho: float
    d_in: int = 1
    d_out: int = 1
    x_low: float = 0.0
    x_high: float = 1.0

    def sample_states(self, n_samples: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.x_low, self.x_high, size=(n_samples, self.graph.n * self.d_in))

    def equilibrium(self, x: np.ndarray, iterations: int = 200) -> np.ndarray:
        """Banach iteration run long enough that the remaining error is
        rho^iterations * |phi_hat|, far below every tolerance used here."""
        a = np.zeros((x.shape[0], self.graph.n * self.d_out))
        for _ in range(iterations):
            a = self.response(x, a)
        return a


def fixed_point_iterate(response, x: np.ndarray, n_actions: int, k: int) -> np.ndarray:
    """K applications of the best-response map starting from the zero profile."""
    if k < 0:
        raise ValueError(f"iteration count must be >= 0, got {k}")
    a = np.zeros((x.shape[0], n_actions))
    for _ in range(k):
        a = response(x, a)
    return a


def linear_contraction_game(graph: Graph, rho: float, rng: np.random.Generator):
    """A(x, a)_p = c0_p + c1_p x_p + rho * mean of neighbor actions.

    Returns the game together with an exactly-representing response net
    (delta = 0): each affine response is realized as sigma(u) - sigma(-u)
    on two ReLU channels.
    """
    n = graph.n
    c0 = rng.uniform(-0.5, 0.5, size=n)
    c1 = rng.uniform(-1.0, 1.0, size=n)
    neighbor_weight = np.zeros((n, n))
    for p in range(n):
        nbrs = graph.neighbors(p)
        neighbor_weight[p, nbrs] = rho / len(nbrs)

    def response(x, a):
        return c0 + c1 * x + a @ neighbor_weight.T

    beta, eta, gamma_x, gamma_a = [], [], [], []
    for p in range(n):
        nbrs = graph.neighbors(p)
        beta.append([np.array([1.0]), np.array([-1.0])])
        eta.append([np.array([c0[p]]), np.array([-c0[p]])])
        gx_pos = {p: np.array([[c1[p]]])}
        gx_neg = {p: np.array([[-c1[p]]])}
        for j in nbrs:
            gx_pos.setdefault(j, np.zeros((1, 1)))
            gx_neg.setdefault(j, np.zeros((1, 1)))
        ga_pos = {j: np.array([[rho / len(nbrs)]]) for j in nbrs}
        ga_neg = {j: np.array([[-rho / len(nbrs)]]) for j in nbrs}
        gamma_x.append([gx_pos, gx_neg])
        gamma_a.append([ga_pos, ga_neg])
    br = BestResponseNet(graph, 1, 1, 2, beta, eta, gamma_x, gamma_a)
    game = ContractionGame(graph, response, rho)
    return game, br


def tanh_contraction_game(graph: Graph, rho: float, rng: np.random.Generator) -> ContractionGame:
    """Saturating responses: A(x, a)_p = rho * tanh(c0 + c1 x_p + mean neighbor a).

    |dA_p/da_j| <= rho / deg(p), so the sup-norm modulus is at most rho.
    """
    n = graph.n
    c0 = rng.uniform(-0.5, 0.5, size=n)
    c1 = rng.uniform(-1.0, 1.0, size=n)
    neighbor_weight = np.zeros((n, n))
    for p in range(n):
        nbrs = graph.neighbors(p)
        neighbor_weight[p, nbrs] = 1.0 / len(nbrs)

    def response(x, a):
        return rho * np.tanh(c0 + c1 * x + a @ neighbor_weight.T)

    return ContractionGame(graph, response, rho)


def fit_best_response(game: ContractionGame, channels: int, rng: np.random.Generator,
                      epochs: int = 1500, batch: int = 128, lr: float = 0.02,
                      grid_samples: int = 4000):
    """Fit per-player ReLU response nets to A and measure delta on a grid.

    Trains each player's channels (beta, eta, gamma) by Adam on squared
    error over sampled (x, a) pairs; returns (BestResponseNet, delta) with
    delta the sup-norm fit error over a fresh sample grid.
    """
    n = game.graph.n
    a_bound = _action_bound(game, rng)
    beta, eta, gamma_x, gamma_a = [], [], [], []
    for p in range(n):
        nbrs = game.graph.neighbors(p)
        inputs = [p] + nbrs
        width_in = len(inputs) + len(nbrs)
        params = [
            ad.Parameter("w", ad.xavier_init((width_in, channels), width_in, channels, rng)),
            ad.Parameter("c", ad.xavier_init(channels, width_in, channels, rng)),
            ad.Parameter("o", ad.xavier_init((channels, 1), channels, 1, rng)),
        ]
        w, c, o = params
        for e in range(epochs):
            xs = game.sample_states(batch, rng)
            acts = rng.uniform(-a_bound, a_bound, size=(batch, n))
            target = game.response(xs, acts)[:, p:p + 1]
            feats = np.concatenate([xs[:, inputs], acts[:, nbrs]], axis=1)
            with ad.Tape() as tape:
                hidden = ad.relu(ad.add(ad.matmul(feats, tape.watch(w)), tape.watch(c)))
                pred = ad.matmul(hidden, tape.watch(o))
                loss = ad.tmean(ad.square(ad.sub(pred, target)))
                grads = ad.backward(loss)
            ad.adam_step(params, grads, lr)
        beta.append([o.value[r].copy() for r in range(channels)])
        eta.append([c.value[r:r + 1].copy() for r in range(channels)])
        gx_list, ga_list = [], []
        for r in range(channels):
            gx_list.append({j: w.value[idx, r].reshape(1, 1).copy()
                            for idx, j in enumerate(inputs)})
            ga_list.append({j: w.value[len(inputs) + idx, r].reshape(1, 1).copy()
                            for idx, j in enumerate(nbrs)})
        gamma_x.append(gx_list)
        gamma_a.append(ga_list)
    br = BestResponseNet(game.graph, 1, 1, channels, beta, eta, gamma_x, gamma_a)

    grid_rng = np.random.Generator(np.random.Philox(key=987654321))
    xs = game.sample_states(grid_samples, grid_rng)
    acts = grid_rng.uniform(-a_bound, a_bound, size=(grid_samples, n))
    delta = float(np.max(np.abs(br.evaluate(xs, acts) - game.response(xs, acts))))
    return br, delta


def _action_bound(game: ContractionGame, rng: np.random.Generator) -> float:
    """Sup norm of the equilibrium profile over sampled states, padded."""
    xs = game.sample_states(512, rng)
    return 1.5 * float(np.max(np.abs(game.equilibrium(xs)))) + 0.5


def certify_contraction(game: ContractionGame, rng: np.random.Generator,
                        n_triples: int = 10000) -> float:
    """Empirical modulus: max over random (x, a, b) of the Lipschitz quotient."""
    n = game.graph.n
    worst = 0.0
    batch = 500
    for _ in range(n_triples // batch):
        x = game.sample_states(batch, rng)
        a = rng.uniform(-2.0, 2.0, size=(batch, n * game.d_out))
        b = rng.uniform(-2.0, 2.0, size=(batch, n * game.d_out))
        num = np.max(np.abs(game.response(x, a) - game.response(x, b)), axis=1)
        den = np.max(np.abs(a - b), axis=1)
        ok = den > 1e-12
        worst = max(worst, float(np.max(num[ok] / den[ok])))
    return worst


def construct_ntm(graph: Graph, br: BestResponseNet, depth: int, player: int) -> NTM:
    """Assemble NTM weights that execute depth-1 best-response iterations.

    Requires ReLU, channel width M >= 2, and per-vertex width
    d = d_in + d_out.  The first two channels carry the raw state through
    every hidden layer via x = sigma(x) - sigma(-x); the action sub-block
    applies the response nets.  The output layer reads player's action block.
    """
    if br.channels < 2:
        raise ValueError(f"construction needs at least 2 channels, got {br.channels}")
    d_in, d_out = br.d_in, br.d_out
    d = d_in + d_out
    n = graph.n
    net = NTM(graph, player=player, depth=depth, channels=br.channels,
              hidden_dim=d, d_in=d_in, d_out=d_out,
              activation="relu", skip=False, vector_output=False)

    # input lift: per-vertex [I; 0]
    w_in = np.zeros((n * d_in, n * d))
    for p in range(n):
        w_in[p * d_in:(p + 1) * d_in, p * d:p * d + d_in] = np.eye(d_in)
    net.w_in.value[:] = w_in * net.w_in.mask
    net.b_in.value[:] = 0.0

    c = np.zeros(br.channels)
    c[0], c[1] = 1.0, -1.0
    for k in range(depth - 1):
        net.b[k].value[:] = 0.0
        for r in range(br.channels):
            w = np.zeros((n * d, n * d))  # stored input-major: w[q-block, p-block]
            h = np.zeros(n * d)
            g = np.zeros(n * d)
            for p in range(n):
                rows = slice(p * d, (p + 1) * d)
                block_pp = np.zeros((d, d))
                block_pp[:d_in, :d_in] = c[r] * np.eye(d_in)
                block_pp[d_in:, :d_in] = br.gamma_x[p][r][p]
                w[rows, rows] = block_pp.T
                for q in graph.neighbors(p):
                    block_pq = np.zeros((d, d))
                    block_pq[d_in:, :d_in] = br.gamma_x[p][r][q]
                    block_pq[d_in:, d_in:] = br.gamma_a[p][r][q]
                    w[q * d:(q + 1) * d, rows] = block_pq.T
                h[p * d:p * d + d_in] = 0.0
                h[p * d + d_in:(p + 1) * d] = br.eta[p][r]
                g[p * d:p * d + d_in] = c[r]
                g[p * d + d_in:(p + 1) * d] = br.beta[p][r]
            net.w[k][r].value[:] = w * net.w[k][r].mask
            net.h[k][r].value[:] = h
            net.g[k][r].value[:] = g

    w_out = np.zeros((n * d, d_out))
    w_out[player * d + d_in:(player + 1) * d, :] = np.eye(d_out)
    net.w_out.value[:] = w_out * net.w_out.mask
    net.b_out.value[:] = 0.0
    return net


@dataclass
class BoundCheckRow:
    depth: int
    sup_error: float
    bound: float
    passed: bool


def uat_bound_table(game: ContractionGame, br: BestResponseNet, delta: float,
                    player: int, depths, n_samples: int, rng: np.random.Generator):
    """Measured sup error of the constructed NTM against the bound, per depth.

    The bound is pointwise:  delta/(1-rho) + rho^(K-1) |phi_hat(x)|_inf.
    Also reports the worst deviation from the response-net fixed-point
    iterate, which the construction should match to machine precision.
    """
    x = game.sample_states(n_samples, rng)
    phi_hat = game.equilibrium(x)
    phi_norm = np.max(np.abs(phi_hat), axis=1)
    rows = []
    iterate_gap = 0.0
    for depth in depths:
        net = construct_ntm(game.graph, br, depth, player)
        out = net.forward(x)[:, 0]
        bound = delta / (1.0 - game.rho) + game.rho ** (depth - 1) * phi_norm
        err = np.abs(out - phi_hat[:, player])
        tilde = fixed_point_iterate(br.evaluate, x, game.graph.n, depth - 1)[:, player]
        iterate_gap = max(iterate_gap, float(np.max(np.abs(out - tilde))))
        rows.append(BoundCheckRow(depth, float(err.max()), float(bound.max()),
                                  bool(np.all(err <= bound + 1e-12))))
    return rows, iterate_gap
