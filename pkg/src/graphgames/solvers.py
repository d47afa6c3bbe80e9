"""Fictitious-play training: direct parameterization and Deep BSDE.

One round updates every player once, in a freshly sampled random order;
within a player's update, Adam runs for a fixed number of epochs on fresh
Monte-Carlo batches.  Each player keeps one independent network per grid
node, all updated jointly from a single scalar loss per epoch.

Direct parameterization minimizes the simulated expected cost through a
differentiable Euler rollout; the other players' actions are detached, so
gradients reach only the updating player's networks.

Deep BSDE simulates the auxiliary forward process without gradients (its
drift involves only the frozen opponents and a reference control), rolls
the value process forward on the tape through the per-node adjoint
networks, and penalizes the squared terminal mismatch.  Strategies are
recovered from the adjoint output as
alpha_i(t, x) = -q (L x)_i - Z_i(t, x) / sigma.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .games import GameModel
from .graphs import laplacian
from .networks import FNN, NTM
from .rng import RandomSource
from .simulate import TimeGrid, draw_initial_states, draw_noise


class UnsupportedSolverError(RuntimeError):
    """Solver/model combination outside the method's scope."""


@dataclass(frozen=True)
class TrainConfig:
    n_t: int = 50
    rounds: int = 40
    epochs: int = 150
    batch: int = 256
    lr: float = 0.001
    gamma: float = 0.5
    tau: int = 30
    arch: str = "ntm"       # fnn | ntm
    solver: str = "dp"      # dp | dbsde
    ntm_m: int = 3
    ntm_k: int = 2
    fnn_hidden: int = 32
    skip: bool = True
    seed: int = 0

    def __post_init__(self):
        if min(self.n_t, self.rounds, self.epochs, self.batch) < 0:
            raise ValueError("counts must be nonnegative")
        if self.arch not in ("fnn", "ntm"):
            raise ValueError(f"unknown arch {self.arch!r}")
        if self.solver not in ("dp", "dbsde"):
            raise ValueError(f"unknown solver {self.solver!r}")


def _make_net(cfg: TrainConfig, game: GameModel, player: int, rng, vector=False):
    n = game.n_players
    if cfg.arch == "fnn":
        out_dim = n if vector else 1
        return FNN([n, cfg.fnn_hidden, out_dim], activation="relu", skip=cfg.skip, rng=rng)
    return NTM(game.graph, player, depth=cfg.ntm_k, channels=cfg.ntm_m,
               activation="relu", skip=cfg.skip, vector_output=vector, rng=rng)


class _StackedFNN:
    """All players' same-shape FNNs evaluated in one batched pass."""

    def __init__(self, nets):
        self.act = np.maximum if nets[0].activation == "relu" else np.tanh
        self.relu = nets[0].activation == "relu"
        self.skip = nets[0].skip
        self.sizes = nets[0].layer_sizes
        self.weights = [np.stack([net.weights[k].value for net in nets])
                        for k in range(len(nets[0].weights))]
        self.biases = [np.stack([net.biases[k].value[None] for net in nets])
                       for k in range(len(nets[0].biases))]

    def outputs(self, x: np.ndarray) -> np.ndarray:
        """x [B, N] -> [P, B, d_out]."""
        z = np.broadcast_to(x, (self.weights[0].shape[0],) + x.shape)
        last = len(self.weights) - 1
        for k in range(last):
            u = z @ self.weights[k] + self.biases[k]
            znew = np.maximum(u, 0.0) if self.relu else np.tanh(u)
            if self.skip and self.sizes[k] == self.sizes[k + 1]:
                znew = znew + z
            z = znew
        return z @ self.weights[last] + self.biases[last]


class _StackedNTM:
    """All players' same-shape NTMs evaluated in one batched pass.

    Channels are folded into the leading matmul axis: per hidden layer the
    weights live in an [M, P, N, N] block, so one call covers every
    (channel, player) pair.
    """

    def __init__(self, nets):
        net0 = nets[0]
        self.relu = net0.activation == "relu"
        self.skip = net0.skip
        self.depth = net0.depth
        self.channels = net0.channels
        m, pl = self.channels, len(nets)
        self.w = [np.stack([[net.w[k][r].value for net in nets] for r in range(m)])
                  for k in range(self.depth - 1)]                      # [M, P, N, N]
        self.h = [np.stack([[net.h[k][r].value[None] for net in nets] for r in range(m)])
                  for k in range(self.depth - 1)]                      # [M, P, 1, N]
        self.g = [np.stack([[net.g[k][r].value[None] for net in nets] for r in range(m)])
                  for k in range(self.depth - 1)]
        self.b = [np.stack([net.b[k].value[None] for net in nets])
                  for k in range(self.depth - 1)]                      # [P, 1, N]
        self.w_out = np.stack([net.w_out.value for net in nets])       # [P, N, d_out]
        self.b_out = np.stack([np.atleast_1d(net.b_out.value)[None] for net in nets])

    def outputs(self, x: np.ndarray) -> np.ndarray:
        """x [B, N] -> [P, B, d_out]; 1-D nets only (identity input step)."""
        z = np.broadcast_to(x, (self.w_out.shape[0],) + x.shape)
        for k in range(self.depth - 1):
            u = np.matmul(z[None], self.w[k]) + self.h[k]   # [M, P, B, N]
            s = np.maximum(u, 0.0) if self.relu else np.tanh(u)
            acc = (self.g[k] * s).sum(axis=0) + self.b[k]
            z = acc + z if self.skip else acc
        return z @ self.w_out + self.b_out


def _make_stack(nets):
    if all(type(net) is NTM and net.trivial_input for net in nets):
        return _StackedNTM(nets)
    if all(type(net) is FNN for net in nets):
        return _StackedFNN(nets)
    return None


class StrategyProfile:
    """Per (player, grid node) feedback networks."""

    def __init__(self, game: GameModel, grid: TimeGrid, nets):
        self.game = game
        self.grid = grid
        self.nets = nets  # nets[i][k]
        self._stacks = [None] * grid.steps

    def node_index(self, t: float) -> int:
        return min(int(t / self.grid.h + 1e-9), self.grid.steps - 1)

    def invalidate(self):
        """Drop stacked parameter copies after an in-place parameter update."""
        self._stacks = [None] * self.grid.steps

    def _stack(self, k: int):
        s = self._stacks[k]
        if s is None:
            s = _make_stack([self.nets[i][k] for i in range(self.game.n_players)])
            self._stacks[k] = s if s is not None else False
        return s or None

    def __call__(self, t, x: np.ndarray) -> np.ndarray:
        """All players' actions at states x [B, N] (no gradients)."""
        k = self.node_index(t)
        stack = self._stack(k)
        if stack is not None:
            return stack.outputs(x)[:, :, 0].T
        cols = [self.nets[i][k].forward(x)[:, 0] for i in range(self.game.n_players)]
        return np.stack(cols, axis=1)

    def player_action(self, i: int, k: int, x, tape=None):
        """Player i's action column [B, 1] at grid node k."""
        return self.nets[i][k].forward(x, tape)

    def player_parameters(self, i: int):
        params = []
        for net in self.nets[i]:
            params.extend(net.parameters())
        return params

    def named_parameters(self):
        out = []
        for i, slices in enumerate(self.nets):
            for k, net in enumerate(slices):
                for p in net.parameters():
                    out.append((f"player{i + 1}/t{k}/{p.name}", p))
        return out


class CallableProfile:
    """Adapter exposing a plain feedback ``(t, x) -> [B, N]`` as a profile."""

    def __init__(self, game: GameModel, grid: TimeGrid, fn):
        self.game = game
        self.grid = grid
        self.fn = fn

    def node_index(self, t: float) -> int:
        return min(int(t / self.grid.h + 1e-9), self.grid.steps - 1)

    def __call__(self, t, x):
        return self.fn(t, x)

    def player_action(self, i, k, x, tape=None):
        return self.fn(k * self.grid.h, ad._val(x))[:, i:i + 1]

    def player_parameters(self, i):
        return []


class FBSDEState:
    """Adjoint networks (one per grid node, vector output) and the initial-value net."""

    def __init__(self, game: GameModel, grid: TimeGrid, znets, y0nets):
        self.game = game
        self.grid = grid
        self.znets = znets    # znets[i][k], R^N -> R^N
        self.y0nets = y0nets  # y0nets[i], R^N -> R
        self._stacks = [None] * grid.steps

    def node_index(self, t: float) -> int:
        return min(int(t / self.grid.h + 1e-9), self.grid.steps - 1)

    def invalidate(self):
        self._stacks = [None] * self.grid.steps

    def adjoint_diagonal(self, k: int, x: np.ndarray) -> np.ndarray:
        """Own-coordinate adjoint outputs Z_j(t_k, x)_j for all players: [B, N]."""
        s = self._stacks[k]
        if s is None:
            s = self._stacks[k] = _make_stack([self.znets[j][k] for j in range(self.game.n_players)])
        if s is not None and s is not False:
            outs = s.outputs(x)  # [P, B, N]
            idx = np.arange(self.game.n_players)
            return outs[idx, :, idx].T
        cols = [self.znets[j][k].forward(x)[:, j] for j in range(self.game.n_players)]
        return np.stack(cols, axis=1)

    def player_parameters(self, i: int):
        params = list(self.y0nets[i].parameters())
        for net in self.znets[i]:
            params.extend(net.parameters())
        return params

    def named_parameters(self):
        out = []
        for i in range(self.game.n_players):
            for p in self.y0nets[i].parameters():
                out.append((f"player{i + 1}/y0/{p.name}", p))
            for k, net in enumerate(self.znets[i]):
                for p in net.parameters():
                    out.append((f"player{i + 1}/t{k}/{p.name}", p))
        return out

    def recovered_strategy(self):
        """Feedback (t, x) -> [B, N] via the adjoint recovery formula."""
        game = self.game
        sigma = game.sigma_const

        def strategy(t, x):
            k = self.node_index(t)
            ref = game.reference_control(t, x)
            return ref - self.adjoint_diagonal(k, x) / sigma

        return strategy


def build_profile(game: GameModel, cfg: TrainConfig, rng_source: RandomSource) -> StrategyProfile:
    grid = TimeGrid(game.horizon, cfg.n_t)
    nets = [[_make_net(cfg, game, i, rng_source.stream("init", i, k))
             for k in range(cfg.n_t)] for i in range(game.n_players)]
    return StrategyProfile(game, grid, nets)


def build_fbsde(game: GameModel, cfg: TrainConfig, rng_source: RandomSource) -> FBSDEState:
    if game.controlled_diffusion:
        raise UnsupportedSolverError(
            f"model '{game.name}' has controlled diffusion; the Deep BSDE method "
            f"cannot be applied to it")
    grid = TimeGrid(game.horizon, cfg.n_t)
    znets = [[_make_net(cfg, game, i, rng_source.stream("z-init", i, k), vector=True)
              for k in range(cfg.n_t)] for i in range(game.n_players)]
    y0nets = [FNN([game.n_players, 32, 32, 1], activation="tanh",
                  rng=rng_source.stream("y0-init", i)) for i in range(game.n_players)]
    return FBSDEState(game, grid, znets, y0nets)


def dp_player_loss(game: GameModel, profile, i: int, x0: np.ndarray,
                   noise: np.ndarray, tape=None):
    """Differentiable Monte-Carlo cost of player i under the current profile.

    Opponents' actions are evaluated on detached states; with ``tape=None``
    the whole rollout is a plain numpy evaluation and a float is returned.
    """
    grid = profile.grid
    h, sqh = grid.h, np.sqrt(grid.h)
    n = game.n_players
    x = x0
    cost = None
    for k in range(grid.steps):
        t = k * h
        xv = ad._val(x)
        others = profile(t, xv)
        own_col = profile.player_action(i, k, x, tape)
        alpha = ad.concat([others[:, :i], own_col, others[:, i + 1:]], axis=1)
        f_col = ad.slice_(game.running_cost(t, x, alpha), (slice(None), slice(i, i + 1)))
        cost = ad.scale(f_col, h) if cost is None else ad.add(cost, ad.scale(f_col, h))
        drift = game.drift(t, x, alpha)
        own_noise = ad.hadamard(game.diffusion_own(t, x, alpha), sqh * noise[:, k, 1:])
        com_noise = ad.hadamard(game.diffusion_common(t, x, alpha), sqh * noise[:, k, :1])
        x = ad.add(ad.add(x, ad.scale(drift, h)), ad.add(own_noise, com_noise))
        if not np.all(np.isfinite(ad._val(x))):
            raise ad.GradientError(f"non-finite state in player {i + 1}'s rollout at step {k + 1}")
    g_col = ad.slice_(game.terminal_cost(x), (slice(None), slice(i, i + 1)))
    total = ad.tmean(ad.add(cost, g_col))
    return total if tape is not None else float(ad._val(total))


def dbsde_player_loss(game: GameModel, fbsde: FBSDEState, i: int, x0: np.ndarray,
                      noise: np.ndarray, tape=None):
    """Terminal-mismatch loss of player i's value/adjoint networks.

    The auxiliary state follows the full drift with opponents' recovered
    strategies and the reference control in player i's slot; the value
    process carries the driver  f(t, x, a_hat(z)) - z_i^2 / sigma^2.
    """
    if game.controlled_diffusion:
        raise UnsupportedSolverError(
            f"model '{game.name}' has controlled diffusion; the Deep BSDE method "
            f"cannot be applied to it")
    grid = fbsde.grid
    h, sqh = grid.h, np.sqrt(grid.h)
    n = game.n_players
    sigma = game.sigma_const

    chi = np.empty((x0.shape[0], grid.steps + 1, n))
    chi[:, 0] = x0
    x = x0
    for k in range(grid.steps):
        t = k * h
        ref = game.reference_control(t, x)
        alpha = ref - fbsde.adjoint_diagonal(k, x) / sigma
        alpha[:, i] = ref[:, i]
        x = x + game.drift(t, x, alpha) * h + sigma * sqh * noise[:, k, 1:]
        if not np.all(np.isfinite(x)):
            raise ad.GradientError(f"non-finite auxiliary state at step {k + 1}")
        chi[:, k + 1] = x

    y = fbsde.y0nets[i].forward(chi[:, 0], tape)
    for k in range(grid.steps):
        t = k * h
        xk = chi[:, k]
        z = fbsde.znets[i][k].forward(xk, tape)
        alpha_hat = game.minimizer(t, xk, z)
        f_col = ad.slice_(game.running_cost(t, xk, alpha_hat), (slice(None), slice(i, i + 1)))
        z_col = ad.slice_(z, (slice(None), slice(i, i + 1)))
        driver = ad.add(f_col, ad.scale(ad.square(z_col), -1.0 / sigma ** 2))
        mart = ad.tsum(ad.hadamard(z, sqh * noise[:, k, 1:]), axis=1, keepdims=True)
        y = ad.add(ad.add(y, ad.scale(driver, -h)), mart)
    g_col = game.terminal_cost(chi[:, -1])[:, i:i + 1]
    loss = ad.tmean(ad.square(ad.sub(y, g_col)))
    return loss if tape is not None else float(ad._val(loss))


@dataclass
class TrainResult:
    config: TrainConfig
    profile: StrategyProfile = None
    fbsde: FBSDEState = None
    history: list = field(default_factory=list)  # (round, player 1-based, epoch, loss)
    wall_seconds: float = 0.0

    def strategy(self):
        """Trained feedback (t, x) -> [B, N]."""
        if self.fbsde is not None:
            return self.fbsde.recovered_strategy()
        return self.profile

    def named_parameters(self):
        holder = self.fbsde if self.fbsde is not None else self.profile
        return holder.named_parameters()

    def history_csv(self) -> str:
        lines = ["round,player,epoch,loss"]
        for (r, i, e, loss) in self.history:
            lines.append(f"{r},{i},{e},{loss!r}")
        return "\n".join(lines) + "\n"


def dfp_train(game: GameModel, cfg: TrainConfig, seed=None) -> TrainResult:
    """Alternating fictitious play: random player order per round."""
    rs = RandomSource(cfg.seed if seed is None else seed)
    if cfg.solver == "dp":
        profile = build_profile(game, cfg, rs)
        fbsde = None
        loss_fn = lambda i, x0, noise, tape: dp_player_loss(game, profile, i, x0, noise, tape)
        player_params = profile.player_parameters
    else:
        fbsde = build_fbsde(game, cfg, rs)
        profile = None
        loss_fn = lambda i, x0, noise, tape: dbsde_player_loss(game, fbsde, i, x0, noise, tape)
        player_params = fbsde.player_parameters
    n = game.n_players
    history = []
    started = time.perf_counter()
    holder = profile if profile is not None else fbsde
    for r in range(cfg.rounds):
        lr = ad.lr_schedule(cfg.lr, r, cfg.gamma, cfg.tau)
        order = rs.stream("order", r).permutation(n)
        for i in (int(v) for v in order):
            params = player_params(i)
            for e in range(cfg.epochs):
                x0 = draw_initial_states(game, cfg.batch, rs.stream("x0", r, i, e))
                noise = draw_noise(cfg.batch, cfg.n_t, n, rs.stream("noise", r, i, e))
                with ad.Tape() as tape:
                    loss = loss_fn(i, x0, noise, tape)
                    grads = ad.backward(loss)
                ad.adam_step(params, grads, lr)
                history.append((r, i + 1, e, float(loss.value)))
            holder.invalidate()  # player i's parameters changed in place
    return TrainResult(cfg, profile, fbsde, history, time.perf_counter() - started)
