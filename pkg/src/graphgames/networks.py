"""Network architectures: fully connected FNN, graph-masked NTM (scalar and
vector output, 1-D and block multi-dimensional), and the Chebyshev GCN.

Every architecture exposes ``forward(x, tape=None)``: with a tape, parameters
are lifted onto it and the output is differentiable; without one, the pass
runs on plain ndarrays.  Inputs are 2-D ``[batch, features]``.

Weight matrices are stored input-major (``[n_in, n_out]``, applied as
``x @ W``).  NTM aggregation weights exist exactly where the normalized
Laplacian is nonzero; frozen entries are zero forever (mask semantics in
:mod:`graphgames.autodiff`).
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .graphs import Graph, laplacian

ACTIVATIONS = {"relu": ad.relu, "tanh": ad.tanh}


def _fans_bound_zero(shape):
    return np.zeros(shape)


class FNN:
    """Feedforward net: layer_sizes = [d_in, H_1, ..., H_{K-1}, d_out]."""

    def __init__(self, layer_sizes, activation="tanh", skip=False, rng=None):
        if len(layer_sizes) < 3:
            raise ValueError(f"need at least [d_in, H, d_out], got {layer_sizes}")
        if any(s <= 0 for s in layer_sizes):
            raise ValueError(f"layer sizes must be positive: {layer_sizes}")
        if rng is None:
            rng = np.random.default_rng(0)
        self.layer_sizes = list(layer_sizes)
        self.activation = activation
        self.act = ACTIVATIONS[activation]
        self.skip = skip
        self.params = []
        self.weights = []
        self.biases = []
        for k in range(len(layer_sizes) - 1):
            n_in, n_out = layer_sizes[k], layer_sizes[k + 1]
            w = ad.Parameter(f"w{k}", ad.xavier_init((n_in, n_out), n_in, n_out, rng))
            b = ad.Parameter(f"b{k}", np.zeros(n_out))
            self.weights.append(w)
            self.biases.append(b)
            self.params.extend([w, b])

    def parameters(self):
        return list(self.params)

    def forward(self, x, tape=None):
        p = tape.watch if tape is not None else (lambda q: q.value)
        z = x
        last = len(self.weights) - 1
        for k in range(last):
            u = ad.add(ad.matmul(z, p(self.weights[k])), p(self.biases[k]))
            znew = self.act(u)
            if self.skip and self.layer_sizes[k] == self.layer_sizes[k + 1]:
                znew = ad.add(znew, z)
            z = znew
        return ad.add(ad.matmul(z, p(self.weights[last])), p(self.biases[last]))

    __call__ = forward


class NTM:
    """Graph-masked network of depth K with M message channels.

    Scalar mode approximates one player's feedback ``R^(N d_in) -> R^(d_out)``;
    vector mode (1-D only) maps ``R^N -> R^N`` with the output layer masked by
    the Laplacian pattern.  ``hidden_dim`` is the per-vertex width d; the 1-D
    network (d_in = d_out = d = 1) uses the identity pre-processing step and
    has no input-layer parameters.
    """

    def __init__(self, graph: Graph, player: int, depth: int, channels: int,
                 hidden_dim: int = 1, d_in: int = 1, d_out: int = 1,
                 activation="relu", skip=False, vector_output=False, rng=None):
        if depth < 2:
            raise ValueError(f"depth must be >= 2, got {depth}")
        if channels < 1:
            raise ValueError(f"channels must be >= 1, got {channels}")
        if not 0 <= player < graph.n:
            raise ValueError(f"player {player} out of range for n={graph.n}")
        if vector_output and (hidden_dim, d_in, d_out) != (1, 1, 1):
            raise ValueError("vector output is defined for the 1-D network only")
        if rng is None:
            rng = np.random.default_rng(0)
        self.graph = graph
        self.player = player
        self.depth = depth
        self.channels = channels
        self.d = hidden_dim
        self.d_in = d_in
        self.d_out = d_out
        self.activation = activation
        self.act = ACTIVATIONS[activation]
        self.skip = skip
        self.vector_output = vector_output

        n, d = graph.n, hidden_dim
        pattern = laplacian(graph) != 0.0  # I + adjacency support
        self.pattern = pattern
        block_mask = np.kron(pattern, np.ones((d, d), dtype=bool))
        self.params = []

        self.trivial_input = d_in == 1 and d == 1
        if self.trivial_input:
            self.w_in = self.b_in = None
        else:
            in_mask = np.kron(np.eye(n, dtype=bool), np.ones((d_in, d), dtype=bool))
            self.w_in = ad.Parameter(
                "w_in", ad.xavier_init((n * d_in, n * d), n * d_in, n * d, rng), mask=in_mask)
            self.b_in = ad.Parameter("b_in", np.zeros(n * d))
            self.params.extend([self.w_in, self.b_in])

        nd = n * d
        self.w = []
        self.h = []
        self.g = []
        self.b = []
        for k in range(depth - 1):
            wk, hk, gk = [], [], []
            for r in range(channels):
                wk.append(ad.Parameter(
                    f"w{k}c{r}", ad.xavier_init((nd, nd), nd, nd, rng), mask=block_mask))
                # positive pre-activation shift keeps ReLU channels alive on
                # the unit-box inputs this network trains on
                hk.append(ad.Parameter(f"h{k}c{r}", rng.uniform(0.0, 1.0 / np.sqrt(nd), nd)))
                # gates across channels form an [M, N d] block; fans follow it
                gk.append(ad.Parameter(
                    f"g{k}c{r}", ad.xavier_init(nd, channels, nd, rng)))
            bk = ad.Parameter(f"b{k}", np.zeros(nd))
            self.w.append(wk)
            self.h.append(hk)
            self.g.append(gk)
            self.b.append(bk)
            for r in range(channels):
                self.params.extend([wk[r], hk[r], gk[r]])
            self.params.append(bk)

        if vector_output:
            self.w_out = ad.Parameter(
                "w_out", ad.xavier_init((n, n), n, n, rng), mask=pattern.copy())
            self.b_out = ad.Parameter("b_out", np.zeros(n))
        else:
            row_mask = np.repeat(pattern[player], d)[:, None] & np.ones((1, d_out), dtype=bool)
            self.w_out = ad.Parameter(
                "w_out", ad.xavier_init((nd, d_out), nd, d_out, rng), mask=row_mask)
            self.b_out = ad.Parameter("b_out", np.zeros(d_out))
        self.params.extend([self.w_out, self.b_out])

    def parameters(self):
        return list(self.params)

    def forward(self, x, tape=None):
        p = tape.watch if tape is not None else (lambda q: q.value)
        if self.trivial_input:
            z = x
        else:
            z = ad.add(ad.matmul(x, p(self.w_in)), p(self.b_in))
        for k in range(self.depth - 1):
            acc = None
            for r in range(self.channels):
                u = ad.add(ad.matmul(z, p(self.w[k][r])), p(self.h[k][r]))
                term = ad.hadamard(p(self.g[k][r]), self.act(u))
                acc = term if acc is None else ad.add(acc, term)
            acc = ad.add(acc, p(self.b[k]))
            z = ad.add(acc, z) if self.skip else acc
        return ad.add(ad.matmul(z, p(self.w_out)), p(self.b_out))

    __call__ = forward


def top_eigenvalue(mat: np.ndarray, tol: float = 1e-10, max_iter: int = 20000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Falls back to a dense eigensolve if the iteration stalls.
    """
    n = mat.shape[0]
    rng = np.random.Generator(np.random.Philox(key=12345))
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam_prev = 0.0
    for _ in range(max_iter):
        w = mat @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        lam = float(v @ (mat @ v))
        if abs(lam - lam_prev) < tol:
            return lam
        lam_prev = lam
    return float(np.linalg.eigvalsh(mat)[-1])


class ChebGCN:
    """Chebyshev graph convolutional network (spectral filter order 1).

    feature_dims = [F_1=1, ..., F_K=1]; K-1 convolution layers on the scaled
    Laplacian followed by an affine readout.
    """

    def __init__(self, graph: Graph, feature_dims=(1, 64, 1), activation="relu", rng=None):
        dims = list(feature_dims)
        if len(dims) < 2 or dims[0] != 1 or dims[-1] != 1:
            raise ValueError(f"feature dims must start and end at 1, got {dims}")
        if rng is None:
            rng = np.random.default_rng(0)
        self.graph = graph
        self.feature_dims = dims
        self.act = ACTIVATIONS[activation]
        L = laplacian(graph)
        self.lambda_max = top_eigenvalue(L)
        self.scaled_laplacian = (2.0 / self.lambda_max) * L - np.eye(graph.n)
        self.params = []
        self.layers = []
        for k in range(len(dims) - 1):
            w1 = ad.Parameter(f"w{k}a", ad.xavier_init((dims[k], dims[k + 1]), dims[k], dims[k + 1], rng))
            w2 = ad.Parameter(f"w{k}b", ad.xavier_init((dims[k], dims[k + 1]), dims[k], dims[k + 1], rng))
            b = ad.Parameter(f"b{k}", np.zeros(dims[k + 1]))
            self.layers.append((w1, w2, b))
            self.params.extend([w1, w2, b])
        self.w_out = ad.Parameter("w_out", ad.xavier_init((graph.n, 1), graph.n, 1, rng))
        self.b_out = ad.Parameter("b_out", np.zeros(1))
        self.params.extend([self.w_out, self.b_out])

    def parameters(self):
        return list(self.params)

    def forward(self, x, tape=None):
        p = tape.watch if tape is not None else (lambda q: q.value)
        z = ad.slice_(x, (slice(None), slice(None), None))  # [B, N, 1]
        for (w1, w2, b) in self.layers:
            t1 = ad.matmul(z, p(w1))
            t2 = ad.matmul(ad.matmul(self.scaled_laplacian, z), p(w2))
            z = self.act(ad.add(ad.add(t1, t2), p(b)))
        z = ad.slice_(z, (slice(None), slice(None), 0))  # [B, N]
        return ad.add(ad.matmul(z, p(self.w_out)), p(self.b_out))

    __call__ = forward


# ---------------------------------------------------------------------------
# parameter accounting
# ---------------------------------------------------------------------------

def count_params(net) -> dict:
    """Trainable (mask-true) and frozen entry counts of a network."""
    trainable = sum(p.trainable_count for p in net.parameters())
    frozen = sum(p.frozen_count for p in net.parameters())
    return {"trainable": trainable, "frozen": frozen}


def fnn_width_n_count(n: int, depth: int) -> int:
    """Trainable parameters of the width-N FNN: (K-1)(N^2+N) + N + 1."""
    return (depth - 1) * (n * n + n) + n + 1


def ntm_param_bound(n: int, edge_count: int, depth: int, channels: int) -> int:
    """Upper bound M(K-1)(4N + 2|E|) + N + 1 on 1-D NTM trainables."""
    return channels * (depth - 1) * (4 * n + 2 * edge_count) + n + 1


def ntm_coupling_ratio(net: NTM) -> float:
    """Off-diagonal aggregation-weight density of a 1-D NTM per hidden layer,
    relative to the N^2 dense weight entries of the width-N FNN layer.

    Counted from the instantiated masks; approximates M * |E| / C(N, 2).
    """
    if net.d != 1:
        raise ValueError("coupling ratio is defined for the 1-D network")
    n = net.graph.n
    off = 0
    for r in range(net.channels):
        mask = net.w[0][r].mask
        off += int(mask.sum()) - int(np.trace(mask))
    return off / float(n * n)
