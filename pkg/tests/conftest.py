import numpy as np
import pytest

from graphgames import autodiff as ad
from graphgames.graphs import Graph, make_graph


def generator_graphs(max_n: int, seed: int = 3) -> list:
    """One graph per generator kind, a few sizes each, capped at max_n vertices."""
    out = []
    for n in (3, 5, max_n):
        if n <= max_n:
            out.append((f"cycle{n}", make_graph("cycle", n)))
            out.append((f"star{n}", make_graph("star", n)))
    for n in (2, 4, max_n):
        if n <= max_n:
            out.append((f"complete{n}", make_graph("complete", n)))
    for n in (4, max_n - max_n % 2):
        if n >= 4:
            out.append((f"bipartite{n}", make_graph("complete_bipartite", n)))
    for n in (5, max_n):
        if n >= 2:
            out.append((f"rst{n}", make_graph("random_spanning_tree", n, seed=seed)))
    seen = set()
    uniq = []
    for name, g in out:
        if name not in seen:
            seen.add(name)
            uniq.append((name, g))
    return uniq


def finite_difference_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function of an array."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for j in range(flat.size):
        old = flat[j]
        flat[j] = old + h
        up = f(x)
        flat[j] = old - h
        dn = f(x)
        flat[j] = old
        gflat[j] = (up - dn) / (2.0 * h)
    return g


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / max(na + nb, 1e-12))


def param_gradcheck(net, x: np.ndarray, params=None, h: float = 1e-6) -> float:
    """Worst relative error between tape and finite-difference gradients of
    mean(square(net(x))) over trainable parameter entries."""
    with ad.Tape() as tape:
        out = net.forward(x, tape)
        loss = ad.tmean(ad.square(out))
        grads = ad.backward(loss)

    def loss_value():
        return float(np.mean(net.forward(x) ** 2))

    worst = 0.0
    for p in (params if params is not None else net.parameters()):
        indices = np.argwhere(p.mask) if p.mask is not None else np.argwhere(np.ones(p.value.shape, bool))
        ga = grads[p]
        for idx in map(tuple, indices):
            old = p.value[idx]
            p.value[idx] = old + h
            up = loss_value()
            p.value[idx] = old - h
            dn = loss_value()
            p.value[idx] = old
            fd = (up - dn) / (2.0 * h)
            rel = abs(ga[idx] - fd) / max(abs(ga[idx]) + abs(fd), 1e-8)
            worst = max(worst, rel)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)
