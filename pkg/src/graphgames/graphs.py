"""Simple connected undirected graphs: generators, the normalized Laplacian,
neighborhood queries, and the span of Laplacian powers.

Vertices are 1-based in documentation and serialized form, 0-based in all
array indexing.  All functions here are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GraphParameterError(ValueError):
    """Invalid vertex count or parameters for a generator."""


GRAPH_KINDS = ("cycle", "star", "complete", "complete_bipartite", "random_spanning_tree")


@dataclass(frozen=True)
class Graph:
    """Simple connected undirected graph on vertices 0..n-1."""

    n: int
    edges: frozenset  # of (i, j) pairs with i < j, 0-based

    def __post_init__(self):
        if self.n < 2:
            raise GraphParameterError(f"need at least 2 vertices, got {self.n}")
        for (i, j) in self.edges:
            if not (0 <= i < j < self.n):
                raise GraphParameterError(f"bad edge ({i}, {j}) for n={self.n}")
        if not self._connected():
            raise GraphParameterError("graph is not connected")

    def _connected(self) -> bool:
        return bool((self.bfs_distances(0) >= 0).all())

    @property
    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for (i, j) in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.float64)
        for (i, j) in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def neighbors(self, i: int) -> list:
        """Sorted 0-based neighbor list of vertex i."""
        out = []
        for (u, v) in self.edges:
            if u == i:
                out.append(v)
            elif v == i:
                out.append(u)
        return sorted(out)

    def bfs_distances(self, i: int) -> np.ndarray:
        """BFS distance from vertex i to every vertex (-1 if unreachable)."""
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[i] = 0
        frontier = [i]
        nbrs = {v: [] for v in range(self.n)}
        for (u, v) in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        d = 0
        while frontier:
            d += 1
            nxt = []
            for u in frontier:
                for v in nbrs[u]:
                    if dist[v] < 0:
                        dist[v] = d
                        nxt.append(v)
            frontier = nxt
        return dist


def make_graph(kind: str, n: int, seed: int = 0) -> Graph:
    """Named generator.  ``seed`` is used only by random_spanning_tree."""
    if kind == "cycle":
        if n < 3:
            raise GraphParameterError(f"cycle needs n >= 3, got {n}")
        edges = {(i, i + 1) for i in range(n - 1)} | {(0, n - 1)}
    elif kind == "star":
        if n < 3:
            raise GraphParameterError(f"star needs n >= 3, got {n}")
        edges = {(0, i) for i in range(1, n)}
    elif kind == "complete":
        if n < 2:
            raise GraphParameterError(f"complete needs n >= 2, got {n}")
        edges = {(i, j) for i in range(n) for j in range(i + 1, n)}
    elif kind == "complete_bipartite":
        if n < 4 or n % 2:
            raise GraphParameterError(f"complete_bipartite K_mm needs even n >= 4, got {n}")
        m = n // 2
        edges = {(i, j) for i in range(m) for j in range(m, n)}
    elif kind == "random_spanning_tree":
        if n < 2:
            raise GraphParameterError(f"random_spanning_tree needs n >= 2, got {n}")
        edges = _prufer_tree(n, np.random.Generator(np.random.Philox(key=seed)))
    else:
        raise GraphParameterError(f"unknown graph kind {kind!r}")
    return Graph(n=n, edges=frozenset(edges))


def _prufer_tree(n: int, rng: np.random.Generator) -> set:
    """Uniform labeled tree via a random Prufer sequence."""
    if n == 2:
        return {(0, 1)}
    seq = rng.integers(0, n, size=n - 2)
    degree = np.ones(n, dtype=np.int64)
    for s in seq:
        degree[s] += 1
    edges = set()
    import heapq

    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    for s in seq:
        leaf = heapq.heappop(leaves)
        edges.add((min(leaf, int(s)), max(leaf, int(s))))
        degree[s] -= 1
        if degree[s] == 1:
            heapq.heappush(leaves, int(s))
    u = heapq.heappop(leaves)
    v = heapq.heappop(leaves)
    edges.add((min(u, v), max(u, v)))
    return edges


def laplacian(g: Graph) -> np.ndarray:
    """Normalized Laplacian: diag 1, off-diagonal -1/sqrt(d_i d_j) on edges."""
    L = np.eye(g.n, dtype=np.float64)
    d = g.degrees.astype(np.float64)
    for (i, j) in g.edges:
        L[i, j] = L[j, i] = -1.0 / np.sqrt(d[i] * d[j])
    return L


def neighborhood(g: Graph, i: int, ell: int) -> set:
    """Vertices at BFS distance exactly ``ell`` from vertex i (0-based)."""
    if not 0 <= i < g.n:
        raise GraphParameterError(f"vertex {i} out of range for n={g.n}")
    if ell < 1:
        raise GraphParameterError(f"ell must be >= 1, got {ell}")
    dist = g.bfs_distances(i)
    return {int(v) for v in np.flatnonzero(dist == ell)}


def diameter(g: Graph) -> int:
    return int(max(g.bfs_distances(i).max() for i in range(g.n)))


def multi_hop_operator(L: np.ndarray, ell: int) -> np.ndarray:
    """I - (I - L)^ell."""
    if ell < 1:
        raise GraphParameterError(f"ell must be >= 1, got {ell}")
    n = L.shape[0]
    eye = np.eye(n)
    return eye - np.linalg.matrix_power(eye - L, ell)


@dataclass
class PolySpaceProjection:
    """Least-squares projection onto span{I, L, ..., L^(N-1)}."""

    coefficients: np.ndarray
    residual: float
    basis: str  # "power" if coefficients refer to {L^0..L^(N-1)}, else "orthonormal"
    projection: np.ndarray = field(repr=False, default=None)


def laplacian_powers(L: np.ndarray) -> np.ndarray:
    """Stack [I, L, L^2, ..., L^(N-1)], shape (N, N, N)."""
    n = L.shape[0]
    powers = np.empty((n, n, n))
    powers[0] = np.eye(n)
    for k in range(1, n):
        powers[k] = powers[k - 1] @ L
    return powers


_COND_LIMIT = 1e7


def project_onto_poly_space(A: np.ndarray, L: np.ndarray) -> PolySpaceProjection:
    """Project ``A`` onto the span of Laplacian powers (Frobenius metric).

    Coefficients are reported in the power basis when that basis is
    well-conditioned, otherwise in an orthonormalized basis (flagged).
    The residual is computed from an orthonormal basis either way, so a
    rank-deficient power basis is harmless.
    """
    A = np.asarray(A, dtype=np.float64)
    n = L.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix shape {A.shape} does not match Laplacian {L.shape}")
    basis = laplacian_powers(L).reshape(n, n * n).T  # columns are vec(L^k)
    target = A.reshape(n * n)
    # rank-revealing orthonormal basis of the column space (the power basis is
    # rank-deficient whenever the minimal polynomial has degree < N)
    u, s, _ = np.linalg.svd(basis, full_matrices=False)
    keep = s > s[0] * max(basis.shape) * np.finfo(np.float64).eps
    q = u[:, keep]
    proj_vec = q @ (q.T @ target)
    residual = float(np.linalg.norm(target - proj_vec))
    if s[-1] > 0 and s[0] / s[-1] < _COND_LIMIT:
        coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
        return PolySpaceProjection(coef, residual, "power", proj_vec.reshape(n, n))
    coef = q.T @ target
    return PolySpaceProjection(coef, residual, "orthonormal", proj_vec.reshape(n, n))


def to_edge_list(g: Graph) -> str:
    """Serialize: first line ``N <n>``, then 1-based ``i j`` lines, i<j, sorted."""
    lines = [f"N {g.n}"]
    for (i, j) in sorted(g.edges):
        lines.append(f"{i + 1} {j + 1}")
    return "\n".join(lines) + "\n"


def from_edge_list(text: str) -> Graph:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 2 or head[0] != "N":
        raise GraphParameterError(f"bad edge-list header {lines[0]!r}")
    n = int(head[1])
    edges = set()
    for ln in lines[1:]:
        i, j = (int(tok) for tok in ln.split())
        edges.add((i - 1, j - 1))
    return Graph(n=n, edges=frozenset(edges))
