"""Tour of the graph layer: generators, the normalized Laplacian, hop
neighborhoods, and the span of Laplacian powers.

Run:  python3 demos/graph_basics.py
"""

import numpy as np

from graphgames.graphs import (diameter, laplacian, make_graph, multi_hop_operator,
                               neighborhood, project_onto_poly_space, to_edge_list)

print("== generators ==")
for kind, n in [("cycle", 10), ("star", 10), ("complete", 10),
                ("complete_bipartite", 10), ("random_spanning_tree", 10)]:
    g = make_graph(kind, n, seed=7)
    print(f"{kind:22s} |E| = {g.edge_count:3d}   diameter = {diameter(g)}")

g = make_graph("star", 4)
print("\nedge list serialization of the 4-vertex star:")
print(to_edge_list(g), end="")

print("\n== normalized Laplacian ==")
c10 = make_graph("cycle", 10)
L = laplacian(c10)
vals = np.linalg.eigvalsh(L)
print(f"cycle-10 spectrum in [0, 2]: min = {vals[0]:.2e}, max = {vals[-1]:.6f}")
print(f"kernel vector is sqrt(degrees): |L sqrt(d)| = "
      f"{np.linalg.norm(L @ np.sqrt(c10.degrees)):.2e}")

print("\n== exact-hop neighborhoods (vertex 1 of cycle-10, 1-based) ==")
for ell in range(1, 6):
    shell = sorted(v + 1 for v in neighborhood(c10, 0, ell))
    print(f"distance {ell}: {shell}")

print("\n== multi-hop interaction operator ==")
M2 = multi_hop_operator(L, 2)
print("I - (I-L)^2 equals 2L - L^2:", np.allclose(M2, 2 * L - L @ L))

print("\n== span of Laplacian powers ==")
proj = project_onto_poly_space(L @ L @ L, L)
print(f"L^3 projects onto span(I, L, ..., L^9) with residual {proj.residual:.2e}")
vecs = np.linalg.eigh(L)[1]
expL = (vecs * np.exp(vals)) @ vecs.T
print(f"exp(L) (an analytic function of L) residual {project_onto_poly_space(expL, L).residual:.2e}")
rank1 = np.outer(np.eye(10)[0], np.eye(10)[1])
print(f"an asymmetric rank-1 matrix residual  {project_onto_poly_space(rank1, L).residual:.2f}"
      f"  (not in the span)")
