"""
Contention graphs and their Laplacian spectrum
===============================================

Drop ten access points in a 1000 m square, connect the pairs that can hear
each other, and look at the graph Laplacian the network later filters on.
"""

import numpy as np

from chanalloc import TopologyConfig, generate_topology, laplacian_decompose

cfg = TopologyConfig(n_aps=10, region_side=1000.0, cs_range=550.0)
topo = generate_topology(cfg, seed=7)
print("positions (m):\n", np.round(topo.positions).astype(int))
print("adjacency:\n", topo.adjacency)
print("degrees:", topo.adjacency.sum(axis=1))

# eigenvalues come back ascending; the number of zeros counts the components
dec = laplacian_decompose(topo)
print("eigenvalues:", np.round(dec.eigenvalues, 4) + 0.0)
print("components:", int(np.sum(np.abs(dec.eigenvalues) < 1e-9)))

# U is orthonormal and diagonalises L
u = dec.eigenvectors
print("max |U^T U - I| =", np.abs(u.T @ u - np.eye(10)).max())
print("max |L U - U diag(lam)| =", np.abs(dec.laplacian @ u - u * dec.eigenvalues).max())

# same seed, same graph; topologies serialise to JSON
assert generate_topology(cfg, 7) == topo
print(topo.to_json()[:80], "...")
