"""
Canonical labels for coloured graphs
====================================

Relabelled copies of a channel assignment collapse onto one canonical form,
so the agent sees a single state for all of them.
"""

import numpy as np

from chanalloc import ColoredGraph, canonical_form, is_isomorphic

rng = np.random.default_rng(0)
adj = np.triu(rng.random((8, 8)) < 0.4, 1).astype(int)
adj = adj + adj.T
g = ColoredGraph(adj, rng.integers(0, 3, 8))

forms = {canonical_form(g.permuted(rng.permutation(8))).canonical_bytes for _ in range(50)}
print("distinct canonical forms over 50 relabellings:", len(forms))

form = canonical_form(g)
print("canonical bytes:", form.canonical_bytes.hex())
print("node i goes to position perm[i]:", form.permutation)
print("canonical colours:", form.graph(g).colors)

# colours are channel identities, not just a partition
h = ColoredGraph(adj, (g.colors + 1) % 3)
print("same graph with channels rotated is isomorphic?", is_isomorphic(g, h))
