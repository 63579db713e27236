"""Canonical labeling of node-coloured graphs by individualization-refinement.

The search tree is built from isomorphism-invariant choices only (colour
refinement to an equitable partition, first smallest non-singleton cell as
target), so the lexicographically smallest leaf encoding is a canonical
label. Branches are pruned with automorphisms: interchangeable twins in the
target cell, and automorphisms discovered from leaves with equal encodings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ColoredGraph:
    adjacency: np.ndarray
    colors: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.int8)
        colors = np.asarray(self.colors, dtype=np.int64)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if colors.shape != (adj.shape[0],):
            raise ValueError("one colour per node required")
        if not np.array_equal(adj, adj.T) or np.any(np.diag(adj)):
            raise ValueError("adjacency must be symmetric with zero diagonal")
        if adj.shape[0] > 255 or (colors.size and (colors.min() < 0 or colors.max() > 255)):
            raise ValueError("encoding supports at most 255 nodes and colours in [0, 255]")
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "colors", colors)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def permuted(self, perm) -> "ColoredGraph":
        """Relabel so that node ``i`` becomes node ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        return ColoredGraph(self.adjacency[np.ix_(inv, inv)], self.colors[inv])

    def __eq__(self, other):
        if not isinstance(other, ColoredGraph):
            return NotImplemented
        return (np.array_equal(self.adjacency, other.adjacency)
                and np.array_equal(self.colors, other.colors))


@dataclass(frozen=True, eq=False)
class CanonicalForm:
    canonical_bytes: bytes
    permutation: np.ndarray  # original index -> canonical position

    def graph(self, original: ColoredGraph) -> ColoredGraph:
        return original.permuted(self.permutation)


def encode(graph: ColoredGraph) -> bytes:
    """N, packed upper-triangle bits (row-major, big-endian), one byte per colour."""
    n = graph.n
    iu = np.triu_indices(n, k=1)
    bits = np.packbits(graph.adjacency[iu].astype(np.uint8), bitorder="big")
    return bytes([n]) + bits.tobytes() + graph.colors.astype(np.uint8).tobytes()


def _encode_perm(adj: np.ndarray, colors: np.ndarray, order: list[int]) -> bytes:
    # order[k] = original node placed at canonical position k
    idx = np.asarray(order)
    sub = adj[np.ix_(idx, idx)]
    iu = np.triu_indices(len(order), k=1)
    bits = np.packbits(sub[iu].astype(np.uint8), bitorder="big")
    return bytes([len(order)]) + bits.tobytes() + colors[idx].astype(np.uint8).tobytes()


def _refine(cells: list[list[int]], nbrs: list[list[int]]) -> list[list[int]]:
    """Split cells until equitable; sub-cells ordered by neighbour-count signature."""
    while True:
        cell_of = {}
        for ci, cell in enumerate(cells):
            for v in cell:
                cell_of[v] = ci
        new_cells = []
        changed = False
        for cell in cells:
            if len(cell) == 1:
                new_cells.append(cell)
                continue
            groups: dict[tuple, list[int]] = {}
            for v in cell:
                counts: dict[int, int] = {}
                for u in nbrs[v]:
                    c = cell_of[u]
                    counts[c] = counts.get(c, 0) + 1
                groups.setdefault(tuple(sorted(counts.items())), []).append(v)
            if len(groups) > 1:
                changed = True
                for key in sorted(groups):
                    new_cells.append(groups[key])
            else:
                new_cells.append(cell)
        cells = new_cells
        if not changed:
            return cells


def _orbit_rep(parent: dict[int, int], v: int) -> int:
    while parent.get(v, v) != v:
        v = parent[v]
    return v


def canonical_form(graph: ColoredGraph) -> CanonicalForm:
    adj = graph.adjacency
    colors = graph.colors
    n = graph.n
    if n == 0:
        return CanonicalForm(bytes([0]), np.zeros(0, dtype=np.int64))
    nbrs = [list(np.flatnonzero(adj[v]).tolist()) for v in range(n)]
    closed = [frozenset(nbrs[v]) | {v} for v in range(n)]
    open_ = [frozenset(nbrs[v]) for v in range(n)]

    initial = [list(np.flatnonzero(colors == c).tolist()) for c in sorted(set(colors.tolist()))]
    best: list = [None, None]  # encoding, order
    automorphisms: list[np.ndarray] = []

    def search(cells: list[list[int]], prefix: tuple[int, ...]) -> None:
        cells = _refine(cells, nbrs)
        target = None
        for ci, cell in enumerate(cells):
            if len(cell) > 1 and (target is None or len(cell) < len(cells[target])):
                target = ci
        if target is None:
            order = [cell[0] for cell in cells]
            code = _encode_perm(adj, colors, order)
            if best[0] is None or code < best[0]:
                best[0], best[1] = code, order
            elif code == best[0]:
                # order -> best order defines an automorphism
                gamma = np.empty(n, dtype=np.int64)
                gamma[np.asarray(order)] = np.asarray(best[1])
                automorphisms.append(gamma)
            return

        cell = cells[target]
        explored: list[int] = []
        for v in sorted(cell):
            if any(open_[v] == open_[u] or closed[v] == closed[u] for u in explored):
                continue
            parent: dict[int, int] = {}
            for gamma in automorphisms:
                if all(gamma[p] == p for p in prefix):
                    for x in range(n):
                        rx, ry = _orbit_rep(parent, x), _orbit_rep(parent, int(gamma[x]))
                        if rx != ry:
                            parent[max(rx, ry)] = min(rx, ry)
            rv = _orbit_rep(parent, v)
            if any(_orbit_rep(parent, u) == rv for u in explored):
                continue
            explored.append(v)
            rest = [u for u in cell if u != v]
            search(cells[:target] + [[v], rest] + cells[target + 1:], prefix + (v,))

    search(initial, ())
    perm = np.empty(n, dtype=np.int64)
    perm[np.asarray(best[1])] = np.arange(n)
    return CanonicalForm(best[0], perm)


def is_isomorphic(g1: ColoredGraph, g2: ColoredGraph) -> bool:
    if g1.n != g2.n:
        return False
    return canonical_form(g1).canonical_bytes == canonical_form(g2).canonical_bytes
