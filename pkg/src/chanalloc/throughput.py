"""Ideal-CSMA throughput on same-channel contention subgraphs.

Under the independent-set CSMA model each node alternates between backoff
and transmission; the stationary probability of a set of simultaneously
transmitting nodes is proportional to ``rho ** |set|`` whenever the set is
independent in the contention graph. A node's throughput is the total
probability of the sets containing it.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

DEFAULT_ACCESS_INTENSITY = 10.0
MAX_NODES_PER_CHANNEL = 25


class InstanceTooLarge(ValueError):
    pass


def one_hot_channels(assignments, n_channels: int) -> np.ndarray:
    """M x N channel matrix whose column i is the one-hot of ``assignments[i]``."""
    idx = np.asarray(assignments, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= n_channels):
        raise ValueError(f"channel index out of range [0, {n_channels})")
    c = np.zeros((n_channels, idx.size), dtype=np.int8)
    c[idx, np.arange(idx.size)] = 1
    return c


def channel_assignments(channels: np.ndarray) -> np.ndarray:
    c = np.asarray(channels)
    if c.ndim != 2 or not np.isin(c, (0, 1)).all() or not (c.sum(axis=0) == 1).all():
        raise ValueError("channel matrix must be M x N binary with one-hot columns")
    return c.argmax(axis=0)


def _as_assignments(channels) -> np.ndarray:
    c = np.asarray(channels)
    return channel_assignments(c) if c.ndim == 2 else c.astype(int)


def _adjacency(topology) -> np.ndarray:
    return np.asarray(getattr(topology, "adjacency", topology))


def conflict_count(topology, channels, ap: int) -> int:
    """Number of carrier-sensing neighbours of ``ap`` sharing its channel."""
    adj = _adjacency(topology)
    assign = _as_assignments(channels)
    n = adj.shape[0]
    if not 0 <= ap < n:
        raise IndexError(f"ap index {ap} out of range for {n} APs")
    return int(np.sum((adj[ap] != 0) & (assign == assign[ap])))


def _component_throughput(nodes: list[int], adj: np.ndarray, rho: float) -> dict[int, float]:
    # Independence polynomial by vertex deletion, memoised on the remaining vertex set.
    local = {v: k for k, v in enumerate(nodes)}
    closed = []
    for v in nodes:
        m = 1 << local[v]
        for j in np.flatnonzero(adj[v]):
            if int(j) in local:
                m |= 1 << local[int(j)]
        closed.append(m)

    @lru_cache(maxsize=None)
    def z(mask: int) -> float:
        if mask == 0:
            return 1.0
        low = mask & -mask
        k = low.bit_length() - 1
        return z(mask & ~low) + rho * z(mask & ~closed[k])

    full = (1 << len(nodes)) - 1
    total = z(full)
    return {v: rho * z(full & ~closed[local[v]]) / total for v in nodes}


def _components(adj: np.ndarray, nodes: list[int]) -> list[list[int]]:
    remaining = set(nodes)
    comps = []
    while remaining:
        start = min(remaining)
        stack, comp = [start], []
        remaining.discard(start)
        while stack:
            u = stack.pop()
            comp.append(u)
            for j in np.flatnonzero(adj[u]):
                j = int(j)
                if j in remaining:
                    remaining.discard(j)
                    stack.append(j)
        comps.append(sorted(comp))
    return comps


def csma_throughput(topology, channels, access_intensity: float = DEFAULT_ACCESS_INTENSITY) -> np.ndarray:
    """Per-AP normalised throughput; APs on different channels never interact.

    ``channels`` is either the M x N one-hot matrix or a length-N vector of
    channel indices.
    """
    if not access_intensity > 0:
        raise ValueError("access_intensity must be positive")
    adj = _adjacency(topology)
    assign = _as_assignments(channels)
    n = adj.shape[0]
    if assign.shape != (n,):
        raise ValueError(f"channel assignment has {assign.size} entries for {n} APs")
    out = np.empty(n)
    for ch in np.unique(assign):
        members = [int(i) for i in np.flatnonzero(assign == ch)]
        if len(members) > MAX_NODES_PER_CHANNEL:
            raise InstanceTooLarge(
                f"{len(members)} APs on channel {ch} exceeds the enumeration limit "
                f"of {MAX_NODES_PER_CHANNEL}")
        sub = np.zeros_like(adj)
        idx = np.asarray(members)
        sub[np.ix_(idx, idx)] = adj[np.ix_(idx, idx)]
        for comp in _components(sub, members):
            for v, thr in _component_throughput(comp, sub, access_intensity).items():
                out[v] = thr
    return out


def reward(throughputs, k: int) -> float:
    """Mean of the ``k`` smallest throughputs."""
    values = np.asarray(throughputs, dtype=float)
    if not 1 <= k <= values.size:
        raise ValueError(f"k={k} out of range for {values.size} APs")
    return float(np.mean(np.sort(values)[:k]))
