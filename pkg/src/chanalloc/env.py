"""Channel-allocation MDP over canonicalised (adjacency, channel) states."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .canon import ColoredGraph, canonical_form
from .throughput import DEFAULT_ACCESS_INTENSITY, csma_throughput, reward
from .topology import (LaplacianDecomposition, Topology, TopologyConfig,
                       generate_topology, laplacian_decompose)


@dataclass(frozen=True)
class EnvConfig:
    topology_config: TopologyConfig = field(default_factory=TopologyConfig)
    reward_k: int = 4
    access_intensity: float = DEFAULT_ACCESS_INTENSITY
    episode_horizon: int = 20
    resample_topology_each_episode: bool = True

    def __post_init__(self):
        if not 1 <= self.reward_k <= self.topology_config.n_aps:
            raise ValueError(f"reward_k must be in [1, n_aps], got {self.reward_k}")
        if self.episode_horizon < 1:
            raise ValueError("episode_horizon must be >= 1")
        if not self.access_intensity > 0:
            raise ValueError("access_intensity must be positive")

    @property
    def n_aps(self) -> int:
        return self.topology_config.n_aps

    @property
    def n_channels(self) -> int:
        return self.topology_config.n_channels

    @property
    def n_actions(self) -> int:
        return self.n_aps * self.n_channels


@dataclass(frozen=True, eq=False)
class CanonicalState:
    graph: ColoredGraph  # canonical node order
    perm: np.ndarray  # physical AP -> canonical index
    step_index: int = 0
    key: bytes = b""  # canonical bytes of ``graph``

    @property
    def inverse_perm(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        return inv

    def physical(self) -> tuple[np.ndarray, np.ndarray]:
        """Adjacency and channel vector in physical AP order."""
        p = self.perm
        return self.graph.adjacency[np.ix_(p, p)], self.graph.colors[p]

    def digest(self) -> str:
        return hashlib.sha1(self.key).hexdigest()


@dataclass(frozen=True)
class Action:
    ap: int
    channel: int

    def flat(self, n_channels: int) -> int:
        return encode_action(self.ap, self.channel, n_channels)


def encode_action(ap: int, channel: int, n_channels: int, n_aps: int | None = None) -> int:
    if not 0 <= channel < n_channels or ap < 0 or (n_aps is not None and ap >= n_aps):
        raise ValueError(f"action ({ap}, {channel}) out of range")
    return ap * n_channels + channel


def decode_action(index: int, n_channels: int, n_aps: int | None = None) -> tuple[int, int]:
    if index < 0 or (n_aps is not None and index >= n_aps * n_channels):
        raise ValueError(f"flat action {index} out of range")
    return divmod(int(index), n_channels)


def make_state(adjacency, channels, step_index: int = 0) -> CanonicalState:
    """Canonicalise a physical (adjacency, channel-vector) pair."""
    physical = ColoredGraph(np.asarray(adjacency), np.asarray(channels))
    form = canonical_form(physical)
    return CanonicalState(graph=physical.permuted(form.permutation), perm=form.permutation,
                          step_index=step_index, key=form.canonical_bytes)


class ChannelEnv:
    """Episode driver around pure ``reset``/``step`` transitions.

    Decompositions and throughputs are cached on the canonical key, which is
    valid because both depend on the state only up to isomorphism.
    """

    def __init__(self, config: EnvConfig, topology_seed: int = 0, cache_size: int = 200_000):
        self.config = config
        self.topology_seed = topology_seed
        self._fixed_topology = None
        if not config.resample_topology_each_episode:
            self._fixed_topology = generate_topology(config.topology_config, topology_seed)
        self._decomp_cache: dict[bytes, LaplacianDecomposition] = {}
        self._thr_cache: dict[bytes, np.ndarray] = {}
        self._cache_size = cache_size
        self.topology: Topology | None = None

    @property
    def n_actions(self) -> int:
        return self.config.n_actions

    def reset(self, seed: int) -> CanonicalState:
        rng = np.random.default_rng(seed)
        cfg = self.config.topology_config
        if self._fixed_topology is not None:
            topo = self._fixed_topology
        else:
            topo = generate_topology(cfg, int(rng.integers(2**63 - 1)))
        channels = rng.integers(cfg.n_channels, size=cfg.n_aps)
        self.topology = topo
        return make_state(topo.adjacency, channels, 0)

    def step(self, state: CanonicalState, action) -> tuple[CanonicalState, float]:
        if state.step_index >= self.config.episode_horizon:
            raise ValueError(f"step {state.step_index} is past the horizon "
                             f"{self.config.episode_horizon}")
        m = self.config.n_channels
        if isinstance(action, Action):
            ap, ch = action.ap, action.channel
            encode_action(ap, ch, m, self.config.n_aps)
        else:
            ap, ch = decode_action(int(action), m, self.config.n_aps)
        colors = state.graph.colors.copy()
        colors[ap] = ch
        # canonical index -> physical AP via perm^-1; re-canonicalise from physical order
        adjacency, physical_colors = state.graph.adjacency, colors
        p = state.perm
        nxt = make_state(adjacency[np.ix_(p, p)], physical_colors[p], state.step_index + 1)
        return nxt, self.reward(nxt)

    def throughputs(self, state: CanonicalState) -> np.ndarray:
        """Throughput vector in canonical node order."""
        thr = self._thr_cache.get(state.key)
        if thr is None:
            thr = csma_throughput(state.graph.adjacency, state.graph.colors,
                                  self.config.access_intensity)
            self._remember(self._thr_cache, state.key, thr)
        return thr

    def reward(self, state: CanonicalState) -> float:
        return reward(self.throughputs(state), self.config.reward_k)

    def decomposition(self, state: CanonicalState) -> LaplacianDecomposition:
        key = state.key[: len(state.key) - state.graph.n]  # adjacency part only
        dec = self._decomp_cache.get(key)
        if dec is None:
            dec = laplacian_decompose(state.graph.adjacency)
            self._remember(self._decomp_cache, key, dec)
        return dec

    def state_features(self, state: CanonicalState) -> tuple[LaplacianDecomposition, np.ndarray]:
        return self.decomposition(state), node_features(state, self.config.n_channels)

    def _remember(self, cache: dict, key, value) -> None:
        if len(cache) >= self._cache_size:
            cache.clear()
        cache[key] = value


def node_features(state: CanonicalState, n_channels: int) -> np.ndarray:
    """Row i is the one-hot channel of canonical node i."""
    x = np.zeros((state.graph.n, n_channels))
    x[np.arange(state.graph.n), state.graph.colors] = 1.0
    return x


def state_features(state: CanonicalState, n_channels: int) -> tuple[LaplacianDecomposition, np.ndarray]:
    return laplacian_decompose(state.graph.adjacency), node_features(state, n_channels)


def write_trace(records, path) -> None:
    """JSON-lines episode trace: one ``{"state", "action", "reward"}`` record per step."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
