"""Deep-RL channel allocation for dense WLANs on contention graphs."""

from .canon import CanonicalForm, ColoredGraph, canonical_form, is_isomorphic
from .env import Action, CanonicalState, ChannelEnv, EnvConfig, decode_action, encode_action
from .nn import NetConfig, QNetwork
from .rl import AgentConfig, DDQNAgent, PrioritizedReplayBuffer, evaluate, train
from .throughput import conflict_count, csma_throughput, reward
from .topology import Topology, TopologyConfig, generate_topology, laplacian_decompose

__all__ = [
    "Action", "AgentConfig", "CanonicalForm", "CanonicalState", "ChannelEnv", "ColoredGraph",
    "DDQNAgent", "EnvConfig", "NetConfig", "PrioritizedReplayBuffer", "QNetwork", "Topology",
    "TopologyConfig", "canonical_form", "conflict_count", "csma_throughput", "decode_action",
    "encode_action", "evaluate", "generate_topology", "is_isomorphic", "laplacian_decompose",
    "reward", "train",
]
