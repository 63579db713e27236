"""Double DQN agent with prioritized replay and SAP / epsilon-greedy behaviour."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .env import CanonicalState, ChannelEnv, encode_action
from .nn import AdamState, NetConfig, NetInput, QNetwork, adam_step, huber_loss

log = logging.getLogger(__name__)

# seed streams; training and evaluation episodes never share seeds
STREAM_TRAIN = 0
STREAM_VALID = 1
STREAM_TEST = 2
STREAM_POLICY = 3
STREAM_INIT = 4


def derive_seed(base: int, stream: int, index: int = 0) -> int:
    ss = np.random.SeedSequence([int(base), int(stream), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.9
    epsilon: float = 0.1
    beta_sap: float = 0.1
    target_sync_interval: int = 100_000
    batch_size: int = 32
    eval_interval: int = 10_000
    eval_episodes: int = 100
    patience: int = 300_000
    max_steps: int | None = None
    learning_rate: float = 0.001
    buffer_capacity: int = 1000
    per_lambda: float = 0.6
    per_eps0: float = 1e-3
    # "main": delta = Y - Q_main(s, a); "target": delta = Y - Q_target(s, a) for priorities
    td_variant: str = "main"

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if self.beta_sap < 0:
            raise ValueError("beta_sap must be >= 0")
        if self.td_variant not in ("main", "target"):
            raise ValueError(f"unknown td_variant {self.td_variant!r}")
        if min(self.target_sync_interval, self.batch_size, self.eval_interval,
               self.eval_episodes, self.buffer_capacity) < 1:
            raise ValueError("intervals, sizes and episode counts must be positive")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")


@dataclass(frozen=True, eq=False)
class Transition:
    state: CanonicalState
    action: int
    reward: float
    next_state: CanonicalState
    priority: float = 1.0


class PrioritizedReplayBuffer:
    """Ring buffer sampled with probability proportional to ``priority ** lam``."""

    def __init__(self, capacity: int = 1000, lam: float = 0.6, eps0: float = 1e-3):
        self.capacity, self.lam, self.eps0 = capacity, lam, eps0
        self.items: list[Transition | None] = [None] * capacity
        self.priorities = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def add(self, transition: Transition) -> int:
        p = self.priorities[: self._size].max() if self._size else 1.0
        p = max(p, self.eps0)
        idx = self._next
        self.items[idx] = Transition(transition.state, transition.action, transition.reward,
                                     transition.next_state, p)
        self.priorities[idx] = p
        self._next = (idx + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        return idx

    def probabilities(self) -> np.ndarray:
        scaled = self.priorities[: self._size] ** self.lam
        return scaled / scaled.sum()

    def sample(self, batch_size: int, rng: np.random.Generator):
        return per_sample(self, batch_size, rng)

    def update(self, indices, td_errors) -> None:
        per_update(self, indices, td_errors)


def per_sample(buffer: PrioritizedReplayBuffer, batch_size: int, rng: np.random.Generator):
    """Draw ``batch_size`` indices with replacement; returns (indices, transitions, probs)."""
    if len(buffer) == 0:
        raise ValueError("cannot sample from an empty replay buffer")
    probs = buffer.probabilities()
    idx = rng.choice(len(buffer), size=batch_size, replace=True, p=probs)
    return idx, [buffer.items[i] for i in idx], probs[idx]


def per_update(buffer: PrioritizedReplayBuffer, indices, td_errors) -> None:
    for i, d in zip(np.asarray(indices), np.asarray(td_errors, dtype=float)):
        p = abs(float(d)) + buffer.eps0
        buffer.priorities[i] = p
        t = buffer.items[i]
        buffer.items[i] = Transition(t.state, t.action, t.reward, t.next_state, p)


# ------------------------------------------------------------------ policies

def greedy_action(q_values, rng: np.random.Generator | None = None) -> int:
    """Argmax; exact ties broken uniformly with ``rng``, else by lowest index."""
    q = np.asarray(q_values)
    ties = np.flatnonzero(q == q.max())
    if ties.size == 1 or rng is None:
        return int(ties[0])
    return int(ties[rng.integers(ties.size)])


def epsilon_greedy(q_values, epsilon: float, rng: np.random.Generator) -> int:
    q = np.asarray(q_values)
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(q.size))
    return greedy_action(q, rng)


def sap_probabilities(state: CanonicalState, ap: int, beta: float, n_channels: int) -> np.ndarray:
    """Boltzmann distribution over channels for ``ap`` given the others' channels."""
    adj = state.graph.adjacency
    colors = state.graph.colors
    counts = np.bincount(colors[np.flatnonzero(adj[ap])], minlength=n_channels)
    logits = -beta * counts.astype(float)
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def sap_select(state: CanonicalState, beta: float, rng: np.random.Generator, n_channels: int) -> int:
    """One spatial-adaptive-play move: uniform AP, channel sampled from its payoff softmax."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    ap = int(rng.integers(state.graph.n))
    probs = sap_probabilities(state, ap, beta, n_channels)
    ch = int(rng.choice(n_channels, p=probs))
    return encode_action(ap, ch, n_channels)


def random_action(n_actions: int, rng: np.random.Generator) -> int:
    return int(rng.integers(n_actions))


# ------------------------------------------------------------------- targets

class Featurizer:
    """Stacks canonical states into a batched network input."""

    def __init__(self, env: ChannelEnv, kind: str = "gcn"):
        self.env, self.kind = env, kind

    def __call__(self, states: Sequence[CanonicalState]) -> NetInput:
        m = self.env.config.n_channels
        n = states[0].graph.n
        x = np.zeros((len(states), n, m))
        rows = np.arange(n)
        for b, s in enumerate(states):
            x[b, rows, s.graph.colors] = 1.0
        if self.kind == "gcn":
            u = np.stack([self.env.decomposition(s).eigenvectors for s in states])
            return NetInput(x=x, u=u)
        adj = np.stack([s.graph.adjacency for s in states]).astype(float)
        return NetInput(x=x, adjacency=adj)


def ddqn_targets(rewards, next_input: NetInput, main, target, gamma: float) -> np.ndarray:
    """``r + gamma * Q_target(s', argmax_a Q_main(s', a))``, ties to the lowest index."""
    rewards = np.asarray(rewards, dtype=float)
    if gamma == 0:
        return rewards.copy()
    best = np.argmax(main.forward(next_input), axis=1)
    q_next = target.forward(next_input)
    return rewards + gamma * q_next[np.arange(len(rewards)), best]


def ddqn_target(transitions: Sequence[Transition], main, target, gamma: float,
                featurize: Callable[[Sequence[CanonicalState]], NetInput]) -> np.ndarray:
    rewards = [t.reward for t in transitions]
    return ddqn_targets(rewards, featurize([t.next_state for t in transitions]), main, target, gamma)


def td_error(transition: Transition, main, target, gamma: float, featurize,
             variant: str = "main") -> float:
    y = ddqn_target([transition], main, target, gamma, featurize)[0]
    evaluator = main if variant == "main" else target
    q = evaluator.forward(featurize([transition.state]))[0, transition.action]
    return float(y - q)


# ---------------------------------------------------------------- evaluation

class Rollout(NamedTuple):
    final_rewards: np.ndarray
    final_throughputs: np.ndarray  # (episodes, N), canonical order


def rollout(env: ChannelEnv, policy, episodes: int, horizon: int, seed: int,
            stream: int = STREAM_TEST) -> Rollout:
    """Run ``episodes`` episodes in lockstep and record the final reward of each.

    ``policy(states, rngs) -> list of flat actions`` acts for every episode at
    once; episode ``e`` uses the reset seed and action RNG derived from
    (seed, stream, e) only, so results never depend on batching.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    states = [env.reset(derive_seed(seed, stream, e)) for e in range(episodes)]
    rngs = [np.random.default_rng(derive_seed(seed, STREAM_POLICY + 10 * stream, e))
            for e in range(episodes)]
    rewards = np.zeros(episodes)
    for _ in range(horizon):
        actions = policy(states, rngs)
        nxt = []
        for e, (s, a) in enumerate(zip(states, actions)):
            s2, r = env.step(s, a)
            nxt.append(s2)
            rewards[e] = r
        states = nxt
    thr = np.stack([env.throughputs(s) for s in states]) if episodes else np.zeros((0, 0))
    return Rollout(rewards, thr)


def greedy_policy(network: QNetwork, featurize):
    def act(states, rngs):
        q = network.forward(featurize(states))
        return [greedy_action(q[e], rngs[e]) for e in range(len(states))]
    return act


def evaluate(network: QNetwork, env: ChannelEnv, episodes: int, horizon: int | None = None,
             seed: int = 0, stream: int = STREAM_TEST) -> tuple[float, list[float]]:
    """Mean and list of final rewards after ``horizon`` greedy steps per episode."""
    horizon = env.config.episode_horizon if horizon is None else horizon
    featurize = Featurizer(env, network.config.kind)
    out = rollout(env, greedy_policy(network, featurize), episodes, horizon, seed, stream)
    return float(out.final_rewards.mean()), out.final_rewards.tolist()


# ------------------------------------------------------------------ training

class TrainResult(NamedTuple):
    network: QNetwork
    curve: list  # [(step, R_m), ...]


class DDQNAgent:
    """Main/target networks, replay buffer and the per-step update."""

    def __init__(self, env: ChannelEnv, config: AgentConfig, net_config: NetConfig = NetConfig(),
                 behavior: str = "sap", seed: int = 0):
        if behavior not in ("sap", "epsilon_greedy"):
            raise ValueError(f"unknown behaviour policy {behavior!r}")
        self.env, self.config, self.behavior, self.seed = env, config, behavior, seed
        n, m = env.config.n_aps, env.config.n_channels
        self.main = QNetwork(n, m, net_config, seed=derive_seed(seed, STREAM_INIT))
        self.target = self.main.clone()
        self._params = {"flat": self.main.flat}
        self.adam = AdamState(learning_rate=config.learning_rate)
        self.buffer = PrioritizedReplayBuffer(config.buffer_capacity, config.per_lambda,
                                              config.per_eps0)
        self.featurize = Featurizer(env, net_config.kind)
        self.rng = np.random.default_rng(derive_seed(seed, STREAM_POLICY))
        self.steps = 0
        self.episode = 0
        self.state = env.reset(derive_seed(seed, STREAM_TRAIN, 0))
        self._rows = np.arange(config.batch_size)

    def act(self, state: CanonicalState) -> int:
        m = self.env.config.n_channels
        if self.behavior == "sap":
            return sap_select(state, self.config.beta_sap, self.rng, m)
        q = self.main.forward(self.featurize([state]))[0]
        return epsilon_greedy(q, self.config.epsilon, self.rng)

    def learn(self) -> float | None:
        """One Adam step on a prioritized batch; returns the mean Huber loss."""
        cfg = self.config
        if len(self.buffer) < cfg.batch_size:
            return None
        rows = self._rows
        idx, batch, _ = per_sample(self.buffer, cfg.batch_size, self.rng)
        actions = np.array([t.action for t in batch])
        y = ddqn_targets([t.reward for t in batch],
                         self.featurize([t.next_state for t in batch]),
                         self.main, self.target, cfg.gamma)
        s_input = self.featurize([t.state for t in batch])
        if cfg.td_variant == "target":
            q_eval = self.target.forward(s_input)[rows, actions]
        q = self.main.forward(s_input)
        pred = q[rows, actions]
        loss, g = huber_loss(pred, y)
        if not np.all(np.isfinite(loss)):
            raise TrainingDiverged(
                f"non-finite loss at step {self.steps}",
                {"step": self.steps, "loss": loss.tolist(), "targets": y.tolist(),
                 "predictions": pred.tolist()})
        grad_q = np.zeros_like(q)
        grad_q[rows, actions] = g / cfg.batch_size
        grads = {"flat": self.main.flatten_grads(self.main.backward(grad_q))}
        adam_step(self._params, grads, self.adam)
        per_update(self.buffer, idx, y - (pred if cfg.td_variant == "main" else q_eval))
        return float(loss.mean())

    def step(self) -> float:
        """Act once, store the transition, learn, and sync the target on schedule."""
        state = self.state
        action = self.act(state)
        next_state, r = self.env.step(state, action)
        self.buffer.add(Transition(state, action, r, next_state))
        self.steps += 1
        self.learn()
        if self.steps % self.config.target_sync_interval == 0:
            self.target.copy_from(self.main)
        if next_state.step_index >= self.env.config.episode_horizon:
            self.episode += 1
            self.state = self.env.reset(derive_seed(self.seed, STREAM_TRAIN, self.episode))
        else:
            self.state = next_state
        return r


def train(env: ChannelEnv, agent_config: AgentConfig, net_config: NetConfig = NetConfig(),
          behavior: str = "sap", seed: int = 0,
          on_eval: Callable[[int, float], None] | None = None) -> TrainResult:
    """Train a DDQN agent; returns the best-evaluated network and the learning curve.

    The curve starts with an evaluation of the untrained network at step 0
    and gains one point every ``eval_interval`` steps on a fixed validation
    episode set. Training stops once the best evaluation is ``patience``
    steps old, or at ``max_steps``.
    """
    cfg = agent_config
    agent = DDQNAgent(env, cfg, net_config, behavior, seed)
    horizon = env.config.episode_horizon
    curve: list = []

    def run_eval():
        value, _ = evaluate(agent.main, env, cfg.eval_episodes, horizon, seed, STREAM_VALID)
        curve.append((agent.steps, value))
        if on_eval is not None:
            on_eval(agent.steps, value)
        return value

    best_value, best_step = run_eval(), 0
    best = agent.main.clone()
    while (agent.steps - best_step < cfg.patience
           and (cfg.max_steps is None or agent.steps < cfg.max_steps)):
        agent.step()
        if agent.steps % cfg.eval_interval == 0:
            value = run_eval()
            if value > best_value:
                best_value, best_step = value, agent.steps
                best.copy_from(agent.main)
    log.info("training stopped at step %d, best R_m %.5f at step %d",
             agent.steps, best_value, best_step)
    return TrainResult(best, curve)
