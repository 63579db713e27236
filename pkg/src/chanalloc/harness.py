"""Experiment runs and their on-disk artifacts.

Every run directory holds:

``config.json``         resolved configuration; replaying it reproduces the CSVs
``learning_curve.csv``  ``step,R_m`` (training runs only)
``final_rewards.csv``   header ``final_reward`` then one final reward per episode
``nth_lowest.csv``      ``n,mean_throughput``: mean of the n-th lowest AP throughput
``checkpoint.bin``      network weights (training runs only)
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import ChannelEnv, EnvConfig, write_trace
from .nn import NetConfig, QNetwork
from .rl import (STREAM_TEST, AgentConfig, Featurizer, Rollout, greedy_policy, random_action,
                 rollout, sap_select, train)
from .topology import TopologyConfig

log = logging.getLogger(__name__)

LEARNING_METHODS = ("gcn_sap", "gcn_eps", "mlp_sap", "mlp_eps")
BASELINE_METHODS = ("sap_only", "random")
METHODS = LEARNING_METHODS + BASELINE_METHODS


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "gcn_sap"
    seed: int = 0
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    net: NetConfig = field(default_factory=NetConfig)
    topology_seed: int = 0
    eval_episodes: int = 1000
    eval_horizon: int | None = None  # defaults to the env horizon

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method in LEARNING_METHODS:
            object.__setattr__(self, "net", dataclasses.replace(self.net, kind=self.method[:3]))
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")

    @property
    def behavior(self) -> str:
        return "sap" if self.method.endswith("sap") else "epsilon_greedy"

    @property
    def horizon(self) -> int:
        return self.eval_horizon or self.env.episode_horizon

    def to_dict(self) -> dict:
        env = dataclasses.asdict(self.env)
        topo = env.pop("topology_config")
        net = dataclasses.asdict(self.net)
        net.pop("kind")
        net["gcn_widths"] = list(net["gcn_widths"])
        return {
            "method": self.method,
            "seed": self.seed,
            "env": {**topo, **env, "topology_seed": self.topology_seed},
            "agent": dataclasses.asdict(self.agent),
            "net": net,
            "eval": {"episodes": self.eval_episodes, "horizon": self.horizon},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {"method", "seed", "env", "agent", "net", "eval"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        env = dict(obj.get("env", {}))
        topo_fields = {f.name for f in dataclasses.fields(TopologyConfig)}
        topo = TopologyConfig(**{k: env.pop(k) for k in list(env) if k in topo_fields})
        topology_seed = env.pop("topology_seed", 0)
        ev = obj.get("eval", {})
        return cls(
            method=obj.get("method", "gcn_sap"),
            seed=int(obj.get("seed", 0)),
            env=EnvConfig(topology_config=topo, **env),
            agent=AgentConfig(**obj.get("agent", {})),
            net=NetConfig(**obj.get("net", {})),
            topology_seed=int(topology_seed),
            eval_episodes=int(ev.get("episodes", 1000)),
            eval_horizon=ev.get("horizon"),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except OSError as exc:
            raise HarnessError(f"cannot read config {path}: {exc}") from exc


@dataclass(frozen=True)
class RunArtifacts:
    directory: Path

    @property
    def config(self) -> Path:
        return self.directory / "config.json"

    @property
    def learning_curve(self) -> Path:
        return self.directory / "learning_curve.csv"

    @property
    def final_rewards(self) -> Path:
        return self.directory / "final_rewards.csv"

    @property
    def nth_lowest(self) -> Path:
        return self.directory / "nth_lowest.csv"

    @property
    def checkpoint(self) -> Path:
        return self.directory / "checkpoint.bin"


# ---------------------------------------------------------------- CSV output

def _fmt(x: float) -> str:
    return repr(float(x))


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise HarnessError(f"cannot write {path}: {exc}") from exc


def write_learning_curve(path: Path, curve) -> None:
    lines = ["step,R_m"] + [f"{int(s)},{_fmt(v)}" for s, v in curve]
    _write(path, "\n".join(lines) + "\n")


def write_final_rewards(path: Path, rewards) -> None:
    _write(path, "final_reward\n" + "".join(_fmt(r) + "\n" for r in rewards))


def nth_lowest_means(throughputs: np.ndarray) -> np.ndarray:
    """Per rank n, the mean over episodes of the n-th lowest AP throughput."""
    return np.sort(np.asarray(throughputs), axis=1).mean(axis=0)


def write_nth_lowest(path: Path, throughputs) -> None:
    means = nth_lowest_means(throughputs)
    lines = ["n,mean_throughput"] + [f"{n},{_fmt(v)}" for n, v in enumerate(means, start=1)]
    _write(path, "\n".join(lines) + "\n")


def write_config(path: Path, config: ExperimentConfig) -> None:
    _write(path, json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


def read_column(path: Path, column: str) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            return np.array([float(row[column]) for row in csv.DictReader(fh)])
    except (OSError, KeyError) as exc:
        raise HarnessError(f"cannot read column {column!r} from {path}: {exc}") from exc


# ---------------------------------------------------------------------- runs

def _eval_env(config: ExperimentConfig) -> ChannelEnv:
    env_cfg = dataclasses.replace(config.env, episode_horizon=config.horizon)
    return ChannelEnv(env_cfg, topology_seed=config.topology_seed)


def _trace_records(env: ChannelEnv, policy, episodes, horizon, seed):
    records = []

    def traced(states, rngs):
        actions = policy(states, rngs)
        for e, (s, a) in enumerate(zip(states, actions)):
            _, r = env.step(s, a)
            records.append({"episode": e, "step": s.step_index, "state": s.digest(),
                            "action": int(a), "reward": r})
        return actions

    rollout(env, traced, episodes, horizon, seed, STREAM_TEST)
    return records


def _emit_eval(out: Path, env: ChannelEnv, policy, config: ExperimentConfig,
               trace: bool = False) -> Rollout:
    result = rollout(env, policy, config.eval_episodes, config.horizon, config.seed, STREAM_TEST)
    write_final_rewards(out / "final_rewards.csv", result.final_rewards)
    write_nth_lowest(out / "nth_lowest.csv", result.final_throughputs)
    if trace:
        records = _trace_records(env, policy, config.eval_episodes, config.horizon, config.seed)
        write_trace(records, out / "trace.jsonl")
    return result


def run_train(config: ExperimentConfig, out_dir, trace: bool = False) -> RunArtifacts:
    if config.method not in LEARNING_METHODS:
        raise HarnessError(f"method {config.method!r} is not a learning method")
    out = Path(out_dir)
    art = RunArtifacts(out)
    write_config(art.config, config)
    env = ChannelEnv(config.env, topology_seed=config.topology_seed)
    result = train(env, config.agent, config.net, config.behavior, config.seed)
    write_learning_curve(art.learning_curve, result.curve)
    result.network.save(art.checkpoint)
    eval_env = _eval_env(config)
    policy = greedy_policy(result.network, Featurizer(eval_env, config.net.kind))
    _emit_eval(out, eval_env, policy, config, trace)
    return art


def run_eval(checkpoint, config: ExperimentConfig, out_dir, trace: bool = False) -> RunArtifacts:
    out = Path(out_dir)
    try:
        network = QNetwork.load(checkpoint)
    except OSError as exc:
        raise HarnessError(f"cannot read checkpoint {checkpoint}: {exc}") from exc
    if (network.n_aps, network.n_channels) != (config.env.n_aps, config.env.n_channels):
        raise HarnessError(
            f"checkpoint {checkpoint} is for {network.n_aps} APs / {network.n_channels} channels, "
            f"config has {config.env.n_aps} / {config.env.n_channels}")
    art = RunArtifacts(out)
    write_config(art.config, config)
    env = _eval_env(config)
    policy = greedy_policy(network, Featurizer(env, network.config.kind))
    _emit_eval(out, env, policy, config, trace)
    return art


def baseline_policy(method: str, n_actions: int, n_channels: int, beta: float):
    if method == "random":
        return lambda states, rngs: [random_action(n_actions, g) for g in rngs]
    if method == "sap_only":
        return lambda states, rngs: [sap_select(s, beta, g, n_channels)
                                     for s, g in zip(states, rngs)]
    raise HarnessError(f"unknown baseline {method!r}; expected one of {BASELINE_METHODS}")


def run_baseline(config: ExperimentConfig, out_dir, trace: bool = False) -> RunArtifacts:
    if config.method not in BASELINE_METHODS:
        raise HarnessError(f"method {config.method!r} is not a baseline")
    out = Path(out_dir)
    art = RunArtifacts(out)
    write_config(art.config, config)
    env = _eval_env(config)
    policy = baseline_policy(config.method, env.n_actions, config.env.n_channels,
                             config.agent.beta_sap)
    _emit_eval(out, env, policy, config, trace)
    return art


# ------------------------------------------------------------------- compare

@dataclass
class RunSummary:
    name: str
    method: str
    episodes: int
    mean_final_reward: float
    median_final_reward: float
    mean_lowest_throughput: float


def summarize(directory) -> tuple[RunSummary, dict]:
    d = Path(directory)
    try:
        cfg = json.loads((d / "config.json").read_text())
    except (OSError, ValueError) as exc:
        raise HarnessError(f"{d}: missing or unreadable config.json: {exc}") from exc
    rewards = read_column(d / "final_rewards.csv", "final_reward")
    lowest = read_column(d / "nth_lowest.csv", "mean_throughput")
    summary = RunSummary(d.name, cfg.get("method", "?"), rewards.size, float(rewards.mean()),
                         float(np.median(rewards)), float(lowest[0]))
    return summary, cfg


def compare(directories, out_dir=None) -> tuple[list[RunSummary], list[dict], str]:
    """Per-run summary rows, pairwise ratios, and a printable table."""
    if len(directories) < 2:
        raise HarnessError("compare needs at least two run directories")
    rows, envs = [], []
    for d in directories:
        summary, cfg = summarize(d)
        rows.append(summary)
        envs.append((cfg.get("env"), cfg.get("eval", {}).get("horizon")))
    for d, env in zip(directories[1:], envs[1:]):
        if env != envs[0]:
            raise HarnessError(f"environment config of {d} differs from {directories[0]}")
    pairs = []
    for i, a in enumerate(rows):
        for b in rows[i + 1:]:
            pairs.append({
                "run_a": a.name, "run_b": b.name,
                "final_reward_ratio": a.mean_final_reward / b.mean_final_reward,
                "lowest_throughput_ratio": a.mean_lowest_throughput / b.mean_lowest_throughput,
            })

    fields = [f.name for f in dataclasses.fields(RunSummary)]
    summary_csv = io.StringIO()
    w = csv.DictWriter(summary_csv, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (_fmt(v) if isinstance(v, float) else v)
                    for k, v in dataclasses.asdict(r).items()})
    pairs_csv = io.StringIO()
    w = csv.DictWriter(pairs_csv, fieldnames=["run_a", "run_b", "final_reward_ratio",
                                              "lowest_throughput_ratio"], lineterminator="\n")
    w.writeheader()
    for p in pairs:
        w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in p.items()})

    lines = [f"{'run':<24} {'method':<10} {'episodes':>8} {'mean':>9} {'median':>9} {'lowest':>9}"]
    for r in rows:
        lines.append(f"{r.name:<24} {r.method:<10} {r.episodes:>8d} {r.mean_final_reward:>9.5f} "
                     f"{r.median_final_reward:>9.5f} {r.mean_lowest_throughput:>9.5f}")
    lines.append("")
    lines.append(f"{'run_a':<24} {'run_b':<24} {'reward x':>9} {'lowest x':>9}")
    for p in pairs:
        lines.append(f"{p['run_a']:<24} {p['run_b']:<24} {p['final_reward_ratio']:>9.4f} "
                     f"{p['lowest_throughput_ratio']:>9.4f}")
    table = "\n".join(lines)

    if out_dir is not None:
        out = Path(out_dir)
        _write(out / "summary.csv", summary_csv.getvalue())
        _write(out / "pairs.csv", pairs_csv.getvalue())
        _write(out / "summary.txt", table + "\n")
    return rows, pairs, table
