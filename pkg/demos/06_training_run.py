"""
A short training run against the baselines
==========================================

Train a GCN agent with the SAP behaviour policy on a small network, then
compare it with SAP alone and random play. The schedule is far shorter than
a real run; expect a modest gap.
"""

import tempfile
from pathlib import Path

from chanalloc import AgentConfig, EnvConfig, TopologyConfig
from chanalloc.harness import ExperimentConfig, compare, run_baseline, run_train

env = EnvConfig(TopologyConfig(n_aps=6, n_channels=2), reward_k=4, episode_horizon=10)
agent = AgentConfig(target_sync_interval=2000, eval_interval=1000, eval_episodes=50,
                    patience=4000, max_steps=4000)
out = Path(tempfile.mkdtemp(prefix="chanalloc_demo_"))

runs = []
for method in ("gcn_sap", "sap_only", "random"):
    cfg = ExperimentConfig(method=method, seed=0, env=env, agent=agent, eval_episodes=300)
    run = run_train if method == "gcn_sap" else run_baseline
    runs.append(run(cfg, out / method).directory)
    print("finished", method)

print((out / "gcn_sap" / "learning_curve.csv").read_text())
_, _, table = compare(runs, out / "compare")
print(table)
print("artifacts in", out)
