"""
Spectral GCN with a dueling head
================================

A forward pass, a backward pass, and a quick finite-difference spot check.
"""

import numpy as np

from chanalloc import ChannelEnv, EnvConfig, NetConfig, QNetwork, TopologyConfig
from chanalloc.rl import Featurizer

env = ChannelEnv(EnvConfig(TopologyConfig(n_aps=6, n_channels=2), episode_horizon=10))
states = [env.reset(s) for s in range(4)]
inp = Featurizer(env, "gcn")(states)
print("x:", inp.x.shape, " U:", inp.u.shape)

net = QNetwork(6, 2, NetConfig(kind="gcn"), seed=0)
q = net.forward(inp)
print("Q values:", q.shape, " row 0:", np.round(q[0], 4))
print("parameters:", {k: v.shape for k, v in net.parameters().items()})

w = np.random.default_rng(1).normal(size=q.shape)
grads = net.backward(w)
theta = net.parameters()["f0.theta"]
old = theta[0, 0]
theta[0, 0] = old + 1e-5
up = (net.forward(inp) * w).sum()
theta[0, 0] = old - 1e-5
down = (net.forward(inp) * w).sum()
theta[0, 0] = old
print("dL/dtheta[0,0] analytic", grads["f0.theta"][0, 0], "numeric", (up - down) / 2e-5)

net.save("/tmp/demo_net.bin")
print("reloaded equal:", np.array_equal(QNetwork.load("/tmp/demo_net.bin").flat, net.flat))
