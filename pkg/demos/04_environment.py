"""
The channel-selection MDP
=========================

States are canonical coloured graphs; an action moves one AP to one channel.
"""

from chanalloc import ChannelEnv, EnvConfig, TopologyConfig, decode_action, encode_action

env = ChannelEnv(EnvConfig(TopologyConfig(n_aps=10, n_channels=3), reward_k=4,
                           episode_horizon=20))
state = env.reset(seed=3)
print("actions:", env.n_actions, " initial reward:", round(env.reward(state), 4))

adj, channels = state.physical()
print("physical channels:", channels)

# greedy one-step lookahead, just to show the interface
for t in range(5):
    best = max(range(env.n_actions), key=lambda a: env.step(state, a)[1])
    state, r = env.step(state, best)
    ap, ch = decode_action(best, 3)
    print(f"step {t + 1}: AP {ap} -> channel {ch}, reward {r:.4f}")

print("flat index of (AP 2, channel 1):", encode_action(2, 1, 3))
