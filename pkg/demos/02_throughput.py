"""
Exact ideal-CSMA throughput
===========================

Throughput of AP i is the stationary probability that it transmits in the
independent-set Markov chain of its channel's contention subgraph.
"""

import numpy as np

from chanalloc import csma_throughput, reward

rho = 10.0
pair = np.array([[0, 1], [1, 0]])
print("alone        :", csma_throughput(np.zeros((1, 1), int), [0], rho))   # 10/11
print("pair, shared :", csma_throughput(pair, [0, 0], rho))                 # 10/21 each
print("pair, split  :", csma_throughput(pair, [0, 1], rho))                 # 10/11 each

# A star: the hub starves when the leaves share its channel
star = np.zeros((5, 5), int)
star[0, 1:] = star[1:, 0] = 1
for channels in ([0, 0, 0, 0, 0], [1, 0, 0, 0, 0], [0, 1, 1, 0, 0]):
    thr = csma_throughput(star, channels, rho)
    print(channels, np.round(thr, 4), "lower-4 reward", round(reward(thr, 4), 4))

# Fewer same-channel neighbours is not always better: here AP 0 leaves two
# neighbours that are themselves suppressed, and joins one that is not.
a = np.zeros((6, 6), int)
for u, v in [(0, 1), (0, 2), (1, 3), (1, 4), (2, 3), (2, 4), (0, 5)]:
    a[u, v] = a[v, u] = 1
print("AP0 with two starved neighbours:", csma_throughput(a, [0, 0, 0, 0, 0, 1], rho)[0])
print("AP0 with one healthy neighbour :", csma_throughput(a, [1, 0, 0, 0, 0, 1], rho)[0])
