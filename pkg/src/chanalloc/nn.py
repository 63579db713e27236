"""Small numpy network engine for the Q-function.

Everything runs on batches: a GCN input is the stacked Laplacian
eigenvectors ``U`` of shape (B, N, N) and node features ``X`` of shape
(B, N, d). Gradients are hand-derived reverse mode; ``U`` is a constant of
the input graph, never a parameter.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

WEIGHTS_MAGIC = b"CHANQNET"
WEIGHTS_VERSION = 1


# ---------------------------------------------------------------- primitives

def gcn_filter(u: np.ndarray, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Per-dimension spectral filter ``U (theta_j * (U^T x_j))``.

    ``u``: (B, N, N) or (N, N); ``x``: (B, N, d) or (N, d); ``theta``: (d, N).
    """
    h = np.swapaxes(u, -1, -2) @ x
    return u @ (h * theta.T)


def gcn_forward(decomp, x: np.ndarray, layer: "SpectralGCN", activation: bool = True) -> np.ndarray:
    """Single-graph forward: spectral filter, 1x1 mixing, bias, then ReLU."""
    u = getattr(decomp, "eigenvectors", decomp)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape != (u.shape[0], layer.d_in):
        raise ValueError(f"expected x of shape ({u.shape[0]}, {layer.d_in}), got {x.shape}")
    pre = gcn_filter(u, x, layer.params["theta"]) @ layer.params["W"] + layer.params["b"]
    return np.maximum(pre, 0.0) if activation else pre


def dueling_combine(value, advantages) -> np.ndarray:
    """``q_a = V + A_a - mean(A)``; works on scalars/vectors or batches (B, 1), (B, K)."""
    adv = np.asarray(advantages, dtype=float)
    if adv.size == 0:
        raise ValueError("advantages must be non-empty")
    return np.asarray(value, dtype=float) + adv - adv.mean(axis=-1, keepdims=True)


def huber_loss(prediction, target, threshold: float = 1.0):
    """Elementwise Huber loss and its derivative with respect to ``prediction``."""
    delta = np.asarray(prediction, dtype=float) - np.asarray(target, dtype=float)
    small = np.abs(delta) <= threshold
    loss = np.where(small, 0.5 * delta**2, threshold * (np.abs(delta) - 0.5 * threshold))
    grad = np.clip(delta, -threshold, threshold)
    if loss.ndim == 0:
        return float(loss), float(grad)
    return loss, grad


@dataclass
class AdamState:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name]
        m = state.first_moment.get(name)
        if m is None:
            m = state.first_moment[name] = np.zeros_like(p)
            state.second_moment[name] = np.zeros_like(p)
        v = state.second_moment[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


# -------------------------------------------------------------------- layers

class Dense:
    def __init__(self, d_in: int, d_out: int, rng, relu: bool = True):
        self.d_in, self.d_out, self.relu = d_in, d_out, relu
        self.params = {"W": glorot(rng, d_in, d_out), "b": np.zeros(d_out)}
        self._cache = None

    def forward(self, x):
        pre = x @ self.params["W"] + self.params["b"]
        out = np.maximum(pre, 0.0) if self.relu else pre
        self._cache = (x, pre)
        return out

    def backward(self, grad_out, grads: dict, prefix: str):
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        x, pre = self._cache
        g = grad_out * (pre > 0) if self.relu else grad_out
        grads[prefix + "W"] = x.T @ g
        grads[prefix + "b"] = g.sum(axis=0)
        return g @ self.params["W"].T


class SpectralGCN:
    """Spectral graph convolution with per-dimension coefficients and 1x1 mixing."""

    def __init__(self, n_nodes: int, d_in: int, d_out: int, rng):
        self.n_nodes, self.d_in, self.d_out = n_nodes, d_in, d_out
        self.params = {
            "theta": 1.0 + rng.uniform(-0.01, 0.01, size=(d_in, n_nodes)),
            "W": glorot(rng, d_in, d_out),
            "b": np.zeros(d_out),
        }
        self._cache = None

    def forward(self, u, x):
        h = np.swapaxes(u, -1, -2) @ x
        z = u @ (h * self.params["theta"].T)
        pre = z @ self.params["W"] + self.params["b"]
        self._cache = (u, h, z, pre)
        return np.maximum(pre, 0.0)

    def backward(self, grad_out, grads: dict, prefix: str):
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        u, h, z, pre = self._cache
        theta_t = self.params["theta"].T
        g = grad_out * (pre > 0)
        b, n, _ = z.shape
        grads[prefix + "W"] = z.reshape(b * n, -1).T @ g.reshape(b * n, -1)
        grads[prefix + "b"] = g.sum(axis=(0, 1))
        dz = g @ self.params["W"].T
        ds = np.swapaxes(u, -1, -2) @ dz
        grads[prefix + "theta"] = (h * ds).sum(axis=0).T
        return u @ (ds * theta_t)


# ------------------------------------------------------------------- network

@dataclass(frozen=True)
class NetConfig:
    kind: str = "gcn"  # "gcn" or "mlp"
    gcn_widths: tuple = (32, 32)
    hidden: int = 128
    stream_hidden: int = 64

    def __post_init__(self):
        if self.kind not in ("gcn", "mlp"):
            raise ValueError(f"unknown network kind {self.kind!r}")
        object.__setattr__(self, "gcn_widths", tuple(int(w) for w in self.gcn_widths))


@dataclass
class NetInput:
    """Batched network input; ``u`` for GCN models, ``adjacency`` for dense ones."""
    x: np.ndarray  # (B, N, M) one-hot channels
    u: np.ndarray | None = None  # (B, N, N)
    adjacency: np.ndarray | None = None  # (B, N, N)

    @property
    def batch_size(self) -> int:
        return self.x.shape[0]


class QNetwork:
    """Graph (or dense) feature stack, one dense layer, and a dueling head."""

    def __init__(self, n_aps: int, n_channels: int, config: NetConfig = NetConfig(), seed: int = 0):
        self.n_aps, self.n_channels, self.config = n_aps, n_channels, config
        rng = np.random.default_rng(seed)
        self.feature_layers: list = []
        widths = config.gcn_widths
        if config.kind == "gcn":
            d = n_channels
            for w in widths:
                self.feature_layers.append(SpectralGCN(n_aps, d, w, rng))
                d = w
            flat = widths[-1] * n_aps
        else:
            d = n_aps * n_aps + n_aps * n_channels
            for w in widths:
                self.feature_layers.append(Dense(d, w * n_aps, rng))
                d = w * n_aps
            flat = d
        self.hidden = Dense(flat, config.hidden, rng)
        self.value_hidden = Dense(config.hidden, config.stream_hidden, rng)
        self.value_out = Dense(config.stream_hidden, 1, rng, relu=False)
        self.adv_hidden = Dense(config.hidden, config.stream_hidden, rng)
        self.adv_out = Dense(config.stream_hidden, n_aps * n_channels, rng, relu=False)
        self._forwarded = False
        # one contiguous buffer; layer parameters become views into it
        self.flat = np.concatenate([v.ravel() for v in self.parameters().values()])
        off = 0
        for _, layer in self._layers():
            for k, v in layer.params.items():
                layer.params[k] = self.flat[off:off + v.size].reshape(v.shape)
                off += v.size

    @property
    def n_actions(self) -> int:
        return self.n_aps * self.n_channels

    def _layers(self):
        named = [(f"f{i}.", layer) for i, layer in enumerate(self.feature_layers)]
        named += [("h.", self.hidden), ("v1.", self.value_hidden), ("v2.", self.value_out),
                  ("a1.", self.adv_hidden), ("a2.", self.adv_out)]
        return named

    def parameters(self) -> dict:
        """Name -> array views; mutating them updates the network."""
        return {prefix + k: v for prefix, layer in self._layers() for k, v in layer.params.items()}

    def copy_from(self, other: "QNetwork") -> None:
        if self.flat.shape != other.flat.shape:
            raise ValueError("networks have different parameter counts")
        self.flat[...] = other.flat

    def flatten_grads(self, grads: dict) -> np.ndarray:
        return np.concatenate([grads[name].ravel() for name in self.parameters()])

    def clone(self) -> "QNetwork":
        net = QNetwork(self.n_aps, self.n_channels, self.config)
        net.copy_from(self)
        return net

    def forward(self, inp: NetInput) -> np.ndarray:
        b = inp.batch_size
        if self.config.kind == "gcn":
            h = inp.x
            for layer in self.feature_layers:
                h = layer.forward(inp.u, h)
            h = h.reshape(b, -1)
        else:
            h = np.concatenate([inp.adjacency.reshape(b, -1), inp.x.reshape(b, -1)], axis=1)
            for layer in self.feature_layers:
                h = layer.forward(h)
        h = self.hidden.forward(h)
        value = self.value_out.forward(self.value_hidden.forward(h))
        adv = self.adv_out.forward(self.adv_hidden.forward(h))
        self._forwarded = True
        return dueling_combine(value, adv)

    def backward(self, grad_q: np.ndarray) -> dict:
        if not self._forwarded:
            raise RuntimeError("backward called without a cached forward pass")
        grads: dict = {}
        grad_q = np.asarray(grad_q, dtype=float)
        # q = V + A - mean(A)
        g_value = grad_q.sum(axis=1, keepdims=True)
        g_adv = grad_q - grad_q.mean(axis=1, keepdims=True)
        g_h = self.value_hidden.backward(self.value_out.backward(g_value, grads, "v2."), grads, "v1.")
        g_h = g_h + self.adv_hidden.backward(self.adv_out.backward(g_adv, grads, "a2."), grads, "a1.")
        g = self.hidden.backward(g_h, grads, "h.")
        if self.config.kind == "gcn":
            g = g.reshape(g.shape[0], self.n_aps, -1)
            for i in reversed(range(len(self.feature_layers))):
                g = self.feature_layers[i].backward(g, grads, f"f{i}.")
        else:
            for i in reversed(range(len(self.feature_layers))):
                g = self.feature_layers[i].backward(g, grads, f"f{i}.")
        return grads

    # ------------------------------------------------------------ persistence

    def architecture(self) -> dict:
        return {"n_aps": self.n_aps, "n_channels": self.n_channels,
                "net": {**asdict(self.config), "gcn_widths": list(self.config.gcn_widths)}}

    def save(self, path) -> None:
        params = self.parameters()
        header = json.dumps({
            "architecture": self.architecture(),
            "layers": [{"name": k, "shape": list(v.shape)} for k, v in params.items()],
        }).encode()
        with open(path, "wb") as fh:
            fh.write(WEIGHTS_MAGIC)
            fh.write(struct.pack("<II", WEIGHTS_VERSION, len(header)))
            fh.write(header)
            for arr in params.values():
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    def load_weights(self, path) -> None:
        arch, blocks = read_weights(path)
        params = self.parameters()
        if list(blocks) != list(params):
            raise ValueError(f"{path}: layer list does not match this network")
        for name, arr in blocks.items():
            if arr.shape != params[name].shape:
                raise ValueError(f"{path}: shape mismatch for {name}: "
                                 f"{arr.shape} vs {params[name].shape}")
            params[name][...] = arr

    @classmethod
    def load(cls, path) -> "QNetwork":
        arch, _ = read_weights(path)
        net_cfg = NetConfig(**arch["net"])
        net = cls(arch["n_aps"], arch["n_channels"], net_cfg)
        net.load_weights(path)
        return net


def read_weights(path) -> tuple[dict, dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(WEIGHTS_MAGIC):
        raise ValueError(f"{path}: not a weight file (bad magic)")
    off = len(WEIGHTS_MAGIC)
    version, hlen = struct.unpack_from("<II", data, off)
    if version != WEIGHTS_VERSION:
        raise ValueError(f"{path}: unsupported weight format version {version}")
    off += 8
    header = json.loads(data[off:off + hlen])
    off += hlen
    blocks = {}
    for entry in header["layers"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        if off + 8 * count > len(data):
            raise ValueError(f"{path}: truncated parameter block {entry['name']}")
        blocks[entry["name"]] = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += 8 * count
    if off != len(data):
        raise ValueError(f"{path}: trailing bytes after parameter blocks")
    return header["architecture"], blocks
