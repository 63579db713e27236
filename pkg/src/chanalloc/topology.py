"""AP placement, contention graphs and their Laplacian eigendecomposition."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class EigenConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TopologyConfig:
    n_aps: int = 10
    region_side: float = 1000.0
    cs_range: float = 550.0
    n_channels: int = 3

    def __post_init__(self):
        if int(self.n_aps) < 1:
            raise ValueError(f"n_aps must be >= 1, got {self.n_aps}")
        if int(self.n_channels) < 1:
            raise ValueError(f"n_channels must be >= 1, got {self.n_channels}")
        if not self.region_side > 0:
            raise ValueError(f"region_side must be positive, got {self.region_side}")
        if not self.cs_range > 0:
            raise ValueError(f"cs_range must be positive, got {self.cs_range}")


@dataclass(frozen=True, eq=False)
class Topology:
    positions: np.ndarray  # (N, 2) meters
    adjacency: np.ndarray  # (N, N) int8, symmetric, zero diagonal

    @property
    def n_aps(self) -> int:
        return self.adjacency.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (np.array_equal(self.positions, other.positions)
                and np.array_equal(self.adjacency, other.adjacency))

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def to_json(self) -> str:
        return json.dumps({"positions": self.positions.tolist(),
                           "adjacency": self.adjacency.astype(int).tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        obj = json.loads(text)
        adjacency = np.asarray(obj["adjacency"], dtype=np.int8)
        positions = np.asarray(obj["positions"], dtype=float).reshape(len(adjacency), 2)
        check_adjacency(adjacency)
        return cls(positions=positions, adjacency=adjacency)


@dataclass(frozen=True, eq=False)
class LaplacianDecomposition:
    degree: np.ndarray
    laplacian: np.ndarray
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns, orthonormal


def check_adjacency(adjacency: np.ndarray) -> None:
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {a.shape}")
    if not np.isin(a, (0, 1)).all():
        raise ValueError("adjacency entries must be 0 or 1")
    if not np.array_equal(a, a.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diag(a)):
        raise ValueError("adjacency must have a zero diagonal")


def contention_adjacency(positions: np.ndarray, cs_range: float) -> np.ndarray:
    """Adjacency of APs within carrier-sensing range (distance ties count as adjacent)."""
    pos = np.asarray(positions, dtype=float)
    dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    adj = (dist <= cs_range).astype(np.int8)
    np.fill_diagonal(adj, 0)
    return adj


def topology_from_positions(positions, cs_range: float) -> Topology:
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    return Topology(positions=pos, adjacency=contention_adjacency(pos, cs_range))


def generate_topology(config: TopologyConfig, seed: int) -> Topology:
    rng = np.random.default_rng(seed)
    positions = rng.uniform(0.0, config.region_side, size=(config.n_aps, 2))
    return topology_from_positions(positions, config.cs_range)


def jacobi_eigh(matrix: np.ndarray, tol: float = JACOBI_TOL,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for a real symmetric matrix.

    Sweeps over all (p, q) pairs in row order until the off-diagonal
    Frobenius norm drops below ``tol``. Returns eigenvalues ascending and
    the matching eigenvectors as columns, each column's first nonzero
    entry made positive.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    offdiag = ~np.eye(n, dtype=bool)
    sweeps = 0
    while True:
        off = np.sqrt(np.sum(a[offdiag] ** 2))
        if off < tol:
            break
        if sweeps == max_sweeps:
            raise EigenConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps (off-diagonal norm {off:.3e})")
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :]
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = v[:, order]
    for k in range(n):
        col = vectors[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-9)
        if nz.size and col[nz[0]] < 0:
            vectors[:, k] = -col
    return values, vectors


def laplacian_decompose(topology_or_adjacency) -> LaplacianDecomposition:
    adjacency = getattr(topology_or_adjacency, "adjacency", topology_or_adjacency)
    adj = np.asarray(adjacency, dtype=float)
    check_adjacency(adj)
    degree = np.diag(adj.sum(axis=1))
    laplacian = degree - adj
    values, vectors = jacobi_eigh(laplacian)
    return LaplacianDecomposition(degree=degree, laplacian=laplacian,
                                  eigenvalues=values, eigenvectors=vectors)
