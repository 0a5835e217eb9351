"""Communication graphs: generation, incidence/Laplacian algebra, spectral norms.

Nodes are numbered ``0 .. N-1``.  Every undirected edge ``(i, j)`` is stored
with ``i < j`` and edges are kept in lexicographic order, which fixes the
edge index used by the incidence matrix and by per-edge step sizes.  The
edge-list text format is 1-based (see :func:`write_edge_list`).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .exceptions import GraphGenerationError, SpectralNormError

__all__ = [
    "Graph",
    "SpectralEstimate",
    "erdos_renyi",
    "sample_erdos_renyi",
    "incidence_matrix",
    "laplacian",
    "spectral_norm",
    "laplacian_norm",
    "is_connected",
    "read_edge_list",
    "write_edge_list",
]


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on ``num_nodes`` nodes."""

    num_nodes: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError("a graph needs at least one node")
        canon = []
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.num_nodes and 0 <= j < self.num_nodes):
                raise ValueError(f"edge ({i}, {j}) out of range for {self.num_nodes} nodes")
            canon.append((min(i, j), max(i, j)))
        canon.sort()
        if len(set(canon)) != len(canon):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        """Ascending neighbor ids of every node."""
        adj: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: l for l, e in enumerate(self.edges)}

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.neighbors], dtype=np.int64)

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls(n, tuple((i, i + 1) for i in range(n - 1)))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def star(cls, n_leaves: int) -> "Graph":
        return cls(n_leaves + 1, tuple((0, j) for j in range(1, n_leaves + 1)))


def sample_erdos_renyi(n_nodes: int, p: float, rng: np.random.Generator) -> Graph:
    """One G(n, p) draw, not conditioned on connectivity.

    Pairs are visited in lexicographic order and each is kept with
    probability ``p``.
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    rows, cols = np.triu_indices(n_nodes, k=1)
    keep = rng.random(rows.size) < p
    return Graph(n_nodes, tuple(zip(rows[keep].tolist(), cols[keep].tolist())))


def erdos_renyi(n_nodes: int, p: float, seed: int, max_retries: int = 1000) -> Graph:
    """Connected Erdos-Renyi graph, resampled until connected.

    Attempt ``a`` draws from ``default_rng([seed, a])``, so distinct seeds never
    share a sample even when most draws are rejected.
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    for attempt in range(max_retries):
        g = sample_erdos_renyi(n_nodes, p, np.random.default_rng([seed, attempt]))
        if is_connected(g):
            return g
    raise GraphGenerationError(n_nodes, p, seed, max_retries)


def incidence_matrix(g: Graph) -> np.ndarray:
    """Oriented node-arc incidence matrix, ``+1`` at the smaller endpoint."""
    B = np.zeros((g.num_nodes, g.num_edges), dtype=np.int64)
    for l, (i, j) in enumerate(g.edges):
        B[i, l] = 1
        B[j, l] = -1
    return B


def laplacian(g: Graph) -> np.ndarray:
    L = np.zeros((g.num_nodes, g.num_nodes), dtype=np.int64)
    for i, j in g.edges:
        L[i, j] = L[j, i] = -1
        L[i, i] += 1
        L[j, j] += 1
    return L


def is_connected(g: Graph) -> bool:
    seen = np.zeros(g.num_nodes, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in g.neighbors[i]:
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


class SpectralEstimate(NamedTuple):
    value: float
    iterations: int
    tol: float

    @property
    def bound(self) -> float:
        """Estimate inflated by ``1 + tol``; this is what step-size rules consume."""
        return self.value * (1.0 + self.tol)


def spectral_norm(
    apply: Callable[[np.ndarray], np.ndarray],
    dim: int,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    seed: int = 0,
) -> SpectralEstimate:
    """Largest eigenvalue of a symmetric PSD operator by power iteration.

    Stops once the Rayleigh quotient changes by less than ``tol`` relative
    to its current value.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if dim == 0:
        return SpectralEstimate(0.0, 0, tol)
    v = np.random.default_rng(seed).standard_normal(dim)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for it in range(1, max_iter + 1):
        w = np.asarray(apply(v), dtype=float)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return SpectralEstimate(0.0, it, tol)
        rayleigh = float(v @ w)
        if it > 1 and abs(rayleigh - estimate) <= tol * abs(rayleigh):
            return SpectralEstimate(rayleigh, it, tol)
        estimate = rayleigh
        v = w / nrm
    raise SpectralNormError(estimate, max_iter)


def laplacian_norm(g: Graph, tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0) -> SpectralEstimate:
    L = laplacian(g).astype(float)
    return spectral_norm(lambda v: L @ v, g.num_nodes, tol=tol, max_iter=max_iter, seed=seed)


def write_edge_list(g: Graph, path) -> None:
    """Write ``N M`` then one 1-based ``i j`` line per edge."""
    lines = [f"{g.num_nodes} {g.num_edges}"]
    lines += [f"{i + 1} {j + 1}" for i, j in g.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> Graph:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise ValueError(f"{path}: header must be 'N M'")
    n, m = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != m:
        raise ValueError(f"{path}: header announces {m} edges, found {len(body)}")
    edges = []
    for k, row in enumerate(body, start=2):
        if len(row) != 2:
            raise ValueError(f"{path}:{k}: expected 'i j'")
        i, j = int(row[0]), int(row[1])
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"{path}:{k}: node id out of range 1..{n}")
        edges.append((i - 1, j - 1))
    return Graph(n, tuple(edges))
