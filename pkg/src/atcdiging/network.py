"""Undirected communication graphs and doubly stochastic mixing matrices."""

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
import heapq

import numpy as np

from .errors import NotDoublyStochastic
from .linalg import consensus_seminorm

STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``.

    Edges are stored as sorted pairs ``(i, j)`` with ``i < j``.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a graph needs at least one node")
        canon = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) outside [0, {self.n})")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(canon))

    @classmethod
    def from_edges(cls, n, edges):
        return cls(n, frozenset(tuple(e) for e in edges))

    @classmethod
    def from_adjacency(cls, adj):
        adj = np.asarray(adj)
        iu, ju = np.nonzero(np.triu(adj, k=1))
        return cls(adj.shape[0], frozenset(zip(iu.tolist(), ju.tolist())))

    @cached_property
    def adjacency(self):
        a = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        a.setflags(write=False)
        return a

    @property
    def degrees(self):
        return self.adjacency.sum(axis=1)

    def neighbors(self, i):
        return sorted(int(j) for j in np.nonzero(self.adjacency[i])[0])

    def is_connected(self):
        seen = {0}
        queue = deque([0])
        adj = self.adjacency
        while queue:
            i = queue.popleft()
            for j in np.nonzero(adj[i])[0]:
                j = int(j)
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
        return len(seen) == self.n


def complete_graph(n):
    return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def path_graph(n):
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def ring_graph(n):
    if n < 3:
        return path_graph(n)
    return Graph(n, frozenset((min(i, (i + 1) % n), max(i, (i + 1) % n)) for i in range(n)))


def star_graph(n):
    return Graph(n, frozenset((0, i) for i in range(1, n)))


def _check_doubly_stochastic(w):
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise NotDoublyStochastic(f"mixing matrix must be square, got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise NotDoublyStochastic("mixing matrix has non-finite entries")
    if np.any(w < 0):
        raise NotDoublyStochastic("mixing matrix has negative entries")
    rows = np.abs(w.sum(axis=1) - 1.0).max()
    cols = np.abs(w.sum(axis=0) - 1.0).max()
    if rows > STOCHASTIC_TOL or cols > STOCHASTIC_TOL:
        raise NotDoublyStochastic(
            f"row/column sums deviate from 1 by {rows:.3g}/{cols:.3g}"
        )


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Nonnegative doubly stochastic weights, optionally tied to a graph."""

    weights: np.ndarray
    graph: Graph = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        _check_doubly_stochastic(w)
        if self.graph is not None:
            if self.graph.n != w.shape[0]:
                raise ValueError("graph and weight matrix disagree on n")
            allowed = self.graph.adjacency | np.eye(w.shape[0], dtype=bool)
            if np.any(w[~allowed] != 0):
                raise ValueError("weights are not compliant with the graph")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self):
        return self.weights.shape[0]

    @cached_property
    def delta(self):
        return contraction_factor(self)

    def __matmul__(self, other):
        return self.weights @ other


def metropolis_weights(g):
    """Metropolis-Hastings weights ``1 / (1 + max(deg_i, deg_j))`` on each edge."""
    adj = g.adjacency
    deg = adj.sum(axis=1)
    w = np.where(adj, 1.0 / (1.0 + np.maximum.outer(deg, deg)), 0.0)
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return MixingMatrix(w, g)


def averaging_matrix(n):
    """Complete averaging ``(1/n) 11'``."""
    return MixingMatrix(np.full((n, n), 1.0 / n))


def contraction_factor(w, tol=1e-12, max_iter=10_000, seed=0):
    """Spectral norm of ``W - (1/n) 11'`` by power iteration.

    The iteration runs on ``B'B`` with ``B = W - (1/n) 11'`` and stops once
    successive Rayleigh quotients differ by less than ``tol``.
    """
    weights = w.weights if isinstance(w, MixingMatrix) else np.asarray(w, dtype=float)
    _check_doubly_stochastic(weights)
    n = weights.shape[0]
    if n == 1:
        return 0.0

    def apply_b(v):
        u = weights @ v
        return u - u.mean()

    def apply_bt(v):
        u = weights.T @ v
        return u - u.mean()

    v = np.random.default_rng(seed).standard_normal(n)
    v -= v.mean()
    v /= np.linalg.norm(v)
    rq = 0.0
    for _ in range(max_iter):
        u = apply_bt(apply_b(v))
        rq_new = float(v @ u)
        norm_u = np.linalg.norm(u)
        if norm_u == 0.0:
            return 0.0
        v = u / norm_u
        if abs(rq_new - rq) < tol:
            rq = rq_new
            break
        rq = rq_new
    return float(np.sqrt(max(rq, 0.0)))


def verify_contraction(w, trials=1000, seed=0, p=3):
    """Largest observed ``||W y||_L / ||y||_L`` over random ``y``.

    Consensual draws (zero seminorm) contribute a ratio of 0.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    weights = w.weights if isinstance(w, MixingMatrix) else np.asarray(w, dtype=float)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        y = rng.standard_normal((weights.shape[0], p))
        den = consensus_seminorm(y)
        if den == 0.0:
            continue
        worst = max(worst, consensus_seminorm(weights @ y) / den)
    return worst


def random_spanning_tree(n, rng):
    """Uniform random labelled tree on ``n`` nodes via a Pruefer sequence."""
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = rng.integers(0, n, size=n - 2).tolist()
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((u, v))
    return edges


@dataclass(frozen=True)
class GraphSequence:
    """Source of the communication graph used at each iteration.

    ``mode='static'`` always yields ``graph``. ``mode='random'`` yields, for
    iteration k, a uniform random spanning tree on ``n`` nodes plus every other
    edge independently with probability ``edge_prob``; the draw depends only on
    ``(seed, k)``.
    """

    mode: str = "static"
    graph: Graph = None
    n: int = None
    edge_prob: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.mode == "static":
            if self.graph is None:
                raise ValueError("static graph sequence needs a graph")
            if not self.graph.is_connected():
                raise ValueError("static graph must be connected")
            object.__setattr__(self, "n", self.graph.n)
        elif self.mode == "random":
            if self.n is None or self.n < 1:
                raise ValueError("random graph sequence needs n >= 1")
            if not 0.0 <= self.edge_prob <= 1.0:
                raise ValueError("edge_prob must lie in [0, 1]")
        else:
            raise ValueError(f"unknown graph sequence mode {self.mode!r}")

    @classmethod
    def static(cls, graph):
        return cls(mode="static", graph=graph)

    @classmethod
    def random(cls, n, edge_prob=0.3, seed=0):
        return cls(mode="random", n=n, edge_prob=edge_prob, seed=seed)

    @property
    def is_static(self):
        return self.mode == "static"

    @cached_property
    def _static_mixing(self):
        return metropolis_weights(self.graph) if self.mode == "static" else None

    def mixing(self, k):
        """Metropolis mixing matrix of the graph at iteration ``k``."""
        if self.mode == "static":
            return self._static_mixing
        return metropolis_weights(next_graph(self, k))


def next_graph(seq, k):
    if seq.mode == "static":
        return seq.graph
    n = seq.n
    rng = np.random.default_rng([seq.seed, k])
    edges = set((min(i, j), max(i, j)) for i, j in random_spanning_tree(n, rng))
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < seq.edge_prob
    edges.update(zip(iu[keep].tolist(), ju[keep].tolist()))
    return Graph(n, frozenset(edges))


def format_edgelist(g):
    lines = [f"n {g.n}"]
    lines += [f"{i} {j}" for i, j in sorted(g.edges)]
    return "\n".join(lines) + "\n"


def parse_edgelist(text):
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("n "):
        raise ValueError("edge list must start with a 'n <count>' header")
    n = int(lines[0].split()[1])
    edges = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return Graph.from_edges(n, edges)


def write_edgelist(g, path):
    with open(path, "w") as fh:
        fh.write(format_edgelist(g))


def read_edgelist(path):
    with open(path) as fh:
        return parse_edgelist(fh.read())
