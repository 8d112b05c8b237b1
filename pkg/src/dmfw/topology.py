"""Communication graphs and the doubly stochastic gossip matrix.

The gossip weights follow the max-degree rule

    W_ij = 1 / (1 + max(d_i, d_j))   for (i, j) in E
    W_ii = 1 - sum_{j in N(i)} W_ij

which yields a symmetric, doubly stochastic matrix supported on the graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ._validation import check_positive_int
from .exceptions import ConstructionError, NumericError

__all__ = [
    "Topology",
    "GossipMatrix",
    "TOPOLOGY_KINDS",
    "build_topology",
    "build_gossip_matrix",
    "second_eigenvalue_magnitude",
    "check_gossip_matrix",
]

TOPOLOGY_KINDS = ("complete", "cycle", "line", "star", "erdos_renyi")

ER_MAX_RETRIES = 1000


def _normalize_edge(i, j):
    i, j = int(i), int(j)
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Topology:
    """Undirected simple graph on nodes ``0..n-1``.

    Edges are stored as unordered pairs ``(i, j)`` with ``i < j``.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        check_positive_int(self.n, "n")
        normalized = set()
        for i, j in self.edges:
            if i == j:
                raise ConstructionError(f"self-loop ({i},{i}) is not allowed")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ConstructionError(f"edge ({i},{j}) out of range for n={self.n}")
            normalized.add(_normalize_edge(i, j))
        object.__setattr__(self, "edges", frozenset(normalized))

    @property
    def num_edges(self):
        return len(self.edges)

    def degrees(self):
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self, i):
        out = [j for a, b in self.edges for j in ((b,) if a == i else (a,) if b == i else ())]
        return sorted(out)

    def adjacency(self):
        adj = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    def is_connected(self):
        if self.n == 1:
            return True
        n_comp, _ = connected_components(csr_matrix(self.adjacency()), directed=False)
        return n_comp == 1

    def relabel(self, perm):
        """Return the graph with node ``i`` renamed ``perm[i]``."""
        perm = [int(p) for p in perm]
        if sorted(perm) != list(range(self.n)):
            raise ValueError("perm must be a permutation of range(n)")
        return Topology(self.n, frozenset((perm[i], perm[j]) for i, j in self.edges))

    def to_edgelist(self):
        """Serialize as ``n <count>`` followed by one ``i j`` line per edge."""
        lines = [f"n {self.n}"]
        lines.extend(f"{i} {j}" for i, j in sorted(self.edges))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist(cls, text):
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows or len(rows[0]) != 2 or rows[0][0] != "n":
            raise ConstructionError("edge list must start with a line 'n <count>'")
        try:
            n = int(rows[0][1])
            edges = set()
            for lineno, row in enumerate(rows[1:], start=2):
                if len(row) != 2:
                    raise ConstructionError(f"edge line {lineno} must hold two node indices")
                edges.add((int(row[0]), int(row[1])))
        except ValueError as exc:
            raise ConstructionError(f"malformed edge list: {exc}") from None
        return cls(n, frozenset(edges))


def _complete(n):
    return {(i, j) for i in range(n) for j in range(i + 1, n)}


def _line(n):
    return {(i, i + 1) for i in range(n - 1)}


def _cycle(n):
    edges = _line(n)
    if n > 2:
        edges.add((0, n - 1))
    return edges


def _star(n):
    return {(0, j) for j in range(1, n)}


def build_topology(kind, n, seed=0, p=None):
    """Build a connected topology of the given ``kind`` on ``n`` nodes.

    ``erdos_renyi`` draws G(n, p) and reseeds until the sample is connected,
    giving up after ``ER_MAX_RETRIES`` attempts.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise ConstructionError(f"topology needs n >= 2 agents, got {n!r}")
    n = int(n)
    if kind == "complete":
        edges = _complete(n)
    elif kind == "cycle":
        edges = _cycle(n)
    elif kind == "line":
        edges = _line(n)
    elif kind == "star":
        edges = _star(n)
    elif kind == "erdos_renyi":
        if p is None or not 0.0 < p <= 1.0:
            raise ConstructionError(f"erdos_renyi needs p in (0,1], got {p!r}")
        iu, ju = np.triu_indices(n, k=1)
        for attempt in range(ER_MAX_RETRIES):
            rng = np.random.default_rng([int(seed) & (2**64 - 1), attempt])
            keep = rng.random(iu.size) < p
            topo = Topology(n, frozenset(zip(iu[keep].tolist(), ju[keep].tolist())))
            if topo.is_connected():
                return topo
        raise ConstructionError(
            f"erdos_renyi(n={n}, p={p}) not connected after {ER_MAX_RETRIES} reseeds"
        )
    else:
        raise ConstructionError(f"unknown topology kind {kind!r}; expected one of {TOPOLOGY_KINDS}")
    return Topology(n, frozenset(edges))


@dataclass(frozen=True)
class GossipMatrix:
    """Dense symmetric doubly stochastic mixing matrix over a topology."""

    topology: Topology
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def n(self):
        return self.topology.n

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def mix(self, values):
        """Apply ``W`` along the agent axis (axis 0) of ``values``."""
        return np.tensordot(self.entries, values, axes=(1, 0))

    def lambda2(self):
        return second_eigenvalue_magnitude(self)


def build_gossip_matrix(topology):
    """Max-degree gossip weights for a connected topology."""
    if not topology.is_connected():
        raise ConstructionError("gossip matrix requires a connected topology")
    n = topology.n
    deg = topology.degrees()
    w = np.zeros((n, n))
    for i, j in topology.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(n):
        # fsum is order independent, so relabelled graphs give P W P^T exactly.
        w[i, i] = 1.0 - math.fsum(w[i, j] for j in range(n) if j != i)
    return GossipMatrix(topology, w)


def check_gossip_matrix(w, tol=1e-12):
    """Raise ConstructionError naming the first violated gossip invariant."""
    entries = np.asarray(w.entries if isinstance(w, GossipMatrix) else w, dtype=float)
    n = entries.shape[0]
    if entries.shape != (n, n):
        raise ConstructionError("gossip matrix must be square")
    if not np.array_equal(entries, entries.T):
        raise ConstructionError("gossip matrix is not symmetric")
    if np.any(entries < 0.0) or np.any(entries > 1.0):
        raise ConstructionError("gossip matrix has entries outside [0,1]")
    if (np.max(np.abs(entries.sum(axis=1) - 1.0)) > tol
            or np.max(np.abs(entries.sum(axis=0) - 1.0)) > tol):
        raise ConstructionError("gossip matrix is not doubly stochastic")
    if isinstance(w, GossipMatrix):
        adj = w.topology.adjacency()
        off = ~np.eye(n, dtype=bool) & ~adj
        if np.any(entries[off] != 0.0):
            raise ConstructionError("gossip matrix sparsity does not match the topology")
        if w.topology.is_connected() and n > 1 and second_eigenvalue_magnitude(w) >= 1.0:
            raise ConstructionError("gossip matrix has |lambda_2| >= 1")


def second_eigenvalue_magnitude(w):
    """Second-largest eigenvalue magnitude of the symmetric matrix ``w``."""
    entries = np.asarray(w.entries if isinstance(w, GossipMatrix) else w, dtype=float)
    if entries.shape[0] < 2:
        return 0.0
    try:
        eig = np.linalg.eigvalsh(entries)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigen-decomposition failed: {exc}") from None
    mags = np.sort(np.abs(eig))[::-1]
    return float(mags[1])
