"""Erdos-Renyi interaction graphs and degree-based authority."""

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .seeding import derive_seed

MAX_CONNECT_ATTEMPTS = 1000


class GraphGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GraphConfig:
    n: int
    edge_prob: float = 0.1
    enforce_connected: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ValueError(f"edge_prob must lie in [0, 1], got {self.edge_prob}")


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph stored as a dense symmetric boolean matrix."""

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if adj.diagonal().any():
            raise ValueError("self-loops are not allowed")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @property
    def n(self):
        return self.adjacency.shape[0]

    @cached_property
    def degrees(self):
        return self.adjacency.sum(axis=1)

    @property
    def n_edges(self):
        return int(self.degrees.sum()) // 2

    def neighbors(self, i):
        return np.flatnonzero(self.adjacency[i])

    def edges(self):
        """Sorted ``(i, j)`` pairs with ``i < j``."""
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(i.tolist(), j.tolist()))

    @cached_property
    def csr(self):
        """``(indptr, indices)`` adjacency lists, neighbors in ascending order."""
        rows, cols = np.nonzero(self.adjacency)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=self.n), out=indptr[1:])
        return indptr, cols.astype(np.int64)

    def is_connected(self):
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        frontier = seen.copy()
        while frontier.any():
            frontier = self.adjacency[frontier].any(axis=0) & ~seen
            seen |= frontier
        return bool(seen.all())

    def authorities(self):
        return self.degrees / (self.n - 1)

    def __eq__(self, other):
        return isinstance(other, Graph) and np.array_equal(self.adjacency, other.adjacency)

    __hash__ = None


@lru_cache(maxsize=16)
def _upper_pairs(n):
    iu, ju = np.triu_indices(n, k=1)
    iu.setflags(write=False)
    ju.setflags(write=False)
    return iu, ju


def sample_er(n, edge_prob, rng):
    """One G(n, p) draw: each unordered pair kept independently with probability p."""
    iu, ju = _upper_pairs(n)
    keep = rng.random(iu.size) < edge_prob
    adj = np.zeros((n, n), dtype=bool)
    adj[iu[keep], ju[keep]] = True
    adj |= adj.T
    return Graph(adj)


def generate_er(config):
    """Generate an Erdos-Renyi graph, re-sampling until connected if requested.

    Attempt ``k`` draws from the sub-stream ``(config.seed, k)``, so the result
    is a pure function of the config.
    """
    attempts = MAX_CONNECT_ATTEMPTS if config.enforce_connected else 1
    for k in range(attempts):
        rng = np.random.default_rng(derive_seed(config.seed, k))
        g = sample_er(config.n, config.edge_prob, rng)
        if not config.enforce_connected or g.is_connected():
            return g
    raise GraphGenerationError(
        f"no connected G(n={config.n}, p={config.edge_prob}) sample "
        f"after {MAX_CONNECT_ATTEMPTS} attempts"
    )


def authority(g, i):
    """Degree of ``i`` divided by the number of other nodes."""
    if not 0 <= i < g.n:
        raise IndexError(f"agent {i} out of range for n={g.n}")
    return float(g.degrees[i]) / (g.n - 1)


def extend_er(g, n_new, edge_prob, rng):
    """Append ``n_new`` nodes, wiring each new pair (new-old and new-new) with probability p."""
    n = g.n
    m = n + n_new
    adj = np.zeros((m, m), dtype=bool)
    adj[:n, :n] = g.adjacency
    if n_new:
        # rows of new nodes, columns below the diagonal
        ii, jj = np.tril_indices(m, k=-1)
        new_pairs = ii >= n
        ii, jj = ii[new_pairs], jj[new_pairs]
        keep = rng.random(ii.size) < edge_prob
        adj[ii[keep], jj[keep]] = True
        adj |= adj.T
    return Graph(adj)


def write_edge_list(g, path):
    with open(path, "w") as fh:
        for i, j in g.edges():
            fh.write(f"{i} {j}\n")
