"""One-dimensional single-linkage clustering of opinion values.

Distances are absolute differences (Manhattan distance in one dimension) and
the distance between two clusters is that of their closest members.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_CUT = 0.2


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    distance: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge sequence over ``leaves``.

    Leaves carry ids ``0..n-1``; the cluster formed by merge ``k`` gets id
    ``n + k`` (the scipy linkage convention).
    """

    leaves: tuple
    merges: tuple

    @property
    def n(self):
        return len(self.leaves)

    def heights(self):
        return np.array([m.distance for m in self.merges])


def single_linkage(values):
    """Agglomerate ``values`` bottom-up, always merging the closest pair of clusters.

    Ties go to the lowest-index pair, where a cluster's index is its position
    in the active list (surviving clusters keep their slot, merged ones take
    the lower slot).
    """
    x = np.asarray(values, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValueError("single_linkage needs at least one value")

    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, np.inf)
    active = np.ones(n, dtype=bool)
    ids = list(range(n))
    sizes = [1] * n
    merges = []
    for k in range(n - 1):
        masked = np.where(active[:, None] & active[None, :], dist, np.inf)
        flat = int(np.argmin(masked))  # row-major: lowest (a, b) on ties
        a, b = divmod(flat, n)
        if a > b:
            a, b = b, a
        d = float(masked[a, b])
        merges.append(Merge(ids[a], ids[b], d, sizes[a] + sizes[b]))
        # single-linkage update: closest member of either side
        row = np.minimum(dist[a], dist[b])
        dist[a, :] = row
        dist[:, a] = row
        dist[a, a] = np.inf
        active[b] = False
        ids[a] = n + k
        sizes[a] += sizes[b]
    return Dendrogram(tuple(x.tolist()), tuple(merges))


def count_clusters(dendrogram, cut=DEFAULT_CUT):
    """Clusters left after refusing every merge whose distance exceeds ``cut``."""
    if cut < 0:
        raise ValueError(f"cut height must be >= 0, got {cut}")
    return 1 + sum(1 for m in dendrogram.merges if m.distance > cut)


def sorted_gap_oracle(values, cut=DEFAULT_CUT):
    """1 + number of adjacent gaps in the sorted values strictly greater than ``cut``."""
    if cut < 0:
        raise ValueError(f"cut height must be >= 0, got {cut}")
    x = np.sort(np.asarray(values, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("need at least one value")
    return 1 + int(np.count_nonzero(np.diff(x) > cut))


def count_clusters_rows(matrix, cut=DEFAULT_CUT):
    """Row-wise cluster counts of a 2-D array (fast path used for time series)."""
    x = np.sort(np.asarray(matrix, dtype=float), axis=-1)
    return 1 + np.count_nonzero(np.diff(x, axis=-1) > cut, axis=-1)
