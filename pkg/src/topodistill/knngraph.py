"""Balanced subsampling and mutual k-NN graph construction on feature points.

The graph is the filtration substrate for persistence: vertices are feature
points, an edge exists only when each endpoint ranks among the other's k
nearest neighbors, and its weight is the exact Euclidean distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCloudError, EmptySideError

REAL_TAG = "real"
SYN_TAG = "synthetic"


@dataclass
class PointCloud:
    """Feature points with per-point side tags and source indices."""

    points: np.ndarray  # (n, d)
    side_tags: list[str]
    real_indices: list[int] = field(default_factory=list)  # positions in the source real list
    syn_indices: list[int] = field(default_factory=list)   # positions in the source syn list

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise DegenerateCloudError("point cloud must be a non-empty (n, d) array")
        if len(self.side_tags) != self.points.shape[0]:
            raise DegenerateCloudError("side_tags length must match point count")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def side_view(self, tag: str) -> np.ndarray:
        mask = [t == tag for t in self.side_tags]
        return self.points[mask]


@dataclass
class MutualKnnGraph:
    """Undirected weighted graph; edges (u, v, w) with u < v, sorted by (w, u, v)."""

    vertex_count: int
    edges: list[tuple[int, int, float]]

    def max_weight(self) -> float:
        """Largest edge weight, 0.0 for an edgeless graph."""
        if not self.edges:
            return 0.0
        return max(w for _, _, w in self.edges)

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.vertex_count)]
        for u, v, _ in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj


def subsample_balanced(real_feats, syn_feats, n_c: int, seed) -> PointCloud:
    """Draw up to n_c points per side uniformly without replacement.

    Selection depends only on the side sizes and the seed, never on feature
    values, so the chosen indices are stable under perturbation of the
    features themselves. Real points come first in the cloud.
    """
    real_arr = np.asarray(real_feats, dtype=np.float64)
    syn_arr = np.asarray(syn_feats, dtype=np.float64)
    if real_arr.ndim == 1:
        real_arr = real_arr.reshape(len(real_feats), -1) if len(real_feats) else real_arr
    if syn_arr.ndim == 1:
        syn_arr = syn_arr.reshape(len(syn_feats), -1) if len(syn_feats) else syn_arr
    if real_arr.shape[0] == 0 or syn_arr.shape[0] == 0:
        raise EmptySideError("both real and synthetic sides must be non-empty")
    if n_c < 1:
        raise ValueError("n_c must be >= 1")
    rng = np.random.default_rng(seed)
    take_real = min(n_c, real_arr.shape[0])
    take_syn = min(n_c, syn_arr.shape[0])
    real_sel = sorted(rng.choice(real_arr.shape[0], size=take_real, replace=False).tolist())
    syn_sel = sorted(rng.choice(syn_arr.shape[0], size=take_syn, replace=False).tolist())
    points = np.vstack([real_arr[real_sel], syn_arr[syn_sel]])
    tags = [REAL_TAG] * take_real + [SYN_TAG] * take_syn
    return PointCloud(points=points, side_tags=tags,
                      real_indices=real_sel, syn_indices=syn_sel)


def build_mutual_knn(cloud: PointCloud, k: int) -> MutualKnnGraph:
    """Mutual k-NN graph with exact O(n^2) distances.

    Neighbor ranks break distance ties by lower index, so the graph is a
    deterministic function of the cloud.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = cloud.n
    if n < 2:
        raise DegenerateCloudError("need at least 2 points to build a graph")
    pts = cloud.points
    diffs = pts[:, np.newaxis, :] - pts[np.newaxis, :, :]
    dist = np.sqrt(np.sum(diffs * diffs, axis=2))
    neighbor_sets: list[set[int]] = []
    for u in range(n):
        order = sorted((dist[u, v], v) for v in range(n) if v != u)
        neighbor_sets.append({v for _, v in order[:k]})
    edges: list[tuple[int, int, float]] = []
    for u in range(n):
        for v in neighbor_sets[u]:
            if u < v and u in neighbor_sets[v]:
                edges.append((u, v, float(dist[u, v])))
    edges.sort(key=lambda e: (e[2], e[0], e[1]))
    return MutualKnnGraph(vertex_count=n, edges=edges)
