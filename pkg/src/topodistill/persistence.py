"""Flag-complex persistence on a weighted graph, Betti curves, and their
one-sided discrepancy.

The filtration enters vertices at 0, edges at their weights, and every
triangle of the graph at the maximum of its three edge weights (flag
completion, truncated at dimension 2). Connected components are tracked by
union-find; 1-cycles by GF(2) column reduction restricted to triangle
columns, which suffices because edge columns can never share a pivot row
with them. Each finite bar records the critical simplices that set its birth
and death, which is what lets gradients flow back to feature coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError
from .knngraph import MutualKnnGraph

KAPPA_GRID = 256


@dataclass
class DiagramPoint:
    """One persistence pair.

    birth_simplex / death_simplex hold vertex ids: a 1-tuple for a vertex,
    2-tuple for an edge, 3-tuple for a triangle. death_simplex is None when
    the class survives to eps_max (capped).
    """

    birth: float
    death: float
    degree: int
    capped: bool
    birth_simplex: tuple | None = None
    death_simplex: tuple | None = None

    def persistence(self) -> float:
        return self.death - self.birth


@dataclass
class BettiCurve:
    degree: int
    epsilons: np.ndarray
    counts: np.ndarray
    eps_max: float


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union_lower_survives(self, a: int, b: int) -> tuple[int, int] | None:
        """Merge the components of a and b; the lower-index root survives.

        Returns (survivor_root, dying_root), or None if already connected.
        """
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return None
        survivor, dying = (ra, rb) if ra < rb else (rb, ra)
        self.parent[dying] = survivor
        return survivor, dying


def compute_persistence(graph: MutualKnnGraph, eps_max: float
                        ) -> tuple[list[DiagramPoint], list[DiagramPoint]]:
    """H0 and H1 diagrams of the graph's flag filtration, capped at eps_max.

    Degree-1 pairs of zero persistence (a cycle filled the instant it forms)
    are dropped; degree-0 keeps one bar per vertex.
    """
    if eps_max <= 0:
        raise ValueError("eps_max must be > 0")
    n = graph.vertex_count
    edges = [(u, v, w) for u, v, w in graph.edges if w <= eps_max]
    edges.sort(key=lambda e: (e[2], e[0], e[1]))

    h0: list[DiagramPoint] = []
    uf = _UnionFind(n)
    positive_edges: list[int] = []  # indices into `edges` of cycle-creating edges
    for ei, (u, v, w) in enumerate(edges):
        merged = uf.union_lower_survives(u, v)
        if merged is None:
            positive_edges.append(ei)
        else:
            _, dying = merged
            h0.append(DiagramPoint(birth=0.0, death=w, degree=0, capped=False,
                                   birth_simplex=(dying,), death_simplex=(u, v)))
    for vid in range(n):
        if uf.find(vid) == vid:
            h0.append(DiagramPoint(birth=0.0, death=float(eps_max), degree=0, capped=True,
                                   birth_simplex=(vid,), death_simplex=None))

    h1 = _reduce_triangles(edges, positive_edges, graph, eps_max)
    return h0, h1


def _reduce_triangles(edges, positive_edges, graph: MutualKnnGraph, eps_max: float
                      ) -> list[DiagramPoint]:
    """Pair cycle-creating edges with the triangles that fill them."""
    if not positive_edges:
        return []
    edge_row = {(u, v): i for i, (u, v, _) in enumerate(edges)}
    weight_of = {(u, v): w for u, v, w in edges}
    adj = [set() for _ in range(graph.vertex_count)]
    for u, v, _ in edges:
        adj[u].add(v)
        adj[v].add(u)

    triangles: list[tuple[float, tuple[int, int, int]]] = []
    for u, v, _ in edges:
        a, b = (u, v) if u < v else (v, u)
        for t in adj[a] & adj[b]:
            if t > b:
                val = max(weight_of[(a, b)], weight_of[(a, t)], weight_of[(b, t)])
                triangles.append((val, (a, b, t)))
    triangles.sort(key=lambda item: (item[0], item[1]))

    reduced: dict[int, int] = {}   # owner triangle index -> reduced column bitmask
    low_owner: dict[int, int] = {}  # edge row -> triangle index owning that pivot
    pair_of_edge: dict[int, tuple[float, tuple[int, int, int]]] = {}
    for ti, (val, (a, b, t)) in enumerate(triangles):
        col = ((1 << edge_row[(a, b)])
               ^ (1 << edge_row[(a, t)])
               ^ (1 << edge_row[(b, t)]))
        while col:
            low = col.bit_length() - 1
            owner = low_owner.get(low)
            if owner is None:
                break
            col ^= reduced[owner]
        if col:
            low = col.bit_length() - 1
            reduced[ti] = col
            low_owner[low] = ti
            pair_of_edge[low] = (val, (a, b, t))

    h1: list[DiagramPoint] = []
    for ei in positive_edges:
        u, v, w = edges[ei]
        hit = pair_of_edge.get(ei)
        if hit is None:
            h1.append(DiagramPoint(birth=w, death=float(eps_max), degree=1, capped=True,
                                   birth_simplex=(u, v), death_simplex=None))
        elif hit[0] != w:
            h1.append(DiagramPoint(birth=w, death=hit[0], degree=1, capped=False,
                                   birth_simplex=(u, v), death_simplex=hit[1]))
    return h1


def betti_curve(dgm: list[DiagramPoint], eps_max: float, grid_size: int,
                degree: int | None = None) -> BettiCurve:
    """Alive-bar counts (birth <= eps < death) at uniform samples of [0, eps_max]."""
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    if eps_max <= 0:
        raise ValueError("eps_max must be > 0")
    if degree is None:
        degree = dgm[0].degree if dgm else 0
    eps = np.linspace(0.0, eps_max, grid_size)
    counts = np.zeros(grid_size, dtype=np.int64)
    for pt in dgm:
        counts += (pt.birth <= eps) & (eps < pt.death)
    return BettiCurve(degree=degree, epsilons=eps, counts=counts, eps_max=float(eps_max))


def kappa(real_curves: tuple[BettiCurve, BettiCurve],
          syn_curves: tuple[BettiCurve, BettiCurve], gamma: float) -> float:
    """One-sided Betti discrepancy: integral of (real - syn)_+ per degree,
    the degree-1 term weighted by gamma."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    total = 0.0
    for weight, real_c, syn_c in ((1.0, real_curves[0], syn_curves[0]),
                                  (gamma, real_curves[1], syn_curves[1])):
        if real_c.epsilons.shape != syn_c.epsilons.shape or \
                not np.array_equal(real_c.epsilons, syn_c.epsilons):
            raise GridMismatchError("Betti curves must share their epsilon grid")
        deficit = np.maximum(real_c.counts - syn_c.counts, 0.0)
        total += weight * float(np.trapezoid(deficit, real_c.epsilons))
    return total
