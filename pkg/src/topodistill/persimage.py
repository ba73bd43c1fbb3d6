"""Persistence images, the topology loss, and its gradient back to features.

A diagram point (b, d) maps to normalized coordinates (b/eps, (d-b)/eps) on
the unit birth-persistence square, deposits a Gaussian bump weighted by its
normalized persistence onto a grid of cell centers, and the loss is the
squared L2 gap between synthetic and real images per degree. The gradient
walks the same chain backwards and lands on the features of each bar's
critical edge endpoints; everything combinatorial (subsample, graph, pairing)
is held fixed within a step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySideError, GridMismatchError
from .knngraph import PointCloud, build_mutual_knn, subsample_balanced
from .persistence import DiagramPoint, compute_persistence


@dataclass
class PersistenceImage:
    degree: int
    grid_side: int
    cells: np.ndarray  # length grid_side**2, cell (i, j) at index i*grid_side + j
    eps_max: float
    sigma_pi: float


def pi_cell_centers(grid_side: int) -> tuple[np.ndarray, np.ndarray]:
    """Flattened (birth-axis, persistence-axis) center coordinates."""
    ticks = (np.arange(grid_side) + 0.5) / grid_side
    cx = np.repeat(ticks, grid_side)   # index i: birth axis
    cy = np.tile(ticks, grid_side)     # index j: persistence axis
    return cx, cy


def _normalized_points(dgm: list[DiagramPoint], eps_max: float) -> np.ndarray:
    """(P, 2) array of (birth, persistence) scaled into the unit square."""
    if not dgm:
        return np.zeros((0, 2))
    arr = np.array([[pt.birth / eps_max, (pt.death - pt.birth) / eps_max] for pt in dgm])
    return arr


def rasterize(dgm: list[DiagramPoint], grid_side: int, sigma_pi: float,
              eps_max: float, degree: int | None = None) -> PersistenceImage:
    """Sum of persistence-weighted Gaussian bumps over the cell grid."""
    if sigma_pi <= 0:
        raise ValueError("sigma_pi must be > 0")
    if eps_max <= 0:
        raise ValueError("eps_max must be > 0")
    if grid_side < 1:
        raise ValueError("grid_side must be >= 1")
    if degree is None:
        degree = dgm[0].degree if dgm else 0
    cx, cy = pi_cell_centers(grid_side)
    cells = np.zeros(grid_side * grid_side)
    pts = _normalized_points(dgm, eps_max)
    for bhat, phat in pts:
        sq = (cx - bhat) ** 2 + (cy - phat) ** 2
        cells += phat * np.exp(-sq / (2.0 * sigma_pi * sigma_pi))
    return PersistenceImage(degree=degree, grid_side=grid_side, cells=cells,
                            eps_max=float(eps_max), sigma_pi=float(sigma_pi))


def topo_loss(syn_pis: tuple[PersistenceImage, PersistenceImage],
              real_pis: tuple[PersistenceImage, PersistenceImage], gamma: float) -> float:
    """||S0 - R0||^2 + gamma * ||S1 - R1||^2 for one class."""
    total = 0.0
    for weight, syn_pi, real_pi in ((1.0, syn_pis[0], real_pis[0]),
                                    (gamma, syn_pis[1], real_pis[1])):
        if syn_pi.grid_side != real_pi.grid_side or syn_pi.eps_max != real_pi.eps_max:
            raise GridMismatchError("persistence images must share grid and eps_max")
        diff = syn_pi.cells - real_pi.cells
        total += weight * float(diff @ diff)
    return total


@dataclass
class ClassTopology:
    """Everything the topology pipeline produces for one class."""

    cloud: PointCloud
    eps_max: float
    real_dgms: tuple[list[DiagramPoint], list[DiagramPoint]]
    syn_dgms: tuple[list[DiagramPoint], list[DiagramPoint]]
    real_pis: tuple[PersistenceImage, PersistenceImage]
    syn_pis: tuple[PersistenceImage, PersistenceImage]
    loss: float


def class_topology(syn_features, real_features, config, seed) -> ClassTopology:
    """Subsample both sides, build per-side graphs, compute diagrams and images.

    eps_max is taken from the real-side graph (its largest edge weight) and
    shared with the synthetic filtration so the two sides are comparable.
    """
    if len(syn_features) == 0 or len(real_features) == 0:
        raise EmptySideError("both sides must be non-empty")
    cloud = subsample_balanced(real_features, syn_features, config.n_c, seed)
    n_real = len(cloud.real_indices)
    real_cloud = PointCloud(points=cloud.points[:n_real],
                            side_tags=cloud.side_tags[:n_real])
    syn_cloud = PointCloud(points=cloud.points[n_real:],
                           side_tags=cloud.side_tags[n_real:])
    real_graph = build_mutual_knn(real_cloud, config.k_nn)
    eps_max = real_graph.max_weight()
    if eps_max <= 0:
        raise EmptySideError("real-side graph has no positive edge weight")
    syn_graph = build_mutual_knn(syn_cloud, config.k_nn)
    real_dgms = compute_persistence(real_graph, eps_max)
    syn_dgms = compute_persistence(syn_graph, eps_max)
    real_pis = tuple(rasterize(real_dgms[q], config.pi_grid, config.sigma_pi, eps_max, degree=q)
                     for q in (0, 1))
    syn_pis = tuple(rasterize(syn_dgms[q], config.pi_grid, config.sigma_pi, eps_max, degree=q)
                    for q in (0, 1))
    loss = topo_loss(syn_pis, real_pis, config.gamma_loop)
    return ClassTopology(cloud=cloud, eps_max=eps_max, real_dgms=real_dgms,
                         syn_dgms=syn_dgms, real_pis=real_pis, syn_pis=syn_pis, loss=loss)


def _bar_value_grads(dgm: list[DiagramPoint], pi: PersistenceImage,
                     dloss_dcells: np.ndarray) -> list[tuple[float, float]]:
    """Per-bar (dL/dbirth, dL/ddeath) through the rasterization kernel."""
    cx, cy = pi_cell_centers(pi.grid_side)
    sig2 = pi.sigma_pi * pi.sigma_pi
    eps = pi.eps_max
    out = []
    for pt in dgm:
        bhat = pt.birth / eps
        phat = (pt.death - pt.birth) / eps
        kern = np.exp(-((cx - bhat) ** 2 + (cy - phat) ** 2) / (2.0 * sig2))
        d_bhat = phat * kern * (cx - bhat) / sig2
        d_phat = kern + phat * kern * (cy - phat) / sig2
        sum_b = float(dloss_dcells @ d_bhat)
        sum_p = float(dloss_dcells @ d_phat)
        # birth enters both normalized coordinates; death only the persistence
        out.append(((sum_b - sum_p) / eps, sum_p / eps))
    return out


def topo_loss_grad(syn_features, real_features, config, seed) -> tuple[float, np.ndarray]:
    """One class's topology loss and its gradient per synthetic feature.

    Real features are constants. Capped deaths and degree-0 births carry no
    gradient; a degree-1 death differentiates through the filling triangle's
    maximal edge (lexicographic tie-break).
    """
    topo = class_topology(syn_features, real_features, config, seed)
    syn_arr = np.asarray(syn_features, dtype=np.float64)
    grads = np.zeros_like(syn_arr)
    n_real = len(topo.cloud.real_indices)
    syn_points = topo.cloud.points[n_real:]

    weight_of: dict[tuple[int, int], float] = {}
    for q in (0, 1):
        for pt in topo.syn_dgms[q]:
            for simplex in (pt.birth_simplex, pt.death_simplex):
                if simplex is not None and len(simplex) == 2:
                    u, v = simplex
                    weight_of[(u, v)] = float(np.linalg.norm(syn_points[u] - syn_points[v]))

    def route_edge(edge: tuple[int, int], coeff: float) -> None:
        u, v = edge
        w = weight_of[(u, v)]
        if w == 0.0:
            return
        direction = (syn_points[u] - syn_points[v]) / w
        grads[topo.cloud.syn_indices[u]] += coeff * direction
        grads[topo.cloud.syn_indices[v]] -= coeff * direction

    def max_edge_of_triangle(tri: tuple[int, int, int]) -> tuple[int, int]:
        a, b, t = tri
        candidates = sorted(((a, b), (a, t), (b, t)))
        weights = [weight_of.setdefault(
            e, float(np.linalg.norm(syn_points[e[0]] - syn_points[e[1]]))) for e in candidates]
        best = max(weights)
        for e, w in zip(candidates, weights):
            if w == best:
                return e
        raise AssertionError("unreachable")

    for q, gamma_w in ((0, 1.0), (1, config.gamma_loop)):
        dloss_dcells = 2.0 * gamma_w * (topo.syn_pis[q].cells - topo.real_pis[q].cells)
        bar_grads = _bar_value_grads(topo.syn_dgms[q], topo.syn_pis[q], dloss_dcells)
        for pt, (db, dd) in zip(topo.syn_dgms[q], bar_grads):
            if q == 1:
                route_edge(pt.birth_simplex, db)
            if not pt.capped:
                if len(pt.death_simplex) == 2:
                    route_edge(pt.death_simplex, dd)
                else:
                    route_edge(max_edge_of_triangle(pt.death_simplex), dd)
    return topo.loss, grads
