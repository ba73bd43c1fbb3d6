"""Brute-force reference implementations used by tests and the verify command.

Each oracle recomputes its answer from first principles along a code path
disjoint from the module it checks: persistence by reducing the full filtered
boundary matrix of the complete graph, retrieval by rescoring every candidate
from raw pixels, gradients by central differences. Speed is a non-goal.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyPoolError, OracleSizeError
from .features import embed

BRUTE_VERTEX_CAP = 10


def finite_diff(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient estimate of a scalar function."""
    if step <= 0:
        raise ValueError("step must be > 0")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xflat = x.reshape(-1)
    for i in range(xflat.size):
        orig = xflat[i]
        xflat[i] = orig + step
        hi = f(x)
        xflat[i] = orig - step
        lo = f(x)
        xflat[i] = orig
        flat[i] = (hi - lo) / (2.0 * step)
    return grad


def brute_vr_persistence(points: np.ndarray, eps_max: float):
    """Persistence of the complete-graph flag filtration, by full reduction.

    Enumerates every vertex, edge, and triangle with filtration value at most
    eps_max, orders simplices by (value, dimension, vertex ids), and reduces
    the GF(2) boundary matrix column by column (columns as integer bitmasks).
    Returns (h0, h1) where each is a list of (birth, death, capped) tuples;
    unpaired classes are capped at eps_max. Degree-1 pairs that die the
    instant they are born are dropped.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, np.newaxis]
    n = pts.shape[0]
    if n > BRUTE_VERTEX_CAP:
        raise OracleSizeError(f"brute persistence capped at {BRUTE_VERTEX_CAP} points, got {n}")
    if eps_max <= 0:
        raise ValueError("eps_max must be > 0")

    dist = np.zeros((n, n))
    for u in range(n):
        for v in range(u + 1, n):
            dist[u, v] = dist[v, u] = float(np.linalg.norm(pts[u] - pts[v]))

    simps: list[tuple[float, int, tuple]] = [(0.0, 0, (i,)) for i in range(n)]
    for u in range(n):
        for v in range(u + 1, n):
            if dist[u, v] <= eps_max:
                simps.append((dist[u, v], 1, (u, v)))
    for u in range(n):
        for v in range(u + 1, n):
            for t in range(v + 1, n):
                val = max(dist[u, v], dist[u, t], dist[v, t])
                if val <= eps_max:
                    simps.append((val, 2, (u, v, t)))
    simps.sort(key=lambda s: (s[0], s[1], s[2]))
    col_of = {verts: j for j, (_, _, verts) in enumerate(simps)}

    reduced: dict[int, int] = {}
    low_to_col: dict[int, int] = {}
    pair_of_row: dict[int, int] = {}
    positive: set[int] = set()
    for j, (_, dim, verts) in enumerate(simps):
        col = 0
        if dim == 1:
            col = (1 << col_of[(verts[0],)]) | (1 << col_of[(verts[1],)])
        elif dim == 2:
            u, v, t = verts
            col = (1 << col_of[(u, v)]) ^ (1 << col_of[(u, t)]) ^ (1 << col_of[(v, t)])
        while col:
            low = col.bit_length() - 1
            owner = low_to_col.get(low)
            if owner is None:
                break
            col ^= reduced[owner]
        if col:
            low = col.bit_length() - 1
            reduced[j] = col
            low_to_col[low] = j
            pair_of_row[low] = j
        else:
            positive.add(j)

    h0: list[tuple[float, float, bool]] = []
    h1: list[tuple[float, float, bool]] = []
    for j, (val, dim, _) in enumerate(simps):
        if dim == 0:
            if j in pair_of_row:
                h0.append((0.0, simps[pair_of_row[j]][0], False))
            else:
                h0.append((0.0, float(eps_max), True))
        elif dim == 1 and j in positive:
            if j in pair_of_row:
                death = simps[pair_of_row[j]][0]
                if death != val:
                    h1.append((val, death, False))
            else:
                h1.append((val, float(eps_max), True))
    return h0, h1


def brute_betti(bars, epsilons) -> np.ndarray:
    """Interval counting: bars alive at each epsilon (birth <= eps < death)."""
    out = np.zeros(len(epsilons), dtype=np.int64)
    for i, eps in enumerate(epsilons):
        out[i] = sum(1 for birth, death, _ in bars if birth <= eps < death)
    return out


def _blur_complexity(pixels: np.ndarray, sigma: float) -> float:
    """Variance of squared gradient magnitude after Gaussian smoothing.

    Independent realization: explicit 2-D kernel, direct windowed sums, and
    numpy's own np.gradient for the differences.
    """
    radius = int(np.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kern = np.exp(-(offsets[:, None] ** 2 + offsets[None, :] ** 2) / (2.0 * sigma * sigma))
    kern /= kern.sum()
    h, w, c = pixels.shape
    sqmag = np.zeros((h, w))
    for ch in range(c):
        padded = np.pad(pixels[:, :, ch], radius, mode="symmetric")
        smooth = np.zeros((h, w))
        for i in range(h):
            for j in range(w):
                smooth[i, j] = float(np.sum(kern * padded[i:i + 2 * radius + 1,
                                                          j:j + 2 * radius + 1]))
        if h > 1:
            gy = np.gradient(smooth, axis=0)
        else:
            gy = np.zeros_like(smooth)
        if w > 1:
            gx = np.gradient(smooth, axis=1)
        else:
            gx = np.zeros_like(smooth)
        sqmag += gy * gy + gx * gx
    return float(np.var(sqmag))


def brute_retrieve(pool, q: np.ndarray, lambda_fit: float) -> tuple[int, float]:
    """Exhaustive argmin of the fit-complexity score, bypassing pool caches.

    Re-embeds and re-measures every patch from raw pixels; ties go to the
    lowest index.
    """
    if len(pool.patches) == 0:
        raise EmptyPoolError("retrieval pool is empty")
    best_index = -1
    best_score = np.inf
    for i, patch in enumerate(pool.patches):
        z = embed(pool.embedder, patch.pixels, normalize=True)
        comp = _blur_complexity(patch.pixels, pool.sigma_smooth)
        diff = q - z
        score = (1.0 - lambda_fit) * float(diff @ diff) + lambda_fit * comp
        if score < best_score:
            best_score = score
            best_index = i
    return best_index, best_score
