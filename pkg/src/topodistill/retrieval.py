"""Patch pools and retrieval: pick the real patch that best anchors a
synthetic image, then mix it in as a residual.

Each class keeps a pool with one whole-image patch per real image, with the
normalized feature and the complexity measure cached at construction. The
score trades feature fit against complexity; retrieval is an exhaustive
argmin with lowest-index tie-break.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datatypes import Image, LabeledDataset
from .errors import DimensionMismatchError, EmptyPoolError
from .features import embed


def _gauss_kernel(sigma: float) -> tuple[np.ndarray, int]:
    radius = int(np.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kern = np.exp(-(offsets * offsets) / (2.0 * sigma * sigma))
    return kern / kern.sum(), radius


def _smooth_channel(channel: np.ndarray, kern: np.ndarray, radius: int) -> np.ndarray:
    h, w = channel.shape
    padded = np.pad(channel, radius, mode="symmetric")
    span = 2 * radius + 1
    horiz = np.empty((h + 2 * radius, w))
    for j in range(w):
        horiz[:, j] = padded[:, j:j + span] @ kern
    out = np.empty((h, w))
    for i in range(h):
        out[i, :] = kern @ horiz[i:i + span, :]
    return out


def _squared_gradient(smooth: np.ndarray) -> np.ndarray:
    """Central differences inside, one-sided at the borders."""
    h, w = smooth.shape
    gy = np.zeros_like(smooth)
    gx = np.zeros_like(smooth)
    if h > 1:
        gy[1:-1, :] = (smooth[2:, :] - smooth[:-2, :]) / 2.0
        gy[0, :] = smooth[1, :] - smooth[0, :]
        gy[-1, :] = smooth[-1, :] - smooth[-2, :]
    if w > 1:
        gx[:, 1:-1] = (smooth[:, 2:] - smooth[:, :-2]) / 2.0
        gx[:, 0] = smooth[:, 1] - smooth[:, 0]
        gx[:, -1] = smooth[:, -1] - smooth[:, -2]
    return gy * gy + gx * gx


def complexity(o: Image, sigma_smooth: float) -> float:
    """Population variance of the smoothed image's squared gradient magnitude.

    Smoothing uses a truncated Gaussian (radius 3 sigma, reflected borders);
    gradients are summed over channels before the variance is taken over the
    pixel grid. Busy textures score high, flat or gently varying patches low.
    """
    if sigma_smooth <= 0:
        raise ValueError("sigma_smooth must be > 0")
    kern, radius = _gauss_kernel(sigma_smooth)
    sqmag = np.zeros(o.pixels.shape[:2])
    for ch in range(o.channels):
        sqmag += _squared_gradient(_smooth_channel(o.pixels[:, :, ch], kern, radius))
    return float(np.var(sqmag))


@dataclass
class PatchPool:
    """Per-class candidates with cached normalized features and complexities."""

    class_id: int
    patches: list[Image]
    cached_z: np.ndarray        # (n, d) normalized features
    cached_c: np.ndarray        # (n,) complexity scores
    source_ids: list[int]       # dataset indices the patches came from
    embedder: object
    sigma_smooth: float

    def __len__(self) -> int:
        return len(self.patches)

    def manifest_entries(self) -> list[dict]:
        return [{"source_image": sid, "complexity": float(c)}
                for sid, c in zip(self.source_ids, self.cached_c)]


def build_patch_pools(real: LabeledDataset, embedder, sigma_smooth: float) -> list[PatchPool]:
    """One pool per class; every real image contributes one whole-image patch."""
    pools = []
    for class_id in range(real.class_count):
        idx = real.class_indices(class_id)
        patches = [real.images[i] for i in idx]
        z = np.stack([embed(embedder, p.pixels, normalize=True) for p in patches])
        c = np.array([complexity(p, sigma_smooth) for p in patches])
        pools.append(PatchPool(class_id=class_id, patches=patches, cached_z=z,
                               cached_c=c, source_ids=idx, embedder=embedder,
                               sigma_smooth=sigma_smooth))
    return pools


def score(pool: PatchPool, index: int, q_syn: np.ndarray, lambda_fit: float) -> float:
    """(1 - lambda) * squared feature distance + lambda * cached complexity."""
    if not 0.0 <= lambda_fit <= 1.0:
        raise ValueError("lambda_fit must be in [0, 1]")
    if not 0 <= index < len(pool):
        raise IndexError(f"pool index {index} out of range for pool of {len(pool)}")
    diff = q_syn - pool.cached_z[index]
    return (1.0 - lambda_fit) * float(diff @ diff) + lambda_fit * float(pool.cached_c[index])


def all_scores(pool: PatchPool, q_syn: np.ndarray, lambda_fit: float) -> np.ndarray:
    if not 0.0 <= lambda_fit <= 1.0:
        raise ValueError("lambda_fit must be in [0, 1]")
    if len(pool) == 0:
        raise EmptyPoolError("retrieval pool is empty")
    diff = pool.cached_z - q_syn
    return (1.0 - lambda_fit) * np.sum(diff * diff, axis=1) + lambda_fit * pool.cached_c


def retrieve(pool: PatchPool, q_syn: np.ndarray, lambda_fit: float) -> tuple[int, float]:
    """Exhaustive argmin of the score; ties resolve to the lowest index."""
    scores = all_scores(pool, q_syn, lambda_fit)
    index = int(np.argmin(scores))
    return index, float(scores[index])


def _axis_positions(src_size: int, dst_size: int) -> np.ndarray:
    if dst_size == 1:
        return np.array([(src_size - 1) / 2.0])
    return np.arange(dst_size) * (src_size - 1) / (dst_size - 1)


def resample(patch: Image, target_h: int, target_w: int) -> Image:
    """Bilinear resize with corner alignment; identity when sizes match."""
    if target_h < 1 or target_w < 1:
        raise ValueError("target dimensions must be >= 1")
    src = patch.pixels
    h, w, _ = src.shape
    if (h, w) == (target_h, target_w):
        return Image(src)
    ys = _axis_positions(h, target_h)
    xs = _axis_positions(w, target_w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, np.newaxis, np.newaxis]
    fx = (xs - x0)[np.newaxis, :, np.newaxis]
    out = (src[np.ix_(y0, x0)] * (1 - fy) * (1 - fx)
           + src[np.ix_(y0, x1)] * (1 - fy) * fx
           + src[np.ix_(y1, x0)] * fy * (1 - fx)
           + src[np.ix_(y1, x1)] * fy * fx)
    return Image(out)


def residual_update(x_syn: Image, anchor: Image, alpha: float) -> Image:
    """Per-pixel convex mix: alpha of the synthetic image, the rest anchor."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if x_syn.shape != anchor.shape:
        raise DimensionMismatchError(
            f"synthetic {x_syn.shape} and anchor {anchor.shape} differ")
    return Image(alpha * x_syn.pixels + (1.0 - alpha) * anchor.pixels)
