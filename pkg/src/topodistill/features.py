"""Frozen feature embedders, their vector-Jacobian products, and the feature cache.

Two embedder families: the pixel identity (flatten) and a fixed random
projection followed by tanh. Both are deterministic given their construction
arguments and are never trained, so features of unchanged images can be
cached and reused.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError

EMBEDDER_KINDS = ("pixel-identity", "random-projection-tanh")


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """v / ||v||, with the zero vector passed through unchanged."""
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return v.copy()
    return v / norm


def l2_normalize_vjp(raw: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
    """Pull a cotangent back through v -> v/||v||.

    J^T c = (c - (c . v_hat) v_hat) / ||v||; the zero vector normalizes to
    itself, so its Jacobian there is the identity.
    """
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        return cotangent.copy()
    unit = raw / norm
    return (cotangent - float(cotangent @ unit) * unit) / norm


class PixelEmbedder:
    """Identity embedder: the flattened pixel vector, d = H*W*C."""

    kind = "pixel-identity"

    def __init__(self, image_shape: tuple[int, int, int]):
        self.image_shape = tuple(image_shape)
        self.dim = int(np.prod(image_shape))

    def embed_raw(self, pixels: np.ndarray) -> np.ndarray:
        if pixels.shape != self.image_shape:
            raise DimensionMismatchError(
                f"embedder expects {self.image_shape}, got {pixels.shape}")
        return pixels.reshape(-1).astype(np.float64).copy()

    def vjp_raw(self, pixels: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        if cotangent.shape != (self.dim,):
            raise DimensionMismatchError("cotangent has wrong length")
        return cotangent.reshape(self.image_shape).copy()

    def spec(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "seed": 0}


class RandProjEmbedder:
    """tanh(W x) with a frozen seeded Gaussian W scaled by 1/sqrt(H*W*C)."""

    kind = "random-projection-tanh"

    def __init__(self, image_shape: tuple[int, int, int], dim: int, seed: int):
        if dim < 1:
            raise ValueError("projection dim must be >= 1")
        self.image_shape = tuple(image_shape)
        self.dim = int(dim)
        self.seed = int(seed)
        d_in = int(np.prod(image_shape))
        rng = np.random.default_rng([self.seed, 7])
        self.weight = rng.standard_normal((self.dim, d_in)) / np.sqrt(d_in)
        self.weight.setflags(write=False)

    def embed_raw(self, pixels: np.ndarray) -> np.ndarray:
        if pixels.shape != self.image_shape:
            raise DimensionMismatchError(
                f"embedder expects {self.image_shape}, got {pixels.shape}")
        return np.tanh(self.weight @ pixels.reshape(-1))

    def vjp_raw(self, pixels: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        if cotangent.shape != (self.dim,):
            raise DimensionMismatchError("cotangent has wrong length")
        y = np.tanh(self.weight @ pixels.reshape(-1))
        # d tanh(u)/du = 1 - tanh(u)^2
        back = self.weight.T @ ((1.0 - y * y) * cotangent)
        return back.reshape(self.image_shape)

    def spec(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "seed": self.seed}


def make_embedder(kind: str, image_shape: tuple[int, int, int], dim: int | None = None,
                  seed: int = 0):
    if kind == "pixel-identity":
        d_full = int(np.prod(image_shape))
        if dim is not None and dim != d_full:
            raise ValueError(f"pixel-identity dim must equal H*W*C = {d_full}")
        return PixelEmbedder(image_shape)
    if kind == "random-projection-tanh":
        if dim is None:
            dim = int(np.prod(image_shape))
        return RandProjEmbedder(image_shape, dim=dim, seed=seed)
    raise ValueError(f"unknown embedder kind {kind!r}")


def embedder_from_spec(spec: dict, image_shape: tuple[int, int, int]):
    """Rebuild an embedder from its manifest dict."""
    known = {"kind", "dim", "seed"}
    unknown = set(spec) - known
    if unknown:
        raise ValueError(f"unknown feature_map keys: {sorted(unknown)}")
    if "kind" not in spec:
        raise ValueError("feature_map requires a 'kind'")
    return make_embedder(spec["kind"], image_shape, dim=spec.get("dim"),
                         seed=spec.get("seed", 0))


def embed(embedder, pixels: np.ndarray, normalize: bool = False) -> np.ndarray:
    feat = embedder.embed_raw(pixels)
    return l2_normalize(feat) if normalize else feat


def embed_vjp(embedder, pixels: np.ndarray, cotangent: np.ndarray,
              normalize: bool = False) -> np.ndarray:
    """Pixel gradient of <cotangent, embed(pixels, normalize)>."""
    if not normalize:
        return embedder.vjp_raw(pixels, cotangent)
    raw = embedder.embed_raw(pixels)
    return embedder.vjp_raw(pixels, l2_normalize_vjp(raw, cotangent))


class FeatureCache:
    """Step-stamped feature store.

    An entry written at step s is served while current_step - s < refresh_T;
    at or beyond the window it is recomputed and restamped. Keys identify the
    sample (index, side), not the pixel content: the point of the window is to
    tolerate slightly stale features between refreshes.
    """

    def __init__(self, refresh_T: int):
        if refresh_T < 1:
            raise ValueError("refresh_T must be >= 1")
        self.refresh_T = int(refresh_T)
        self._store: dict = {}
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._store)

    def get_or_embed(self, embedder, key, pixels: np.ndarray, current_step: int) -> np.ndarray:
        entry = self._store.get(key)
        if entry is not None and current_step - entry[0] < self.refresh_T:
            self.hits += 1
            return entry[1]
        self.misses += 1
        feat = embedder.embed_raw(pixels)
        self._store[key] = (current_step, feat)
        return feat

    def invalidate(self, key) -> None:
        self._store.pop(key, None)

    def clear(self) -> None:
        self._store.clear()


def class_mean_feature(embedder, images, indices) -> np.ndarray:
    """Mean raw feature over images[i] for i in indices."""
    if len(indices) == 0:
        raise ValueError("cannot average an empty index set")
    total = np.zeros(embedder.dim)
    for i in indices:
        total += embedder.embed_raw(images[i].pixels)
    return total / len(indices)
