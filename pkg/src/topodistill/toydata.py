"""Seeded toy dataset generators.

two-ring: two classes of single-channel images whose flattened pixels lie
near two circles. Each class has an orthonormal pair of cosine patterns
(u, v); a sample is base + A*(cos t * u + sin t * v) + noise, so under the
pixel-identity teacher the class features trace a planar ring of radius A.
A small class-dependent offset along a third orthogonal pattern keeps the
classes linearly separable.

gaussian-blobs: one random base image per class plus small Gaussian noise.
"""

from __future__ import annotations

import numpy as np

from .datatypes import SALT_TOY, Image, LabeledDataset

TOY_KINDS = ("two-ring", "gaussian-blobs")


def _cos_pattern(side: int, freq_row: int, freq_col: int) -> np.ndarray:
    rows = np.cos(2.0 * np.pi * freq_row * np.arange(side) / side)
    cols = np.cos(2.0 * np.pi * freq_col * np.arange(side) / side)
    pattern = np.outer(rows, cols)
    return pattern / np.linalg.norm(pattern)


def gen_two_ring(n_per_class: int = 48, seed: int = 0, side: int = 16,
                 amplitude: float = 2.0, noise: float = 0.015) -> LabeledDataset:
    if n_per_class < 3:
        raise ValueError("n_per_class must be >= 3")
    rng = np.random.default_rng([seed, SALT_TOY])
    planes = [
        (_cos_pattern(side, 1, 0), _cos_pattern(side, 0, 1)),
        (_cos_pattern(side, 2, 0), _cos_pattern(side, 0, 2)),
    ]
    offset_pat = _cos_pattern(side, 1, 1)
    images: list[Image] = []
    labels: list[int] = []
    for class_id, (u_pat, v_pat) in enumerate(planes):
        sign = 1.0 if class_id == 0 else -1.0
        base = 0.5 + sign * 0.15 * offset_pat
        thetas = rng.uniform(0.0, 2.0 * np.pi, size=n_per_class)
        for t in thetas:
            wobble = rng.normal(0.0, noise, size=(side, side))
            pix = base + amplitude * (np.cos(t) * u_pat + np.sin(t) * v_pat) + wobble
            images.append(Image(pix[:, :, np.newaxis]))
            labels.append(class_id)
    return LabeledDataset(images=images, labels=labels, class_count=2)


def gen_gaussian_blobs(n_per_class: int = 32, seed: int = 0, side: int = 16,
                       class_count: int = 3, noise: float = 0.05) -> LabeledDataset:
    if n_per_class < 1 or class_count < 1:
        raise ValueError("need at least one image and one class")
    rng = np.random.default_rng([seed, SALT_TOY, 1])
    images: list[Image] = []
    labels: list[int] = []
    for class_id in range(class_count):
        base = rng.uniform(0.25, 0.75, size=(side, side, 1))
        for _ in range(n_per_class):
            pix = base + rng.normal(0.0, noise, size=(side, side, 1))
            images.append(Image(pix))
            labels.append(class_id)
    return LabeledDataset(images=images, labels=labels, class_count=class_count)


def gen_toy(kind: str, n_per_class: int | None = None, seed: int = 0,
            side: int = 16) -> LabeledDataset:
    if kind == "two-ring":
        return gen_two_ring(n_per_class or 48, seed=seed, side=side)
    if kind == "gaussian-blobs":
        return gen_gaussian_blobs(n_per_class or 32, seed=seed, side=side)
    raise ValueError(f"unknown toy kind {kind!r}; expected one of {TOY_KINDS}")
