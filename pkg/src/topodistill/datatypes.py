"""Core value types: images, labeled datasets, synthetic sets, run configuration."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, EmptyClassError, InsufficientRealImagesError

MODES = ("none", "static-anchor", "drc", "drc+pta")
TOPO_CADENCES = ("refresh", "stage-end", "both")
INIT_MODES = ("real-copy", "noise")

# RNG stream salts; keep independent purposes on independent streams so that
# enabling one mechanism never perturbs the draws of another.
SALT_INIT = 101
SALT_ANCHOR = 202
SALT_SUBSAMPLE = 303
SALT_TOY = 404


class Image:
    """A single H x W x C image with float64 pixels clamped to [0, 1].

    The pixel array is made read-only; updates produce new Image instances,
    which keeps concurrent read-only sharing safe.
    """

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise DimensionMismatchError(f"image must be HxWxC, got shape {arr.shape}")
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        self.pixels = arr

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape

    def flatten(self) -> np.ndarray:
        return self.pixels.reshape(-1)

    def __eq__(self, other) -> bool:
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"Image({self.height}x{self.width}x{self.channels})"


@dataclass
class LabeledDataset:
    """Real images with class labels in [0, class_count)."""

    images: list[Image]
    labels: list[int]
    class_count: int

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DimensionMismatchError("images and labels must have equal length")
        if len(self.images) == 0:
            raise EmptyClassError("dataset has no images")
        for lab in self.labels:
            if not 0 <= lab < self.class_count:
                raise EmptyClassError(f"label {lab} outside [0, {self.class_count})")
        counts = np.bincount(self.labels, minlength=self.class_count)
        if (counts == 0).any():
            missing = int(np.argmin(counts))
            raise EmptyClassError(f"class {missing} has no images")

    def class_indices(self, class_id: int) -> list[int]:
        return [i for i, lab in enumerate(self.labels) if lab == class_id]

    def image_shape(self) -> tuple[int, int, int]:
        return self.images[0].shape

    def __len__(self) -> int:
        return len(self.images)


@dataclass
class SyntheticSet:
    """The synthetic optimization variables, exactly ipc images per class.

    Class c always occupies indices [c*ipc, (c+1)*ipc); labels never change
    during optimization.
    """

    images: list[Image]
    labels: list[int]
    ipc: int

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DimensionMismatchError("images and labels must have equal length")
        if len(self.images) % self.ipc != 0:
            raise DimensionMismatchError("image count is not a multiple of ipc")
        for j, lab in enumerate(self.labels):
            if lab != j // self.ipc:
                raise DimensionMismatchError("labels must be contiguous class blocks")

    @property
    def class_count(self) -> int:
        return len(self.images) // self.ipc

    def class_slice(self, class_id: int) -> slice:
        return slice(class_id * self.ipc, (class_id + 1) * self.ipc)

    def pixel_array(self) -> np.ndarray:
        """Stacked (N, H, W, C) copy of all synthetic pixels."""
        return np.stack([img.pixels for img in self.images]).copy()

    def replace_pixels(self, stacked: np.ndarray) -> None:
        """Replace all images from a stacked (N, H, W, C) array, clamping."""
        if stacked.shape[0] != len(self.images):
            raise DimensionMismatchError("stacked array has wrong leading dimension")
        self.images = [Image(stacked[j]) for j in range(stacked.shape[0])]


@dataclass
class RunConfig:
    """All knobs of a distillation run.

    Weight defaults follow the operating points reported for the method
    (merge ratio 0.5, fit-complexity trade-off 0.1, topology weight 0.5,
    Adam at 0.25 with betas (0.5, 0.9)).
    """

    alpha: float = 0.5
    lambda_fit: float = 0.1
    lambda_topo: float = 0.5
    gamma_loop: float = 1.0
    k_nn: int = 10
    pi_grid: int = 32
    budget_B: int = 300
    residual_blocks_k: int = 3
    refresh_T: int = 10
    n_c: int = 64
    sigma_smooth: float = 1.0
    sigma_pi: float = 0.05
    beta_align: float = 1.0
    learn_rate: float = 0.25
    adam_betas: tuple[float, float] = (0.5, 0.9)
    seed: int = 0
    # Plumbing knobs the driver needs for replayable runs.
    ipc: int = 10
    init_mode: str = "real-copy"
    head_ridge: float = 1e-3
    topo_cadence: str = "both"

    def __post_init__(self):
        self.adam_betas = tuple(self.adam_betas)
        self.validate()

    def validate(self) -> None:
        checks = [
            (0.0 <= self.alpha <= 1.0, "alpha must be in [0, 1]"),
            (0.0 <= self.lambda_fit <= 1.0, "lambda_fit must be in [0, 1]"),
            (self.lambda_topo >= 0.0, "lambda_topo must be >= 0"),
            (self.gamma_loop > 0.0, "gamma_loop must be > 0"),
            (self.k_nn >= 1, "k_nn must be >= 1"),
            (self.pi_grid >= 1, "pi_grid must be >= 1"),
            (self.budget_B >= 1, "budget_B must be >= 1"),
            (self.residual_blocks_k >= 0, "residual_blocks_k must be >= 0"),
            (self.refresh_T >= 1, "refresh_T must be >= 1"),
            (self.n_c >= 1, "n_c must be >= 1"),
            (self.ipc >= 1, "ipc must be >= 1"),
            (self.sigma_smooth > 0.0, "sigma_smooth must be > 0"),
            (self.sigma_pi > 0.0, "sigma_pi must be > 0"),
            (self.beta_align >= 0.0, "beta_align must be >= 0"),
            (self.learn_rate > 0.0, "learn_rate must be > 0"),
            (self.head_ridge > 0.0, "head_ridge must be > 0"),
            (self.init_mode in INIT_MODES, f"init_mode must be one of {INIT_MODES}"),
            (self.topo_cadence in TOPO_CADENCES, f"topo_cadence must be one of {TOPO_CADENCES}"),
            (self.block_steps() >= 1, "budget_B must give each block at least one step"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)
        for name in ("alpha", "lambda_fit", "lambda_topo", "gamma_loop", "sigma_smooth",
                     "sigma_pi", "beta_align", "learn_rate", "head_ridge"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        b1, b2 = self.adam_betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ValueError("adam_betas must lie in [0, 1)")

    def block_steps(self) -> int:
        """Steps per block: b = floor(B / (k+1))."""
        return self.budget_B // (self.residual_blocks_k + 1)


def new_synthetic_set(real: LabeledDataset, ipc: int, init_mode: str = "real-copy",
                      seed: int = 0) -> SyntheticSet:
    """Create the initial synthetic set.

    real-copy takes the first ipc images of each class in dataset order;
    noise fills pixels with seeded uniform [0, 1] draws.
    """
    if ipc < 1:
        raise ValueError("ipc must be >= 1")
    if init_mode not in INIT_MODES:
        raise ValueError(f"unknown init_mode {init_mode!r}")
    h, w, c = real.image_shape()
    images: list[Image] = []
    labels: list[int] = []
    rng = np.random.default_rng([seed, SALT_INIT])
    for class_id in range(real.class_count):
        if init_mode == "real-copy":
            idx = real.class_indices(class_id)
            if len(idx) < ipc:
                raise InsufficientRealImagesError(
                    f"class {class_id} has {len(idx)} images, needs {ipc} for real-copy init")
            chosen = [real.images[i] for i in idx[:ipc]]
        else:
            chosen = [Image(rng.uniform(0.0, 1.0, size=(h, w, c))) for _ in range(ipc)]
        images.extend(chosen)
        labels.extend([class_id] * ipc)
    return SyntheticSet(images=images, labels=labels, ipc=ipc)


def config_to_dict(cfg: RunConfig) -> dict:
    """Plain-dict view of a RunConfig (JSON-serializable)."""
    out = {}
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        out[f.name] = list(val) if isinstance(val, tuple) else val
    return out


def config_from_dict(d: dict) -> RunConfig:
    """Strict inverse of config_to_dict: unknown keys are rejected."""
    known = {f.name for f in fields(RunConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = dict(d)
    if "adam_betas" in kwargs:
        kwargs["adam_betas"] = tuple(kwargs["adam_betas"])
    return RunConfig(**kwargs)
