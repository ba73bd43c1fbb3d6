"""Exception types shared across the package."""


class TopoDistillError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(TopoDistillError):
    """Array or image dimensions do not match what an operation requires."""


class InsufficientRealImagesError(TopoDistillError):
    """A class has fewer real images than the synthetic set needs."""


class EmptySideError(TopoDistillError):
    """One side (real or synthetic) of a point-cloud operation is empty."""


class DegenerateCloudError(TopoDistillError):
    """Point cloud too small for graph construction."""


class GridMismatchError(TopoDistillError):
    """Two curves or images do not share a grid / eps_max and cannot be compared."""


class EmptyPoolError(TopoDistillError):
    """Retrieval attempted on an empty patch pool."""


class EmptyClassError(TopoDistillError):
    """A dataset class has no images."""


class NonFiniteLossError(TopoDistillError):
    """Optimization produced a non-finite loss; the run is aborted.

    Carries the diagnostics collected up to the failing step.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class OracleSizeError(TopoDistillError):
    """Brute-force oracle invoked above its combinatorial size cap."""


class ManifestError(TopoDistillError):
    """Run manifest is malformed, has unknown keys, or fails validation."""


class DatasetError(TopoDistillError):
    """Dataset ingestion failed (malformed image, empty dataset, ...)."""


class InconsistentDimensionsError(DatasetError):
    """Images of mixed sizes found in one dataset."""
