"""Desk-scale dataset distillation with retrieval-anchored residual mixing
and persistent-topology regularization."""

from .datatypes import Image, LabeledDataset, RunConfig, SyntheticSet, new_synthetic_set
from .distill import DistillDiagnostics, ObjectiveTerms, run_distillation
from .errors import TopoDistillError
from .manifest import RunManifest, load_manifest, save_manifest

__version__ = "0.1.0"

__all__ = [
    "Image",
    "LabeledDataset",
    "SyntheticSet",
    "RunConfig",
    "new_synthetic_set",
    "run_distillation",
    "DistillDiagnostics",
    "ObjectiveTerms",
    "RunManifest",
    "load_manifest",
    "save_manifest",
    "TopoDistillError",
    "__version__",
]
