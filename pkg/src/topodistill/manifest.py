"""The run manifest: everything needed to replay a distillation run.

Parsing is strict: unknown keys anywhere are an error, because a silently
ignored typo ("lamda_fit") is the classic way replays diverge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .datatypes import MODES, RunConfig, config_from_dict, config_to_dict
from .errors import ManifestError
from .features import EMBEDDER_KINDS

ARTIFACT_VERSION = "0.1.0"

_TOP_KEYS = {"config", "feature_map", "dataset_path", "mode", "artifact_version"}
_FEATURE_KEYS = {"kind", "dim", "seed"}


@dataclass
class RunManifest:
    config: RunConfig
    feature_map: dict
    dataset_path: str
    mode: str
    artifact_version: str = ARTIFACT_VERSION

    def to_dict(self) -> dict:
        return {
            "config": config_to_dict(self.config),
            "feature_map": dict(self.feature_map),
            "dataset_path": self.dataset_path,
            "mode": self.mode,
            "artifact_version": self.artifact_version,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def manifest_from_dict(data: dict) -> RunManifest:
    if not isinstance(data, dict):
        raise ManifestError("manifest must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ManifestError(f"unknown manifest keys: {sorted(unknown)}")
    missing = _TOP_KEYS - set(data)
    if missing:
        raise ManifestError(f"missing manifest keys: {sorted(missing)}")
    try:
        config = config_from_dict(data["config"])
    except (ValueError, TypeError) as err:
        raise ManifestError(f"bad config: {err}") from err
    feature_map = data["feature_map"]
    if not isinstance(feature_map, dict):
        raise ManifestError("feature_map must be an object")
    unknown = set(feature_map) - _FEATURE_KEYS
    if unknown:
        raise ManifestError(f"unknown feature_map keys: {sorted(unknown)}")
    kind = feature_map.get("kind")
    if kind not in EMBEDDER_KINDS:
        raise ManifestError(f"feature_map.kind must be one of {EMBEDDER_KINDS}, got {kind!r}")
    mode = data["mode"]
    if mode not in MODES:
        raise ManifestError(f"mode must be one of {MODES}, got {mode!r}")
    if not isinstance(data["dataset_path"], str) or not data["dataset_path"]:
        raise ManifestError("dataset_path must be a non-empty string")
    if not isinstance(data["artifact_version"], str):
        raise ManifestError("artifact_version must be a string")
    return RunManifest(config=config, feature_map=dict(feature_map),
                       dataset_path=data["dataset_path"], mode=mode,
                       artifact_version=data["artifact_version"])


def manifest_from_json(text: str) -> RunManifest:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ManifestError(f"manifest is not valid JSON: {err}") from err
    return manifest_from_dict(data)


def load_manifest(path: str) -> RunManifest:
    with open(path, "r", encoding="utf-8") as fh:
        return manifest_from_json(fh.read())


def save_manifest(path: str, manifest: RunManifest) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())
