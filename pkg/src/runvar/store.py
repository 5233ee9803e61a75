"""Versioned JSON persistence for models and reports, plus the project store.

Everything serializes through one canonical JSON writer (sorted keys,
compact separators, trailing newline) so repeated runs with equal seeds
produce byte-identical files.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .clustering import ShapeModel
from .errors import FingerprintMismatch, IoError
from .features import FeatureSchema
from .forest import Forest
from .whatif import Intervention

FORMAT_VERSION = 1
STORE_ENV = "RVAR_STORE"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def write_json(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_text(canonical_json(obj), encoding="utf-8")
    except OSError as e:
        raise IoError(str(e)) from e


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IoError(str(e)) from e


def _check_version(obj: dict, kind: str, path) -> None:
    if obj.get("kind") != kind:
        raise FingerprintMismatch(f"{path}: expected kind={kind!r}, got {obj.get('kind')!r}")
    if obj.get("version") != FORMAT_VERSION:
        raise FingerprintMismatch(f"{path}: unsupported version {obj.get('version')!r}")


def save_shape_model(model: ShapeModel, path) -> None:
    write_json(
        {
            "version": FORMAT_VERSION,
            "kind": "shape_model",
            "spec_fingerprint": model.spec.fingerprint(),
            **model.to_dict(),
        },
        path,
    )


def load_shape_model(path) -> ShapeModel:
    obj = read_json(path)
    _check_version(obj, "shape_model", path)
    model = ShapeModel.from_dict(obj)
    if obj.get("spec_fingerprint") != model.spec.fingerprint():
        raise FingerprintMismatch(f"{path}: binning-spec fingerprint mismatch")
    return model


def save_classifier(
    forest: Forest,
    schema: FeatureSchema,
    path,
    windows: dict | None = None,
) -> None:
    write_json(
        {
            "version": FORMAT_VERSION,
            "kind": "classifier" if forest.task == "classify" else "regressor",
            "schema": schema.to_dict(),
            "windows": windows or {},
            **forest.to_dict(),
        },
        path,
    )


def load_classifier(path, kind: str = "classifier") -> tuple[Forest, FeatureSchema, dict]:
    obj = read_json(path)
    _check_version(obj, kind, path)
    forest = Forest.from_dict(obj)
    schema = FeatureSchema.from_dict(obj["schema"])
    if forest.schema_fingerprint and forest.schema_fingerprint != schema.fingerprint():
        raise FingerprintMismatch(f"{path}: schema fingerprint mismatch")
    return forest, schema, obj.get("windows", {})


def save_intervention(intervention: Intervention, path) -> None:
    write_json(intervention.to_dict(), path)


def load_intervention(path) -> Intervention:
    return Intervention.from_dict(read_json(path))


class ProjectStore:
    """Directory layout for datasets, models, and reports."""

    def __init__(self, root=None):
        root = root or os.environ.get(STORE_ENV) or "rvar_store"
        self.root = Path(root)

    @property
    def datasets_dir(self) -> Path:
        return self.root / "datasets"

    @property
    def models_dir(self) -> Path:
        return self.root / "models"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    def ensure(self) -> "ProjectStore":
        for d in (self.datasets_dir, self.models_dir, self.reports_dir):
            d.mkdir(parents=True, exist_ok=True)
        return self

    def dataset_path(self, name: str) -> Path:
        return self.datasets_dir / f"{name}.jsonl"

    def shape_model_path(self, tag: str) -> Path:
        return self.models_dir / f"shape_{tag}.json"

    def classifier_path(self, tag: str) -> Path:
        return self.models_dir / f"classifier_{tag}.json"

    def regressor_path(self, tag: str) -> Path:
        return self.models_dir / f"regressor_{tag}.json"

    def report_path(self, name: str) -> Path:
        return self.reports_dir / f"{name}.json"
