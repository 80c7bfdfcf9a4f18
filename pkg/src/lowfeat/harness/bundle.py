"""Self-contained reduced-feature models for constrained devices.

A bundle stores the full feature-space names (so input files can be checked),
the selected column indices, z-score statistics of those columns only, and the
one-vs-one model. Inference reads nothing but the selected columns.
"""

from __future__ import annotations

import csv
import json
from collections import abc
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ..dataset import LabeledDataset, NormalizationStats
from ..linsvm import MulticlassSvmModel, SvmConfig, fit_one_vs_one
from .experiment import ResultRecord, canonical_json, sha256_hex

BUNDLE_FORMAT_VERSION = 1
ID_COLUMNS = ("subject", "label")


class BundleError(ValueError):
    pass


@dataclass
class ReadStats:
    """Counts the feature cells inference actually parsed."""

    rows: int = 0
    cells: int = 0


@dataclass(frozen=True)
class DeploymentBundle:
    feature_names: tuple[str, ...]
    selected: tuple[int, ...]
    stats: NormalizationStats
    model: MulticlassSvmModel
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.model.n_features != len(self.selected) or self.stats.n != len(self.selected):
            raise BundleError("model/statistics dimension differs from the selected feature count")
        if any(not 0 <= i < len(self.feature_names) for i in self.selected):
            raise BundleError("selected index outside the feature space")

    def predict_rows(self, rows: Sequence[Sequence[float]], stats: ReadStats | None = None) -> list[str]:
        """Classify full-width rows, touching only ``row[i]`` for selected ``i``."""
        width = len(self.feature_names)
        X = np.empty((len(rows), len(self.selected)))
        for r, row in enumerate(rows):
            if len(row) != width:
                raise BundleError(f"row {r} has {len(row)} features, bundle expects {width}")
            for j, i in enumerate(self.selected):
                X[r, j] = float(row[i])
        if stats is not None:
            stats.rows += len(rows)
            stats.cells += X.size
        return self.predict_selected(X)

    def predict_selected(self, X_selected: np.ndarray) -> list[str]:
        """Classify rows that already hold just the selected columns (raw units)."""
        return self.model.predict(self.stats.transform(X_selected))

    def to_dict(self) -> dict:
        body = {
            "feature_names": list(self.feature_names),
            "selected": list(self.selected),
            "normalization": self.stats.to_dict(),
            "model": self.model.to_dict(),
            "provenance": dict(self.provenance),
        }
        return {"format_version": BUNDLE_FORMAT_VERSION, "body": body,
                "checksum": sha256_hex(canonical_json(body))}

    @classmethod
    def from_dict(cls, d: Mapping) -> "DeploymentBundle":
        if d.get("format_version") != BUNDLE_FORMAT_VERSION:
            raise BundleError(f"unsupported bundle format {d.get('format_version')!r}")
        body = d.get("body")
        if body is None or sha256_hex(canonical_json(body)) != d.get("checksum"):
            raise BundleError("bundle checksum mismatch (corrupted or edited)")
        return cls(
            feature_names=tuple(body["feature_names"]),
            selected=tuple(int(i) for i in body["selected"]),
            stats=NormalizationStats.from_dict(body["normalization"]),
            model=MulticlassSvmModel.from_dict(body["model"]),
            provenance=body.get("provenance", {}),
        )

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), allow_nan=False) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "DeploymentBundle":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise BundleError(f"cannot read bundle {path}: {exc}") from exc
        return cls.from_dict(raw)


def train_for_record(record: ResultRecord, data: LabeledDataset):
    """Fit normalization and the model on all of ``data`` using the record's best subset."""
    if data.feature_names != tuple(record.dataset["feature_names"]):
        raise BundleError("data feature space differs from the record's")
    selected = list(record.best["features"])
    X = data.features[:, selected]
    stats = NormalizationStats.fit(X)
    model = fit_one_vs_one(stats.transform(X), data.labels, data.class_set,
                           SvmConfig.from_dict(record.config["svm_config"]))
    return model, stats


def export_bundle(record: ResultRecord, model: MulticlassSvmModel, stats: NormalizationStats,
                  path: str | Path) -> DeploymentBundle:
    """Write a checksummed bundle for ``model`` trained on the record's best subset."""
    bundle = DeploymentBundle(
        feature_names=tuple(record.dataset["feature_names"]),
        selected=tuple(record.best["features"]),
        stats=stats,
        model=model,
        provenance={"dataset": record.dataset["name"], "selector": record.selector,
                    "config_hash": record.config_hash, "experiment_id": record.experiment_id},
    )
    bundle.save(path)
    return bundle


def classify_csv(bundle: DeploymentBundle, csv_path: str | Path,
                 stats: ReadStats | None = None) -> list[str]:
    """Classify every row of a feature CSV.

    Optional ``subject``/``label`` columns are ignored. The remaining header
    must equal the bundle's feature space; only selected cells are parsed.
    """
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise BundleError(f"{csv_path}: missing header")
        header = [h.strip() for h in header]
        cols = [j for j, h in enumerate(header) if h not in ID_COLUMNS]
        if len(cols) != len(bundle.feature_names):
            raise BundleError(f"{csv_path}: {len(cols)} feature columns, bundle expects "
                              f"{len(bundle.feature_names)}")
        if [header[j] for j in cols] != list(bundle.feature_names):
            raise BundleError(f"{csv_path}: feature names differ from the bundle's feature space")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise BundleError(f"{csv_path}:{lineno}: ragged row")
            rows.append(_Projected(rec, cols))
    try:
        return bundle.predict_rows(rows, stats)
    except ValueError as exc:
        if isinstance(exc, BundleError):
            raise
        raise BundleError(f"{csv_path}: non-numeric value in a selected column ({exc})") from None


class _Projected(abc.Sequence):
    """Feature-only view of a CSV record; cells stay strings until indexed."""

    def __init__(self, record: list[str], cols: list[int]):
        self._record = record
        self._cols = cols

    def __len__(self):
        return len(self._cols)

    def __getitem__(self, i):
        return self._record[self._cols[i]]
