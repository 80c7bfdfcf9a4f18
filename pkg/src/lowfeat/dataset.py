"""Labeled feature matrices: loading, validation, scaling and combination.

Feature files are plain CSV with a header row::

    subject,label,<feature_1>,...,<feature_n>

one utterance per row. The subject and label columns may sit anywhere in the
header; their names come from the manifest. Every other column is a feature,
kept in file order.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

# Fixed dimensions of the two openSMILE functional sets we know about.
FEATURE_SET_DIMENSIONS = {"egemaps": 88, "emobase": 988}
FEATURE_SET_TAGS = ("egemaps", "emobase", "custom")

# Columns whose training std falls below this are treated as constant.
DEGENERATE_STD = 1e-12


class DatasetError(ValueError):
    """Raised when a feature file or manifest violates the dataset schema."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with per-instance subject ids and emotion labels.

    ``features`` is an ``m x n`` float64 array (read-only). ``class_set`` fixes
    the class order used by every confusion matrix and model built from this
    dataset. ``meta`` carries free-form provenance (e.g. planted ground truth).
    """

    name: str
    features: np.ndarray
    subject_ids: tuple[str, ...]
    labels: tuple[str, ...]
    feature_names: tuple[str, ...]
    class_set: tuple[str, ...]
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        X = _frozen(self.features)
        if X.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {X.shape}")
        object.__setattr__(self, "features", X)
        for attr in ("subject_ids", "labels", "feature_names", "class_set"):
            object.__setattr__(self, attr, tuple(str(v) for v in getattr(self, attr)))
        m, n = X.shape
        if not np.all(np.isfinite(X)):
            raise DatasetError("features contain NaN or Inf")
        if len(self.subject_ids) != m or len(self.labels) != m:
            raise DatasetError(
                f"{m} rows but {len(self.subject_ids)} subject ids and {len(self.labels)} labels"
            )
        if len(self.feature_names) != n:
            raise DatasetError(f"{n} feature columns but {len(self.feature_names)} names")
        if len(set(self.feature_names)) != n:
            raise DatasetError("feature names are not unique")
        if len(set(self.class_set)) != len(self.class_set):
            raise DatasetError("class_set has duplicates")
        known = set(self.class_set)
        for i, (s, y) in enumerate(zip(self.subject_ids, self.labels)):
            if not s:
                raise DatasetError(f"row {i}: empty subject id")
            if y not in known:
                raise DatasetError(f"row {i}: label {y!r} not in class_set")

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]

    @property
    def label_codes(self) -> np.ndarray:
        """Labels as integer positions into ``class_set``."""
        pos = {c: i for i, c in enumerate(self.class_set)}
        return np.array([pos[y] for y in self.labels], dtype=np.int64)

    def subjects(self) -> list[str]:
        """Distinct subject ids in order of first appearance."""
        return list(dict.fromkeys(self.subject_ids))

    def take_rows(self, rows: Sequence[int]) -> "LabeledDataset":
        rows = list(rows)
        return LabeledDataset(
            name=self.name,
            features=self.features[rows],
            subject_ids=tuple(self.subject_ids[i] for i in rows),
            labels=tuple(self.labels[i] for i in rows),
            feature_names=self.feature_names,
            class_set=self.class_set,
            meta=self.meta,
        )

    def with_features(self, features: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(
            name=self.name,
            features=features,
            subject_ids=self.subject_ids,
            labels=self.labels,
            feature_names=self.feature_names,
            class_set=self.class_set,
            meta=self.meta,
        )


@dataclass(frozen=True)
class DatasetManifest:
    csv_path: str
    feature_set_tag: str = "custom"
    expected_dimension: int | None = None
    label_column: str = "label"
    subject_column: str = "subject"
    name: str | None = None

    def __post_init__(self):
        tag = self.feature_set_tag
        if tag not in FEATURE_SET_TAGS:
            raise DatasetError(f"unknown feature_set_tag {tag!r}; expected one of {FEATURE_SET_TAGS}")
        dim = self.expected_dimension
        if tag in FEATURE_SET_DIMENSIONS:
            fixed = FEATURE_SET_DIMENSIONS[tag]
            if dim is not None and dim != fixed:
                raise DatasetError(f"{tag} requires expected_dimension {fixed}, got {dim}")
            object.__setattr__(self, "expected_dimension", fixed)
        elif dim is None or int(dim) <= 0:
            raise DatasetError("custom feature sets need a positive expected_dimension")
        if self.label_column == self.subject_column:
            raise DatasetError("label_column and subject_column must differ")

    @property
    def dataset_name(self) -> str:
        return self.name or Path(self.csv_path).stem

    @classmethod
    def from_json(cls, path: str | Path) -> "DatasetManifest":
        """Read a manifest; a relative ``csv_path`` resolves against the manifest's folder."""
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DatasetError(f"cannot read manifest {path}: {exc}") from exc
        if not isinstance(raw, dict) or "csv_path" not in raw:
            raise DatasetError(f"manifest {path} lacks csv_path")
        allowed = {"csv_path", "feature_set_tag", "expected_dimension", "label_column",
                   "subject_column", "name"}
        unknown = set(raw) - allowed
        if unknown:
            raise DatasetError(f"manifest {path}: unknown fields {sorted(unknown)}")
        csv_path = Path(raw["csv_path"])
        if not csv_path.is_absolute():
            csv_path = path.parent / csv_path
        raw["csv_path"] = str(csv_path)
        return cls(**raw)

    def to_dict(self) -> dict:
        return {
            "csv_path": self.csv_path,
            "feature_set_tag": self.feature_set_tag,
            "expected_dimension": self.expected_dimension,
            "label_column": self.label_column,
            "subject_column": self.subject_column,
            "name": self.dataset_name,
        }


def load_dataset(manifest: DatasetManifest) -> LabeledDataset:
    """Load and validate the CSV named by ``manifest``; row order is preserved."""
    path = Path(manifest.csv_path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DatasetError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        try:
            s_col = header.index(manifest.subject_column)
            y_col = header.index(manifest.label_column)
        except ValueError:
            raise DatasetError(
                f"{path}: header must contain {manifest.subject_column!r} and {manifest.label_column!r}"
            ) from None
        feat_cols = [j for j in range(len(header)) if j not in (s_col, y_col)]
        names = [header[j] for j in feat_cols]
        if len(names) != manifest.expected_dimension:
            raise DatasetError(
                f"{path}: {len(names)} feature columns, expected {manifest.expected_dimension}"
                f" for {manifest.feature_set_tag}"
            )
        rows, subjects, labels = [], [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DatasetError(f"{path}:{lineno}: {len(rec)} cells, header has {len(header)}")
            subject, label = rec[s_col].strip(), rec[y_col].strip()
            if not subject:
                raise DatasetError(f"{path}:{lineno}: empty subject")
            if not label:
                raise DatasetError(f"{path}:{lineno}: empty label")
            try:
                values = [float(rec[j]) for j in feat_cols]
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: non-numeric feature cell ({exc})") from None
            if not all(math.isfinite(v) for v in values):
                raise DatasetError(f"{path}:{lineno}: NaN/Inf feature value")
            rows.append(values)
            subjects.append(subject)
            labels.append(label)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return LabeledDataset(
        name=manifest.dataset_name,
        features=np.array(rows, dtype=np.float64),
        subject_ids=tuple(subjects),
        labels=tuple(labels),
        feature_names=tuple(names),
        class_set=tuple(dict.fromkeys(labels)),
        meta={"feature_set": manifest.feature_set_tag},
    )


def write_dataset_csv(data: LabeledDataset, path: str | Path) -> Path:
    """Write ``data`` in the ingestion format. Floats use shortest round-trip repr."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "label", *data.feature_names])
        for s, y, row in zip(data.subject_ids, data.labels, data.features):
            w.writerow([s, y, *(repr(float(v)) for v in row)])
    return path


@dataclass(frozen=True)
class NormalizationStats:
    """Per-column mean and population std fitted on a training subset."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean))
        object.__setattr__(self, "std", _frozen(self.std))
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise DatasetError("mean/std must be 1-D arrays of equal length")
        if np.any(self.std < 0):
            raise DatasetError("negative std")

    @classmethod
    def fit(cls, X: np.ndarray) -> "NormalizationStats":
        X = np.asarray(X, dtype=np.float64)
        return cls(mean=X.mean(axis=0), std=X.std(axis=0))

    @property
    def n(self) -> int:
        return self.mean.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.n:
            raise DatasetError(f"expected {self.n} columns, got {X.shape[-1]}")
        ok = self.std >= DEGENERATE_STD
        safe = np.where(ok, self.std, 1.0)
        return np.where(ok, (X - self.mean) / safe, 0.0)

    def select(self, columns: Sequence[int]) -> "NormalizationStats":
        cols = list(columns)
        return NormalizationStats(self.mean[cols], self.std[cols])

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "NormalizationStats":
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64))


def fit_apply_zscore(
    train: LabeledDataset, apply_to: LabeledDataset
) -> tuple[NormalizationStats, LabeledDataset]:
    """Fit z-score stats on ``train`` and apply them to ``apply_to``.

    Columns whose training std is below 1e-12 map to zeros.
    """
    if train.n != apply_to.n:
        raise DatasetError(f"dimension mismatch: train has {train.n} columns, target {apply_to.n}")
    stats = NormalizationStats.fit(train.features)
    return stats, apply_to.with_features(stats.transform(apply_to.features))


def combine_datasets(datasets: Iterable[LabeledDataset]) -> LabeledDataset:
    """Concatenate corpora that share a feature set.

    Subject ids are prefixed with ``"<dataset name>:"`` so that speakers from
    different corpora never collide; the class set is the union of the inputs'
    class sets in first-appearance order.
    """
    datasets = list(datasets)
    if not datasets:
        raise DatasetError("combine_datasets needs at least one dataset")
    names = datasets[0].feature_names
    for d in datasets[1:]:
        if d.feature_names != names:
            raise DatasetError(f"feature names of {d.name!r} differ from {datasets[0].name!r}")
    classes = tuple(dict.fromkeys(c for d in datasets for c in d.class_set))
    tags = {d.meta.get("feature_set") for d in datasets}
    return LabeledDataset(
        name="+".join(d.name for d in datasets),
        features=np.vstack([d.features for d in datasets]),
        subject_ids=tuple(f"{d.name}:{s}" for d in datasets for s in d.subject_ids),
        labels=tuple(y for d in datasets for y in d.labels),
        feature_names=names,
        class_set=classes,
        meta={"feature_set": tags.pop()} if len(tags) == 1 and None not in tags else {},
    )


def wav_peak_normalize(samples: Sequence[float]) -> np.ndarray:
    """Scale a waveform so its largest absolute sample is exactly full scale."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty sample sequence")
    peak = float(np.max(np.abs(x)))
    if peak == 0.0:
        raise ValueError("all-zero signal has no peak to normalize")
    return x * (1.0 / peak)


def normalize_wav_file(src: str | Path, dst: str | Path) -> int:
    """Peak-normalize a mono WAV file, writing IEEE float32 samples.

    Integer PCM input is mapped to [-1, 1] first. Returns the sample rate.
    """
    from scipy.io import wavfile

    rate, data = wavfile.read(src)
    if data.ndim != 1:
        raise ValueError(f"{src}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0  # 8-bit WAV is unsigned
    elif np.issubdtype(data.dtype, np.integer):
        data = data.astype(np.float64) / float(np.iinfo(data.dtype).max)
    wavfile.write(dst, rate, wav_peak_normalize(data).astype(np.float32))
    return rate
