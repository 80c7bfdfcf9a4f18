"""Leave-one-subject-out evaluation, confusion matrices and UAR."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import LabeledDataset, NormalizationStats
from .linsvm import SvmConfig, fit_one_vs_one


@dataclass(frozen=True)
class Fold:
    subject: str
    test: np.ndarray
    train: np.ndarray


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[Fold, ...]

    def __len__(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


def loso_folds(data: LabeledDataset) -> FoldPlan:
    """One fold per subject, in order of each subject's first appearance."""
    subjects = np.asarray(data.subject_ids)
    order = data.subjects()
    if len(order) < 2:
        raise ValueError(f"LOSO needs at least 2 subjects, found {len(order)}")
    folds = []
    for s in order:
        held = subjects == s
        folds.append(Fold(subject=s, test=np.flatnonzero(held), train=np.flatnonzero(~held)))
    return FoldPlan(tuple(folds))


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes, both in ``class_set`` order."""

    class_set: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        k = len(self.class_set)
        if counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}, got {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("negative counts")
        counts.flags.writeable = False
        object.__setattr__(self, "class_set", tuple(self.class_set))
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def recalls(self) -> list[float | None]:
        """Per-class recall; ``None`` for classes without true instances."""
        out = []
        for c in range(len(self.class_set)):
            row = int(self.counts[c].sum())
            out.append(None if row == 0 else self.counts[c, c] / row)
        return out

    def uar(self) -> float:
        present = [r for r in self.recalls() if r is not None]
        if not present:
            raise ValueError("no true instances in confusion matrix")
        return float(np.mean(present))

    def to_dict(self) -> dict:
        return {"class_set": list(self.class_set), "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ConfusionMatrix":
        return cls(tuple(d["class_set"]), np.array(d["counts"]))

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["true\\predicted", *self.class_set])
            for c, row in zip(self.class_set, self.counts):
                w.writerow([c, *row.tolist()])
        return path


@dataclass(frozen=True)
class EvalReport:
    uar: float
    per_class_recall: tuple[float | None, ...]
    confusion: ConfusionMatrix
    num_features_used: int = 0
    config: Mapping = field(default_factory=dict)
    features: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "uar": self.uar,
            "per_class_recall": list(self.per_class_recall),
            "confusion": self.confusion.to_dict(),
            "num_features_used": self.num_features_used,
            "features": list(self.features),
            "config": dict(self.config),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalReport":
        return cls(
            uar=float(d["uar"]),
            per_class_recall=tuple(d["per_class_recall"]),
            confusion=ConfusionMatrix.from_dict(d["confusion"]),
            num_features_used=int(d["num_features_used"]),
            config=d.get("config", {}),
            features=tuple(d.get("features", ())),
        )


def confusion_and_uar(true_labels: Sequence[str], predicted_labels: Sequence[str],
                      class_set: Sequence[str]) -> EvalReport:
    """Confusion matrix and UAR of pooled predictions.

    UAR averages recall over the classes that have at least one true instance.
    """
    true_labels, predicted_labels = list(true_labels), list(predicted_labels)
    if len(true_labels) != len(predicted_labels):
        raise ValueError(f"{len(true_labels)} true labels vs {len(predicted_labels)} predictions")
    pos = {c: i for i, c in enumerate(class_set)}
    counts = np.zeros((len(pos), len(pos)), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        if t not in pos or p not in pos:
            raise ValueError(f"label outside class_set: {t if t not in pos else p!r}")
        counts[pos[t], pos[p]] += 1
    cm = ConfusionMatrix(tuple(class_set), counts)
    return EvalReport(uar=cm.uar(), per_class_recall=tuple(cm.recalls()), confusion=cm)


def loso_predictions(data: LabeledDataset, subset: Sequence[int],
                     svm_config: SvmConfig | None = None, plan: FoldPlan | None = None) -> list[str]:
    """Out-of-fold predictions for every instance, z-scoring on each fold's training part."""
    plan = plan or loso_folds(data)
    X = data.features[:, list(subset)]
    labels = np.asarray(data.labels)
    pred: list[str | None] = [None] * data.m
    for fold in plan:
        stats = NormalizationStats.fit(X[fold.train])
        model = fit_one_vs_one(stats.transform(X[fold.train]), labels[fold.train],
                               data.class_set, svm_config)
        for i, p in zip(fold.test, model.predict(stats.transform(X[fold.test]))):
            pred[i] = p
    return pred  # type: ignore[return-value]


def _check_subset(subset: Sequence[int], n: int) -> tuple[int, ...]:
    idx = tuple(sorted(int(i) for i in subset))
    if not idx:
        raise ValueError("empty feature subset")
    if len(set(idx)) != len(idx):
        raise ValueError("feature subset has duplicate indices")
    if idx[0] < 0 or idx[-1] >= n:
        raise ValueError(f"feature index out of range 0..{n - 1}")
    return idx


def evaluate_feature_subset(data: LabeledDataset, subset: Sequence[int],
                            svm_config: SvmConfig | None = None,
                            plan: FoldPlan | None = None) -> EvalReport:
    """LOSO UAR of a one-vs-one linear SVM restricted to ``subset``.

    The subset is sorted first, so the result does not depend on index order.
    """
    svm_config = svm_config or SvmConfig()
    idx = _check_subset(subset, data.n)
    pred = loso_predictions(data, idx, svm_config, plan)
    rep = confusion_and_uar(data.labels, pred, data.class_set)
    return EvalReport(
        uar=rep.uar,
        per_class_recall=rep.per_class_recall,
        confusion=rep.confusion,
        num_features_used=len(idx),
        config={"svm": svm_config.to_dict(), "protocol": "loso-pooled"},
        features=idx,
    )


def evaluate_baseline(data: LabeledDataset, svm_config: SvmConfig | None = None,
                      plan: FoldPlan | None = None) -> EvalReport:
    return evaluate_feature_subset(data, range(data.n), svm_config, plan)


@dataclass(frozen=True)
class SweepCurve:
    points: tuple[tuple[int, EvalReport], ...]
    warnings: tuple[str, ...] = ()

    def best(self) -> tuple[int, EvalReport]:
        """Highest UAR; ties go to the smaller k."""
        return max(self.points, key=lambda p: (p[1].uar, -p[0]))


def sweep_topk(data: LabeledDataset, ranking, k_grid: Sequence[int],
               svm_config: SvmConfig | None = None) -> SweepCurve:
    """Evaluate the top-k ranked features for each k in ``k_grid``.

    Values above ``n`` are clipped to ``n`` (with a warning); repeated k are
    evaluated once. Points come back in ascending k.
    """
    grid = [int(k) for k in k_grid]
    if not grid:
        raise ValueError("empty k_grid")
    if min(grid) < 1:
        raise ValueError("k_grid values must be >= 1")
    notes = []
    clipped = sorted({min(k, data.n) for k in grid})
    over = sorted(k for k in set(grid) if k > data.n)
    if over:
        msg = f"k values {over} exceed n={data.n}; clipped to {data.n}"
        notes.append(msg)
        warnings.warn(msg, stacklevel=2)
    plan = loso_folds(data)
    order = list(ranking.order)
    points = tuple((k, evaluate_feature_subset(data, order[:k], svm_config, plan)) for k in clipped)
    return SweepCurve(points=points, warnings=tuple(notes))
