"""Experiment configuration, execution and result records."""

from __future__ import annotations

import hashlib
import json
import time
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ..afs import AfsConfig, afs_select
from ..dataset import DatasetManifest, LabeledDataset, combine_datasets, load_dataset
from ..evaluation import evaluate_baseline, evaluate_feature_subset, loso_folds, sweep_topk
from ..linsvm import SvmConfig
from ..selectors import (IlfsConfig, ReliefFConfig, fisher_scores, ilfs_scores,
                         relieff_scores)

SELECTORS = ("baseline", "fisher", "relieff", "ilfs", "afs")
RECORD_FORMAT_VERSION = 1


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def default_k_grid(n: int) -> list[int]:
    """1..n in steps of max(1, n // 50), always ending at n."""
    step = max(1, n // 50)
    grid = list(range(1, n + 1, step))
    if grid[-1] != n:
        grid.append(n)
    return grid


def dataset_digest(data: LabeledDataset) -> str:
    h = hashlib.sha256()
    h.update(canonical_json([data.feature_names, data.subject_ids, data.labels,
                             data.class_set]).encode())
    h.update(np.ascontiguousarray(data.features).tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class ExperimentConfig:
    manifests: tuple[DatasetManifest, ...]
    selector: str = "baseline"
    selector_config: Mapping[str, Any] = field(default_factory=dict)
    k_grid: tuple[int, ...] | None = None
    svm_config: SvmConfig = field(default_factory=SvmConfig)
    rng_seed: int = 0
    output_dir: str = "results"

    def __post_init__(self):
        if self.selector not in SELECTORS:
            raise ValueError(f"unknown selector {self.selector!r}; expected one of {SELECTORS}")
        if not self.manifests:
            raise ValueError("at least one dataset manifest is required")
        if self.k_grid is not None:
            object.__setattr__(self, "k_grid", tuple(int(k) for k in self.k_grid))
            if not self.k_grid:
                raise ValueError("k_grid must be non-empty")
        object.__setattr__(self, "manifests", tuple(self.manifests))
        object.__setattr__(self, "selector_config", dict(self.selector_config))

    def to_dict(self) -> dict:
        """Everything that determines the result; the output location is excluded."""
        return {
            "manifests": [m.to_dict() for m in self.manifests],
            "selector": self.selector,
            "selector_config": dict(self.selector_config),
            "k_grid": list(self.k_grid) if self.k_grid is not None else None,
            "svm_config": self.svm_config.to_dict(),
            "rng_seed": self.rng_seed,
        }

    def config_hash(self) -> str:
        return sha256_hex(canonical_json(self.to_dict()))

    @classmethod
    def from_dict(cls, d: Mapping, output_dir: str = "results") -> "ExperimentConfig":
        return cls(
            manifests=tuple(DatasetManifest(**m) for m in d["manifests"]),
            selector=d["selector"],
            selector_config=d.get("selector_config", {}),
            k_grid=tuple(d["k_grid"]) if d.get("k_grid") is not None else None,
            svm_config=SvmConfig.from_dict(d.get("svm_config", {})),
            rng_seed=int(d.get("rng_seed", 0)),
            output_dir=output_dir,
        )


@dataclass(frozen=True)
class ResultRecord:
    """Deterministic outcome of one experiment.

    ``best`` holds the highest-UAR point (ties go to fewer features); ``curve``
    holds every evaluated point. Wall-clock times live in ``timestamps`` and are
    written to a separate ``run.json`` so the record itself is reproducible
    byte for byte.
    """

    experiment_id: str
    config_hash: str
    config: Mapping[str, Any]
    dataset: Mapping[str, Any]
    selector: str
    baseline: Mapping[str, Any]
    best: Mapping[str, Any]
    curve: tuple[Mapping[str, Any], ...]
    extras: Mapping[str, Any] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()
    timestamps: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "format_version": RECORD_FORMAT_VERSION,
            "experiment_id": self.experiment_id,
            "config_hash": self.config_hash,
            "config": self.config,
            "dataset": self.dataset,
            "selector": self.selector,
            "baseline": self.baseline,
            "best": self.best,
            "curve": list(self.curve),
            "extras": self.extras,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "ResultRecord":
        if d.get("format_version") != RECORD_FORMAT_VERSION:
            raise ValueError(f"unsupported record format {d.get('format_version')!r}")
        return cls(
            experiment_id=d["experiment_id"], config_hash=d["config_hash"], config=d["config"],
            dataset=d["dataset"], selector=d["selector"], baseline=d["baseline"], best=d["best"],
            curve=tuple(d["curve"]), extras=d.get("extras", {}),
            warnings=tuple(d.get("warnings", ())),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ResultRecord":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @property
    def cell(self) -> tuple[str, str]:
        """(dataset name, feature set) this record reports on."""
        return self.dataset["name"], self.dataset.get("feature_set") or "custom"


def load_experiment_data(manifests: Sequence[DatasetManifest]) -> LabeledDataset:
    datasets = [load_dataset(m) for m in manifests]
    return datasets[0] if len(datasets) == 1 else combine_datasets(datasets)


def _with_seed(cls, options: Mapping, seed: int, **extra):
    opts = dict(options)
    if "rng_seed" in cls.__dataclass_fields__:
        opts.setdefault("rng_seed", seed)
    opts.update(extra)
    return cls(**opts)


def _point(report) -> dict:
    return {"num_features": report.num_features_used, "uar": report.uar}


def _summary(report, names: Sequence[str]) -> dict:
    return {
        "num_features": report.num_features_used,
        "uar": report.uar,
        "per_class_recall": list(report.per_class_recall),
        "features": list(report.features),
        "feature_names": [names[i] for i in report.features],
        "confusion": report.confusion.to_dict(),
    }


def execute(config: ExperimentConfig, data: LabeledDataset) -> ResultRecord:
    """Run ``config`` on already-loaded data without touching the filesystem."""
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    svm = config.svm_config
    plan = loso_folds(data)
    notes: list[str] = []
    extras: dict[str, Any] = {}

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        baseline = evaluate_baseline(data, svm, plan)
        if config.selector == "baseline":
            curve = [dict(k=data.n, **_point(baseline))]
            best = baseline
        elif config.selector == "afs":
            opts = dict(config.selector_config)
            afs_cfg = _with_seed(AfsConfig, opts, config.rng_seed, svm_config=svm)
            result = afs_select(data, afs_cfg)
            curve = [dict(k=e.n_clusters, **{"num_features": e.member_count, "uar": e.uar},
                          cluster=e.cluster) for e in result.best_per_n()]
            best = result.report
            extras["afs"] = {"config": afs_cfg.to_dict(), **result.to_dict()}
        else:
            if config.selector == "fisher":
                ranking = fisher_scores(data)
            elif config.selector == "relieff":
                ranking = relieff_scores(data, _with_seed(ReliefFConfig, config.selector_config,
                                                          config.rng_seed))
            else:
                ranking = ilfs_scores(data, _with_seed(IlfsConfig, config.selector_config,
                                                       config.rng_seed))
            grid = list(config.k_grid) if config.k_grid is not None else default_k_grid(data.n)
            sweep = sweep_topk(data, ranking, grid, svm)
            curve = [dict(k=k, **_point(rep)) for k, rep in sweep.points]
            best = sweep.best()[1]
            extras["ranking"] = ranking.to_dict()
    notes.extend(str(w.message) for w in caught)

    cfg = config.to_dict()
    h = config.config_hash()
    return ResultRecord(
        experiment_id=f"{data.name}-{config.selector}-{h[:12]}",
        config_hash=h,
        config=cfg,
        dataset={
            "name": data.name,
            "feature_set": data.meta.get("feature_set", "custom"),
            "m": data.m,
            "n": data.n,
            "class_set": list(data.class_set),
            "subjects": len(plan),
            "feature_names": list(data.feature_names),
            "digest": dataset_digest(data),
        },
        selector=config.selector,
        baseline=_summary(baseline, data.feature_names),
        best=_summary(best, data.feature_names),
        curve=tuple(curve),
        extras=extras,
        warnings=tuple(dict.fromkeys(notes)),
        timestamps={"started": started, "finished": datetime.now(timezone.utc).isoformat(),
                    "seconds": round(time.perf_counter() - t0, 3)},
    )


def run_experiment(config: ExperimentConfig, data: LabeledDataset | None = None) -> ResultRecord:
    """Load the data, run the selector and persist ``record.json`` (plus ``run.json``
    with timestamps) under ``<output_dir>/<experiment_id>/``."""
    if data is None:
        data = load_experiment_data(config.manifests)
    record = execute(config, data)
    out = Path(config.output_dir) / record.experiment_id
    out.mkdir(parents=True, exist_ok=True)
    (out / "record.json").write_text(record.to_json(), encoding="utf-8")
    (out / "run.json").write_text(json.dumps(dict(record.timestamps), indent=1) + "\n",
                                  encoding="utf-8")
    return record


def record_path(config: ExperimentConfig, record: ResultRecord) -> Path:
    return Path(config.output_dir) / record.experiment_id / "record.json"


def reevaluate_best(record: ResultRecord, data: LabeledDataset):
    """Re-run the LOSO evaluation of a record's best subset (consistency check)."""
    return evaluate_feature_subset(data, record.best["features"],
                                   SvmConfig.from_dict(record.config["svm_config"]))
