import csv
import json

import numpy as np
import pytest

from lowfeat.dataset import DatasetManifest, write_dataset_csv
from lowfeat.evaluation import evaluate_baseline
from lowfeat.harness import (BundleError, DeploymentBundle, ExperimentConfig, ReadStats,
                             ResultRecord, best_results_table, classify_csv, default_k_grid,
                             emit_reports, execute, export_bundle, generate_planted_dataset,
                             run_experiment, train_for_record)
from lowfeat.harness.experiment import reevaluate_best


def manifest_for(data, folder):
    path = write_dataset_csv(data, folder / f"{data.name}.csv")
    return DatasetManifest(str(path), "custom", data.n, name=data.name)


@pytest.fixture
def small_manifest(small_planted, tmp_path):
    return manifest_for(small_planted, tmp_path)


# -- synthetic data ----------------------------------------------------------------

def test_planted_deterministic():
    a = generate_planted_dataset(60, 12, 3, 3, seed=1, n_subjects=5)
    b = generate_planted_dataset(60, 12, 3, 3, seed=1, n_subjects=5)
    assert a.features.tobytes() == b.features.tobytes()
    assert a.meta == b.meta


def test_planted_structure(planted):
    assert (planted.m, planted.n) == (200, 100)
    assert len(planted.meta["informative"]) == 10
    assert len(planted.subjects()) == 10
    for s in planted.subjects():
        rows = [i for i, sid in enumerate(planted.subject_ids) if sid == s]
        assert {planted.labels[i] for i in rows} == set(planted.class_set)


def test_planted_baseline_regression(planted):
    assert evaluate_baseline(planted).uar >= 0.90


def test_planted_no_signal_near_chance():
    d = generate_planted_dataset(200, 20, 0, 4, seed=2)
    assert d.meta["informative"] == []
    assert abs(evaluate_baseline(d).uar - 0.25) < 0.12


@pytest.mark.parametrize("args", [(10, 5, 6, 2, 0), (40, 5, 1, 1, 0), (10, 5, 1, 4, 0)])
def test_planted_infeasible(args):
    with pytest.raises(ValueError):
        generate_planted_dataset(*args)


# -- experiments -------------------------------------------------------------------

def test_default_k_grid():
    assert default_k_grid(5) == [1, 2, 3, 4, 5]
    g = default_k_grid(988)
    assert g[0] == 1 and g[-1] == 988 and g[1] - g[0] == 19
    assert default_k_grid(88)[-1] == 88


def test_config_validation(small_manifest):
    with pytest.raises(ValueError):
        ExperimentConfig(manifests=(small_manifest,), selector="pca")
    with pytest.raises(ValueError):
        ExperimentConfig(manifests=())
    with pytest.raises(ValueError):
        ExperimentConfig(manifests=(small_manifest,), selector="fisher", k_grid=())


def test_config_hash_ignores_output_dir(small_manifest):
    a = ExperimentConfig(manifests=(small_manifest,), output_dir="x")
    b = ExperimentConfig(manifests=(small_manifest,), output_dir="y")
    c = ExperimentConfig(manifests=(small_manifest,), rng_seed=1)
    assert a.config_hash() == b.config_hash() != c.config_hash()
    assert ExperimentConfig.from_dict(a.to_dict()).config_hash() == a.config_hash()


def test_baseline_record(small_planted, small_manifest, tmp_path):
    cfg = ExperimentConfig(manifests=(small_manifest,), output_dir=str(tmp_path / "out"))
    rec = run_experiment(cfg)
    assert len(rec.curve) == 1 and rec.curve[0]["k"] == small_planted.n
    assert rec.best == rec.baseline
    folder = tmp_path / "out" / rec.experiment_id
    assert (folder / "record.json").exists() and (folder / "run.json").exists()
    assert ResultRecord.load(folder / "record.json").to_dict() == rec.to_dict()


@pytest.mark.parametrize("selector, opts", [("fisher", {}), ("relieff", {"k_neighbors": 3}),
                                            ("ilfs", {}), ("afs", {"n_grid": [2, 4]})])
def test_record_invariants(small_planted, small_manifest, tmp_path, selector, opts):
    cfg = ExperimentConfig(manifests=(small_manifest,), selector=selector,
                           selector_config=opts, k_grid=(1, 3, 6, 12),
                           output_dir=str(tmp_path))
    rec = execute(cfg, small_planted)
    assert rec.best["uar"] == max(p["uar"] for p in rec.curve)
    assert all(p["num_features"] <= small_planted.n for p in rec.curve)
    assert rec.best["num_features"] == len(rec.best["features"])
    assert reevaluate_best(rec, small_planted).uar == rec.best["uar"]


def test_run_is_bit_identical(small_manifest, tmp_path):
    texts = []
    for out in ("a", "b"):
        cfg = ExperimentConfig(manifests=(small_manifest,), selector="relieff",
                               selector_config={"sample_count": 20}, k_grid=(2, 4),
                               rng_seed=3, output_dir=str(tmp_path / out))
        rec = run_experiment(cfg)
        texts.append((tmp_path / out / rec.experiment_id / "record.json").read_bytes())
    assert texts[0] == texts[1]


def test_fisher_subset_beats_baseline(planted, tmp_path):
    m = manifest_for(planted, tmp_path)
    cfg = ExperimentConfig(manifests=(m,), selector="fisher", k_grid=tuple(range(1, 101)))
    rec = execute(cfg, planted)
    assert rec.best["uar"] >= rec.baseline["uar"]


# -- reports -----------------------------------------------------------------------

def fake_record(name, selector, uar, num=3, base_uar=0.3, feature_set="egemaps"):
    cm = {"class_set": ["a", "b"], "counts": [[1, 1], [0, 2]]}
    point = lambda u, k: {"num_features": k, "uar": u, "per_class_recall": [0.5, 1.0],
                          "features": list(range(k)), "feature_names": [], "confusion": cm}
    return ResultRecord(
        experiment_id=f"{name}-{selector}", config_hash="0" * 64, config={},
        dataset={"name": name, "feature_set": feature_set, "n": 88},
        selector=selector, baseline=point(base_uar, 88), best=point(uar, num),
        curve=({"k": num, "num_features": num, "uar": uar},),
    )


def test_table_average():
    header, rows = best_results_table([fake_record("emodb", "fisher", 0.40),
                                       fake_record("savee", "fisher", 0.50)])
    assert header[0] == "method" and header[-1] == "Average"
    fisher = next(r for r in rows if r[0] == "Fisher")
    assert fisher[-1] == pytest.approx(0.45)
    assert fisher[1:5] == [3, 0.40, 3, 0.50]


def test_table_single_record():
    _, rows = best_results_table([fake_record("emodb", "baseline", 0.3, num=88)])
    assert len(rows) == 1 and rows[0][0] == "Baseline" and rows[0][-1] == 0.3


def test_table_baseline_row_first():
    recs = [fake_record("emodb", m, 0.5, base_uar=0.6) for m in ("afs", "fisher", "ilfs")]
    _, rows = best_results_table(recs)
    assert [r[0] for r in rows] == ["Baseline", "ILFS", "Fisher", "AFS"]
    assert rows[0][1:3] == [88, 0.6]


def test_table_reproduces_reported_baseline_average():
    # six-cell Baseline row from the reference results; its Average is 49.0
    cells = [("EmoDB", "eGeMAPS", 68.5), ("EmoDB", "emobase", 74.6), ("EMOVO", "eGeMAPS", 37.4),
             ("EMOVO", "emobase", 34.4), ("SAVEE", "eGeMAPS", 40.8), ("SAVEE", "emobase", 38.1)]
    recs = [fake_record(ds, "baseline", u, num=88, base_uar=u, feature_set=fs)
            for ds, fs, u in cells]
    _, rows = best_results_table(recs)
    assert round(rows[0][-1], 1) == 49.0


def test_emit_reports(tmp_path):
    recs = [fake_record("emodb", "fisher", 0.4), fake_record("emodb", "baseline", 0.3)]
    paths = emit_reports(recs, tmp_path)
    names = {p.relative_to(tmp_path).as_posix() for p in paths}
    assert {"best_results.csv", "curves/emodb-fisher.csv", "confusion/emodb-fisher.csv",
            "confusion/emodb-fisher_baseline.csv", "confusion/emodb-baseline.csv"} <= names
    with open(tmp_path / "curves" / "emodb-fisher.csv") as fh:
        assert next(csv.reader(fh)) == ["k", "num_features", "uar"]
    with pytest.raises(ValueError):
        emit_reports([], tmp_path)


def test_reports_pure(tmp_path):
    recs = [fake_record("emodb", "fisher", 0.4)]
    emit_reports(recs, tmp_path / "a")
    emit_reports(recs, tmp_path / "b")
    assert (tmp_path / "a" / "best_results.csv").read_bytes() == \
        (tmp_path / "b" / "best_results.csv").read_bytes()


# -- bundles -----------------------------------------------------------------------

@pytest.fixture
def wide():
    """88-column dataset whose signal lives in two columns."""
    return generate_planted_dataset(120, 88, 2, 3, seed=11, n_subjects=6)


@pytest.fixture
def two_feature_bundle(wide, tmp_path):
    m = manifest_for(wide, tmp_path)
    rec = execute(ExperimentConfig(manifests=(m,), selector="fisher", k_grid=(2,)), wide)
    model, stats = train_for_record(rec, wide)
    bundle = export_bundle(rec, model, stats, tmp_path / "b.json")
    return rec, model, stats, bundle, tmp_path / "b.json"


def test_bundle_roundtrip_held_out(wide, two_feature_bundle, tmp_path):
    rec, model, stats, _, path = two_feature_bundle
    held = generate_planted_dataset(120, 88, 2, 3, seed=11, n_subjects=6)
    rng = np.random.default_rng(0)
    X = held.features[rng.choice(held.m, 20, replace=False)] + rng.normal(scale=0.1, size=(20, 88))
    sel = list(rec.best["features"])
    expected = model.predict(stats.transform(X[:, sel]))
    loaded = DeploymentBundle.load(path)
    assert loaded.predict_rows(X.tolist()) == expected
    csv_path = tmp_path / "held.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(wide.feature_names)
        w.writerows([[repr(float(v)) for v in row] for row in X])
    assert classify_csv(loaded, csv_path) == expected


def test_bundle_reads_only_selected(wide, two_feature_bundle, tmp_path):
    _, _, _, bundle, path = two_feature_bundle
    assert len(bundle.selected) == 2 and len(bundle.feature_names) == 88
    csv_path = write_dataset_csv(wide, tmp_path / "full.csv")
    stats = ReadStats()
    labels = classify_csv(DeploymentBundle.load(path), csv_path, stats)
    assert len(labels) == wide.m
    assert stats.rows == wide.m and stats.cells == 2 * wide.m

    class Spy(list):
        touched = set()

        def __getitem__(self, i):
            Spy.touched.add(i)
            return super().__getitem__(i)

    bundle.predict_rows([Spy(row) for row in wide.features.tolist()[:5]])
    assert Spy.touched == set(bundle.selected)


def test_bundle_rejects_87_columns(wide, two_feature_bundle, tmp_path):
    _, _, _, bundle, _ = two_feature_bundle
    narrow = tmp_path / "narrow.csv"
    with open(narrow, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(wide.feature_names[:87])
        w.writerow(["0.0"] * 87)
    with pytest.raises(BundleError, match="87"):
        classify_csv(bundle, narrow)
    with pytest.raises(BundleError):
        bundle.predict_rows([[0.0] * 87])


def test_bundle_rejects_renamed_columns(wide, two_feature_bundle, tmp_path):
    _, _, _, bundle, _ = two_feature_bundle
    p = tmp_path / "renamed.csv"
    p.write_text(",".join(["x"] * 88) + "\n" + ",".join(["0"] * 88) + "\n")
    with pytest.raises(BundleError, match="names"):
        classify_csv(bundle, p)


def test_bundle_checksum(two_feature_bundle, tmp_path):
    *_, path = two_feature_bundle
    raw = json.loads(path.read_text())
    raw["body"]["model"]["pairs"][0]["b"] += 1.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw))
    with pytest.raises(BundleError, match="checksum"):
        DeploymentBundle.load(bad)
    (tmp_path / "junk.json").write_text("{not json")
    with pytest.raises(BundleError):
        DeploymentBundle.load(tmp_path / "junk.json")


def test_bundle_provenance(two_feature_bundle):
    rec, *_, path = two_feature_bundle
    prov = DeploymentBundle.load(path).provenance
    assert prov["config_hash"] == rec.config_hash and prov["selector"] == "fisher"
