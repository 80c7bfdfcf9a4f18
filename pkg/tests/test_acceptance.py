"""Exit criteria. Each test carries an ``acceptance`` marker; the terminal
summary prints one PASS/FAIL/SKIP line per criterion."""

import json
import os
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from lowfeat.afs import afs_select
from lowfeat.cli import main as cli_main
from lowfeat.dataset import DatasetManifest, LabeledDataset, load_dataset, write_dataset_csv
from lowfeat.evaluation import confusion_and_uar, evaluate_baseline, loso_folds
from lowfeat.harness import (DeploymentBundle, ExperimentConfig, ReadStats, classify_csv,
                             execute, export_bundle, generate_planted_dataset,
                             train_for_record)
from lowfeat.linsvm import SvmConfig, kkt_residuals, train_binary_smo
from lowfeat.selectors import (ReliefFConfig, fisher_scores, ilfs_scores, path_relevance,
                               relieff_scores)
from lowfeat.selectors.ilfs import spectral_radius

from oracles import dual_value, fisher_oracle, qp_grid_oracle, relieff_oracle, series_oracle


def random_dataset(rng, m_max, n_max, c_min=2, c_max=4):
    c = int(rng.integers(c_min, c_max + 1))
    m = int(rng.integers(2 * c, m_max + 1))
    n = int(rng.integers(1, n_max + 1))
    labels = [f"c{i % c}" for i in rng.permutation(m)]
    X = rng.normal(size=(m, n)) * rng.uniform(0.1, 10, n) + rng.uniform(-5, 5, n)
    if rng.random() < 0.3:
        X = np.round(X)  # ties in distances and values
    subjects = [f"s{int(s)}" for s in rng.integers(0, 4, m)]
    return LabeledDataset("rand", X, subjects, labels, [f"f{j}" for j in range(n)],
                          [f"c{k}" for k in range(c)])


@pytest.mark.acceptance("Fisher oracle equivalence (100 datasets, 1e-9, <5 s)")
def test_fisher_oracle_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        d = random_dataset(rng, 30, 10)
        got = fisher_scores(d).scores
        ref = np.array(fisher_oracle(d.features, list(d.labels)))
        worst = max(worst, float(np.max(np.abs(got - ref))))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-9, f"max deviation {worst:.3g}"
    assert elapsed < 5.0, f"took {elapsed:.2f}s"


@pytest.mark.acceptance("ReliefF oracle equivalence (50 datasets, k in {1,2}, exact; W=(1,-1), <5 s)")
def test_relieff_oracle_equivalence():
    rng = np.random.default_rng(77)
    t0 = time.perf_counter()
    for i in range(50):
        d = random_dataset(rng, 20, 6)
        k = 1 + i % 2
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            got = relieff_scores(d, ReliefFConfig(k_neighbors=k, sample_count="all")).scores
        ref = relieff_oracle(d.features, list(d.labels), k)
        assert got.tolist() == ref, f"dataset {i}: {got.tolist()} != {ref}"
    four = LabeledDataset("four", [[0, 0], [0, 1], [1, 0], [1, 1]], ["a", "b", "c", "d"],
                          ["A", "A", "B", "B"], ["f1", "f2"], ["A", "B"])
    assert relieff_scores(four, ReliefFConfig(k_neighbors=1)).scores.tolist() == [1.0, -1.0]
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0, f"took {elapsed:.2f}s"


@pytest.mark.acceptance("ILFS closed form vs L=50 series (1e-9, alpha*rho <= 0.9, <5 s)")
def test_ilfs_closed_form_vs_series():
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    failures = []
    targets = np.concatenate([rng.uniform(0.01, 0.9, 98), [0.5, 0.9]])
    for t in targets:
        n = int(rng.integers(2, 21))
        A = rng.random((n, n))
        alpha = t / spectral_radius(A)
        err = float(np.max(np.abs(path_relevance(A, alpha) - series_oracle(A, alpha, 50))))
        if err > 1e-9:
            failures.append((round(float(t), 3), err))
    elapsed = time.perf_counter() - t0
    assert not failures, (
        f"{len(failures)}/100 cases exceed 1e-9; worst alpha*rho={max(failures)[0]} "
        f"err={max(e for _, e in failures):.3g} (50-term truncation leaves a tail of order "
        f"(alpha*rho)^51/(1-alpha*rho))")
    assert elapsed < 5.0


@pytest.mark.acceptance("SVM correctness (dual vs grid QP 1e-6; KKT on 100 problems; C=0.75)")
def test_svm_correctness():
    assert SvmConfig().box_constraint == 0.75
    rng = np.random.default_rng(11)
    tight = SvmConfig(kkt_tolerance=1e-10)
    for i in range(30):
        p = 2 + i % 3
        X = rng.normal(size=(p, 2))
        y = np.array([1.0, -1.0] + rng.choice([-1.0, 1.0], size=p - 2).tolist())
        model = train_binary_smo(X, y, tight)
        _, grid_val = qp_grid_oracle(X, y, 0.75)
        smo_val = dual_value(model.alpha, X, y)
        assert abs(smo_val - grid_val) <= 1e-6, f"problem {i}: {smo_val} vs {grid_val}"
    for i in range(100):
        m = int(rng.integers(10, 60))
        X = rng.normal(size=(m, 4))
        y = np.where(X @ rng.normal(size=4) > 0, 1.0, -1.0)
        if i % 2:
            y[rng.random(m) < 0.25] *= -1  # non-separable half
        y[0], y[1] = 1.0, -1.0
        model = train_binary_smo(X, y)
        assert model.converged
        assert kkt_residuals(model, X, y, 0.75).max() <= SvmConfig().kkt_tolerance


@pytest.mark.acceptance("LOSO integrity (folds = subjects, disjoint, pooled count = m)")
def test_loso_integrity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = random_dataset(rng, 40, 4)
        plan = loso_folds(d)
        assert len(plan) == len(set(d.subject_ids))
        for f in plan:
            assert not {d.subject_ids[i] for i in f.train} & {d.subject_ids[i] for i in f.test}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = evaluate_baseline(d, plan=plan)
        assert rep.confusion.total == d.m


@pytest.mark.acceptance("UAR properties (perfect=1.0, 7-class random 0.143+-0.02, invariances)")
def test_uar_properties():
    classes = [f"e{i}" for i in range(7)]
    rng = np.random.default_rng(0)
    true = rng.choice(classes, 10_000).tolist()
    assert confusion_and_uar(true, true, classes).uar == 1.0
    rand = confusion_and_uar(true, rng.choice(classes, 10_000).tolist(), classes).uar
    assert abs(rand - 0.143) <= 0.02
    pred = [t if rng.random() < 0.6 else classes[rng.integers(7)] for t in true]
    base = confusion_and_uar(true, pred, classes).uar
    assert confusion_and_uar(true * 3, pred * 3, classes).uar == pytest.approx(base, abs=1e-12)
    ren = dict(zip(classes, rng.permutation([f"x{i}" for i in range(7)]).tolist()))
    relabeled = confusion_and_uar([ren[t] for t in true], [ren[p] for p in pred],
                                  sorted(ren.values())).uar
    assert relabeled == pytest.approx(base, abs=1e-12)


def _planted_manifest(data, folder):
    path = write_dataset_csv(data, Path(folder) / f"{data.name}.csv")
    return DatasetManifest(str(path), "custom", data.n, name=data.name)


@pytest.mark.acceptance("Planted recovery end-to-end ((a) top-15, (b) fisher <=30 >= baseline, "
                        "(c) AFS max and >= baseline-0.02, <10 min)")
def test_planted_recovery(tmp_path):
    t0 = time.perf_counter()
    data = generate_planted_dataset(200, 100, 10, 4, seed=7)
    informative = set(data.meta["informative"])
    for name, rank in [("fisher", fisher_scores), ("relieff", relieff_scores),
                       ("ilfs", ilfs_scores)]:
        hits = len(informative & set(rank(data).top(15)))
        assert hits >= 8, f"{name}: {hits}/10 informative in top 15"
    manifest = _planted_manifest(data, tmp_path)
    rec = execute(ExperimentConfig(manifests=(manifest,), selector="fisher"), data)
    assert rec.best["num_features"] <= 30
    assert rec.best["uar"] >= rec.baseline["uar"]
    afs = afs_select(data)
    assert afs.chosen_uar == max(e.uar for e in afs.table)
    assert afs.chosen_uar >= rec.baseline["uar"] - 0.02
    assert set(afs.selected) & informative
    assert time.perf_counter() - t0 < 600


@pytest.mark.acceptance("Determinism (repeated `run` gives bit-identical record JSON)")
def test_determinism(tmp_path, capsys):
    data = generate_planted_dataset(80, 12, 3, 3, seed=3, n_subjects=4)
    manifest = tmp_path / "m.json"
    csv_path = write_dataset_csv(data, tmp_path / "d.csv")
    manifest.write_text(json.dumps({"csv_path": str(csv_path), "feature_set_tag": "custom",
                                    "expected_dimension": 12}))
    runs = [("baseline", []), ("fisher", []), ("relieff", ["--relieff-samples", "30"]),
            ("ilfs", []), ("afs", ["--afs-grid", "2:6:2"])]
    for selector, extra in runs:
        blobs = []
        for rep in ("one", "two"):
            argv = ["run", "--manifest", str(manifest), "--selector", selector, "--seed", "9",
                    "--out", str(tmp_path / rep), *extra]
            assert cli_main(argv) == 0
            info = json.loads(capsys.readouterr().out)
            blobs.append(Path(info["record"]).read_bytes())
        assert blobs[0] == blobs[1], selector


@pytest.mark.acceptance("Bundle contract (exact roundtrip, reads only selected columns)")
def test_bundle_contract(tmp_path):
    data = generate_planted_dataset(120, 88, 2, 3, seed=11, n_subjects=6)
    manifest = _planted_manifest(data, tmp_path)
    rec = execute(ExperimentConfig(manifests=(manifest,), selector="fisher", k_grid=(2, 5)), data)
    model, stats = train_for_record(rec, data)
    export_bundle(rec, model, stats, tmp_path / "bundle.json")
    bundle = DeploymentBundle.load(tmp_path / "bundle.json")
    sel = list(rec.best["features"])
    expected = model.predict(stats.transform(data.features[:, sel]))
    counter = ReadStats()
    got = classify_csv(bundle, write_dataset_csv(data, tmp_path / "in.csv"), counter)
    assert got == expected
    assert counter.cells == data.m * len(sel) and counter.rows == data.m

    touched = set()

    class Row(list):
        def __getitem__(self, i):
            touched.add(i)
            return super().__getitem__(i)

    bundle.predict_rows([Row(r) for r in data.features.tolist()])
    assert touched == set(sel)


REFERENCE_BASELINE = {  # percent UAR of the full feature set
    ("emodb", "egemaps"): 68.5, ("emodb", "emobase"): 74.6,
    ("emovo", "egemaps"): 37.4, ("emovo", "emobase"): 34.4,
    ("savee", "egemaps"): 40.8, ("savee", "emobase"): 38.1,
}


@pytest.mark.acceptance("Optional reproduction (corpus baseline UAR within +-3 pp)")
def test_optional_corpus_reproduction():
    root = os.environ.get("LOWFEAT_CORPUS_DIR")
    if not root:
        pytest.skip("set LOWFEAT_CORPUS_DIR to a folder of <corpus>_<featureset>.json manifests")
    found = {cell: Path(root) / f"{cell[0]}_{cell[1]}.json" for cell in REFERENCE_BASELINE}
    found = {cell: p for cell, p in found.items() if p.exists()}
    if not found:
        pytest.skip(f"no corpus manifests under {root}")
    misses = []
    for cell, path in found.items():
        uar = 100.0 * evaluate_baseline(load_dataset(DatasetManifest.from_json(path))).uar
        if abs(uar - REFERENCE_BASELINE[cell]) > 3.0:
            misses.append(f"{cell}: {uar:.1f} vs {REFERENCE_BASELINE[cell]}")
    assert not misses, "; ".join(misses)
