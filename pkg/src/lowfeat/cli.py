"""Command line entry point.

Every subcommand prints a JSON summary on stdout and exits 0; failures print
``{"error": ..., "message": ...}`` on stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .dataset import DatasetManifest, DatasetError, load_dataset, write_dataset_csv
from .harness.bundle import (BundleError, DeploymentBundle, ReadStats, classify_csv,
                             export_bundle, train_for_record)
from .harness.experiment import (SELECTORS, ExperimentConfig, ResultRecord,
                                 load_experiment_data, record_path, run_experiment)
from .harness.reports import emit_reports
from .harness.synthetic import generate_planted_dataset
from .linsvm import SvmConfig


def parse_int_grid(text: str) -> list[int]:
    """``"1,5,10"`` or ``"start:stop[:step]"`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) not in (2, 3):
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) == 3 else 1
        if step < 1:
            raise argparse.ArgumentTypeError("step must be >= 1")
        return list(range(start, stop + 1, step))
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _emit(obj) -> None:
    print(json.dumps(obj, indent=1))


def cmd_ingest(args) -> dict:
    manifest = DatasetManifest.from_json(args.manifest)
    data = load_dataset(manifest)
    return {"name": data.name, "feature_set": manifest.feature_set_tag, "m": data.m, "n": data.n,
            "classes": list(data.class_set), "subjects": len(data.subjects())}


def cmd_generate(args) -> dict:
    data = generate_planted_dataset(args.m, args.n, args.informative, args.classes, args.seed,
                                    n_subjects=args.subjects)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = write_dataset_csv(data, out / f"{data.name}.csv")
    manifest = {"csv_path": csv_path.name, "feature_set_tag": "custom",
                "expected_dimension": data.n, "label_column": "label",
                "subject_column": "subject", "name": data.name}
    man_path = out / f"{data.name}.manifest.json"
    man_path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    truth = out / f"{data.name}.informative.json"
    truth.write_text(json.dumps({"informative": data.meta["informative"]}) + "\n", encoding="utf-8")
    return {"csv": str(csv_path), "manifest": str(man_path), "ground_truth": str(truth)}


def _selector_options(args) -> dict:
    opts = {}
    if args.selector == "relieff":
        if args.relieff_k is not None:
            opts["k_neighbors"] = args.relieff_k
        if args.relieff_samples is not None:
            opts["sample_count"] = args.relieff_samples
    elif args.selector == "ilfs":
        if args.ilfs_bins is not None:
            opts["token_bins"] = args.ilfs_bins
        if args.ilfs_alpha is not None:
            opts["alpha_fraction"] = args.ilfs_alpha
    elif args.selector == "afs":
        if args.afs_grid is not None:
            opts["n_grid"] = args.afs_grid
        if args.som_iterations is not None:
            opts["som_iterations"] = args.som_iterations
    return opts


def cmd_run(args) -> dict:
    config = ExperimentConfig(
        manifests=tuple(DatasetManifest.from_json(p) for p in args.manifest),
        selector=args.selector,
        selector_config=_selector_options(args),
        k_grid=tuple(args.k_grid) if args.k_grid else None,
        svm_config=SvmConfig(box_constraint=args.C, kkt_tolerance=args.kkt_tol,
                             rng_seed=args.seed),
        rng_seed=args.seed,
        output_dir=args.out,
    )
    record = run_experiment(config)
    return {"record": str(record_path(config, record)), "experiment_id": record.experiment_id,
            "baseline_uar": record.baseline["uar"], "best_uar": record.best["uar"],
            "best_num_features": record.best["num_features"]}


def cmd_report(args) -> dict:
    records = [ResultRecord.load(p) for p in args.records]
    paths = emit_reports(records, args.out)
    return {"written": [str(p) for p in paths]}


def cmd_export(args) -> dict:
    record = ResultRecord.load(args.record)
    if args.manifest:
        manifests = [DatasetManifest.from_json(p) for p in args.manifest]
    else:
        manifests = [DatasetManifest(**m) for m in record.config["manifests"]]
    data = load_experiment_data(manifests)
    model, stats = train_for_record(record, data)
    bundle = export_bundle(record, model, stats, args.out)
    return {"bundle": args.out, "selected": list(bundle.selected),
            "feature_space": len(bundle.feature_names), "classes": list(bundle.model.class_set)}


def cmd_classify(args) -> dict:
    bundle = DeploymentBundle.load(args.bundle)
    stats = ReadStats()
    labels = classify_csv(bundle, args.csv, stats)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "predicted"])
            w.writerows(enumerate(labels))
    return {"predictions": labels if not args.out else args.out, "rows": stats.rows,
            "cells_read": stats.cells}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lowfeat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        sp.set_defaults(func=func)
        return sp

    sp = add("ingest", cmd_ingest, "validate a dataset manifest and its CSV")
    sp.add_argument("manifest")

    sp = add("generate", cmd_generate, "write a planted synthetic dataset")
    sp.add_argument("--m", type=int, default=200)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--informative", type=int, default=10)
    sp.add_argument("--classes", type=int, default=4)
    sp.add_argument("--subjects", type=int, default=10)
    sp.add_argument("--out", required=True)

    sp = add("run", cmd_run, "run one selector under LOSO evaluation")
    sp.add_argument("--manifest", action="append", required=True,
                    help="dataset manifest JSON; repeat to combine corpora")
    sp.add_argument("--selector", choices=SELECTORS, default="baseline")
    sp.add_argument("--k-grid", type=parse_int_grid, default=None,
                    help="top-k values, e.g. 1,5,10 or 1:88:2 (default 1..n step n/50)")
    sp.add_argument("--C", type=float, default=0.75, help="SVM box constraint (default 0.75)")
    sp.add_argument("--kkt-tol", type=float, default=1e-3)
    sp.add_argument("--relieff-k", type=int)
    sp.add_argument("--relieff-samples", type=int)
    sp.add_argument("--ilfs-bins", type=int)
    sp.add_argument("--ilfs-alpha", type=float)
    sp.add_argument("--afs-grid", type=parse_int_grid, help="cluster counts N (default 5:100:5)")
    sp.add_argument("--som-iterations", type=int)
    sp.add_argument("--out", default="results")

    sp = add("report", cmd_report, "emit best-result table, curves and confusion CSVs")
    sp.add_argument("records", nargs="+")
    sp.add_argument("--out", required=True)

    sp = add("export", cmd_export, "train on the record's best subset and write a bundle")
    sp.add_argument("--record", required=True)
    sp.add_argument("--manifest", action="append", help="override the record's manifests")
    sp.add_argument("--out", required=True)

    sp = add("classify", cmd_classify, "classify a feature CSV with a bundle")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--csv", required=True)
    sp.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _emit(args.func(args))
    except (DatasetError, BundleError, ValueError, OSError, KeyError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(err), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
