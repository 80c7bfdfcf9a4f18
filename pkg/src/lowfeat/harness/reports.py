"""Plot-ready tables from result records."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from ..evaluation import ConfusionMatrix
from .experiment import ResultRecord

METHOD_ORDER = ("baseline", "ilfs", "relieff", "fisher", "afs")
METHOD_LABELS = {"baseline": "Baseline", "ilfs": "ILFS", "relieff": "ReliefF",
                 "fisher": "Fisher", "afs": "AFS"}


def best_results_table(records: Sequence[ResultRecord]) -> tuple[list[str], list[list]]:
    """Rows of (method, numFeat/UAR per dataset x feature set, Average).

    The Baseline row comes from the full-feature evaluation stored in every
    record. ``Average`` is the unweighted mean UAR over the cells a method has.
    """
    if not records:
        raise ValueError("no records to report")
    cells = list(dict.fromkeys(r.cell for r in records))
    best: dict[tuple[str, tuple[str, str]], dict] = {}
    for r in records:
        best.setdefault(("baseline", r.cell), r.baseline)
        if r.selector != "baseline":
            best[(r.selector, r.cell)] = r.best
    header = ["method"]
    for ds, fs in cells:
        header += [f"{ds}/{fs}/numFeat", f"{ds}/{fs}/UAR"]
    header.append("Average")
    rows = []
    for method in METHOD_ORDER:
        if not any((method, c) in best for c in cells):
            continue
        row: list = [METHOD_LABELS[method]]
        uars = []
        for c in cells:
            point = best.get((method, c))
            if point is None:
                row += ["", ""]
            else:
                row += [point["num_features"], point["uar"]]
                uars.append(point["uar"])
        row.append(sum(uars) / len(uars))
        rows.append(row)
    return header, rows


def _write_csv(path: Path, header: Sequence, rows: Sequence[Sequence]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def emit_reports(records: Sequence[ResultRecord], out_dir: str | Path) -> list[Path]:
    """Write ``best_results.csv``, ``curves/<id>.csv`` and ``confusion/<id>[_baseline].csv``."""
    if not records:
        raise ValueError("no records to report")
    out = Path(out_dir)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    (out / "confusion").mkdir(parents=True, exist_ok=True)
    header, rows = best_results_table(records)
    written = [_write_csv(out / "best_results.csv", header, rows)]
    for r in records:
        written.append(_write_csv(
            out / "curves" / f"{r.experiment_id}.csv",
            ["k", "num_features", "uar"],
            [[p["k"], p["num_features"], p["uar"]] for p in r.curve],
        ))
        cm = ConfusionMatrix.from_dict(r.best["confusion"])
        written.append(cm.write_csv(out / "confusion" / f"{r.experiment_id}.csv"))
        if r.selector != "baseline":
            cm = ConfusionMatrix.from_dict(r.baseline["confusion"])
            written.append(cm.write_csv(out / "confusion" / f"{r.experiment_id}_baseline.csv"))
    return written
