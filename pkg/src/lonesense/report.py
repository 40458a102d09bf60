"""Write the report bundle: metric tables, plot-ready data, RFE traces, summary."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .core import N_ITEMS
from .evaluation import MetricsReport, change_rate, check_bias_bound, fmt_change, fmt_metric
from .features.catalog import FeatureCatalog
from .rfe import RfeTrace, best_features, write_best_features

MODES = ("zero_shot", "one_shot")


@dataclass
class ReportBundle:
    root: Path
    files: list[Path] = field(default_factory=list)


def _writer(path: Path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def table1_rows(metrics: MetricsReport) -> list[list[str]]:
    rows = []
    for s in metrics.sensors:
        zero, one = s.modes.get("zero_shot"), s.modes.get("one_shot")
        change = s.change()
        rows.append(
            [
                s.sensor.value,
                fmt_metric(zero.mae if zero else None),
                fmt_metric(zero.mbe if zero else None),
                fmt_metric(one.mae if one else None),
                fmt_metric(one.mbe if one else None),
                fmt_change(change["mae_pct"]),
                fmt_change(change["mbe_pct"]),
            ]
        )
    return rows


TABLE1_HEADER = [
    "sensor",
    "zero_shot_mae",
    "zero_shot_mbe",
    "one_shot_mae",
    "one_shot_mbe",
    "mae_change",
    "mbe_change",
]


def write_table1(path: Path, metrics: MetricsReport) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(TABLE1_HEADER)
        w.writerows(table1_rows(metrics))


def _write_llm_tables(root: Path, metrics: MetricsReport, files: list[Path]) -> None:
    path = root / "table1.csv"
    write_table1(path, metrics)
    files.append(path)

    sensors = [s.sensor for s in metrics.sensors]
    for mode in MODES:
        grid = metrics.item_grid.get(mode)
        if not grid:
            continue
        path = root / f"item_mae_{mode}.csv"
        fh, w = _writer(path)
        with fh:
            w.writerow(["item", *(s.value for s in sensors)])
            for k in range(1, N_ITEMS + 1):
                w.writerow([k, *(fmt_metric(grid[s][k]) if s in grid else "" for s in sensors)])
        files.append(path)
    if all(m in metrics.item_grid for m in MODES):
        zero, one = metrics.item_grid["zero_shot"], metrics.item_grid["one_shot"]
        path = root / "item_mae_change.csv"
        fh, w = _writer(path)
        with fh:
            w.writerow(["item", *(s.value for s in sensors)])
            for k in range(1, N_ITEMS + 1):
                cells = []
                for s in sensors:
                    ok = s in zero and s in one
                    cells.append(fmt_change(change_rate(zero[s][k], one[s][k])) if ok else "")
                w.writerow([k, *cells])
        files.append(path)

    path = root / "participant_errors.csv"
    fh, w = _writer(path)
    with fh:
        w.writerow(["sensor", "mode", "participant_id", "true_total", "predicted_total", "abs_error"])
        for e in sorted(metrics.participant_errors, key=lambda e: (e.sensor.value, e.mode, e.participant_id)):
            w.writerow([e.sensor.value, e.mode, e.participant_id, e.true_total, e.predicted_total, e.abs_error])
    files.append(path)


def _slug(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in label) or "rfe"


def _write_rfe(root: Path, trace: RfeTrace, catalog: Optional[FeatureCatalog], files: list[Path]) -> dict:
    slug = _slug(trace.label)
    for s in trace.steps:
        check_bias_bound(s.cv_mae, s.cv_mbe, f"(RFE {trace.label} step {s.step})")
    trace_path, ranking_path = root / f"rfe_trace_{slug}.csv", root / f"rfe_ranking_{slug}.csv"
    trace.write(trace_path, ranking_path)
    best = trace.best()
    listing = best_features(best.remaining, catalog)
    best_path = root / f"best_features_{slug}.csv"
    write_best_features(best_path, listing)
    files.extend([trace_path, ranking_path, best_path])
    return {
        "label": trace.label,
        "target": trace.target,
        "best_cv_mae": best.cv_mae,
        "best_cv_mbe": best.cv_mbe,
        "best_remaining": len(best.remaining),
        "best_features": [
            {"number": r.number, "sensor": r.sensor, "feature": r.feature, "day": r.day} for r in listing
        ],
        "metadata": trace.metadata,
    }


def _summary(metrics: Optional[MetricsReport], rfe: list[dict]) -> str:
    out = ["# Loneliness prediction report", ""]
    if rfe:
        out += ["## Generalized models (random forest + RFE)", ""]
        for r in rfe:
            out.append(
                f"### {r['label'] or 'rfe'} (target: {r['target']})"
            )
            out.append("")
            out.append(
                f"Minimum CV MAE {r['best_cv_mae']:.2f} (MBE {r['best_cv_mbe']:.2f}) "
                f"with {r['best_remaining']} remaining features."
            )
            out.append("")
            out += ["| Number | Sensor | Feature |", "|---|---|---|"]
            for f in r["best_features"]:
                label = f"{f['feature']} (Day {f['day']})" if f["day"] is not None else f["feature"]
                out.append(f"| {f['number']} | {f['sensor']} | {label} |")
            out.append("")
    if metrics is not None and not metrics.empty:
        out += ["## Personalized LLM inference (ULS-8 totals)", ""]
        out.append(
            "Totals use reverse-coded items 3 and 6."
            if metrics.reverse_coded
            else "Totals are raw sums of predicted item scores (no reverse coding)."
        )
        out.append("")
        out += [
            "| Sensor | Zero-shot MAE | Zero-shot MBE | One-shot MAE | One-shot MBE | MAE change | MBE change |",
            "|---|---|---|---|---|---|---|",
        ]
        for row in table1_rows(metrics):
            out.append("| " + " | ".join(row) + " |")
        out.append("")
        excluded = sum(metrics.excluded.values())
        out.append(f"Participants evaluated: {metrics.n_participants}. Invalid predictions excluded: {excluded}.")
        out.append("")
    return "\n".join(out)


def emit_report(
    metrics: Optional[MetricsReport],
    traces: Sequence[RfeTrace],
    out_dir: Union[str, Path],
    catalog: Optional[FeatureCatalog] = None,
    extra: Optional[dict] = None,
) -> ReportBundle:
    """Write every report artifact under ``out_dir``; sections without data are omitted."""
    if (metrics is None or metrics.empty) and not traces:
        raise ValueError("nothing to report: no LLM metrics and no RFE traces")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(root)
    if metrics is not None and not metrics.empty:
        for pair in metrics.pairs():
            check_bias_bound(pair.mae, pair.mbe)
        _write_llm_tables(root, metrics, bundle.files)
    rfe = [_write_rfe(root, t, catalog, bundle.files) for t in sorted(traces, key=lambda t: t.label)]

    doc = {
        "llm": metrics.to_dict() if metrics is not None and not metrics.empty else None,
        "rfe": rfe,
    }
    if extra:
        doc.update(extra)
    path = root / "metrics.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    bundle.files.append(path)
    path = root / "summary.md"
    path.write_text(_summary(metrics, rfe), encoding="utf-8")
    bundle.files.append(path)
    return bundle
