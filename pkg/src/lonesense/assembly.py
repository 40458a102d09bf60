"""14-day pre-assessment windows, the coverage filter, and flat model matrices."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import (
    N_ITEMS,
    AssessmentPoint,
    SensorKind,
    Stage,
    Uls8Record,
    ValidationError,
    index_assessments,
)
from .features.catalog import FeatureCatalog
from .features.daily import DailyFeatureRow, empty_row

WINDOW_DAYS = 14
MIN_COVERAGE_DAYS = 7


@dataclass(frozen=True)
class FeatureWindow:
    participant_id: str
    stage: Stage
    assessment: AssessmentPoint
    days: tuple[DailyFeatureRow, ...]  # Day 1 (oldest) .. Day 14 (day before assessment)
    coverage_days: int

    def week(self, k: int) -> tuple[DailyFeatureRow, ...]:
        """Days 1-7 for ``k == 1``, days 8-14 for ``k == 2``."""
        if k not in (1, 2):
            raise ValueError("week must be 1 or 2")
        return self.days[(k - 1) * 7 : k * 7]


@dataclass(frozen=True)
class Exclusion:
    participant_id: str
    stage: Stage
    reason: str
    coverage_days: int = 0


def window_dates(assessment_date: dt.date) -> list[dt.date]:
    """Calendar dates of Day 1..Day 14; Day k = assessment_date - (15 - k) days."""
    return [assessment_date - dt.timedelta(days=WINDOW_DAYS + 1 - k) for k in range(1, WINDOW_DAYS + 1)]


def build_window(
    rows: Iterable[DailyFeatureRow],
    assessment: AssessmentPoint,
    catalog: FeatureCatalog,
    min_coverage: int = MIN_COVERAGE_DAYS,
    coverage_sensors: Optional[Sequence[SensorKind]] = None,
) -> Union[FeatureWindow, Exclusion]:
    """Build the window for one assessment, or an ``Exclusion`` when fewer than
    ``min_coverage`` days carry data. Absent days become zero rows flagged missing."""
    if assessment.assessment_date is None:
        raise ValidationError(
            f"no assessment date for {assessment.participant_id} at {assessment.stage}"
        )
    by_date = {r.date: r for r in rows if r.participant_id == assessment.participant_id}
    days = []
    coverage = 0
    sensors = tuple(coverage_sensors) if coverage_sensors else tuple(SensorKind)
    for d in window_dates(assessment.assessment_date):
        row = by_date.get(d) or empty_row(assessment.participant_id, d, catalog)
        if any(row.has_any_data.get(k, False) for k in sensors):
            coverage += 1
        days.append(row)
    if coverage < min_coverage:
        return Exclusion(assessment.participant_id, assessment.stage, "coverage", coverage)
    return FeatureWindow(assessment.participant_id, assessment.stage, assessment, tuple(days), coverage)


def build_windows(
    rows: Sequence[DailyFeatureRow],
    assessments: Sequence[AssessmentPoint],
    catalog: FeatureCatalog,
    min_coverage: int = MIN_COVERAGE_DAYS,
    coverage_sensors: Optional[Sequence[SensorKind]] = None,
) -> tuple[list[FeatureWindow], list[Exclusion]]:
    by_pid: dict[str, list[DailyFeatureRow]] = {}
    for r in rows:
        by_pid.setdefault(r.participant_id, []).append(r)
    windows: list[FeatureWindow] = []
    exclusions: list[Exclusion] = []
    keyed = index_assessments(assessments)
    for key in sorted(keyed, key=lambda k: (k[0], k[1].value)):
        a = keyed[key]
        out = build_window(by_pid.get(a.participant_id, []), a, catalog, min_coverage, coverage_sensors)
        (windows if isinstance(out, FeatureWindow) else exclusions).append(out)
    return windows, exclusions


# --- flat matrices --------------------------------------------------------


def column_name(feature: str, day: int) -> str:
    return f"{feature}__day{day}"


def parse_column(name: str) -> tuple[str, int]:
    feature, sep, day = name.rpartition("__day")
    if not sep or not day.isdigit():
        raise ValueError(f"not a day column: {name!r}")
    return feature, int(day)


@dataclass(frozen=True)
class FlatDataset:
    columns: tuple[str, ...]
    X: np.ndarray  # rows x (features * 14)
    y: np.ndarray
    keys: tuple[tuple[str, str], ...]  # (participant_id, stage) per row
    target: str = "total"

    def __post_init__(self) -> None:
        if self.X.shape != (len(self.keys), len(self.columns)):
            raise ValidationError("FlatDataset shape does not match its keys/columns")
        if self.y.shape != (len(self.keys),):
            raise ValidationError("FlatDataset target length does not match rows")

    def select(self, columns: Sequence[str]) -> "FlatDataset":
        idx = [self.columns.index(c) for c in columns]
        return FlatDataset(tuple(columns), self.X[:, idx], self.y, self.keys, self.target)

    def write_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["participant_id", "stage", "target", *self.columns])
            for (pid, stage), yi, xi in zip(self.keys, self.y, self.X):
                w.writerow([pid, stage, repr(float(yi)), *(repr(float(v)) for v in xi)])

    @classmethod
    def read_csv(cls, path: Union[str, Path], target: str = "total") -> "FlatDataset":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [r for r in reader if r]
        columns = tuple(header[3:])
        keys = tuple((r[0], r[1]) for r in rows)
        y = np.array([float(r[2]) for r in rows], dtype=float)
        X = np.array([[float(v) for v in r[3:]] for r in rows], dtype=float).reshape(len(rows), len(columns))
        return cls(columns, X, y, keys, target)


def target_value(record: Uls8Record, target: Union[str, int]) -> float:
    """``"total"`` gives the scored total; an item number 1..8 gives that raw response."""
    if target == "total":
        return float(record.total)
    k = int(target)
    if not 1 <= k <= N_ITEMS:
        raise ValidationError(f"target item {target!r} outside 1..{N_ITEMS}")
    return float(record.item_scores[k - 1])


def flatten(
    windows: Sequence[FeatureWindow],
    catalog: FeatureCatalog,
    target: Union[str, int] = "total",
) -> FlatDataset:
    """Catalog order outer, day index inner: ``f1__day1 .. f1__day14, f2__day1 ...``."""
    names = catalog.names
    columns = tuple(column_name(f, k) for f in names for k in range(1, WINDOW_DAYS + 1))
    X = np.zeros((len(windows), len(columns)), dtype=float)
    for i, w in enumerate(windows):
        if len(w.days) != WINDOW_DAYS:
            raise ValidationError("window does not hold 14 days")
        for j, f in enumerate(names):
            X[i, j * WINDOW_DAYS : (j + 1) * WINDOW_DAYS] = [day.values[f] for day in w.days]
    y = np.array([target_value(w.assessment.record, target) for w in windows], dtype=float)
    keys = tuple((w.participant_id, w.stage.value) for w in windows)
    return FlatDataset(columns, X, y, keys, str(target))


# --- assessment and exclusion files --------------------------------------

ASSESSMENT_HEADER = ["participant_id", "stage", "assessment_date"] + [
    f"item{i}" for i in range(1, N_ITEMS + 1)
]


def write_assessments(path: Union[str, Path], points: Sequence[AssessmentPoint]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ASSESSMENT_HEADER)
        for p in sorted(points, key=lambda p: (p.participant_id, p.stage.value)):
            date = p.assessment_date.isoformat() if p.assessment_date else ""
            w.writerow([p.participant_id, p.stage.value, date, *p.record.item_scores])


def read_assessments(path: Union[str, Path]) -> list[AssessmentPoint]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ASSESSMENT_HEADER:
            raise ValidationError(f"assessment header mismatch: {reader.fieldnames}")
        points = []
        for row in reader:
            date = row["assessment_date"].strip()
            items = tuple(int(row[f"item{i}"]) for i in range(1, N_ITEMS + 1))
            points.append(
                AssessmentPoint(
                    row["participant_id"],
                    Stage.parse(row["stage"]),
                    dt.date.fromisoformat(date) if date else None,
                    Uls8Record(items),
                )
            )
    index_assessments(points)
    return points


def write_exclusions(path: Union[str, Path], exclusions: Sequence[Exclusion]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["participant_id", "stage", "reason"])
        for e in exclusions:
            w.writerow([e.participant_id, e.stage.value, e.reason])
