"""Assemble per-sensor extractor output into catalog-complete daily rows."""

from __future__ import annotations

import csv
import datetime as dt
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from ..core import SensorEvent, SensorKind, ValidationError
from ..ingestion import localize
from .catalog import FeatureCatalog
from .extractors import (
    Day,
    ExtractionParams,
    FeatureMap,
    extract_applications,
    extract_battery,
    extract_calls,
    extract_keyboard,
    extract_locations,
    extract_messages,
    extract_screen,
)


@dataclass(frozen=True)
class DailyFeatureRow:
    participant_id: str
    date: dt.date
    values: dict[str, float]
    has_any_data: dict[SensorKind, bool]
    undefined: frozenset[str] = field(default=frozenset())

    @property
    def covered(self) -> bool:
        return any(self.has_any_data.values())


def empty_row(participant_id: str, date: dt.date, catalog: FeatureCatalog) -> DailyFeatureRow:
    return DailyFeatureRow(
        participant_id,
        date,
        {n: 0.0 for n in catalog.names},
        {k: False for k in SensorKind},
        frozenset(catalog.names),
    )


def run_extractor(
    kind: SensorKind, events: Sequence[SensorEvent], day: Day, params: ExtractionParams
) -> FeatureMap:
    if kind is SensorKind.SCREEN:
        return extract_screen(events, day)
    if kind is SensorKind.LOCATIONS:
        return extract_locations(events, day, params)
    if kind is SensorKind.BATTERY:
        return extract_battery(events, day)
    if kind is SensorKind.KEYBOARD:
        return extract_keyboard(events, day, params.session_gap_s)
    if kind is SensorKind.CALLS:
        return extract_calls(events, day)
    if kind is SensorKind.MESSAGES:
        return extract_messages(events, day)
    return extract_applications(events, day, params.category_map, params.app_categories)


def extract_day(
    participant_id: str,
    day: Day,
    events: Mapping[SensorKind, Sequence[SensorEvent]],
    catalog: FeatureCatalog,
    params: ExtractionParams = ExtractionParams(),
) -> DailyFeatureRow:
    values: dict[str, float] = {}
    present: dict[SensorKind, bool] = {}
    undefined: set[str] = set()
    for kind in SensorKind:
        fm = run_extractor(kind, events.get(kind, ()), day, params)
        values.update(fm.values)
        present[kind] = not fm.missing
        undefined |= fm.undefined
    missing_names = [n for n in catalog.names if n not in values]
    if missing_names:
        raise ValidationError(f"extractors did not produce catalog features: {missing_names}")
    ordered = {n: values[n] for n in catalog.names}
    return DailyFeatureRow(
        participant_id, day.date, ordered, present, frozenset(undefined & set(catalog.names))
    )


def group_by_day(
    events: Iterable[SensorEvent], zone: str
) -> dict[dt.date, dict[SensorKind, list[SensorEvent]]]:
    """Bucket a participant's events by local calendar day, preserving order."""
    out: dict[dt.date, dict[SensorKind, list[SensorEvent]]] = defaultdict(lambda: defaultdict(list))
    for e in events:
        day, _ = localize(e.timestamp, zone)
        out[day][e.kind].append(e)
    return out


def extract_participant(
    participant_id: str,
    events: Sequence[SensorEvent],
    zone: str,
    catalog: FeatureCatalog,
    params: ExtractionParams = ExtractionParams(),
) -> list[DailyFeatureRow]:
    ordered = sorted(events, key=lambda e: e.timestamp)
    buckets = group_by_day(ordered, zone)
    return [
        extract_day(participant_id, Day.of(d, zone), buckets[d], catalog, params)
        for d in sorted(buckets)
    ]


def _extract_job(args):
    return extract_participant(*args)


def extract_all(
    events: Sequence[SensorEvent],
    catalog: FeatureCatalog,
    params: ExtractionParams = ExtractionParams(),
    zones: Optional[Mapping[str, str]] = None,
    default_zone: str = "UTC",
    jobs: int = 1,
) -> list[DailyFeatureRow]:
    """Daily rows for every participant-day with events, sorted by (participant, date)."""
    by_pid: dict[str, list[SensorEvent]] = defaultdict(list)
    for e in events:
        by_pid[e.participant_id].append(e)
    work = [
        (pid, by_pid[pid], (zones or {}).get(pid, default_zone), catalog, params)
        for pid in sorted(by_pid)
    ]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_job, work))
    else:
        results = [_extract_job(w) for w in work]
    return [row for rows in results for row in rows]


# --- feature tables -------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def write_feature_tables(
    rows: Sequence[DailyFeatureRow],
    catalog: FeatureCatalog,
    values_path: Union[str, Path],
    flags_path: Union[str, Path],
) -> None:
    """Write the value table and the sibling per-sensor missing-flag table."""
    ordered = sorted(rows, key=lambda r: (r.participant_id, r.date))
    with open(values_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["participant_id", "date", *catalog.names])
        for r in ordered:
            w.writerow([r.participant_id, r.date.isoformat(), *(_num(r.values[n]) for n in catalog.names)])
    with open(flags_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["participant_id", "date", *(k.value for k in SensorKind)])
        for r in ordered:
            w.writerow(
                [r.participant_id, r.date.isoformat(), *(0 if r.has_any_data[k] else 1 for k in SensorKind)]
            )


def read_feature_tables(
    values_path: Union[str, Path], flags_path: Union[str, Path], catalog: FeatureCatalog
) -> list[DailyFeatureRow]:
    with open(values_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[2:] != catalog.names:
            raise ValidationError("feature table columns do not match the catalog")
        value_rows = [(r[0], r[1], [float(x) for x in r[2:]]) for r in reader if r]
    flags: dict[tuple[str, str], dict[SensorKind, bool]] = {}
    with open(flags_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        kinds = [SensorKind.parse(h) for h in header[2:]]
        for r in reader:
            if r:
                flags[(r[0], r[1])] = {k: r[2 + i] == "0" for i, k in enumerate(kinds)}
    out = []
    for pid, date, vals in value_rows:
        present = flags.get((pid, date))
        if present is None:
            raise ValidationError(f"no missing-flag row for {pid} {date}")
        out.append(
            DailyFeatureRow(pid, dt.date.fromisoformat(date), dict(zip(catalog.names, vals)), present)
        )
    return out
