"""Parse raw sensor logs into validated, time-ordered ``SensorEvent`` lists.

Canonical delimited layout, one file per sensor::

    participant_id,timestamp_ms,sensor,<sensor fields...>

with the per-sensor fields given by ``SENSOR_FIELDS``. The json-lines mirror
carries the same keys, one object per line.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, TextIO, Union
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from .core import (
    AppPayload,
    BatteryPayload,
    CallPayload,
    KeyboardPayload,
    LocationPayload,
    MessagePayload,
    Payload,
    ScreenPayload,
    SensorEvent,
    SensorKind,
    ValidationError,
)

BASE_FIELDS = ("participant_id", "timestamp_ms", "sensor")

SENSOR_FIELDS: dict[SensorKind, tuple[str, ...]] = {
    SensorKind.SCREEN: ("event",),
    SensorKind.LOCATIONS: ("latitude", "longitude", "speed"),
    SensorKind.BATTERY: ("level", "status"),
    SensorKind.KEYBOARD: ("text_delta",),
    SensorKind.CALLS: ("direction", "duration_s", "contact"),
    SensorKind.MESSAGES: ("direction", "contact"),
    SensorKind.APPLICATIONS: ("package", "start_ms", "end_ms"),
}


class IngestError(Exception):
    """Source-level failure: unreadable file, unknown sensor, bad header."""


@dataclass(frozen=True)
class LogSource:
    path: Union[str, Path, TextIO]
    kind: Union[SensorKind, str]
    format: str = "delimited"  # or "jsonl"
    timezone: str = "UTC"
    # per-participant zone overrides, normally read from the roster file
    zones: Optional[dict[str, str]] = None

    def zone_for(self, participant_id: str) -> str:
        if self.zones and participant_id in self.zones:
            return self.zones[participant_id]
        return self.timezone


@dataclass(frozen=True)
class Reject:
    row: int  # 1-based data row number (header excluded)
    reason: str
    detail: str = ""


@dataclass
class IngestReport:
    rows_read: int = 0
    events_emitted: int = 0
    rejects: list[Reject] = field(default_factory=list)
    # (participant_id, ISO date) -> count
    daily_counts: dict[tuple[str, str], int] = field(default_factory=dict)

    def reconciles(self) -> bool:
        return (
            self.rows_read == self.events_emitted + len(self.rejects)
            and sum(self.daily_counts.values()) == self.events_emitted
        )

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "events_emitted": self.events_emitted,
            "rejects": [
                {"row": r.row, "reason": r.reason, "detail": r.detail} for r in self.rejects
            ],
            "daily_counts": [
                {"participant_id": p, "date": d, "events": n}
                for (p, d), n in sorted(self.daily_counts.items())
            ],
        }


# --- time ---------------------------------------------------------------

_FIXED_OFFSET = re.compile(r"^(?:UTC|GMT)([+-])(\d{1,2})(?::?(\d{2}))?$")


@lru_cache(maxsize=None)
def get_zone(zone: str) -> dt.tzinfo:
    """Resolve an IANA zone id, or a fixed offset written ``UTC+10`` / ``UTC-03:30``."""
    m = _FIXED_OFFSET.match(zone)
    if m:
        sign = 1 if m.group(1) == "+" else -1
        hours, minutes = int(m.group(2)), int(m.group(3) or 0)
        if hours > 23 or minutes > 59:
            raise ValidationError(f"unknown time zone: {zone!r}")
        return dt.timezone(sign * dt.timedelta(hours=hours, minutes=minutes))
    try:
        return ZoneInfo(zone)
    except (ZoneInfoNotFoundError, ValueError) as exc:
        raise ValidationError(f"unknown time zone: {zone!r}") from exc


def localize(ts_ms: int, zone: str) -> tuple[dt.date, float]:
    """Map an epoch-ms UTC instant to (local date, wall-clock minutes after midnight)."""
    tz = get_zone(zone)
    local = dt.datetime.fromtimestamp(ts_ms / 1000.0, tz=dt.timezone.utc).astimezone(tz)
    minutes = local.hour * 60 + local.minute + (local.second + local.microsecond / 1e6) / 60.0
    return local.date(), minutes


def day_bounds(day: dt.date, zone: str) -> tuple[int, int]:
    """Epoch-ms span [start, end) of a local calendar day."""
    tz = get_zone(zone)

    def midnight(d: dt.date) -> int:
        local = dt.datetime(d.year, d.month, d.day, tzinfo=tz)
        return int(round(local.timestamp() * 1000))

    return midnight(day), midnight(day + dt.timedelta(days=1))


# --- parsing --------------------------------------------------------------


class _RowError(Exception):
    def __init__(self, reason: str, detail: str = "") -> None:
        super().__init__(reason)
        self.reason = reason
        self.detail = detail


def _as_int(value, name: str) -> int:
    if isinstance(value, bool):
        raise _RowError(name, f"not an integer: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value.is_integer():
            return int(value)
        raise _RowError(name, f"not an integer: {value!r}")
    try:
        return int(str(value).strip())
    except ValueError:
        raise _RowError(name, f"not an integer: {value!r}") from None


def _as_float(value, name: str) -> float:
    if isinstance(value, bool) or value is None:
        raise _RowError(name, f"not a number: {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise _RowError(name, f"not a number: {value!r}") from None
    if out != out or out in (float("inf"), float("-inf")):
        raise _RowError(name, f"not finite: {value!r}")
    return out


def _as_str(value, name: str) -> str:
    if value is None:
        raise _RowError(name, "missing")
    text = str(value).strip()
    if not text:
        raise _RowError(name, "empty")
    return text


def _build_payload(kind: SensorKind, rec: dict) -> Payload:
    if kind is SensorKind.SCREEN:
        return ScreenPayload(_as_str(rec.get("event"), "event").lower())
    if kind is SensorKind.LOCATIONS:
        speed_raw = rec.get("speed")
        speed = None if speed_raw in (None, "") else _as_float(speed_raw, "speed")
        return LocationPayload(
            _as_float(rec.get("latitude"), "latitude"),
            _as_float(rec.get("longitude"), "longitude"),
            speed,
        )
    if kind is SensorKind.BATTERY:
        return BatteryPayload(
            _as_float(rec.get("level"), "level"), _as_str(rec.get("status"), "status").lower()
        )
    if kind is SensorKind.KEYBOARD:
        return KeyboardPayload(_as_int(rec.get("text_delta"), "text_delta"))
    if kind is SensorKind.CALLS:
        return CallPayload(
            _as_str(rec.get("direction"), "direction").lower(),
            _as_float(rec.get("duration_s"), "duration_s"),
            _as_str(rec.get("contact"), "contact"),
        )
    if kind is SensorKind.MESSAGES:
        return MessagePayload(
            _as_str(rec.get("direction"), "direction").lower(),
            _as_str(rec.get("contact"), "contact"),
        )
    return AppPayload(
        _as_str(rec.get("package"), "package"),
        _as_int(rec.get("start_ms"), "start_ms"),
        _as_int(rec.get("end_ms"), "end_ms"),
    )


def _record_to_event(kind: SensorKind, rec: dict) -> SensorEvent:
    pid = _as_str(rec.get("participant_id"), "participant_id")
    ts = _as_int(rec.get("timestamp_ms"), "timestamp")
    if ts <= 0:
        raise _RowError("timestamp", f"not strictly positive: {ts}")
    sensor = rec.get("sensor")
    try:
        row_kind = SensorKind.parse(_as_str(sensor, "sensor"))
    except ValidationError:
        raise _RowError("sensor", f"unknown sensor {sensor!r}") from None
    if row_kind is not kind:
        raise _RowError("sensor", f"{row_kind} row in {kind} log")
    payload = _build_payload(kind, rec)
    try:
        return SensorEvent(pid, kind, ts, payload)
    except ValidationError as exc:
        raise _RowError("payload", str(exc)) from None


def _open(source: LogSource) -> tuple[TextIO, bool]:
    if hasattr(source.path, "read"):
        return source.path, False  # type: ignore[return-value]
    try:
        return open(source.path, newline="", encoding="utf-8"), True
    except OSError as exc:
        raise IngestError(f"cannot read {source.path}: {exc}") from exc


def _iter_delimited(fh: TextIO, kind: SensorKind) -> Iterator[tuple[int, Optional[dict]]]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("missing header row") from None
    expected = list(BASE_FIELDS + SENSOR_FIELDS[kind])
    header = [h.strip() for h in header]
    if header != expected:
        raise IngestError(f"header mismatch: expected {expected}, got {header}")
    n = 0
    for row in reader:
        if not row:
            continue
        n += 1
        if len(row) != len(expected):
            yield n, None
            continue
        yield n, dict(zip(expected, row))


def _iter_jsonl(fh: TextIO) -> Iterator[tuple[int, Optional[dict]]]:
    n = 0
    for line in fh:
        if not line.strip():
            continue
        n += 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            yield n, None
            continue
        yield n, obj if isinstance(obj, dict) else None


def parse_log(source: LogSource) -> tuple[list[SensorEvent], IngestReport]:
    """Parse one sensor log.

    Every data row either becomes an event or a ``Reject``; nothing is dropped
    silently. Events come back sorted by (participant, timestamp) with file
    order breaking ties.
    """
    kind = source.kind if isinstance(source.kind, SensorKind) else None
    if kind is None:
        try:
            kind = SensorKind.parse(str(source.kind))
        except ValidationError as exc:
            raise IngestError(str(exc)) from None
    if source.format not in ("delimited", "jsonl"):
        raise IngestError(f"unknown log format {source.format!r}")

    fh, owned = _open(source)
    report = IngestReport()
    events: list[SensorEvent] = []
    seen: set[SensorEvent] = set()
    try:
        rows = _iter_delimited(fh, kind) if source.format == "delimited" else _iter_jsonl(fh)
        for n, rec in rows:
            report.rows_read += 1
            if rec is None:
                report.rejects.append(Reject(n, "malformed"))
                continue
            try:
                event = _record_to_event(kind, rec)
            except _RowError as exc:
                report.rejects.append(Reject(n, exc.reason, exc.detail))
                continue
            if event in seen:
                report.rejects.append(Reject(n, "duplicate"))
                continue
            seen.add(event)
            events.append(event)
    except UnicodeDecodeError as exc:
        raise IngestError(f"cannot decode source: {exc}") from exc
    finally:
        if owned:
            fh.close()

    events.sort(key=lambda e: (e.participant_id, e.timestamp))
    for e in events:
        day, _ = localize(e.timestamp, source.zone_for(e.participant_id))
        key = (e.participant_id, day.isoformat())
        report.daily_counts[key] = report.daily_counts.get(key, 0) + 1
    report.events_emitted = len(events)
    return events, report


def merge_streams(streams: Sequence[Sequence[SensorEvent]]) -> list[SensorEvent]:
    """Merge per-file event lists by (participant, timestamp), file order breaking ties."""
    keyed = [
        (e.participant_id, e.timestamp, i, j, e)
        for i, stream in enumerate(streams)
        for j, e in enumerate(stream)
    ]
    keyed.sort(key=lambda t: t[:4])
    return [t[4] for t in keyed]


# --- writing --------------------------------------------------------------


def _payload_fields(event: SensorEvent) -> list[str]:
    p = event.payload
    if isinstance(p, ScreenPayload):
        return [p.transition]
    if isinstance(p, LocationPayload):
        return [repr(p.latitude), repr(p.longitude), "" if p.speed is None else repr(p.speed)]
    if isinstance(p, BatteryPayload):
        return [repr(p.level), p.status]
    if isinstance(p, KeyboardPayload):
        return [str(p.text_delta)]
    if isinstance(p, CallPayload):
        return [p.direction, repr(p.duration_s), p.contact]
    if isinstance(p, MessagePayload):
        return [p.direction, p.contact]
    return [p.package, str(p.start_ms), str(p.end_ms)]


def write_log(path: Union[str, Path], kind: SensorKind, events: Iterable[SensorEvent]) -> None:
    """Write events in the canonical delimited layout."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BASE_FIELDS + SENSOR_FIELDS[kind])
        for e in events:
            if e.kind is not kind:
                raise ValidationError(f"{e.kind} event written to {kind} log")
            writer.writerow([e.participant_id, str(e.timestamp), kind.value, *_payload_fields(e)])


def event_to_json(event: SensorEvent) -> dict:
    rec = {
        "participant_id": event.participant_id,
        "timestamp_ms": event.timestamp,
        "sensor": event.kind.value,
    }
    p = event.payload
    if isinstance(p, LocationPayload):
        rec.update(latitude=p.latitude, longitude=p.longitude, speed=p.speed)
    else:
        rec.update(zip(SENSOR_FIELDS[event.kind], _json_values(p)))
    return rec


def _json_values(p: Payload) -> list:
    if isinstance(p, ScreenPayload):
        return [p.transition]
    if isinstance(p, BatteryPayload):
        return [p.level, p.status]
    if isinstance(p, KeyboardPayload):
        return [p.text_delta]
    if isinstance(p, CallPayload):
        return [p.direction, p.duration_s, p.contact]
    if isinstance(p, MessagePayload):
        return [p.direction, p.contact]
    assert isinstance(p, AppPayload)
    return [p.package, p.start_ms, p.end_ms]


def write_jsonl(path: Union[str, Path], events: Iterable[SensorEvent]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(json.dumps(event_to_json(e), sort_keys=True) + "\n")


def read_events(path: Union[str, Path]) -> list[SensorEvent]:
    """Read a mixed-sensor canonical event file written by ``write_jsonl``."""
    events = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                events.append(_record_to_event(SensorKind.parse(rec["sensor"]), rec))
            except (json.JSONDecodeError, KeyError, ValidationError, _RowError) as exc:
                raise IngestError(f"{path}:{n}: bad canonical event: {exc}") from None
    return events


def read_roster(path: Union[str, Path]) -> dict[str, str]:
    """Read ``participant_id,timezone`` rows; zones are validated eagerly."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IngestError(f"cannot read roster {path}: {exc}") from exc
    roster: dict[str, str] = {}
    for row in rows:
        pid = (row.get("participant_id") or "").strip()
        zone = (row.get("timezone") or "").strip()
        if not pid or not zone:
            raise IngestError(f"roster row missing participant_id or timezone: {row}")
        get_zone(zone)
        roster[pid] = zone
    return roster


def write_roster(path: Union[str, Path], roster: dict[str, str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["participant_id", "timezone"])
        for pid in sorted(roster):
            writer.writerow([pid, roster[pid]])


def find_logs(directory: Union[str, Path]) -> dict[SensorKind, tuple[Path, str]]:
    """Locate ``<Sensor>.csv`` / ``<Sensor>.jsonl`` files in a directory."""
    found: dict[SensorKind, tuple[Path, str]] = {}
    for kind in SensorKind:
        for suffix, fmt in ((".csv", "delimited"), (".jsonl", "jsonl")):
            path = Path(directory) / f"{kind.value.lower()}{suffix}"
            if path.exists():
                found[kind] = (path, fmt)
                break
    return found


def parse_text(text: str, kind: SensorKind, fmt: str = "delimited", timezone: str = "UTC"):
    """Convenience wrapper for in-memory logs."""
    return parse_log(LogSource(io.StringIO(text), kind, fmt, timezone))


__all__ = [
    "IngestError",
    "IngestReport",
    "LogSource",
    "Reject",
    "SENSOR_FIELDS",
    "day_bounds",
    "find_logs",
    "get_zone",
    "localize",
    "merge_streams",
    "parse_log",
    "parse_text",
    "read_roster",
    "write_jsonl",
    "write_log",
    "write_roster",
]
