"""Per-sensor daily feature extractors.

Each extractor is a pure function of one participant-day's time-ordered events
and returns a ``FeatureMap``. Values that cannot be computed (no unlock on the
day, a single keystroke, ...) are encoded as 0 and listed in
``FeatureMap.undefined``; a sensor with no usable data for the day sets
``FeatureMap.missing``.
"""

from __future__ import annotations

import datetime as dt
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from ..core import (
    AppPayload,
    CallPayload,
    LocationPayload,
    MessagePayload,
    SensorEvent,
)
from ..ingestion import day_bounds, localize
from .catalog import (
    DEFAULT_APP_CATEGORIES,
    DEFAULT_CATEGORY_MAP,
    resolve_category,
)
from .location import Fix, cluster_stays, detect_stays, haversine


@dataclass(frozen=True)
class Day:
    """A local calendar day and its epoch-ms span [start_ms, end_ms)."""

    date: dt.date
    start_ms: int
    end_ms: int
    zone: str = "UTC"

    @classmethod
    def of(cls, date: dt.date, zone: str = "UTC") -> "Day":
        start, end = day_bounds(date, zone)
        return cls(date, start, end, zone)


@dataclass(frozen=True)
class ExtractionParams:
    stay_radius_m: float = 100.0
    min_stay_s: float = 600.0
    moving_speed_threshold: float = 1.0 / 3.6  # m/s, i.e. 1 km/h
    session_gap_s: float = 5.0
    app_categories: tuple[str, ...] = DEFAULT_APP_CATEGORIES
    category_map: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_CATEGORY_MAP))

    def to_dict(self) -> dict:
        return {
            "stay_radius_m": self.stay_radius_m,
            "min_stay_s": self.min_stay_s,
            "moving_speed_threshold": self.moving_speed_threshold,
            "session_gap_s": self.session_gap_s,
            "app_categories": list(self.app_categories),
            "category_map": dict(sorted(self.category_map.items())),
        }


@dataclass(frozen=True)
class FeatureMap:
    values: dict[str, float]
    missing: bool = False
    undefined: frozenset[str] = frozenset()


def _pstd(xs: Sequence[float]) -> float:
    if len(xs) < 2:
        return 0.0
    mean = sum(xs) / len(xs)
    return math.sqrt(sum((x - mean) ** 2 for x in xs) / len(xs))


def _zeros(names: Sequence[str], missing: bool = True) -> FeatureMap:
    return FeatureMap({n: 0.0 for n in names}, missing=missing, undefined=frozenset(names))


# --- screen ---------------------------------------------------------------

SCREEN_FEATURES = (
    "unlock_episode_count",
    "unlock_duration_total",
    "unlock_duration_avg",
    "unlock_duration_min",
    "unlock_duration_max",
    "unlock_duration_std",
    "first_unlock_after_midnight",
    "last_unlock_time",
    "time_between_unlocks_avg",
    "time_between_unlocks_max",
)


def unlock_episodes(events: Sequence[SensorEvent], day: Day) -> list[tuple[int, int]]:
    """(start_ms, end_ms) spans from an unlock to the next lock/off.

    An unlock while already unlocked is ignored; an episode still open at the
    end of the day is truncated at midnight.
    """
    episodes: list[tuple[int, int]] = []
    opened: Optional[int] = None
    for e in events:
        tr = e.payload.transition  # type: ignore[union-attr]
        if tr == "unlock":
            if opened is None:
                opened = max(e.timestamp, day.start_ms)
        elif tr in ("lock", "off") and opened is not None:
            episodes.append((opened, min(e.timestamp, day.end_ms)))
            opened = None
    if opened is not None:
        episodes.append((opened, day.end_ms))
    return episodes


def extract_screen(events: Sequence[SensorEvent], day: Day) -> FeatureMap:
    if not events:
        return _zeros(SCREEN_FEATURES)
    episodes = unlock_episodes(events, day)
    if not episodes:
        # lock/on/off traffic only: no unlock to anchor the day
        return _zeros(SCREEN_FEATURES)
    durations = [(b - a) / 1000.0 for a, b in episodes]
    gaps = [(episodes[k + 1][0] - episodes[k][1]) / 1000.0 for k in range(len(episodes) - 1)]
    undefined = set()
    if not gaps:
        undefined.update({"time_between_unlocks_avg", "time_between_unlocks_max"})
    values = {
        "unlock_episode_count": float(len(episodes)),
        "unlock_duration_total": sum(durations),
        "unlock_duration_avg": sum(durations) / len(durations),
        "unlock_duration_min": min(durations),
        "unlock_duration_max": max(durations),
        "unlock_duration_std": _pstd(durations),
        "first_unlock_after_midnight": localize(episodes[0][0], day.zone)[1],
        "last_unlock_time": localize(episodes[-1][0], day.zone)[1],
        "time_between_unlocks_avg": sum(gaps) / len(gaps) if gaps else 0.0,
        "time_between_unlocks_max": max(gaps) if gaps else 0.0,
    }
    return FeatureMap(values, False, frozenset(undefined))


# --- locations ------------------------------------------------------------

LOCATION_FEATURES = (
    "average_speed",
    "max_speed",
    "moving_time",
    "static_time",
    "moving_to_static_ratio",
    "total_travel_distance",
    "radius_of_gyration",
    "distinct_location_clusters",
    "time_at_top_cluster",
    "stay_length_avg",
    "stay_length_std",
    "location_entropy",
)


def extract_locations(
    events: Sequence[SensorEvent],
    day: Day,
    params: ExtractionParams = ExtractionParams(),
) -> FeatureMap:
    if len(events) < 2:
        return _zeros(LOCATION_FEATURES)
    fixes = []
    for e in events:
        p: LocationPayload = e.payload  # type: ignore[assignment]
        fixes.append(Fix((e.timestamp - day.start_ms) / 1000.0, p.latitude, p.longitude, p.speed))

    moving_time = static_time = distance = moving_weighted = 0.0
    max_speed = 0.0
    for a, b in zip(fixes, fixes[1:]):
        d = haversine(a.lat, a.lon, b.lat, b.lon)
        distance += d
        dt_s = b.t - a.t
        if a.speed is not None:
            speed = a.speed
        elif dt_s > 0:
            speed = d / dt_s
        else:
            speed = 0.0
        max_speed = max(max_speed, speed)
        if speed > params.moving_speed_threshold:
            moving_time += dt_s
            moving_weighted += speed * dt_s
        else:
            static_time += dt_s

    undefined = set()
    if static_time > 0:
        ratio = moving_time / static_time
    else:
        # no stationary time: moving seconds over a 1 s denominator
        ratio = moving_time
        undefined.add("moving_to_static_ratio")

    clat = sum(f.lat for f in fixes) / len(fixes)
    clon = sum(f.lon for f in fixes) / len(fixes)
    gyration = math.sqrt(sum(haversine(f.lat, f.lon, clat, clon) ** 2 for f in fixes) / len(fixes))

    stays = detect_stays(fixes, params.stay_radius_m, params.min_stay_s)
    clusters = cluster_stays(fixes, stays, params.stay_radius_m)
    lengths = [c.duration for c in clusters]
    total_stay = sum(lengths)
    entropy = 0.0
    if total_stay > 0:
        for length in lengths:
            if length > 0:
                p = length / total_stay
                entropy -= p * math.log(p)
    if not clusters:
        undefined.update({"time_at_top_cluster", "stay_length_avg", "stay_length_std"})

    values = {
        "average_speed": moving_weighted / moving_time if moving_time > 0 else 0.0,
        "max_speed": max_speed,
        "moving_time": moving_time,
        "static_time": static_time,
        "moving_to_static_ratio": ratio,
        "total_travel_distance": distance,
        "radius_of_gyration": gyration,
        "distinct_location_clusters": float(len(clusters)),
        "time_at_top_cluster": max(lengths) if lengths else 0.0,
        "stay_length_avg": total_stay / len(lengths) if lengths else 0.0,
        "stay_length_std": _pstd(lengths),
        "location_entropy": entropy,
    }
    return FeatureMap(values, False, frozenset(undefined))


# --- battery --------------------------------------------------------------

BATTERY_FEATURES = (
    "charge_episode_count",
    "charge_duration_total",
    "charge_duration_avg",
    "discharge_episode_count",
    "discharge_duration_total",
    "discharge_duration_avg",
    "battery_level_min",
    "battery_level_max",
)


def battery_episodes(events: Sequence[SensorEvent], day: Day) -> list[tuple[bool, int, int]]:
    """Maximal runs of constant charging state as (charging, start_ms, end_ms).

    A run starts at its first event and lasts until the next state change or
    the end of the day.
    """
    starts: list[tuple[bool, int]] = []
    for e in events:
        charging = e.payload.charging  # type: ignore[union-attr]
        if not starts or starts[-1][0] != charging:
            starts.append((charging, max(e.timestamp, day.start_ms)))
    bounds = [s for _, s in starts[1:]] + [day.end_ms]
    return [(c, s, end) for (c, s), end in zip(starts, bounds)]


def extract_battery(events: Sequence[SensorEvent], day: Day) -> FeatureMap:
    if not events:
        return _zeros(BATTERY_FEATURES)
    episodes = battery_episodes(events, day)
    charge = [(b - a) / 1000.0 for c, a, b in episodes if c]
    discharge = [(b - a) / 1000.0 for c, a, b in episodes if not c]
    levels = [e.payload.level for e in events]  # type: ignore[union-attr]
    undefined = set()
    if not charge:
        undefined.add("charge_duration_avg")
    if not discharge:
        undefined.add("discharge_duration_avg")
    values = {
        "charge_episode_count": float(len(charge)),
        "charge_duration_total": sum(charge),
        "charge_duration_avg": sum(charge) / len(charge) if charge else 0.0,
        "discharge_episode_count": float(len(discharge)),
        "discharge_duration_total": sum(discharge),
        "discharge_duration_avg": sum(discharge) / len(discharge) if discharge else 0.0,
        "battery_level_min": min(levels),
        "battery_level_max": max(levels),
    }
    return FeatureMap(values, False, frozenset(undefined))


# --- keyboard -------------------------------------------------------------

KEYBOARD_FEATURES = (
    "key_press_count",
    "text_length_net_change",
    "text_length_abs_change",
    "typing_session_count",
    "typing_session_length_avg",
    "typing_session_length_max",
    "inter_key_delay_avg",
)


def extract_keyboard(
    events: Sequence[SensorEvent], day: Day, session_gap_s: float = 5.0
) -> FeatureMap:
    if not events:
        return _zeros(KEYBOARD_FEATURES)
    gap_ms = session_gap_s * 1000.0
    sessions: list[list[int]] = [[events[0].timestamp]]
    delays: list[int] = []
    for prev, cur in zip(events, events[1:]):
        gap = cur.timestamp - prev.timestamp
        if gap > gap_ms:
            sessions.append([cur.timestamp])
        else:
            sessions[-1].append(cur.timestamp)
            delays.append(gap)
    lengths = [(s[-1] - s[0]) / 1000.0 for s in sessions]
    deltas = [e.payload.text_delta for e in events]  # type: ignore[union-attr]
    values = {
        "key_press_count": float(len(events)),
        "text_length_net_change": float(sum(deltas)),
        "text_length_abs_change": float(sum(abs(d) for d in deltas)),
        "typing_session_count": float(len(sessions)),
        "typing_session_length_avg": sum(lengths) / len(lengths),
        "typing_session_length_max": max(lengths),
        "inter_key_delay_avg": sum(delays) / len(delays) if delays else 0.0,
    }
    undefined = frozenset() if delays else frozenset({"inter_key_delay_avg"})
    return FeatureMap(values, False, undefined)


# --- calls and messages ---------------------------------------------------

CALL_FEATURES = (
    "call_incoming_count",
    "call_outgoing_count",
    "call_missed_count",
    "call_incoming_duration",
    "call_outgoing_duration",
    "call_duration_total",
    "call_duration_avg",
    "call_duration_max",
    "call_distinct_contacts",
    "call_top_contact_count",
)


def extract_calls(events: Sequence[SensorEvent], day: Day) -> FeatureMap:
    if not events:
        return _zeros(CALL_FEATURES)
    counts = Counter()
    durations = Counter()
    contacts: Counter[str] = Counter()
    longest = 0.0
    for e in events:
        p: CallPayload = e.payload  # type: ignore[assignment]
        counts[p.direction] += 1
        durations[p.direction] += p.duration_s
        contacts[p.contact] += 1
        longest = max(longest, p.duration_s)
    connected = counts["incoming"] + counts["outgoing"]
    connected_time = durations["incoming"] + durations["outgoing"]
    values = {
        "call_incoming_count": float(counts["incoming"]),
        "call_outgoing_count": float(counts["outgoing"]),
        "call_missed_count": float(counts["missed"]),
        "call_incoming_duration": float(durations["incoming"]),
        "call_outgoing_duration": float(durations["outgoing"]),
        "call_duration_total": float(sum(durations.values())),
        "call_duration_avg": connected_time / connected if connected else 0.0,
        "call_duration_max": longest,
        "call_distinct_contacts": float(len(contacts)),
        "call_top_contact_count": float(max(contacts.values())),
    }
    undefined = frozenset() if connected else frozenset({"call_duration_avg"})
    return FeatureMap(values, False, undefined)


MESSAGE_FEATURES = (
    "message_sent_count",
    "message_received_count",
    "message_distinct_contacts",
    "message_top_contact_count",
    "message_top_contact_sent",
    "message_top_contact_received",
)


def extract_messages(events: Sequence[SensorEvent], day: Day) -> FeatureMap:
    if not events:
        return _zeros(MESSAGE_FEATURES)
    sent: Counter[str] = Counter()
    received: Counter[str] = Counter()
    for e in events:
        p: MessagePayload = e.payload  # type: ignore[assignment]
        (sent if p.direction == "sent" else received)[p.contact] += 1
    contacts = sorted(set(sent) | set(received))
    # most frequent contact; ties go to the lexicographically smallest token
    top = min(contacts, key=lambda c: (-(sent[c] + received[c]), c))
    values = {
        "message_sent_count": float(sum(sent.values())),
        "message_received_count": float(sum(received.values())),
        "message_distinct_contacts": float(len(contacts)),
        "message_top_contact_count": float(sent[top] + received[top]),
        "message_top_contact_sent": float(sent[top]),
        "message_top_contact_received": float(received[top]),
    }
    return FeatureMap(values)


# --- applications ---------------------------------------------------------


def _covered_ms(intervals: Sequence[tuple[int, int]]) -> int:
    """Length of the union of half-open intervals."""
    total = 0
    cur_a = cur_b = None
    for a, b in sorted(intervals):
        if cur_b is None or a > cur_b:
            if cur_b is not None:
                total += cur_b - cur_a
            cur_a, cur_b = a, b
        else:
            cur_b = max(cur_b, b)
    if cur_b is not None:
        total += cur_b - cur_a
    return total


def app_feature_names(categories: Sequence[str]) -> tuple[str, ...]:
    names = ["app_usage_duration_total", "app_usage_episode_count", "app_usage_episode_avg"]
    for cat in categories:
        names += [f"app_{cat}_duration", f"app_{cat}_episode_count"]
    return tuple(names)


def extract_applications(
    events: Sequence[SensorEvent],
    day: Day,
    category_map: Mapping[str, str] = DEFAULT_CATEGORY_MAP,
    categories: Sequence[str] = DEFAULT_APP_CATEGORIES,
) -> FeatureMap:
    names = app_feature_names(categories)
    if not events:
        return _zeros(names)
    values = {n: 0.0 for n in names}
    spans: dict[str, list[tuple[int, int]]] = {}
    clipped = 0.0
    for e in events:
        p: AppPayload = e.payload  # type: ignore[assignment]
        start = max(p.start_ms, day.start_ms)
        end = min(p.end_ms, day.end_ms)
        cat = resolve_category(p.package, category_map, categories)
        values[f"app_{cat}_episode_count"] += 1.0
        clipped += max(0, end - start) / 1000.0
        if end > start:
            spans.setdefault(cat, []).append((start, end))
    # overlapping episodes count once: durations are covered time
    for cat, iv in spans.items():
        values[f"app_{cat}_duration"] = _covered_ms(iv) / 1000.0
    values["app_usage_duration_total"] = _covered_ms([x for iv in spans.values() for x in iv]) / 1000.0
    values["app_usage_episode_count"] = float(len(events))
    values["app_usage_episode_avg"] = clipped / len(events)
    return FeatureMap(values)
