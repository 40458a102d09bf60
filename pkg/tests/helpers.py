"""Shared glue between extractors, generators and oracles."""

from __future__ import annotations

import math

import generators as gen
import oracles

from lonesense.core import SensorKind
from lonesense.features import (
    DEFAULT_APP_CATEGORIES,
    DEFAULT_CATEGORY_MAP,
    ExtractionParams,
    extract_applications,
    extract_battery,
    extract_calls,
    extract_keyboard,
    extract_locations,
    extract_messages,
    extract_screen,
)

PARAMS = ExtractionParams()
INTEGER_MARKERS = ("count", "distinct")


def is_integer_feature(name: str) -> bool:
    return any(m in name for m in INTEGER_MARKERS)


def mismatches(got: dict, want: dict) -> list[str]:
    """Integer features must match exactly, real ones within 1e-9."""
    bad = []
    if set(got) != set(want):
        return [f"key sets differ: {sorted(set(got) ^ set(want))}"]
    for k, w in want.items():
        g = got[k]
        ok = g == w if is_integer_feature(k) else math.isclose(g, w, rel_tol=1e-9, abs_tol=1e-9)
        if not ok:
            bad.append(f"{k}: got {g!r}, oracle {w!r}")
    return bad


def _category(pkg):
    c = DEFAULT_CATEGORY_MAP.get(pkg, "other")
    return c if c in DEFAULT_APP_CATEGORIES else "other"


def oracle_case(kind: SensorKind, rng) -> tuple[dict, dict]:
    """One random day: (extractor values, oracle values)."""
    day = gen.DAY
    if kind is SensorKind.SCREEN:
        events, rows = gen.screen_day(rng)
        fm = extract_screen(events, day)
        want = oracles.screen(rows)
        if not want:  # no unlock anywhere: zeros, flagged missing
            assert fm.missing and not any(fm.values.values())
            return fm.values, dict(fm.values)
        return fm.values, want
    if kind is SensorKind.BATTERY:
        events, rows = gen.battery_day(rng)
        return extract_battery(events, day).values, oracles.battery(rows)
    if kind is SensorKind.KEYBOARD:
        events, rows = gen.keyboard_day(rng, PARAMS.session_gap_s)
        return extract_keyboard(events, day, PARAMS.session_gap_s).values, oracles.keyboard(
            rows, PARAMS.session_gap_s * 1000
        )
    if kind is SensorKind.CALLS:
        events, rows = gen.calls_day(rng)
        return extract_calls(events, day).values, oracles.calls(rows)
    if kind is SensorKind.MESSAGES:
        events, rows = gen.messages_day(rng)
        return extract_messages(events, day).values, oracles.messages(rows)
    if kind is SensorKind.APPLICATIONS:
        events, rows = gen.apps_day(rng)
        got = extract_applications(events, day, DEFAULT_CATEGORY_MAP, DEFAULT_APP_CATEGORIES).values
        return got, oracles.applications(rows, day.start_ms, day.end_ms, _category, DEFAULT_APP_CATEGORIES)
    events, rows = gen.locations_day(rng)
    got = extract_locations(events, day, PARAMS).values
    want = oracles.locations(rows, PARAMS.stay_radius_m, PARAMS.min_stay_s, PARAMS.moving_speed_threshold)
    return got, want


# --- small LLM fixtures ---------------------------------------------------------

import datetime as _dt  # noqa: E402

from lonesense.assembly import build_window, window_dates  # noqa: E402
from lonesense.core import AssessmentPoint, Stage, Uls8Record  # noqa: E402
from lonesense.features import DailyFeatureRow  # noqa: E402

MID_DATE = _dt.date(2024, 2, 20)
END_DATE = _dt.date(2024, 3, 20)


def toy_windows(catalog, n=2, seed=0):
    """``n`` participants with full midterm and end-of-semester windows."""
    import numpy as np

    rng = np.random.default_rng(seed)
    windows = {Stage.MIDTERM: [], Stage.END_OF_SEMESTER: []}
    points = []
    for i in range(n):
        pid = f"P{i + 1:03d}"
        for stage, date in ((Stage.MIDTERM, MID_DATE), (Stage.END_OF_SEMESTER, END_DATE)):
            rec = Uls8Record(tuple(int(x) for x in rng.integers(1, 5, 8)))
            point = AssessmentPoint(pid, stage, date, rec)
            points.append(point)
            rows = [
                DailyFeatureRow(pid, d, {f: float(rng.integers(0, 50)) for f in catalog.names}, {k: True for k in SensorKind})
                for d in window_dates(date)
            ]
            windows[stage].append(build_window(rows, point, catalog))
    return windows, points
