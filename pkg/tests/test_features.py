import datetime as dt
import math

import numpy as np
import pytest

import helpers
from generators import DAY
from lonesense.core import (
    AppPayload,
    BatteryPayload,
    CallPayload,
    KeyboardPayload,
    LocationPayload,
    MessagePayload,
    ScreenPayload,
    SensorEvent,
    SensorKind,
    ValidationError,
)
from lonesense.features import (
    DEFAULT_APP_CATEGORIES,
    DEFAULT_CATEGORY_MAP,
    Day,
    ExtractionParams,
    build_catalog,
    describe_feature,
    extract_all,
    extract_applications,
    extract_battery,
    extract_calls,
    extract_day,
    extract_keyboard,
    extract_locations,
    extract_messages,
    extract_screen,
    format_number,
    haversine,
    read_feature_tables,
    write_feature_tables,
)

K = SensorKind


def hm(h, m=0, s=0):
    return DAY.start_ms + ((h * 60 + m) * 60 + s) * 1000


def ev(kind, ts, payload):
    return SensorEvent("P001", kind, ts, payload)


def screen(*pairs):
    return [ev(K.SCREEN, t, ScreenPayload(tr)) for t, tr in pairs]


# --- screen -----------------------------------------------------------------


def test_screen_two_episodes():
    fm = extract_screen(
        screen((hm(10), "unlock"), (hm(10, 5), "lock"), (hm(23, 50), "unlock"), (hm(23, 55), "lock")), DAY
    )
    v = fm.values
    assert not fm.missing
    assert v["unlock_episode_count"] == 2
    assert v["unlock_duration_total"] == 600
    assert v["unlock_duration_min"] == 300
    assert v["unlock_duration_avg"] == 300
    assert v["unlock_duration_std"] == 0
    assert v["first_unlock_after_midnight"] == 600


def test_screen_empty_day_is_missing():
    fm = extract_screen([], DAY)
    assert fm.missing
    assert set(fm.values.values()) == {0.0}


def test_screen_truncated_at_midnight():
    fm = extract_screen(screen((hm(23, 50), "unlock")), DAY)
    assert fm.values["unlock_episode_count"] == 1
    assert fm.values["unlock_duration_total"] == 600


def test_screen_without_unlock_is_flagged():
    fm = extract_screen(screen((hm(9), "on"), (hm(9, 1), "off")), DAY)
    assert fm.missing
    assert fm.values["first_unlock_after_midnight"] == 0


# --- locations --------------------------------------------------------------


def fix(t_s, lat, lon, speed=None):
    return ev(K.LOCATIONS, DAY.start_ms + int(t_s * 1000), LocationPayload(lat, lon, speed))


def test_locations_moving_leg():
    lat0, lon0 = 40.0, -74.0
    lat1 = lat0 + 1000.0 / 111_194.92664455873  # one kilometre north on the sphere
    d = haversine(lat0, lon0, lat1, lon0)
    assert d == pytest.approx(1000.0, abs=1e-6)
    events = [fix(0, lat0, lon0), fix(600, lat1, lon0)]
    events += [fix(600 + 60 * k, lat1, lon0) for k in range(1, 61)]
    v = extract_locations(events, DAY, ExtractionParams()).values
    assert v["total_travel_distance"] == pytest.approx(1000.0, abs=1e-6)
    assert v["max_speed"] == pytest.approx(1000.0 / 600, rel=1e-9)
    assert v["moving_time"] == pytest.approx(600.0)
    assert v["static_time"] == pytest.approx(3600.0)


def test_locations_identical_fixes():
    events = [fix(60 * k, 51.5, -0.12) for k in range(30)]
    v = extract_locations(events, DAY, ExtractionParams()).values
    assert v["location_entropy"] == 0
    assert v["distinct_location_clusters"] == 1
    assert v["total_travel_distance"] == 0


def test_locations_two_equal_clusters():
    a, b = (40.7128, -74.0060), (40.7306, -73.9866)
    events = [fix(60 * k, *a, speed=0.0) for k in range(21)]
    events += [fix(3600 + 60 * k, *b, speed=0.0) for k in range(21)]
    v = extract_locations(events, DAY, ExtractionParams()).values
    assert v["distinct_location_clusters"] == 2
    assert v["location_entropy"] == pytest.approx(math.log(2), abs=1e-12)


def test_locations_too_few_fixes():
    fm = extract_locations([fix(0, 1.0, 1.0)], DAY, ExtractionParams())
    assert fm.missing
    assert set(fm.values.values()) == {0.0}


# --- battery ------------------------------------------------------------------


def bat(t, level, status):
    return ev(K.BATTERY, t, BatteryPayload(level, status))


def test_battery_segmentation():
    events = [bat(DAY.start_ms + 1, 90, "discharging"), bat(hm(8), 40, "charging"), bat(hm(9), 80, "discharging")]
    v = extract_battery(events, DAY).values
    assert v["discharge_episode_count"] == 2
    assert v["discharge_duration_total"] == pytest.approx(23 * 3600, abs=0.01)
    assert v["charge_duration_total"] == pytest.approx(3600)


def test_battery_single_state():
    v = extract_battery([bat(DAY.start_ms + 1, 50, "discharging")], DAY).values
    assert v["discharge_episode_count"] == 1
    assert v["discharge_duration_total"] == pytest.approx(86_400, abs=0.01)


def test_battery_empty():
    assert extract_battery([], DAY).missing


# --- keyboard -----------------------------------------------------------------


def keys(*times_ms):
    return [ev(K.KEYBOARD, hm(12) + t, KeyboardPayload(1)) for t in times_ms]


def test_keyboard_single_session():
    v = extract_keyboard(keys(0, 1000, 2000, 3000, 4000), DAY, 60).values
    assert v["typing_session_count"] == 1
    assert v["inter_key_delay_avg"] == 1000
    assert v["key_press_count"] == 5


def test_keyboard_single_keystroke():
    fm = extract_keyboard(keys(0), DAY, 60)
    assert fm.values["key_press_count"] == 1
    assert fm.values["inter_key_delay_avg"] == 0
    assert "inter_key_delay_avg" in fm.undefined


def test_keyboard_two_bursts():
    v = extract_keyboard(keys(0, 500, 600_000, 600_400), DAY, 60).values
    assert v["typing_session_count"] == 2


# --- calls, messages, apps ------------------------------------------------------


def test_calls_tally():
    events = [
        ev(K.CALLS, hm(9), CallPayload("incoming", 60, "a")),
        ev(K.CALLS, hm(10), CallPayload("incoming", 120, "b")),
        ev(K.CALLS, hm(11), CallPayload("missed", 0, "a")),
    ]
    v = extract_calls(events, DAY).values
    assert v["call_incoming_count"] == 2
    assert v["call_incoming_duration"] == 180
    assert v["call_missed_count"] == 1


def test_messages_tally():
    events = [ev(K.MESSAGES, hm(9, i), MessagePayload("sent", "A")) for i in range(3)]
    events.append(ev(K.MESSAGES, hm(10), MessagePayload("received", "B")))
    v = extract_messages(events, DAY).values
    assert v["message_sent_count"] == 3
    assert v["message_received_count"] == 1
    assert v["message_distinct_contacts"] == 2
    assert v["message_top_contact_count"] == 3


def test_apps_empty():
    fm = extract_applications([], DAY, DEFAULT_CATEGORY_MAP, DEFAULT_APP_CATEGORIES)
    assert fm.missing
    assert set(fm.values.values()) == {0.0}


def test_apps_unknown_package_goes_to_other():
    e = ev(K.APPLICATIONS, hm(9), AppPayload("org.example.x", hm(9), hm(9, 10)))
    v = extract_applications([e], DAY, DEFAULT_CATEGORY_MAP, DEFAULT_APP_CATEGORIES).values
    assert v["app_other_duration"] == 600
    assert v["app_usage_duration_total"] == 600


# --- oracle equivalence and invariants -----------------------------------------


@pytest.mark.parametrize("kind", list(SensorKind), ids=str)
def test_extractor_matches_oracle(kind):
    rng = np.random.default_rng(20240301)
    for _ in range(150):
        got, want = helpers.oracle_case(kind, rng)
        assert helpers.mismatches(got, want) == []


@pytest.mark.parametrize("kind", list(SensorKind), ids=str)
def test_extractors_are_pure(kind):
    a = helpers.oracle_case(kind, np.random.default_rng(5))[0]
    b = helpers.oracle_case(kind, np.random.default_rng(5))[0]
    assert a == b


def test_durations_bounded_by_day_and_entropy_bounded():
    rng = np.random.default_rng(11)
    catalog = build_catalog()
    seconds = [f.name for f in catalog if f.unit == "s"]
    for kind in (K.SCREEN, K.BATTERY, K.APPLICATIONS, K.LOCATIONS, K.CALLS):
        for _ in range(100):
            got, _ = helpers.oracle_case(kind, rng)
            for name in seconds:
                if name in got and kind is not K.CALLS:
                    assert 0 <= got[name] <= 86_400, name
            if kind is K.LOCATIONS:
                n = got["distinct_location_clusters"]
                assert 0 <= got["location_entropy"] <= math.log(max(n, 1)) + 1e-12


def test_dst_day_is_25_hours():
    day = Day.of(dt.date(2024, 11, 3), "America/New_York")
    assert day.end_ms - day.start_ms == 25 * 3600 * 1000
    e = [ev(K.BATTERY, day.start_ms + 1, BatteryPayload(50, "discharging"))]
    v = extract_battery(e, day).values
    assert v["discharge_duration_total"] == pytest.approx(25 * 3600, abs=0.01)


# --- rows, tables, catalog ------------------------------------------------------


def test_extract_day_covers_catalog():
    catalog = build_catalog()
    row = extract_day("P001", DAY, {K.SCREEN: screen((hm(10), "unlock"), (hm(10, 5), "lock"))}, catalog)
    assert list(row.values) == catalog.names
    assert row.has_any_data[K.SCREEN]
    assert not row.has_any_data[K.KEYBOARD]
    assert row.covered


def test_feature_tables_round_trip(tmp_path):
    catalog = build_catalog()
    events = screen((hm(10), "unlock"), (hm(10, 5), "lock"))
    events += [bat(hm(1), 50, "charging")]
    rows = extract_all(events, catalog)
    write_feature_tables(rows, catalog, tmp_path / "v.csv", tmp_path / "f.csv")
    back = read_feature_tables(tmp_path / "v.csv", tmp_path / "f.csv", catalog)
    assert [r.values for r in back] == [r.values for r in rows]
    assert [r.has_any_data for r in back] == [r.has_any_data for r in rows]


def test_catalog_shape():
    catalog = build_catalog()
    assert len(catalog.names) == 76
    assert len(set(catalog.names)) == 76
    assert catalog.to_markdown() == build_catalog().to_markdown()


# --- prompt lines ---------------------------------------------------------------


def test_describe_feature_examples():
    assert (
        describe_feature("Unlock episode count", [3, 4, 2, 5, 1, 0, 2])
        == "Unlock episode count, 3, 4, 2, 5, 1, 0, 2 (weekly average 2.43)"
    )
    assert (
        describe_feature("Total travel distance (m)", [0] * 7)
        == "Total travel distance (m), 0, 0, 0, 0, 0, 0, 0 (weekly average 0)"
    )


def test_describe_feature_arity():
    with pytest.raises(ValidationError):
        describe_feature("x", [1, 2, 3])


@pytest.mark.parametrize("x,text", [(2.0, "2"), (2.5, "2.5"), (2.4285, "2.43"), (-0.001, "0"), (1e5, "100000")])
def test_format_number(x, text):
    assert format_number(x) == text
