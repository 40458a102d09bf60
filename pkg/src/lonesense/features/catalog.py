"""The ordered daily feature catalog.

Column order is the catalog order: sensors in ``SensorKind`` order, features in
the order listed below. With the default ten application categories the
catalog holds 76 features.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Sequence

from ..core import SensorKind, ValidationError


@dataclass(frozen=True)
class FeatureDef:
    name: str
    sensor: SensorKind
    unit: str
    title: str  # short label used in best-feature tables
    description: str  # text used verbatim in prompt description lines


DEFAULT_APP_CATEGORIES: tuple[str, ...] = (
    "social",
    "dating",
    "entertainment",
    "communication",
    "games",
    "productivity",
    "education",
    "browser",
    "music",
    "other",
)

DEFAULT_CATEGORY_MAP: dict[str, str] = {
    "com.facebook.katana": "social",
    "com.instagram.android": "social",
    "com.twitter.android": "social",
    "com.snapchat.android": "social",
    "com.zhiliaoapp.musically": "social",
    "com.tinder": "dating",
    "com.bumble.app": "dating",
    "co.hinge.app": "dating",
    "com.google.android.youtube": "entertainment",
    "com.netflix.mediaclient": "entertainment",
    "tv.twitch.android.app": "entertainment",
    "com.whatsapp": "communication",
    "com.facebook.orca": "communication",
    "com.tencent.mm": "communication",
    "com.discord": "communication",
    "com.supercell.clashofclans": "games",
    "com.king.candycrushsaga": "games",
    "com.google.android.apps.docs": "productivity",
    "com.microsoft.office.word": "productivity",
    "com.microsoft.teams": "productivity",
    "com.duolingo": "education",
    "org.coursera.android": "education",
    "com.instructure.candroid": "education",
    "com.android.chrome": "browser",
    "org.mozilla.firefox": "browser",
    "com.spotify.music": "music",
}

_S = SensorKind

_FIXED: dict[SensorKind, tuple[tuple[str, str, str, str], ...]] = {
    # name, unit, title, description
    _S.BATTERY: (
        ("charge_episode_count", "count", "Charge Episode Count", "Number of battery charging episodes"),
        ("charge_duration_total", "s", "Total Charge Duration", "Total battery charging duration (seconds)"),
        ("charge_duration_avg", "s", "Average Charge Duration", "Average battery charging episode duration (seconds)"),
        ("discharge_episode_count", "count", "Discharge Episode Count", "Number of battery discharging episodes"),
        ("discharge_duration_total", "s", "Total Discharge Duration", "Total battery discharging duration (seconds)"),
        ("discharge_duration_avg", "s", "Average Discharge Duration", "Average battery discharging episode duration (seconds)"),
        ("battery_level_min", "%", "Minimum Battery Level", "Minimum battery level (percent)"),
        ("battery_level_max", "%", "Maximum Battery Level", "Maximum battery level (percent)"),
    ),
    _S.CALLS: (
        ("call_incoming_count", "count", "Incoming Call Count", "Number of incoming calls"),
        ("call_outgoing_count", "count", "Outgoing Call Count", "Number of outgoing calls"),
        ("call_missed_count", "count", "Missed Call Count", "Number of missed calls"),
        ("call_incoming_duration", "s", "Incoming Call Duration", "Total incoming call duration (seconds)"),
        ("call_outgoing_duration", "s", "Outgoing Call Duration", "Total outgoing call duration (seconds)"),
        ("call_duration_total", "s", "Total Call Duration", "Total call duration (seconds)"),
        ("call_duration_avg", "s", "Average Call Duration", "Average duration of connected calls (seconds)"),
        ("call_duration_max", "s", "Maximum Call Duration", "Longest call duration (seconds)"),
        ("call_distinct_contacts", "count", "Distinct Call Contacts", "Number of distinct contacts in calls"),
        ("call_top_contact_count", "count", "Calls With Most Frequent Contact", "Number of calls with the most frequent contact"),
    ),
    _S.KEYBOARD: (
        ("key_press_count", "count", "Key Press Count", "Number of key presses"),
        ("text_length_net_change", "chars", "Net Text Length Change", "Net change in text length (characters)"),
        ("text_length_abs_change", "chars", "Absolute Text Length Change", "Total absolute change in text length (characters)"),
        ("typing_session_count", "count", "Typing Session Count", "Number of typing sessions"),
        ("typing_session_length_avg", "s", "Average Session Length", "Average typing session length (seconds)"),
        ("typing_session_length_max", "s", "Maximum Session Length", "Longest typing session length (seconds)"),
        ("inter_key_delay_avg", "ms", "Average Inter-key Delay", "Average time between keystrokes (milliseconds)"),
    ),
    _S.LOCATIONS: (
        ("average_speed", "m/s", "Average Speed", "Average speed while moving (m/s)"),
        ("max_speed", "m/s", "Maximum Speed", "Maximum speed (m/s)"),
        ("moving_time", "s", "Moving Time", "Time spent moving (seconds)"),
        ("static_time", "s", "Static Time", "Time spent stationary (seconds)"),
        ("moving_to_static_ratio", "ratio", "Moving to Static Ratio", "Ratio of moving time to stationary time"),
        ("total_travel_distance", "m", "Total Travel Distance", "Total travel distance (meters)"),
        ("radius_of_gyration", "m", "Radius of Gyration", "Radius of gyration of location fixes (meters)"),
        ("distinct_location_clusters", "count", "Distinct Locations", "Number of distinct location clusters visited"),
        ("time_at_top_cluster", "s", "Time at Most Frequent Location", "Time spent at the most visited location cluster (seconds)"),
        ("stay_length_avg", "s", "Average Stay Length at Clusters", "Average stay length at location clusters (seconds)"),
        ("stay_length_std", "s", "Standard Deviation of Stay Length at Clusters", "Standard deviation of stay length at location clusters (seconds)"),
        ("location_entropy", "nats", "Location Entropy", "Location entropy across visited clusters"),
    ),
    _S.MESSAGES: (
        ("message_sent_count", "count", "Sent Message Count", "Number of messages sent"),
        ("message_received_count", "count", "Received Message Count", "Number of messages received"),
        ("message_distinct_contacts", "count", "Distinct Message Contacts", "Number of distinct contacts in messages"),
        ("message_top_contact_count", "count", "Messages With Most Frequent Contact", "Number of messages with the most frequent contact"),
        ("message_top_contact_sent", "count", "Messages Sent to Most Frequent Contact", "Number of messages sent to the most frequent contact"),
        ("message_top_contact_received", "count", "Messages Received From Most Frequent Contact", "Number of messages received from the most frequent contact"),
    ),
    _S.SCREEN: (
        ("unlock_episode_count", "count", "Unlock Episode Count", "Unlock episode count"),
        ("unlock_duration_total", "s", "Total Unlock Duration", "Total unlock duration (seconds)"),
        ("unlock_duration_avg", "s", "Average Unlock Duration", "Average unlock duration (seconds)"),
        ("unlock_duration_min", "s", "Minimum Unlock Duration", "Minimum unlock duration (seconds)"),
        ("unlock_duration_max", "s", "Maximum Unlock Duration", "Maximum unlock duration (seconds)"),
        ("unlock_duration_std", "s", "Standard Deviation of Unlock Duration", "Standard deviation of unlock duration (seconds)"),
        ("first_unlock_after_midnight", "min", "First Unlock Time After Midnight", "First unlock time after midnight (minutes)"),
        ("last_unlock_time", "min", "Last Unlock Time", "Last unlock time after midnight (minutes)"),
        ("time_between_unlocks_avg", "s", "Average Time Between Unlocks", "Average time between unlock episodes (seconds)"),
        ("time_between_unlocks_max", "s", "Maximum Time Between Unlocks", "Longest time between unlock episodes (seconds)"),
    ),
}


def _app_features(categories: Sequence[str]) -> list[FeatureDef]:
    a = SensorKind.APPLICATIONS
    defs = [
        FeatureDef("app_usage_duration_total", a, "s", "Total App Usage Duration",
                   "Total application usage duration (seconds)"),
        FeatureDef("app_usage_episode_count", a, "count", "App Usage Episode Count",
                   "Number of application usage episodes"),
        FeatureDef("app_usage_episode_avg", a, "s", "Average App Usage Episode",
                   "Average application usage episode duration (seconds)"),
    ]
    for cat in categories:
        label = cat.replace("_", " ")
        defs.append(FeatureDef(f"app_{cat}_duration", a, "s", f"{label.title()} App Duration",
                               f"Usage duration of {label} apps (seconds)"))
        defs.append(FeatureDef(f"app_{cat}_episode_count", a, "count", f"{label.title()} App Episodes",
                               f"Number of {label} app usage episodes"))
    return defs


class FeatureCatalog:
    """Ordered, name-unique list of ``FeatureDef``."""

    def __init__(self, features: Sequence[FeatureDef], app_categories: Sequence[str] = ()):
        names = [f.name for f in features]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate feature names: {dupes}")
        self.features: tuple[FeatureDef, ...] = tuple(features)
        self.app_categories: tuple[str, ...] = tuple(app_categories)
        self._index = {f.name: i for i, f in enumerate(self.features)}

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self) -> Iterator[FeatureDef]:
        return iter(self.features)

    def __getitem__(self, name: str) -> FeatureDef:
        return self.features[self._index[name]]

    def __contains__(self, name: object) -> bool:
        return name in self._index

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def for_sensor(self, sensor: SensorKind) -> list[FeatureDef]:
        return [f for f in self.features if f.sensor is sensor]

    def subset(self, names: Sequence[str]) -> "FeatureCatalog":
        keep = set(names)
        return FeatureCatalog([f for f in self.features if f.name in keep], self.app_categories)

    def to_markdown(self) -> str:
        lines = [
            "# Daily feature catalog",
            "",
            f"{len(self)} features; column order as listed.",
            "",
            "| # | name | sensor | unit | description |",
            "|---|------|--------|------|-------------|",
        ]
        for i, f in enumerate(self.features, start=1):
            lines.append(f"| {i} | `{f.name}` | {f.sensor.value} | {f.unit} | {f.description} |")
        return "\n".join(lines) + "\n"


def build_catalog(app_categories: Optional[Sequence[str]] = None) -> FeatureCatalog:
    cats = list(DEFAULT_APP_CATEGORIES if app_categories is None else app_categories)
    if "other" not in cats:
        cats.append("other")
    defs: list[FeatureDef] = []
    for sensor in SensorKind:
        if sensor is SensorKind.APPLICATIONS:
            defs.extend(_app_features(cats))
        else:
            defs.extend(FeatureDef(n, sensor, u, t, d) for n, u, t, d in _FIXED[sensor])
    return FeatureCatalog(defs, cats)


def resolve_category(package: str, category_map: Mapping[str, str], categories: Sequence[str]) -> str:
    cat = category_map.get(package, "other")
    return cat if cat in categories else "other"
