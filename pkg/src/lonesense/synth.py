"""Synthetic cohorts with planted behavior/loneliness couplings.

Every participant has a latent loneliness score per stage. Four behavior
families depend on it; everything else is nuisance variation. With all noise
scales at zero the planted daily features are deterministic monotone
functions of the latent score.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .assembly import WINDOW_DAYS, FlatDataset, column_name, write_assessments
from .core import (
    N_ITEMS,
    REVERSE_ITEMS,
    SCORE_MAX,
    SCORE_MIN,
    AppPayload,
    AssessmentPoint,
    BatteryPayload,
    CallPayload,
    KeyboardPayload,
    LocationPayload,
    MessagePayload,
    ScreenPayload,
    SensorEvent,
    SensorKind,
    Stage,
    Uls8Record,
    ValidationError,
)
from .features.catalog import DEFAULT_CATEGORY_MAP, build_catalog
from .features.location import haversine
from .ingestion import day_bounds, write_jsonl, write_log, write_roster

TOTAL_MIN, TOTAL_MAX = 8.0, 32.0

# family -> (planted daily feature, its sign relative to the family direction)
PLANTED_FEATURES: dict[str, tuple[str, int]] = {
    "screen_usage": ("unlock_duration_total", 1),
    "location_transitions": ("total_travel_distance", 1),
    "late_night_usage": ("first_unlock_after_midnight", -1),  # later at night = earlier minute
    "stay_concentration": ("stay_length_std", 1),
}


@dataclass(frozen=True)
class Effect:
    direction: int  # +1: rises with loneliness, -1: falls
    strength: float = 1.0

    def __post_init__(self) -> None:
        if self.direction not in (1, -1):
            raise ValidationError("effect direction must be +1 or -1")
        if not math.isfinite(self.strength) or self.strength < 0:
            raise ValidationError("effect strength must be finite and non-negative")


def default_effects() -> dict[str, Effect]:
    return {
        "screen_usage": Effect(1),
        "location_transitions": Effect(-1),
        "late_night_usage": Effect(1),
        "stay_concentration": Effect(1),
    }


@dataclass(frozen=True)
class CohortSpec:
    n_participants: int = 20
    seed: int = 0
    latent_low: float = TOTAL_MIN
    latent_high: float = TOTAL_MAX
    effects: dict[str, Effect] = field(default_factory=default_effects)
    behavior_noise: float = 0.25  # log-scale sd on planted daily quantities
    item_noise: float = 0.5  # sd of per-item response noise, in response units
    stage_drift: float = 2.0  # sd of the latent change between stages, in total units
    missing_day_prob: float = 0.05
    missing_overrides: dict[str, float] = field(default_factory=dict)
    start_date: dt.date = dt.date(2024, 2, 5)
    midterm_offset: int = 15  # assessment dates, in days after start_date
    end_offset: int = 30
    timezones: tuple[str, ...] = ("America/New_York",)

    def __post_init__(self) -> None:
        if self.n_participants < 1:
            raise ValidationError("cohort needs at least one participant")
        if not TOTAL_MIN <= self.latent_low <= self.latent_high <= TOTAL_MAX:
            raise ValidationError("latent range must lie within 8..32")
        unknown = set(self.effects) - set(PLANTED_FEATURES)
        if unknown:
            raise ValidationError(f"unknown effect families: {sorted(unknown)}")
        for name in ("behavior_noise", "item_noise", "stage_drift"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValidationError(f"{name} must be finite and non-negative")
        for p in (self.missing_day_prob, *self.missing_overrides.values()):
            if not 0.0 <= p <= 1.0:
                raise ValidationError("probabilities must lie in [0, 1]")
        if not (WINDOW_DAYS <= self.midterm_offset and self.midterm_offset + WINDOW_DAYS <= self.end_offset):
            raise ValidationError("assessment offsets must leave two disjoint 14-day windows")
        if not self.timezones:
            raise ValidationError("at least one time zone is required")

    @property
    def participant_ids(self) -> list[str]:
        width = max(3, len(str(self.n_participants)))
        return [f"P{i:0{width}d}" for i in range(1, self.n_participants + 1)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start_date"] = self.start_date.isoformat()
        d["timezones"] = list(self.timezones)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CohortSpec":
        d = dict(d)
        if "effects" in d:
            d["effects"] = {k: Effect(**v) for k, v in d["effects"].items()}
        if "start_date" in d:
            d["start_date"] = dt.date.fromisoformat(d["start_date"])
        if "timezones" in d:
            d["timezones"] = tuple(d["timezones"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValidationError(f"bad cohort spec: {exc}") from None


@dataclass
class Cohort:
    spec: CohortSpec
    events: dict[SensorKind, list[SensorEvent]]
    assessments: list[AssessmentPoint]
    roster: dict[str, str]
    latent: dict[str, dict[Stage, float]]


# --- helpers ----------------------------------------------------------------


def participant_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _level(spec: CohortSpec, family: str, z: float) -> float:
    """Planted intensity in [0, 1]; 0.5 for families without an effect."""
    eff = spec.effects.get(family)
    if eff is None:
        return 0.5
    return float(np.clip(0.5 + eff.direction * eff.strength * (z - 0.5), 0.0, 1.0))


def _jitter(rng: np.random.Generator, sigma: float) -> float:
    return float(np.exp(sigma * rng.standard_normal())) if sigma > 0 else 1.0


def item_responses(z: float, rng: np.random.Generator, noise: float) -> tuple[int, ...]:
    """Raw 1..4 responses; items 3 and 6 are generated on the inverted scale."""
    out = []
    for k in range(1, N_ITEMS + 1):
        r = 1.0 + 3.0 * z + (noise * rng.standard_normal() if noise > 0 else 0.0)
        r = int(np.clip(np.floor(r + 0.5), SCORE_MIN, SCORE_MAX))
        out.append(SCORE_MIN + SCORE_MAX - r if k in REVERSE_ITEMS else r)
    return tuple(out)


def _offset_point(lat: float, lon: float, dist_m: float, bearing: float) -> tuple[float, float]:
    dlat = dist_m * math.cos(bearing) / 111_320.0
    dlon = dist_m * math.sin(bearing) / (111_320.0 * math.cos(math.radians(lat)))
    return lat + dlat, lon + dlon


_PACKAGES = tuple(sorted(DEFAULT_CATEGORY_MAP)) + ("org.example.unlisted",)


# --- one participant-day ------------------------------------------------------


def _day_events(
    pid: str,
    start_ms: int,
    end_ms: int,
    z: float,
    spec: CohortSpec,
    rng: np.random.Generator,
    home: tuple[float, float],
) -> list[SensorEvent]:
    sigma = spec.behavior_noise
    events: list[SensorEvent] = []

    def at(minutes: float) -> int:
        return start_ms + int(round(minutes * 60_000))

    def add(kind: SensorKind, ts: int, payload) -> None:
        if ts < end_ms:  # anything spilling past local midnight is dropped
            events.append(SensorEvent(pid, kind, ts, payload))

    # screen + applications: fixed session count, planted duration and start time
    n_sessions = 12
    first = 420.0 - 360.0 * _level(spec, "late_night_usage", z)
    first = float(np.clip(first * _jitter(rng, sigma), 5.0, 600.0))
    mean_dur = 60.0 + 1500.0 * _level(spec, "screen_usage", z)
    slot = (1410.0 - first) / n_sessions
    session_starts = []
    for s in range(n_sessions):
        dur = min(mean_dur * _jitter(rng, sigma), slot * 60.0 * 0.8)
        t0 = first + s * slot
        if s > 0 and sigma > 0:
            t0 += rng.uniform(0.0, 0.1) * slot
        on = at(t0)
        off = on + int(dur * 1000)
        session_starts.append(on)
        add(SensorKind.SCREEN, on, ScreenPayload("unlock"))
        add(SensorKind.SCREEN, off, ScreenPayload("lock"))
        if off - on > 5_000:
            pkg = _PACKAGES[int(rng.integers(len(_PACKAGES)))]
            add(SensorKind.APPLICATIONS, on + 2_000, AppPayload(pkg, on + 2_000, off - 1_000))

    # keyboard: short typing bursts inside a few sessions
    for s in (1, 5, 9):
        t = session_starts[s] + 3_000
        for _ in range(int(rng.integers(8, 16))):
            delta = -1 if rng.random() < 0.1 else 1
            add(SensorKind.KEYBOARD, t, KeyboardPayload(delta))
            t += int(rng.integers(300, 2_500))

    # locations: home -> k places -> home, planted trip count and time out
    k = int(round(1 + 4 * _level(spec, "location_transitions", z)))
    out_min = 120.0 + 480.0 * (1.0 - _level(spec, "stay_concentration", z))
    out_min *= _jitter(rng, sigma)
    depart = 480.0 * _jitter(rng, sigma / 4)
    places = [
        _offset_point(home[0], home[1], 800.0 + 400.0 * j, 2 * math.pi * j / 5) for j in range(k)
    ]
    route = [home, *places, home]
    speed = 8.0
    t = 0.0  # minutes after midnight

    def stay(pos, until: float) -> None:
        nonlocal t
        while t < until:
            add(SensorKind.LOCATIONS, at(t), LocationPayload(pos[0], pos[1], 0.0))
            t += 20.0
        t = until

    stay(home, depart)
    for leg, (a, b) in enumerate(zip(route, route[1:])):
        dist = haversine(a[0], a[1], b[0], b[1])
        travel = dist / speed / 60.0
        steps = max(1, int(math.ceil(travel)))
        for i in range(steps):
            frac = i / steps
            pos = (a[0] + (b[0] - a[0]) * frac, a[1] + (b[1] - a[1]) * frac)
            add(SensorKind.LOCATIONS, at(t + travel * frac), LocationPayload(pos[0], pos[1], speed))
        t += travel
        if leg < k:
            stay(b, t + out_min / k)
    stay(home, 1439.0)

    # battery: hourly samples, charging overnight
    level = 100.0
    for h in range(24):
        charging = h < 7 or h >= 23
        if charging:
            level = min(100.0, level + 15.0)
            status = "full" if level >= 100.0 else "charging"
        else:
            level = max(5.0, level - 4.0 - rng.uniform(0.0, 2.0))
            status = "discharging"
        add(SensorKind.BATTERY, at(h * 60.0), BatteryPayload(round(level, 1), status))

    # calls and messages: unplanted nuisance traffic
    contacts = [f"{pid}-c{j}" for j in range(1, 9)]
    for _ in range(int(rng.poisson(2.0))):
        direction = ("incoming", "outgoing", "missed")[int(rng.integers(3))]
        duration = 0.0 if direction == "missed" else float(1 + int(rng.exponential(180.0)))
        contact = contacts[int(rng.integers(len(contacts)))]
        add(SensorKind.CALLS, at(rng.uniform(540.0, 1320.0)), CallPayload(direction, duration, contact))
    for _ in range(int(rng.poisson(6.0))):
        direction = "sent" if rng.random() < 0.5 else "received"
        contact = contacts[int(rng.integers(len(contacts)))]
        add(SensorKind.MESSAGES, at(rng.uniform(480.0, 1400.0)), MessagePayload(direction, contact))
    return events


# --- cohort -------------------------------------------------------------------


def _participant(args) -> tuple[str, str, dict[Stage, float], list[AssessmentPoint], list[SensorEvent]]:
    spec, index = args
    pid = spec.participant_ids[index]
    zone = spec.timezones[index % len(spec.timezones)]
    rng = participant_rng(spec.seed, index)
    latent_mid = float(rng.uniform(spec.latent_low, spec.latent_high))
    drift = spec.stage_drift * rng.standard_normal() if spec.stage_drift > 0 else 0.0
    latent_end = float(np.clip(latent_mid + drift, spec.latent_low, spec.latent_high))
    latent = {Stage.MIDTERM: latent_mid, Stage.END_OF_SEMESTER: latent_end}
    mid_date = spec.start_date + dt.timedelta(days=spec.midterm_offset)
    end_date = spec.start_date + dt.timedelta(days=spec.end_offset)
    points = [
        AssessmentPoint(
            pid,
            stage,
            d,
            Uls8Record(item_responses((latent[stage] - TOTAL_MIN) / 24.0, rng, spec.item_noise)),
        )
        for stage, d in ((Stage.MIDTERM, mid_date), (Stage.END_OF_SEMESTER, end_date))
    ]
    home = (40.70 + rng.uniform(-0.05, 0.05), -74.00 + rng.uniform(-0.05, 0.05))
    p_missing = spec.missing_overrides.get(pid, spec.missing_day_prob)
    events: list[SensorEvent] = []
    for offset in range(spec.end_offset):
        day = spec.start_date + dt.timedelta(days=offset)
        if rng.random() < p_missing:
            continue
        stage = Stage.MIDTERM if day < mid_date else Stage.END_OF_SEMESTER
        z = (latent[stage] - TOTAL_MIN) / 24.0
        start_ms, end_ms = day_bounds(day, zone)
        events.extend(_day_events(pid, start_ms, end_ms, z, spec, rng, home))
    return pid, zone, latent, points, events


def generate_cohort(spec: CohortSpec, jobs: int = 1) -> Cohort:
    """Raw event logs for all seven sensors, both assessment stages, and a roster.

    Each participant draws from its own RNG substream, so output does not
    depend on ``jobs``.
    """
    work = [(spec, i) for i in range(spec.n_participants)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_participant, work))
    else:
        results = [_participant(w) for w in work]
    events: dict[SensorKind, list[SensorEvent]] = {k: [] for k in SensorKind}
    assessments: list[AssessmentPoint] = []
    roster: dict[str, str] = {}
    latent: dict[str, dict[Stage, float]] = {}
    for pid, zone, lat, points, evs in results:
        roster[pid] = zone
        latent[pid] = lat
        assessments.extend(points)
        for e in sorted(evs, key=lambda e: e.timestamp):
            events[e.kind].append(e)
    return Cohort(spec, events, assessments, roster, latent)


def write_cohort(cohort: Cohort, directory: Union[str, Path], fmt: str = "delimited") -> list[Path]:
    """Write logs in the ingestion layout plus roster, assessments, and the spec."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for kind, evs in cohort.events.items():
        if fmt == "jsonl":
            path = root / f"{kind.value.lower()}.jsonl"
            write_jsonl(path, evs)
        else:
            path = root / f"{kind.value.lower()}.csv"
            write_log(path, kind, evs)
        paths.append(path)
    write_roster(root / "roster.csv", cohort.roster)
    write_assessments(root / "assessments.csv", cohort.assessments)
    (root / "cohort.json").write_text(json.dumps(cohort.spec.to_dict(), indent=2, sort_keys=True) + "\n")
    return paths + [root / "roster.csv", root / "assessments.csv", root / "cohort.json"]


# --- tabular cohort for model-level checks ------------------------------------


@dataclass(frozen=True)
class FeatureCohort:
    dataset: FlatDataset
    planted: tuple[str, ...]


def generate_feature_cohort(
    n: int = 100,
    n_features: int = 40,
    n_signal: int = 4,
    noise: float = 1.0,
    item_noise: float = 0.5,
    seed: int = 0,
) -> FeatureCohort:
    """A flat window matrix with ``n_signal`` columns coupled to loneliness.

    Signal columns are the planted families' features on random window days,
    standardized latent plus Gaussian noise of sd ``noise``. The rest are
    unrelated catalog columns drawn as standard normals.
    """
    if n < 3 or n_signal < 1 or n_features <= n_signal:
        raise ValidationError("need n >= 3 and 1 <= n_signal < n_features")
    if n_signal > len(PLANTED_FEATURES):
        raise ValidationError(f"at most {len(PLANTED_FEATURES)} planted families")
    rng = np.random.default_rng(np.random.SeedSequence([seed, n, n_features, n_signal]))
    catalog = build_catalog()
    families = list(PLANTED_FEATURES)[:n_signal]
    planted_names = {PLANTED_FEATURES[f][0] for f in PLANTED_FEATURES}
    planted = [column_name(PLANTED_FEATURES[f][0], int(rng.integers(1, WINDOW_DAYS + 1))) for f in families]
    pool = [
        column_name(f, k)
        for f in catalog.names
        if f not in planted_names
        for k in range(1, WINDOW_DAYS + 1)
    ]
    others = [pool[i] for i in sorted(rng.choice(len(pool), n_features - n_signal, replace=False))]
    columns = list(planted) + others
    order = rng.permutation(len(columns))
    columns = [columns[i] for i in order]

    z = rng.uniform(0.0, 1.0, n)
    zs = (z - 0.5) / math.sqrt(1.0 / 12.0)
    X = rng.standard_normal((n, n_features))
    effects = default_effects()
    for j, col in enumerate(columns):
        if col in planted:
            fam = families[planted.index(col)]
            sign = effects[fam].direction * PLANTED_FEATURES[fam][1]
            X[:, j] = sign * zs + noise * rng.standard_normal(n)
    y = np.array([Uls8Record(item_responses(zi, rng, item_noise)).total for zi in z], dtype=float)
    keys = tuple((f"P{i + 1:03d}", Stage.END_OF_SEMESTER.value) for i in range(n))
    return FeatureCohort(FlatDataset(tuple(columns), X, y, keys), tuple(planted))


def planted_signs(spec: Optional[CohortSpec] = None) -> dict[str, int]:
    """Expected correlation sign between latent loneliness and each planted feature."""
    effects = (spec or CohortSpec()).effects
    return {
        PLANTED_FEATURES[f][0]: effects[f].direction * PLANTED_FEATURES[f][1] for f in effects
    }


def read_spec(path: Union[str, Path]) -> CohortSpec:
    try:
        return CohortSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"cohort spec is not valid JSON: {exc}") from None


__all__: Sequence[str] = [
    "Cohort",
    "CohortSpec",
    "Effect",
    "FeatureCohort",
    "PLANTED_FEATURES",
    "generate_cohort",
    "generate_feature_cohort",
    "item_responses",
    "planted_signs",
    "read_spec",
    "write_cohort",
]
