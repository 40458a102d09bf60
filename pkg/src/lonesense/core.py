"""Domain types shared across the pipeline and the ULS-8 scale definition."""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union


class ValidationError(ValueError):
    """Raised when a domain value violates its contract."""


class SensorKind(str, enum.Enum):
    APPLICATIONS = "Applications"
    BATTERY = "Battery"
    CALLS = "Calls"
    KEYBOARD = "Keyboard"
    LOCATIONS = "Locations"
    MESSAGES = "Messages"
    SCREEN = "Screen"

    @classmethod
    def parse(cls, name: str) -> "SensorKind":
        for kind in cls:
            if name == kind.value or name.lower() == kind.value.lower():
                return kind
        raise ValidationError(f"unknown sensor kind: {name!r}")

    def __str__(self) -> str:
        return self.value


SENSORS: tuple[SensorKind, ...] = tuple(SensorKind)


class Stage(str, enum.Enum):
    MIDTERM = "Midterm"
    END_OF_SEMESTER = "EndOfSemester"

    @classmethod
    def parse(cls, name: str) -> "Stage":
        for stage in cls:
            if name == stage.value or name.lower() == stage.value.lower():
                return stage
        raise ValidationError(f"unknown stage: {name!r}")

    def __str__(self) -> str:
        return self.value


# --- event payloads -------------------------------------------------------

SCREEN_TRANSITIONS = ("unlock", "lock", "on", "off")
BATTERY_STATUSES = ("charging", "discharging", "full")
CALL_DIRECTIONS = ("incoming", "outgoing", "missed")
MESSAGE_DIRECTIONS = ("sent", "received")


@dataclass(frozen=True)
class ScreenPayload:
    transition: str


@dataclass(frozen=True)
class LocationPayload:
    latitude: float
    longitude: float
    speed: Optional[float] = None  # m/s


@dataclass(frozen=True)
class BatteryPayload:
    level: float  # percent
    status: str

    @property
    def charging(self) -> bool:
        return self.status != "discharging"


@dataclass(frozen=True)
class KeyboardPayload:
    text_delta: int


@dataclass(frozen=True)
class CallPayload:
    direction: str
    duration_s: float
    contact: str  # pre-hashed token


@dataclass(frozen=True)
class MessagePayload:
    direction: str
    contact: str  # pre-hashed token


@dataclass(frozen=True)
class AppPayload:
    package: str
    start_ms: int
    end_ms: int


Payload = Union[
    ScreenPayload,
    LocationPayload,
    BatteryPayload,
    KeyboardPayload,
    CallPayload,
    MessagePayload,
    AppPayload,
]

PAYLOAD_TYPES: dict[SensorKind, type] = {
    SensorKind.SCREEN: ScreenPayload,
    SensorKind.LOCATIONS: LocationPayload,
    SensorKind.BATTERY: BatteryPayload,
    SensorKind.KEYBOARD: KeyboardPayload,
    SensorKind.CALLS: CallPayload,
    SensorKind.MESSAGES: MessagePayload,
    SensorKind.APPLICATIONS: AppPayload,
}


def _check_payload(kind: SensorKind, payload: Payload) -> None:
    expected = PAYLOAD_TYPES[kind]
    if not isinstance(payload, expected):
        raise ValidationError(
            f"{kind} event needs {expected.__name__}, got {type(payload).__name__}"
        )
    if isinstance(payload, ScreenPayload):
        if payload.transition not in SCREEN_TRANSITIONS:
            raise ValidationError(f"bad screen transition {payload.transition!r}")
    elif isinstance(payload, LocationPayload):
        if not (-90.0 <= payload.latitude <= 90.0 and -180.0 <= payload.longitude <= 180.0):
            raise ValidationError("latitude/longitude out of range")
        if payload.speed is not None and not payload.speed >= 0.0:
            raise ValidationError("speed must be non-negative")
    elif isinstance(payload, BatteryPayload):
        if not 0.0 <= payload.level <= 100.0:
            raise ValidationError("battery level out of range")
        if payload.status not in BATTERY_STATUSES:
            raise ValidationError(f"bad battery status {payload.status!r}")
    elif isinstance(payload, CallPayload):
        if payload.direction not in CALL_DIRECTIONS:
            raise ValidationError(f"bad call direction {payload.direction!r}")
        if not payload.duration_s >= 0.0:
            raise ValidationError("call duration must be non-negative")
        if not payload.contact:
            raise ValidationError("call contact token is empty")
    elif isinstance(payload, MessagePayload):
        if payload.direction not in MESSAGE_DIRECTIONS:
            raise ValidationError(f"bad message direction {payload.direction!r}")
        if not payload.contact:
            raise ValidationError("message contact token is empty")
    elif isinstance(payload, AppPayload):
        if not payload.package:
            raise ValidationError("empty package id")
        if payload.end_ms < payload.start_ms:
            raise ValidationError("app episode ends before it starts")


@dataclass(frozen=True)
class SensorEvent:
    participant_id: str
    kind: SensorKind
    timestamp: int  # epoch milliseconds, UTC
    payload: Payload

    def __post_init__(self) -> None:
        if not self.timestamp > 0:
            raise ValidationError("timestamp must be strictly positive")
        _check_payload(self.kind, self.payload)


# --- ULS-8 ----------------------------------------------------------------

N_ITEMS = 8
SCORE_MIN, SCORE_MAX = 1, 4
# 1-indexed; the two positively worded items. Every module reads this constant.
REVERSE_ITEMS: frozenset[int] = frozenset({3, 6})

ITEM_TEXTS: tuple[str, ...] = (
    "I lack companionship.",
    "There is no one I can turn to.",
    "I am an outgoing person.",
    "I feel left out.",
    "I feel isolated from others.",
    "I can find companionship when I want it.",
    "I am unhappy being so withdrawn.",
    "People are around me but not with me.",
)


def _validate_items(item_scores: Sequence[int]) -> tuple[int, ...]:
    scores = tuple(item_scores)
    if len(scores) != N_ITEMS:
        raise ValidationError(f"expected {N_ITEMS} item scores, got {len(scores)}")
    for i, s in enumerate(scores, start=1):
        if isinstance(s, bool) or not isinstance(s, int) or not SCORE_MIN <= s <= SCORE_MAX:
            raise ValidationError(f"item {i}: score {s!r} outside {SCORE_MIN}..{SCORE_MAX}")
    return scores


def scored_items(item_scores: Sequence[int]) -> tuple[int, ...]:
    """Item values after reverse-coding items 3 and 6."""
    scores = _validate_items(item_scores)
    return tuple(
        (SCORE_MIN + SCORE_MAX - s) if i in REVERSE_ITEMS else s
        for i, s in enumerate(scores, start=1)
    )


def score_total(item_scores: Sequence[int]) -> int:
    """ULS-8 total (8..32) with the reverse-worded items flipped."""
    return sum(scored_items(item_scores))


def item_text(index: int) -> str:
    if isinstance(index, bool) or not isinstance(index, int) or not 1 <= index <= N_ITEMS:
        raise ValidationError(f"item index {index!r} outside 1..{N_ITEMS}")
    return ITEM_TEXTS[index - 1]


@dataclass(frozen=True)
class Uls8Record:
    item_scores: tuple[int, ...]
    total: int = field(init=False)

    def __post_init__(self) -> None:
        scores = _validate_items(self.item_scores)
        object.__setattr__(self, "item_scores", scores)
        object.__setattr__(self, "total", score_total(scores))

    @property
    def reverse_items(self) -> frozenset[int]:
        return REVERSE_ITEMS


@dataclass(frozen=True)
class AssessmentPoint:
    participant_id: str
    stage: Stage
    assessment_date: Optional[dt.date]
    record: Uls8Record


def index_assessments(
    points: Sequence[AssessmentPoint],
) -> dict[tuple[str, Stage], AssessmentPoint]:
    """Key assessments by (participant, stage), rejecting duplicates."""
    out: dict[tuple[str, Stage], AssessmentPoint] = {}
    for p in points:
        key = (p.participant_id, p.stage)
        if key in out:
            raise ValidationError(f"duplicate assessment for {key[0]} at {key[1]}")
        out[key] = p
    return out
