"""Validation of model output against the 8-entry response format."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional

from ..core import N_ITEMS, SCORE_MAX, SCORE_MIN

MALFORMED = "malformed_json"
NOT_ARRAY = "not_array"
ARITY = "arity"
SCHEMA = "schema"
ENTRY_RANGE = "entry_range"
SCORE_RANGE = "score_range"
DUPLICATE = "duplicate"

ERROR_CODES = (MALFORMED, NOT_ARRAY, ARITY, SCHEMA, ENTRY_RANGE, SCORE_RANGE, DUPLICATE)


class ResponseParseError(ValueError):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class PredictionEntry:
    entry: int
    score: int
    reason: str


@dataclass(frozen=True)
class LlmPrediction:
    entries: tuple[PredictionEntry, ...]
    raw_response: str = ""
    valid: bool = True
    error: Optional[str] = None

    @property
    def scores(self) -> tuple[int, ...]:
        return tuple(e.score for e in self.entries)


_FENCE = re.compile(r"^\s*```[A-Za-z0-9_-]*[ \t]*\n(.*?)\n?```\s*$", re.S)


def strip_fences(raw: str) -> str:
    m = _FENCE.match(raw)
    return m.group(1) if m else raw.strip()


def _load(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    # tolerate prose around a single array
    lo, hi = text.find("["), text.rfind("]")
    if 0 <= lo < hi:
        try:
            return json.loads(text[lo : hi + 1])
        except json.JSONDecodeError:
            pass
    raise ResponseParseError(MALFORMED, "response is not valid JSON")


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def parse_response(raw: str) -> LlmPrediction:
    """Parse a model response into a valid ``LlmPrediction``.

    Raises:
        ResponseParseError: with ``code`` one of ``ERROR_CODES``.
    """
    data = _load(strip_fences(raw))
    if not isinstance(data, list):
        raise ResponseParseError(NOT_ARRAY, f"expected a JSON array, got {type(data).__name__}")
    if len(data) != N_ITEMS:
        raise ResponseParseError(ARITY, f"expected {N_ITEMS} entries, got {len(data)}")
    entries: dict[int, PredictionEntry] = {}
    for obj in data:
        if not isinstance(obj, dict) or not {"entry", "score"} <= obj.keys():
            raise ResponseParseError(SCHEMA, f"entry object lacks entry/score: {obj!r}")
        entry, score, reason = obj["entry"], obj["score"], obj.get("reason", "")
        if not _is_int(entry) or not isinstance(reason, str):
            raise ResponseParseError(SCHEMA, f"bad field types in {obj!r}")
        if not 1 <= entry <= N_ITEMS:
            raise ResponseParseError(ENTRY_RANGE, f"entry {entry} outside 1..{N_ITEMS}")
        if not _is_int(score) or not SCORE_MIN <= score <= SCORE_MAX:
            raise ResponseParseError(SCORE_RANGE, f"entry {entry}: score {score!r} outside 1..4")
        if entry in entries:
            raise ResponseParseError(DUPLICATE, f"entry {entry} appears twice")
        entries[entry] = PredictionEntry(entry, score, reason)
    return LlmPrediction(tuple(entries[k] for k in sorted(entries)), raw)


def try_parse(raw: str) -> LlmPrediction:
    """Like ``parse_response`` but returns an invalid prediction instead of raising."""
    try:
        return parse_response(raw)
    except ResponseParseError as exc:
        return LlmPrediction((), raw, False, exc.code)


def serialize(prediction: LlmPrediction) -> str:
    return json.dumps(
        [{"entry": e.entry, "score": e.score, "reason": e.reason} for e in prediction.entries],
        ensure_ascii=False,
    )
