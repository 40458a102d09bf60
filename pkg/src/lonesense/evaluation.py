"""MAE/MBE metrics, zero- to one-shot change rates, and the LLM metrics report."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import N_ITEMS, SENSORS, AssessmentPoint, SensorKind, Stage, ValidationError, scored_items

if TYPE_CHECKING:  # pragma: no cover
    from .llm.experiment import PredictionRow
    from .llm.parsing import LlmPrediction

BIAS_TOL = 1e-9


class InvariantViolation(AssertionError):
    """A computed metric pair broke |MBE| <= MAE."""


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.size == 0 or t.size == 0:
        raise ValueError("empty prediction or truth vector")
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} truths")
    return p, t


def mae(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def mbe(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(p - t))


def check_bias_bound(mae_value: float, mbe_value: float, context: str = "") -> None:
    if abs(mbe_value) > mae_value + BIAS_TOL * max(1.0, abs(mae_value)):
        raise InvariantViolation(f"|MBE| {abs(mbe_value)} exceeds MAE {mae_value} {context}".rstrip())


@dataclass(frozen=True)
class ErrorPair:
    mae: float
    mbe: float
    n: int

    @classmethod
    def of(cls, pred, truth, context: str = "") -> "ErrorPair":
        a, b = mae(pred, truth), mbe(pred, truth)
        check_bias_bound(a, b, context)
        return cls(a, b, len(np.atleast_1d(np.asarray(pred))))


def total_from_prediction(prediction: "LlmPrediction", reverse_coded: bool = True) -> int:
    """Sum of predicted item scores, reverse-coding items 3 and 6 unless disabled."""
    if not prediction.valid or len(prediction.entries) != N_ITEMS:
        raise ValidationError("cannot total an invalid prediction")
    scores = prediction.scores
    return sum(scored_items(scores)) if reverse_coded else sum(scores)


def change_rate(zero: float, one: float) -> Optional[float]:
    """Signed percentage change from zero-shot to one-shot; None on a zero baseline."""
    if zero == 0:
        return None
    return (one - zero) / zero * 100.0


def change_rates(zero: ErrorPair, one: ErrorPair) -> dict[str, Optional[float]]:
    return {"mae_pct": change_rate(zero.mae, one.mae), "mbe_pct": change_rate(zero.mbe, one.mbe)}


def fmt_metric(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.2f}"


def fmt_change(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.1f}%"


# --- LLM report ------------------------------------------------------------


@dataclass(frozen=True)
class ParticipantError:
    sensor: SensorKind
    mode: str
    participant_id: str
    true_total: int
    predicted_total: int

    @property
    def abs_error(self) -> int:
        return abs(self.predicted_total - self.true_total)


@dataclass
class SensorMetrics:
    sensor: SensorKind
    modes: dict[str, ErrorPair] = field(default_factory=dict)  # mode value -> totals

    def change(self) -> dict[str, Optional[float]]:
        zero, one = self.modes.get("zero_shot"), self.modes.get("one_shot")
        if zero is None or one is None:
            return {"mae_pct": None, "mbe_pct": None}
        return change_rates(zero, one)


@dataclass
class MetricsReport:
    sensors: list[SensorMetrics]
    # mode -> sensor -> item (1..8) -> MAE on raw responses
    item_grid: dict[str, dict[SensorKind, dict[int, float]]]
    participant_errors: list[ParticipantError]
    n_participants: int
    # (mode, sensor) -> predictions dropped as invalid
    excluded: dict[tuple[str, SensorKind], int]
    reverse_coded: bool = True

    @property
    def empty(self) -> bool:
        return not self.sensors

    def pairs(self) -> Iterable[ErrorPair]:
        for s in self.sensors:
            yield from s.modes.values()

    def to_dict(self) -> dict:
        return {
            "reverse_coded_totals": self.reverse_coded,
            "n_participants": self.n_participants,
            "sensors": [
                {
                    "sensor": s.sensor.value,
                    **{
                        mode: {"mae": p.mae, "mbe": p.mbe, "n": p.n}
                        for mode, p in sorted(s.modes.items())
                    },
                    "change_rate": s.change(),
                }
                for s in self.sensors
            ],
            "item_mae": {
                mode: {
                    sensor.value: {str(k): v for k, v in sorted(items.items())}
                    for sensor, items in sorted(grid.items(), key=lambda kv: kv[0].value)
                }
                for mode, grid in sorted(self.item_grid.items())
            },
            "excluded_invalid": [
                {"mode": m, "sensor": s.value, "count": n}
                for (m, s), n in sorted(self.excluded.items(), key=lambda kv: (kv[0][0], kv[0][1].value))
            ],
        }


def compute_metrics(
    rows: Sequence["PredictionRow"],
    assessments: Sequence[AssessmentPoint],
    reverse_coded: bool = True,
    stage: Stage = Stage.END_OF_SEMESTER,
) -> MetricsReport:
    """Aggregate predictions against the ``stage`` questionnaire.

    Invalid predictions are dropped pairwise and counted in ``excluded``.
    Every computed MAE/MBE pair is checked against |MBE| <= MAE.
    """
    truth: Mapping[str, AssessmentPoint] = {
        a.participant_id: a for a in assessments if a.stage is stage
    }
    grouped: dict[tuple[str, SensorKind], list["PredictionRow"]] = {}
    excluded: dict[tuple[str, SensorKind], int] = {}
    for r in rows:
        if r.participant_id not in truth:
            continue
        key = (r.mode.value, r.sensor)
        if not r.valid:
            excluded[key] = excluded.get(key, 0) + 1
            continue
        grouped.setdefault(key, []).append(r)

    sensors: dict[SensorKind, SensorMetrics] = {}
    grid: dict[str, dict[SensorKind, dict[int, float]]] = {}
    errors: list[ParticipantError] = []
    participants: set[str] = set()
    for (mode, sensor), group in sorted(grouped.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        group = sorted(group, key=lambda r: r.participant_id)
        pred_totals = [total_from_prediction(r.prediction, reverse_coded) for r in group]
        true_totals = [truth[r.participant_id].record.total for r in group]
        sensors.setdefault(sensor, SensorMetrics(sensor)).modes[mode] = ErrorPair.of(
            pred_totals, true_totals, f"({sensor.value}, {mode})"
        )
        item_mae = {}
        for k in range(1, N_ITEMS + 1):
            p = [r.entries[k - 1].score for r in group]
            t = [truth[r.participant_id].record.item_scores[k - 1] for r in group]
            pair = ErrorPair.of(p, t, f"({sensor.value}, {mode}, item {k})")
            item_mae[k] = pair.mae
        grid.setdefault(mode, {})[sensor] = item_mae
        for r, pt, tt in zip(group, pred_totals, true_totals):
            errors.append(ParticipantError(sensor, mode, r.participant_id, tt, pt))
            participants.add(r.participant_id)

    ordered = [sensors[k] for k in SENSORS if k in sensors]
    return MetricsReport(ordered, grid, errors, len(participants), excluded, reverse_coded)
