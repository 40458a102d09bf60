"""Per-sensor zero-/one-shot prediction runs over end-of-semester windows."""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from ..assembly import FeatureWindow
from ..core import SensorKind, Stage
from ..features.catalog import FeatureCatalog
from .backends import Backend
from .parsing import LlmPrediction, PredictionEntry, try_parse
from .prompts import PromptMode, build_spec, prompt_hash, render_prompt

TARGET_STAGE = Stage.END_OF_SEMESTER
EXAMPLE_STAGE = Stage.MIDTERM


@dataclass(frozen=True)
class PredictionRow:
    participant_id: str
    sensor: SensorKind
    mode: PromptMode
    entries: tuple[PredictionEntry, ...]
    valid: bool
    prompt_hash: str
    raw_hash: str
    raw_response: str
    attempts: int
    error: Optional[str] = None

    @property
    def prediction(self) -> LlmPrediction:
        return LlmPrediction(self.entries, self.raw_response, self.valid, self.error)

    def to_json(self) -> dict:
        return {
            "participant": self.participant_id,
            "sensor": self.sensor.value,
            "mode": self.mode.value,
            "entries": [{"entry": e.entry, "score": e.score, "reason": e.reason} for e in self.entries],
            "valid": self.valid,
            "error": self.error,
            "attempts": self.attempts,
            "prompt_hash": self.prompt_hash,
            "raw_hash": self.raw_hash,
            "raw": self.raw_response,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "PredictionRow":
        return cls(
            rec["participant"],
            SensorKind.parse(rec["sensor"]),
            PromptMode.parse(rec["mode"]),
            tuple(PredictionEntry(e["entry"], e["score"], e["reason"]) for e in rec["entries"]),
            rec["valid"],
            rec["prompt_hash"],
            rec["raw_hash"],
            rec.get("raw", ""),
            rec.get("attempts", 1),
            rec.get("error"),
        )


@dataclass
class ExperimentResult:
    rows: list[PredictionRow]
    prompts: dict[tuple[str, SensorKind], str] = field(default_factory=dict)
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (participant, reason)

    @property
    def invalid_count(self) -> int:
        return sum(not r.valid for r in self.rows)


def _raw_hash(raw: str) -> str:
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()


def predict_one(backend: Backend, prompt: str, max_retries: int) -> tuple[LlmPrediction, int]:
    """Query until a response parses or ``max_retries`` extra attempts are spent."""
    attempt = 0
    while True:
        pred = try_parse(backend.complete(prompt, attempt))
        attempt += 1
        if pred.valid or attempt > max_retries:
            return pred, attempt


def run_experiment(
    windows: Mapping[Stage, Sequence[FeatureWindow]],
    catalog: FeatureCatalog,
    mode: PromptMode,
    sensors: Sequence[SensorKind],
    backend: Backend,
    max_retries: int = 2,
    max_in_flight: int = 1,
) -> ExperimentResult:
    """One prompt per (participant, sensor) on the end-of-semester windows.

    One-shot prompts take the same participant's midterm window and item
    responses as the worked example; participants without one are skipped.
    """
    targets = {w.participant_id: w for w in windows.get(TARGET_STAGE, ())}
    examples = {w.participant_id: w for w in windows.get(EXAMPLE_STAGE, ())}
    result = ExperimentResult([])
    jobs: list[tuple[str, SensorKind, str]] = []
    for pid in sorted(targets):
        example = examples.get(pid)
        if mode is PromptMode.ONE_SHOT and example is None:
            result.skipped.append((pid, "no midterm example"))
            continue
        for sensor in sensors:
            spec = build_spec(mode, sensor, targets[pid], catalog, example)
            prompt = render_prompt(spec)
            result.prompts[(pid, sensor)] = prompt
            jobs.append((pid, sensor, prompt))

    def work(job):
        pid, sensor, prompt = job
        pred, attempts = predict_one(backend, prompt, max_retries)
        return PredictionRow(
            pid,
            sensor,
            mode,
            pred.entries,
            pred.valid,
            prompt_hash(prompt),
            _raw_hash(pred.raw_response),
            pred.raw_response,
            attempts,
            pred.error,
        )

    if max_in_flight > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            rows = list(pool.map(work, jobs))
    else:
        rows = [work(j) for j in jobs]
    # keyed assembly: order never depends on scheduling
    result.rows = sorted(rows, key=lambda r: (r.participant_id, r.sensor.value))
    return result


def write_predictions(path: Union[str, Path], rows: Sequence[PredictionRow]) -> None:
    ordered = sorted(rows, key=lambda r: (r.mode.value, r.participant_id, r.sensor.value))
    with open(path, "w", encoding="utf-8") as fh:
        for r in ordered:
            fh.write(json.dumps(r.to_json(), sort_keys=True, ensure_ascii=False) + "\n")


def read_predictions(path: Union[str, Path]) -> list[PredictionRow]:
    with open(path, encoding="utf-8") as fh:
        return [PredictionRow.from_json(json.loads(line)) for line in fh if line.strip()]


def write_prompts(root: Union[str, Path], result: ExperimentResult, stage: Stage = TARGET_STAGE) -> None:
    """Save prompts as ``<stage>/<sensor>/<participant>.txt`` under ``root``."""
    for (pid, sensor), prompt in sorted(result.prompts.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        path = Path(root) / stage.value / sensor.value / f"{pid}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(prompt, encoding="utf-8")
