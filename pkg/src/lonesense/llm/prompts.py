"""Zero-shot and one-shot prompt rendering.

The templates live in ``templates/`` and are filled by exact slot replacement;
nothing else in the text is touched, so the rendered bytes are stable.
"""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

from ..assembly import FeatureWindow
from ..core import ITEM_TEXTS, N_ITEMS, SensorKind, ValidationError, _validate_items
from ..features.catalog import FeatureCatalog
from ..features.describe import describe_feature

WEEK_HEADER = (
    "Daily activity metrics from Day 1 to Day 7 of the {ordinal} week preceding "
    "the administration of the UCLA Loneliness Scale questionnaire:"
)

_SLOT = re.compile(
    r"\{(sensor|items|feature description|feature description week [12]"
    r"|example week [12]|example scores)\}"
)


class PromptMode(str, enum.Enum):
    ZERO_SHOT = "zero_shot"
    ONE_SHOT = "one_shot"

    @classmethod
    def parse(cls, text: str) -> "PromptMode":
        key = text.lower().replace("-", "_")
        aliases = {"zero": cls.ZERO_SHOT, "zero_shot": cls.ZERO_SHOT, "one": cls.ONE_SHOT, "one_shot": cls.ONE_SHOT}
        if key not in aliases:
            raise ValidationError(f"unknown prompt mode {text!r}")
        return aliases[key]


def load_template(mode: PromptMode) -> str:
    text = resources.files(__package__).joinpath("templates", f"{mode.value}.txt").read_text("utf-8")
    return text[:-1] if text.endswith("\n") else text


@dataclass(frozen=True)
class PromptSpec:
    mode: PromptMode
    sensor: SensorKind
    week1: tuple[str, ...]  # subject description lines, Days 1-7
    week2: tuple[str, ...]  # Days 8-14
    example_week1: tuple[str, ...] = ()
    example_week2: tuple[str, ...] = ()
    example_scores: Optional[tuple[int, ...]] = None  # raw 1-4 responses


def items_block() -> str:
    return "\n".join(f"{i}. {text}" for i, text in enumerate(ITEM_TEXTS, start=1))


def week_block(ordinal: str, lines: Sequence[str]) -> str:
    return WEEK_HEADER.format(ordinal=ordinal) + "\n" + "\n".join(lines)


def render_prompt(spec: PromptSpec) -> str:
    if not spec.week1 or not spec.week2:
        raise ValidationError("prompt needs description lines for both weeks")
    slots = {"sensor": spec.sensor.value, "items": items_block()}
    if spec.mode is PromptMode.ZERO_SHOT:
        if spec.example_week1 or spec.example_week2 or spec.example_scores is not None:
            raise ValidationError("zero-shot prompts take no example blocks")
        slots["feature description"] = (
            week_block("first", spec.week1) + "\n\n" + week_block("second", spec.week2)
        )
    else:
        if not spec.example_week1 or not spec.example_week2 or spec.example_scores is None:
            raise ValidationError("one-shot prompts need both example weeks and 8 example scores")
        scores = _validate_items(spec.example_scores)
        slots.update(
            {
                "example week 1": "\n".join(spec.example_week1),
                "example week 2": "\n".join(spec.example_week2),
                "example scores": ", ".join(str(s) for s in scores),
                "feature description week 1": "\n".join(spec.week1),
                "feature description week 2": "\n".join(spec.week2),
            }
        )
    template = load_template(spec.mode)
    return _SLOT.sub(lambda m: slots[m.group(1)], template)


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def describe_week(window: FeatureWindow, catalog: FeatureCatalog, sensor: SensorKind, week: int) -> tuple[str, ...]:
    """One description line per catalog feature of ``sensor`` for the given week."""
    days = window.week(week)
    return tuple(describe_feature(f, [d.values[f.name] for d in days]) for f in catalog.for_sensor(sensor))


def build_spec(
    mode: PromptMode,
    sensor: SensorKind,
    window: FeatureWindow,
    catalog: FeatureCatalog,
    example: Optional[FeatureWindow] = None,
) -> PromptSpec:
    week1 = describe_week(window, catalog, sensor, 1)
    week2 = describe_week(window, catalog, sensor, 2)
    if mode is PromptMode.ZERO_SHOT:
        return PromptSpec(mode, sensor, week1, week2)
    if example is None:
        raise ValidationError("one-shot prompt needs the earlier example window")
    scores = example.assessment.record.item_scores
    assert len(scores) == N_ITEMS
    return PromptSpec(
        mode,
        sensor,
        week1,
        week2,
        describe_week(example, catalog, sensor, 1),
        describe_week(example, catalog, sensor, 2),
        tuple(scores),
    )
