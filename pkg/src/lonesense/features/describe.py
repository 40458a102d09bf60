"""Textual feature lines for prompts: ``<description>, v1, ..., v7 (weekly average a)``."""

from __future__ import annotations

from typing import Sequence, Union

from ..core import ValidationError
from .catalog import FeatureDef

WEEK_DAYS = 7


def format_number(x: float) -> str:
    """Two-decimal rendering with trailing zeros dropped; integers have no point."""
    text = f"{float(x):.2f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def describe_feature(feature: Union[FeatureDef, str], daily_values: Sequence[float]) -> str:
    values = list(daily_values)
    if len(values) != WEEK_DAYS:
        raise ValidationError(f"expected {WEEK_DAYS} daily values, got {len(values)}")
    description = feature.description if isinstance(feature, FeatureDef) else feature
    average = sum(values) / WEEK_DAYS
    cells = ", ".join(format_number(v) for v in values)
    return f"{description}, {cells} (weekly average {format_number(average)})"
