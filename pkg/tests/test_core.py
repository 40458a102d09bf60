import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from lonesense.core import (
    AssessmentPoint,
    CallPayload,
    ScreenPayload,
    SensorEvent,
    SensorKind,
    Stage,
    Uls8Record,
    ValidationError,
    index_assessments,
    item_text,
    score_total,
)

items = st.lists(st.integers(1, 4), min_size=8, max_size=8)


@pytest.mark.parametrize(
    "scores,total",
    [([1, 1, 4, 1, 1, 4, 1, 1], 8), ([4, 4, 1, 4, 4, 1, 4, 4], 32), ([2, 3, 2, 1, 4, 3, 2, 2], 19)],
)
def test_score_total_examples(scores, total):
    assert score_total(scores) == total


def test_score_total_exhaustive():
    for v in itertools.product(range(1, 5), repeat=8):
        assert score_total(v) == oracles.uls8_total(v)


@given(items)
def test_mirror_sums_to_40(v):
    assert score_total(v) + score_total([5 - s for s in v]) == 40


@pytest.mark.parametrize("bad", [[1] * 7, [1] * 9, [0, 1, 1, 1, 1, 1, 1, 1], [1, 1, 1, 1, 1, 1, 1, 5], [1.5] + [1] * 7])
def test_score_total_rejects(bad):
    with pytest.raises(ValidationError):
        score_total(bad)


def test_error_names_offending_item():
    with pytest.raises(ValidationError, match="item 5"):
        score_total([1, 1, 1, 1, 9, 1, 1, 1])


def test_item_text():
    assert item_text(1) == "I lack companionship."
    assert item_text(3) == "I am an outgoing person."
    assert item_text(8) == "People are around me but not with me."
    for bad in (0, 9, True):
        with pytest.raises(ValidationError):
            item_text(bad)


def test_record_total_and_reverse_items():
    r = Uls8Record((2, 3, 2, 1, 4, 3, 2, 2))
    assert r.total == 19
    assert r.reverse_items == {3, 6}
    assert r.item_scores == (2, 3, 2, 1, 4, 3, 2, 2)


def test_event_validation():
    with pytest.raises(ValidationError):
        SensorEvent("P1", SensorKind.SCREEN, 0, ScreenPayload("unlock"))
    with pytest.raises(ValidationError):
        SensorEvent("P1", SensorKind.SCREEN, 10, CallPayload("incoming", 1.0, "x"))
    with pytest.raises(ValidationError):
        SensorEvent("P1", SensorKind.SCREEN, 10, ScreenPayload("wiggle"))


def test_duplicate_assessments_rejected():
    rec = Uls8Record((1,) * 8)
    p = AssessmentPoint("P1", Stage.MIDTERM, None, rec)
    with pytest.raises(ValidationError):
        index_assessments([p, p])


def test_enum_parsing():
    assert SensorKind.parse("keyboard") is SensorKind.KEYBOARD
    assert Stage.parse("endofsemester") is Stage.END_OF_SEMESTER
    with pytest.raises(ValidationError):
        SensorKind.parse("wifi")


def test_random_vectors_in_range():
    rng = np.random.default_rng(0)
    for v in rng.integers(1, 5, size=(500, 8)):
        assert 8 <= score_total([int(x) for x in v]) <= 32
