import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import helpers
from lonesense.core import SensorKind
from lonesense.evaluation import (
    ErrorPair,
    InvariantViolation,
    change_rate,
    change_rates,
    check_bias_bound,
    compute_metrics,
    fmt_change,
    mae,
    mbe,
    total_from_prediction,
)
from lonesense.features import build_catalog
from lonesense.llm import LlmPrediction, MockBackend, PredictionEntry, PromptMode, run_experiment


def pred(scores):
    return LlmPrediction(tuple(PredictionEntry(k, s, "") for k, s in enumerate(scores, start=1)))


def test_mae_mbe_examples():
    t = np.array([10.0, 20.0, 15.0])
    assert mae(t, t) == 0 and mbe(t, t) == 0
    assert mae(t + 2, t) == 2 and mbe(t + 2, t) == 2
    assert mae([10, 14], [12, 10]) == 3 and mbe([10, 14], [12, 10]) == 1


def test_mae_errors():
    with pytest.raises(ValueError):
        mae([], [])
    with pytest.raises(ValueError):
        mbe([1, 2], [1])


def test_total_from_prediction():
    assert total_from_prediction(pred([1] * 8)) == 14
    assert total_from_prediction(pred([1] * 8), reverse_coded=False) == 8
    assert total_from_prediction(pred([4] * 8)) == 26
    with pytest.raises(ValueError):
        total_from_prediction(LlmPrediction((), "", False, "arity"))


def test_change_rate_fixtures():
    assert fmt_change(change_rate(8.60, 5.17)) == "-39.9%"
    assert fmt_change(change_rate(11.10, 6.40)) == "-42.3%"
    assert fmt_change(change_rate(3.0, 3.0)) == "0.0%"
    assert change_rate(0.0, 1.0) is None
    rates = change_rates(ErrorPair(8.60, 8.32, 1), ErrorPair(5.17, 4.0, 1))
    assert fmt_change(rates["mae_pct"]) == "-39.9%"


@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), min_size=1, max_size=50))
def test_bias_bound_property(pairs):
    p, t = zip(*pairs)
    e = ErrorPair.of(p, t)
    assert abs(e.mbe) <= e.mae + 1e-9 * max(1.0, e.mae)


def test_bias_bound_violation_raises():
    check_bias_bound(8.60, 8.32)
    with pytest.raises(InvariantViolation):
        check_bias_bound(1.0, -1.5)


def test_compute_metrics_end_to_end():
    catalog = build_catalog()
    windows, points = helpers.toy_windows(catalog, n=4)
    rows = []
    for mode in PromptMode:
        rows += run_experiment(windows, catalog, mode, [SensorKind.SCREEN, SensorKind.KEYBOARD], MockBackend()).rows
    m = compute_metrics(rows, points)
    assert m.n_participants == 4
    assert [s.sensor for s in m.sensors] == [SensorKind.KEYBOARD, SensorKind.SCREEN]
    for s in m.sensors:
        assert set(s.modes) == {"zero_shot", "one_shot"}
        for p in s.modes.values():
            assert abs(p.mbe) <= p.mae and p.n == 4
    assert set(m.item_grid["zero_shot"][SensorKind.SCREEN]) == set(range(1, 9))
    assert len(m.participant_errors) == 16
    d = m.to_dict()
    assert d["sensors"][0]["sensor"] == "Keyboard"


def test_invalid_predictions_excluded():
    catalog = build_catalog()
    windows, points = helpers.toy_windows(catalog, n=3)
    rows = run_experiment(windows, catalog, PromptMode.ZERO_SHOT, [SensorKind.SCREEN], MockBackend()).rows
    import dataclasses

    rows[0] = dataclasses.replace(rows[0], valid=False, entries=(), error="arity")
    m = compute_metrics(rows, points)
    assert m.excluded == {("zero_shot", SensorKind.SCREEN): 1}
    assert m.sensors[0].modes["zero_shot"].n == 2
