import json
import logging

import pytest

import helpers
from lonesense.core import SensorKind, Stage
from lonesense.features import build_catalog
from lonesense.llm import (
    BackendConfig,
    BackendError,
    LiveBackend,
    MockBackend,
    PromptMode,
    RecordingBackend,
    ReplayBackend,
    make_backend,
    parse_response,
    prompt_hash,
    read_predictions,
    read_recordings,
    run_experiment,
    write_predictions,
    write_prompts,
    write_recordings,
)

CATALOG = build_catalog()


def test_mock_is_deterministic_and_valid():
    m = MockBackend()
    a, b = m.complete("hello"), m.complete("hello")
    assert a == b
    assert parse_response(a).valid
    assert m.complete("hello") != m.complete("hello!")


def test_mock_invalid_first_attempt():
    m = MockBackend(invalid_every=1)
    assert m.complete("x", 0) == "I cannot answer that."
    assert parse_response(m.complete("x", 1)).valid


def test_replay_per_attempt(tmp_path):
    h = prompt_hash("p")
    rec = {h: ["garbage", '[{"entry": 1, "score": 1}]']}
    write_recordings(tmp_path / "r.jsonl", rec)
    assert read_recordings(tmp_path / "r.jsonl") == rec
    r = ReplayBackend(tmp_path / "r.jsonl")
    assert r.complete("p", 0) == "garbage"
    assert r.complete("p", 1) == rec[h][1]
    assert r.complete("p", 5) == rec[h][1]
    with pytest.raises(BackendError):
        r.complete("other")


def test_recording_then_replay_identical():
    windows, _ = helpers.toy_windows(CATALOG)
    rec = RecordingBackend(MockBackend(invalid_every=3))
    first = run_experiment(windows, CATALOG, PromptMode.ZERO_SHOT, list(SensorKind), rec)
    again = run_experiment(windows, CATALOG, PromptMode.ZERO_SHOT, list(SensorKind), ReplayBackend(rec.recordings))
    assert [r.to_json() for r in first.rows] == [r.to_json() for r in again.rows]


def fake_transport(calls):
    def send(url, body, headers, timeout):
        calls.append((url, json.loads(body), headers, timeout))
        text = json.dumps([{"entry": k, "score": 2, "reason": "r"} for k in range(1, 9)])
        return json.dumps({"candidates": [{"content": {"parts": [{"text": text}]}}]}).encode()

    return send


def test_live_backend_with_fake_transport(monkeypatch, caplog):
    monkeypatch.setenv("TEST_KEY", "s3cret-value")
    calls = []
    cfg = BackendConfig(backend="live", credential_env="TEST_KEY", endpoint="http://example.invalid/x")
    backend = make_backend(cfg, fake_transport(calls))
    with caplog.at_level(logging.INFO, logger="lonesense.llm.backends"):
        out = backend.complete("prompt text")
    assert parse_response(out).scores == (2,) * 8
    url, body, headers, _ = calls[0]
    assert body["contents"][0]["parts"][0]["text"] == "prompt text"
    assert body["generationConfig"]["temperature"] == 0.0
    assert headers["x-goog-api-key"] == "s3cret-value"
    assert "s3cret-value" not in caplog.text
    assert "<redacted>" in caplog.text


def test_live_backend_needs_credential(monkeypatch):
    monkeypatch.delenv("NOPE_KEY", raising=False)
    with pytest.raises(BackendError):
        LiveBackend(BackendConfig(backend="live", credential_env="NOPE_KEY"))


def test_live_backend_bad_body(monkeypatch):
    monkeypatch.setenv("TEST_KEY", "k")
    b = LiveBackend(BackendConfig(backend="live", credential_env="TEST_KEY"), lambda *a: b"not json")
    with pytest.raises(BackendError):
        b.complete("p")


def test_backend_config_validation():
    with pytest.raises(ValueError):
        BackendConfig(backend="other")
    with pytest.raises(ValueError):
        BackendConfig(temperature=0.7)
    BackendConfig(temperature=0.7, experiment_mode=False)
    with pytest.raises(BackendError):
        make_backend(BackendConfig(backend="replay"))


def test_experiment_arity_and_one_shot_scores():
    windows, points = helpers.toy_windows(CATALOG, n=2)
    zero = run_experiment(windows, CATALOG, PromptMode.ZERO_SHOT, list(SensorKind), MockBackend())
    assert len(zero.rows) == 14
    one = run_experiment(windows, CATALOG, PromptMode.ONE_SHOT, [SensorKind.KEYBOARD], MockBackend())
    mid = {p.participant_id: p for p in points if p.stage is Stage.MIDTERM}
    for (pid, _), prompt in one.prompts.items():
        scores = ", ".join(str(s) for s in mid[pid].record.item_scores)
        assert f"The corresponding ULS-8 item scores were: {scores} (for entries 1 to 8)" in prompt


def test_per_sensor_isolation():
    windows, _ = helpers.toy_windows(CATALOG, n=1)
    res = run_experiment(windows, CATALOG, PromptMode.ZERO_SHOT, [SensorKind.KEYBOARD], MockBackend())
    prompt = next(iter(res.prompts.values()))
    lines = [l for l in prompt.splitlines() if "(weekly average" in l]
    keyboard = {f.description for f in CATALOG.for_sensor(SensorKind.KEYBOARD)}
    assert len(lines) == 2 * len(keyboard)
    assert all(l.split(",")[0] in keyboard for l in lines)


def test_one_shot_skips_without_midterm():
    windows, _ = helpers.toy_windows(CATALOG, n=2)
    windows[Stage.MIDTERM] = windows[Stage.MIDTERM][:1]
    res = run_experiment(windows, CATALOG, PromptMode.ONE_SHOT, [SensorKind.SCREEN], MockBackend())
    assert [r.participant_id for r in res.rows] == ["P001"]
    assert res.skipped == [("P002", "no midterm example")]


def test_retries_and_invalid_rows():
    windows, _ = helpers.toy_windows(CATALOG, n=2)

    class Broken:
        name = "broken"

        def complete(self, prompt, attempt=0):
            return "nope"

    res = run_experiment(windows, CATALOG, PromptMode.ZERO_SHOT, [SensorKind.SCREEN], Broken(), max_retries=2)
    assert res.invalid_count == 2
    assert all(r.attempts == 3 and r.error == "malformed_json" for r in res.rows)


def test_concurrency_does_not_change_output():
    windows, _ = helpers.toy_windows(CATALOG, n=3)
    a = run_experiment(windows, CATALOG, PromptMode.ONE_SHOT, list(SensorKind), MockBackend(), max_in_flight=1)
    b = run_experiment(windows, CATALOG, PromptMode.ONE_SHOT, list(SensorKind), MockBackend(), max_in_flight=4)
    assert [r.to_json() for r in a.rows] == [r.to_json() for r in b.rows]


def test_prediction_files(tmp_path):
    windows, _ = helpers.toy_windows(CATALOG, n=2)
    res = run_experiment(windows, CATALOG, PromptMode.ZERO_SHOT, [SensorKind.CALLS], MockBackend())
    write_predictions(tmp_path / "p.jsonl", res.rows)
    assert read_predictions(tmp_path / "p.jsonl") == res.rows
    write_prompts(tmp_path / "prompts", res)
    assert (tmp_path / "prompts" / "EndOfSemester" / "Calls" / "P001.txt").read_text() == res.prompts[("P001", SensorKind.CALLS)]
