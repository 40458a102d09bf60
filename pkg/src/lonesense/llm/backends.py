"""LLM backends: deterministic mock, hash-keyed replay, and a thin HTTP client."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol, Union

from ..core import N_ITEMS
from .prompts import prompt_hash

log = logging.getLogger(__name__)

DEFAULT_ENDPOINT = (
    "https://generativelanguage.googleapis.com/v1beta/models/gemini-2.0-flash:generateContent"
)


class BackendError(RuntimeError):
    """The backend could not produce a response (unavailable, no credential, no recording)."""


@dataclass(frozen=True)
class BackendConfig:
    backend: str = "mock"  # mock | replay | live
    endpoint: str = DEFAULT_ENDPOINT
    credential_env: str = "GEMINI_API_KEY"
    temperature: float = 0.0
    timeout_s: float = 60.0
    max_retries: int = 2
    max_in_flight: int = 4
    replay_path: Optional[str] = None
    experiment_mode: bool = True

    def __post_init__(self) -> None:
        if self.backend not in ("mock", "replay", "live"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.experiment_mode and self.temperature != 0.0:
            raise ValueError("temperature is fixed at 0 in experiment mode")
        if self.max_retries < 0 or self.max_in_flight < 1:
            raise ValueError("max_retries must be >= 0 and max_in_flight >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


class Backend(Protocol):
    name: str

    def complete(self, prompt: str, attempt: int = 0) -> str: ...


class MockBackend:
    """Valid 8-entry arrays derived from the prompt hash.

    ``invalid_every`` > 0 makes every n-th first attempt (by hash) return an
    unparsable reply, to exercise retry handling.
    """

    name = "mock"

    def __init__(self, invalid_every: int = 0) -> None:
        self.invalid_every = invalid_every

    def complete(self, prompt: str, attempt: int = 0) -> str:
        digest = hashlib.sha256(prompt.encode("utf-8")).digest()
        if self.invalid_every and attempt == 0 and digest[-1] % self.invalid_every == 0:
            return "I cannot answer that."
        entries = [
            {
                "entry": k,
                "score": 1 + digest[k - 1] % 4,
                "reason": f"Deterministic mock rationale for item {k}.",
            }
            for k in range(1, N_ITEMS + 1)
        ]
        return json.dumps(entries)


Recordings = dict[str, list[str]]  # prompt hash -> response per attempt


def read_recordings(path: Union[str, Path]) -> Recordings:
    out: Recordings = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                attempts = out.setdefault(rec["prompt_hash"], [])
                k = rec.get("attempt", len(attempts))
                attempts.extend([""] * (k + 1 - len(attempts)))
                attempts[k] = rec["response"]
    return out


def write_recordings(path: Union[str, Path], recordings: Recordings) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for h in sorted(recordings):
            for k, response in enumerate(recordings[h]):
                rec = {"prompt_hash": h, "attempt": k, "response": response}
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


class ReplayBackend:
    """Serves recorded responses keyed by prompt hash and attempt number."""

    name = "replay"

    def __init__(self, recordings: Union[Recordings, str, Path]) -> None:
        if isinstance(recordings, dict):
            self.recordings = {h: list(v) for h, v in recordings.items()}
        else:
            self.recordings = read_recordings(recordings)

    def complete(self, prompt: str, attempt: int = 0) -> str:
        h = prompt_hash(prompt)
        if h not in self.recordings:
            raise BackendError(f"no recorded response for prompt {h[:12]}")
        responses = self.recordings[h]
        return responses[min(attempt, len(responses) - 1)]


class RecordingBackend:
    """Wraps a backend and records every response by prompt hash and attempt."""

    def __init__(self, inner: Backend) -> None:
        self.inner = inner
        self.name = inner.name
        self.recordings: Recordings = {}
        self._lock = threading.Lock()

    def complete(self, prompt: str, attempt: int = 0) -> str:
        response = self.inner.complete(prompt, attempt)
        with self._lock:
            attempts = self.recordings.setdefault(prompt_hash(prompt), [])
            attempts.extend([""] * (attempt + 1 - len(attempts)))
            attempts[attempt] = response
        return response


# --- live HTTP -----------------------------------------------------------

Transport = Callable[[str, bytes, dict, float], bytes]


def _urllib_transport(url: str, body: bytes, headers: dict, timeout: float) -> bytes:
    req = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.read()
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise BackendError(f"request failed: {exc}") from exc


class GeminiAdapter:
    """Wire format of the generateContent endpoint."""

    credential_header = "x-goog-api-key"

    def request(self, prompt: str, temperature: float) -> dict:
        return {
            "contents": [{"role": "user", "parts": [{"text": prompt}]}],
            "generationConfig": {"temperature": temperature},
        }

    def response_text(self, payload: dict) -> str:
        try:
            parts = payload["candidates"][0]["content"]["parts"]
            return "".join(p.get("text", "") for p in parts)
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"unexpected response shape: {exc}") from exc


class LiveBackend:
    name = "live"

    def __init__(
        self,
        config: BackendConfig,
        transport: Optional[Transport] = None,
        adapter: Optional[GeminiAdapter] = None,
    ) -> None:
        self.config = config
        self.transport = transport or _urllib_transport
        self.adapter = adapter or GeminiAdapter()
        key = os.environ.get(config.credential_env)
        if not key:
            raise BackendError(f"credential variable {config.credential_env} is not set")
        self._key = key

    def complete(self, prompt: str, attempt: int = 0) -> str:
        body = json.dumps(self.adapter.request(prompt, self.config.temperature)).encode("utf-8")
        headers = {"Content-Type": "application/json", self.adapter.credential_header: self._key}
        log.info(
            "POST %s prompt=%s attempt=%d headers=%s",
            self.config.endpoint,
            prompt_hash(prompt)[:12],
            attempt,
            {k: ("<redacted>" if k == self.adapter.credential_header else v) for k, v in headers.items()},
        )
        raw = self.transport(self.config.endpoint, body, headers, self.config.timeout_s)
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise BackendError("backend returned non-JSON body") from exc
        text = self.adapter.response_text(payload)
        log.info("response prompt=%s chars=%d", prompt_hash(prompt)[:12], len(text))
        return text


def make_backend(config: BackendConfig, transport: Optional[Transport] = None) -> Backend:
    if config.backend == "mock":
        return MockBackend()
    if config.backend == "replay":
        if not config.replay_path:
            raise BackendError("replay backend needs replay_path")
        try:
            return ReplayBackend(config.replay_path)
        except OSError as exc:
            raise BackendError(f"cannot read recordings: {exc}") from exc
    return LiveBackend(config, transport)
