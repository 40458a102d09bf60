from .backends import (
    Backend,
    BackendConfig,
    BackendError,
    GeminiAdapter,
    LiveBackend,
    MockBackend,
    RecordingBackend,
    ReplayBackend,
    make_backend,
    read_recordings,
    write_recordings,
)
from .experiment import (
    ExperimentResult,
    PredictionRow,
    read_predictions,
    run_experiment,
    write_predictions,
    write_prompts,
)
from .parsing import (
    ERROR_CODES,
    LlmPrediction,
    PredictionEntry,
    ResponseParseError,
    parse_response,
    serialize,
    try_parse,
)
from .prompts import PromptMode, PromptSpec, build_spec, prompt_hash, render_prompt

__all__ = [
    "Backend",
    "BackendConfig",
    "BackendError",
    "ERROR_CODES",
    "ExperimentResult",
    "GeminiAdapter",
    "LiveBackend",
    "LlmPrediction",
    "MockBackend",
    "PredictionEntry",
    "PredictionRow",
    "PromptMode",
    "PromptSpec",
    "RecordingBackend",
    "ReplayBackend",
    "ResponseParseError",
    "build_spec",
    "make_backend",
    "parse_response",
    "prompt_hash",
    "read_predictions",
    "read_recordings",
    "render_prompt",
    "run_experiment",
    "serialize",
    "try_parse",
    "write_predictions",
    "write_prompts",
    "write_recordings",
]
