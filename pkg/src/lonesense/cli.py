"""Command-line entry point: synth -> ingest -> extract -> assemble -> train-rfe
-> predict-llm -> evaluate -> report, plus ``pipeline`` for all of them.

Run layout under ``--out`` (default ``run``)::

    config.json                resolved run configuration
    raw/                       sensor logs, roster.csv, assessments.csv
    ingest/                    events.jsonl, report.json
    features/                  daily_values.csv, daily_flags.csv
    assembled/<stage>/         flat.csv, exclusions.csv
    rfe/<stage>/               trace.json, trace.csv, ranking.csv
    llm/<mode>/                predictions_<Sensor>.jsonl, responses_<Sensor>.jsonl, prompts/
    eval/                      metrics.json, table1.csv
    report/                    the report bundle

Each stage directory carries a ``manifest.json`` with the config hash and the
sha256 of every input and output file.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .assembly import (
    FlatDataset,
    build_windows,
    flatten,
    read_assessments,
    write_exclusions,
)
from .core import SENSORS, SensorKind, Stage, ValidationError
from .evaluation import InvariantViolation, MetricsReport, compute_metrics
from .features import ExtractionParams, build_catalog, extract_all, read_feature_tables, write_feature_tables
from .forest import ForestConfig
from .ingestion import (
    IngestError,
    LogSource,
    find_logs,
    merge_streams,
    parse_log,
    read_events,
    read_roster,
    write_jsonl,
)
from .llm import (
    BackendConfig,
    BackendError,
    PromptMode,
    RecordingBackend,
    ReplayBackend,
    make_backend,
    read_predictions,
    read_recordings,
    run_experiment,
    write_predictions,
    write_prompts,
    write_recordings,
)
from .report import emit_report, write_table1
from .rfe import RfeTrace, run_rfe
from .synth import CohortSpec, generate_cohort, write_cohort

log = logging.getLogger("lonesense")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_CONFIG = 4
EXIT_BACKEND = 5
EXIT_DATA = 6
EXIT_HASH_MISMATCH = 7


class MissingInput(Exception):
    pass


class ConfigError(Exception):
    pass


class HashMismatch(Exception):
    pass


# --- configuration ------------------------------------------------------------


def default_config() -> dict:
    synth = CohortSpec().to_dict()
    synth.pop("seed")
    forest = ForestConfig().to_dict()
    forest.pop("rng_seed")
    return {
        "paths": {"out_dir": "run", "raw_dir": None},
        "seed": 0,
        "synth": synth,
        "extraction": ExtractionParams().to_dict(),
        "default_timezone": "UTC",
        "min_coverage": 7,
        "target": "total",
        "stages": [s.value for s in Stage],
        "forest": forest,
        "rfe": {"folds": 3, "step": 1, "min_features": 1, "importance_source": "folds"},
        "backend": BackendConfig().to_dict(),
        "reverse_coded": True,
    }


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _read_json(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise MissingInput(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return doc


def hashed_view(cfg: dict) -> dict:
    """The configuration minus file locations; what artifacts depend on."""
    view = copy.deepcopy(cfg)
    view.pop("paths", None)
    view.get("backend", {}).pop("replay_path", None)
    return view


def config_hash(cfg: dict) -> str:
    blob = json.dumps(hashed_view(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclasses.dataclass
class Run:
    """A resolved configuration plus typed views of its parts."""

    cfg: dict
    jobs: int = 1
    force: bool = False

    def __post_init__(self) -> None:
        c = self.cfg
        try:
            self.cohort = CohortSpec.from_dict({**c["synth"], "seed": c["seed"]})
            ext = dict(c["extraction"])
            ext["app_categories"] = tuple(ext["app_categories"])
            self.params = ExtractionParams(**ext)
            self.forest = ForestConfig(**{**c["forest"], "rng_seed": c["seed"]})
            self.backend = BackendConfig(**c["backend"])
            self.stages = [Stage.parse(s) for s in c["stages"]]
            self.target = c["target"] if c["target"] == "total" else int(c["target"])
            rfe = c["rfe"]
            if rfe["importance_source"] not in ("folds", "full"):
                raise ValueError("rfe.importance_source must be 'folds' or 'full'")
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from None
        self.catalog = build_catalog(self.params.app_categories)
        self.hash = config_hash(c)

    @property
    def out(self) -> Path:
        return Path(self.cfg["paths"]["out_dir"])

    @property
    def raw(self) -> Path:
        raw = self.cfg["paths"]["raw_dir"]
        return Path(raw) if raw else self.out / "raw"

    def save(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        doc = {"config_hash": self.hash, "version": __version__, "config": self.cfg}
        (self.out / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def resolve_config(args: argparse.Namespace) -> Run:
    """Defaults <- saved run config <- ``--config`` file <- flags (flags win)."""
    cfg = default_config()
    out = Path(args.out)
    saved = out / "config.json"
    if saved.exists():
        cfg = _merge(cfg, _read_json(saved).get("config", {}))
    if args.config:
        cfg = _merge(cfg, _read_json(Path(args.config)))
    flags: dict = {"paths": {"out_dir": str(out)}}
    if args.raw is not None:
        flags["paths"]["raw_dir"] = args.raw
    if args.seed is not None:
        flags["seed"] = args.seed
    if args.n_participants is not None:
        flags.setdefault("synth", {})["n_participants"] = args.n_participants
    if args.n_trees is not None:
        flags.setdefault("forest", {})["n_trees"] = args.n_trees
    if args.rfe_step is not None:
        flags.setdefault("rfe", {})["step"] = args.rfe_step
    if args.rfe_min is not None:
        flags.setdefault("rfe", {})["min_features"] = args.rfe_min
    if args.target is not None:
        flags["target"] = args.target
    if args.backend is not None:
        flags.setdefault("backend", {})["backend"] = args.backend
    if args.replay is not None:
        flags.setdefault("backend", {})["replay_path"] = args.replay
    if args.no_reverse_coding:
        flags["reverse_coded"] = False
    cfg = _merge(cfg, flags)
    return Run(cfg, jobs=max(1, args.jobs), force=args.force)


# --- manifests ------------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _rel(path: Path, root: Path) -> str:
    try:
        return path.resolve().relative_to(root.resolve()).as_posix()
    except ValueError:
        return path.name


def write_manifest(
    run: Run, directory: Path, command: str, inputs: Sequence[Path], outputs: Sequence[Path],
    selection: Optional[dict] = None, name: str = "manifest.json",
) -> Path:
    doc = {
        "command": command,
        "config_hash": run.hash,
        "version": __version__,
        "selection": selection or {},
        "inputs": {_rel(p, run.out): _sha256(p) for p in sorted(inputs)},
        "outputs": {_rel(p, run.out): _sha256(p) for p in sorted(outputs)},
    }
    path = directory / name
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest_hash(path: Path) -> str:
    if not path.exists():
        raise MissingInput(f"missing manifest {path}; run the producing stage first")
    return json.loads(path.read_text(encoding="utf-8"))["config_hash"]


def check_hashes(run: Run, manifests: Sequence[Path]) -> None:
    seen = {p: read_manifest_hash(p) for p in manifests}
    bad = {str(p): h for p, h in seen.items() if h != run.hash}
    if bad:
        msg = f"artifacts built with a different config (current {run.hash}): {bad}"
        if not run.force:
            raise HashMismatch(msg + "; rerun the stages or pass --force")
        log.warning("%s (continuing under --force)", msg)


def _require(*paths: Path) -> None:
    for p in paths:
        if not p.exists():
            raise MissingInput(f"required input {p} not found; run the producing stage first")


# --- stages ---------------------------------------------------------------------


def cmd_synth(run: Run, args=None) -> None:
    cohort = generate_cohort(run.cohort, jobs=run.jobs)
    paths = write_cohort(cohort, run.raw)
    write_manifest(run, run.raw, "synth", [], paths)
    log.info("synth: %d participants -> %s", run.cohort.n_participants, run.raw)


def cmd_ingest(run: Run, args=None) -> None:
    if not run.raw.is_dir():
        raise MissingInput(f"raw directory {run.raw} does not exist")
    logs = find_logs(run.raw)
    if not logs:
        raise MissingInput(f"no sensor logs (<sensor>.csv / .jsonl) in {run.raw}")
    roster_path = run.raw / "roster.csv"
    zones = read_roster(roster_path) if roster_path.exists() else {}
    streams, reports = [], {}
    for kind in SENSORS:
        if kind not in logs:
            continue
        path, fmt = logs[kind]
        events, report = parse_log(LogSource(path, kind, fmt, run.cfg["default_timezone"], zones))
        if not report.reconciles():
            raise ValidationError(f"{path}: ingest counts do not reconcile")
        streams.append(events)
        reports[kind.value] = report.to_dict()
        if report.rejects:
            log.warning("ingest %s: %d rows rejected", kind.value, len(report.rejects))
    out = run.out / "ingest"
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / "events.jsonl", merge_streams(streams))
    (out / "report.json").write_text(json.dumps(reports, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    inputs = [p for p, _ in logs.values()] + ([roster_path] if roster_path.exists() else [])
    write_manifest(run, out, "ingest", inputs, [out / "events.jsonl", out / "report.json"])


def _zones(run: Run) -> dict[str, str]:
    roster = run.raw / "roster.csv"
    return read_roster(roster) if roster.exists() else {}


def cmd_extract(run: Run, args=None) -> None:
    src = run.out / "ingest" / "events.jsonl"
    _require(src)
    events = read_events(src)
    rows = extract_all(
        events, run.catalog, run.params, _zones(run), run.cfg["default_timezone"], jobs=run.jobs
    )
    out = run.out / "features"
    out.mkdir(parents=True, exist_ok=True)
    values, flags = out / "daily_values.csv", out / "daily_flags.csv"
    write_feature_tables(rows, run.catalog, values, flags)
    (out / "catalog.md").write_text(run.catalog.to_markdown(), encoding="utf-8")
    write_manifest(run, out, "extract", [src], [values, flags, out / "catalog.md"])


def _windows(run: Run):
    values = run.out / "features" / "daily_values.csv"
    flags = run.out / "features" / "daily_flags.csv"
    assessments = run.raw / "assessments.csv"
    _require(values, flags, assessments)
    rows = read_feature_tables(values, flags, run.catalog)
    points = read_assessments(assessments)
    windows, exclusions = build_windows(rows, points, run.catalog, run.cfg["min_coverage"])
    return windows, exclusions, points, [values, flags, assessments]


def cmd_assemble(run: Run, args=None) -> None:
    windows, exclusions, _, inputs = _windows(run)
    outputs = []
    for stage in run.stages:
        d = run.out / "assembled" / stage.value
        d.mkdir(parents=True, exist_ok=True)
        ds = flatten([w for w in windows if w.stage is stage], run.catalog, run.target)
        ds.write_csv(d / "flat.csv")
        write_exclusions(d / "exclusions.csv", [e for e in exclusions if e.stage is stage])
        outputs += [d / "flat.csv", d / "exclusions.csv"]
        log.info("assemble %s: %d rows, %d excluded", stage.value, len(ds.keys), len(exclusions))
    write_manifest(run, run.out / "assembled", "assemble", inputs, outputs)


def cmd_train_rfe(run: Run, args=None) -> None:
    rfe = run.cfg["rfe"]
    for stage in run.stages:
        src = run.out / "assembled" / stage.value / "flat.csv"
        _require(src)
        ds = FlatDataset.read_csv(src, str(run.target))
        if len(ds.keys) < rfe["folds"]:
            raise ValidationError(f"{stage.value}: {len(ds.keys)} rows is fewer than {rfe['folds']} folds")
        label = f"{stage.value}_{run.target}" if run.target == "total" else f"{stage.value}_item{run.target}"
        trace = run_rfe(
            ds,
            run.forest,
            folds=rfe["folds"],
            step=min(rfe["step"], ds.X.shape[1] - 1),
            min_features=rfe["min_features"],
            importance_source=rfe["importance_source"],
            label=label,
        )
        d = run.out / "rfe" / stage.value
        d.mkdir(parents=True, exist_ok=True)
        trace.write(d / "trace.csv", d / "ranking.csv")
        (d / "trace.json").write_text(json.dumps(trace.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        write_manifest(run, d, "train-rfe", [src], [d / "trace.csv", d / "ranking.csv", d / "trace.json"])
        best = trace.best()
        log.info("rfe %s: min cv_mae %.3f at %d features", stage.value, best.cv_mae, len(best.remaining))


def _load_replay(path: Path) -> dict:
    if path.is_dir():
        files = sorted(path.rglob("responses*.jsonl"))
        if not files:
            raise MissingInput(f"no responses*.jsonl recordings under {path}")
    elif path.exists():
        files = [path]
    else:
        raise MissingInput(f"replay recordings {path} not found")
    merged: dict = {}
    for f in files:
        for h, responses in read_recordings(f).items():
            merged[h] = responses
    return merged


def _sensors(arg: str) -> list[SensorKind]:
    if arg.lower() == "all":
        return list(SENSORS)
    return [SensorKind.parse(s.strip()) for s in arg.split(",")]


def cmd_predict_llm(run: Run, args) -> None:
    modes = [PromptMode.ZERO_SHOT, PromptMode.ONE_SHOT] if args.mode == "both" else [PromptMode.parse(args.mode)]
    sensors = _sensors(args.sensor)
    windows, _, _, inputs = _windows(run)
    by_stage: dict[Stage, list] = {}
    for w in windows:
        by_stage.setdefault(w.stage, []).append(w)
    cfg = run.backend
    if cfg.backend == "replay":
        if not cfg.replay_path:
            raise ConfigError("replay backend needs --replay or backend.replay_path")
        base = ReplayBackend(_load_replay(Path(cfg.replay_path)))
    else:
        base = make_backend(cfg)
    in_flight = min(cfg.max_in_flight, run.jobs) if run.jobs > 1 else 1
    for mode in modes:
        d = run.out / "llm" / mode.value
        d.mkdir(parents=True, exist_ok=True)
        for sensor in sensors:
            backend = RecordingBackend(base)
            result = run_experiment(by_stage, run.catalog, mode, [sensor], backend, cfg.max_retries, in_flight)
            preds = d / f"predictions_{sensor.value}.jsonl"
            responses = d / f"responses_{sensor.value}.jsonl"
            write_predictions(preds, result.rows)
            write_recordings(responses, backend.recordings)
            write_prompts(d / "prompts", result)
            prompt_files = sorted((d / "prompts").rglob(f"{sensor.value}/*.txt"))
            write_manifest(
                run, d, "predict-llm", inputs, [preds, responses, *prompt_files],
                {"mode": mode.value, "sensor": sensor.value, "backend": cfg.backend},
                name=f"manifest_{sensor.value}.json",
            )
            if result.invalid_count:
                log.warning("%s/%s: %d invalid predictions excluded", mode.value, sensor.value, result.invalid_count)
            for pid, reason in result.skipped:
                log.info("%s/%s: skipped %s (%s)", mode.value, sensor.value, pid, reason)


def _prediction_files(run: Run) -> list[Path]:
    return sorted((run.out / "llm").glob("*/predictions_*.jsonl"))


def load_metrics(run: Run) -> tuple[Optional[MetricsReport], list[Path]]:
    files = _prediction_files(run)
    if not files:
        return None, []
    assessments = run.raw / "assessments.csv"
    _require(assessments)
    manifests = [f.parent / f"manifest_{f.stem.split('_', 1)[1]}.json" for f in files]
    check_hashes(run, manifests)
    rows = [r for f in files for r in read_predictions(f)]
    metrics = compute_metrics(rows, read_assessments(assessments), run.cfg["reverse_coded"])
    return metrics, files + [assessments]


def cmd_evaluate(run: Run, args=None) -> None:
    metrics, inputs = load_metrics(run)
    if metrics is None:
        raise MissingInput("no LLM predictions under llm/; run predict-llm first")
    out = run.out / "eval"
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(metrics.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_table1(out / "table1.csv", metrics)
    write_manifest(run, out, "evaluate", inputs, [out / "metrics.json", out / "table1.csv"])


def cmd_report(run: Run, args=None) -> None:
    trace_files = sorted((run.out / "rfe").glob("*/trace.json"))
    check_hashes(run, [f.parent / "manifest.json" for f in trace_files])
    traces = [RfeTrace.from_json(json.loads(f.read_text(encoding="utf-8"))) for f in trace_files]
    metrics, inputs = load_metrics(run)
    if metrics is None and not traces:
        raise MissingInput("nothing to report: run train-rfe and/or predict-llm first")
    out = run.out / "report"
    bundle = emit_report(metrics, traces, out, run.catalog, extra={"config_hash": run.hash})
    write_manifest(run, out, "report", inputs + trace_files, bundle.files)


def cmd_pipeline(run: Run, args) -> None:
    if not (run.raw / "assessments.csv").exists() or args.resynth:
        cmd_synth(run)
    cmd_ingest(run)
    cmd_extract(run)
    cmd_assemble(run)
    cmd_train_rfe(run)
    args.mode, args.sensor = "both", "all"
    cmd_predict_llm(run, args)
    cmd_evaluate(run)
    cmd_report(run)


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "assemble": cmd_assemble,
    "train-rfe": cmd_train_rfe,
    "predict-llm": cmd_predict_llm,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="run", help="run directory (default: run)")
    common.add_argument("--raw", help="raw log directory (default: <out>/raw)")
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--n-participants", type=int, help="synthetic cohort size")
    common.add_argument("--n-trees", type=int)
    common.add_argument("--rfe-step", type=int, help="columns removed per RFE iteration (default 1)")
    common.add_argument("--rfe-min", type=int, help="RFE stops at this many features (default 1)")
    common.add_argument("--target", help="'total' or an item number 1..8")
    common.add_argument("--backend", choices=["mock", "replay", "live"])
    common.add_argument("--replay", help="recorded responses file or directory")
    common.add_argument("--no-reverse-coding", action="store_true", help="sum predicted items without reverse coding")
    common.add_argument("--jobs", type=int, default=1, help="worker bound for all parallel stages")
    common.add_argument("--force", action="store_true", help="allow mixing artifacts with different config hashes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="lonesense", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("predict-llm", "pipeline"):
            p.add_argument("--mode", choices=["zero", "one", "zero_shot", "one_shot", "both"], default="both")
            p.add_argument("--sensor", default="all", help="sensor name, comma list, or 'all'")
        if name == "pipeline":
            p.add_argument("--resynth", action="store_true", help="regenerate raw logs even if present")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        run = resolve_config(args)
        run.save()
        COMMANDS[args.command](run, args)
    except MissingInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except HashMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HASH_MISMATCH
    except (ValidationError, IngestError, InvariantViolation) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
