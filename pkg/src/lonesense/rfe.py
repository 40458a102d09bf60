"""Recursive feature elimination around the forest, scored by k-fold CV."""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .assembly import FlatDataset, parse_column
from .evaluation import ErrorPair
from .features.catalog import FeatureCatalog
from .forest import ForestConfig, predict, train_forest


@dataclass(frozen=True)
class RfeStep:
    step: int  # 1-based
    remaining: tuple[str, ...]
    cv_mae: float
    cv_mbe: float
    eliminated: tuple[str, ...]  # empty on the final record


@dataclass
class RfeTrace:
    steps: list[RfeStep]
    # feature -> step at which it was removed; survivors carry len(steps)
    ranking: dict[str, int]
    target: str = "total"
    label: str = ""
    metadata: dict = field(default_factory=dict)

    def best(self) -> RfeStep:
        """Step with the lowest CV MAE; ties go to the smaller feature set."""
        return min(self.steps, key=lambda s: (s.cv_mae, len(s.remaining)))

    def write(self, trace_path: Union[str, Path], ranking_path: Union[str, Path]) -> None:
        with open(trace_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "remaining", "cv_mae", "cv_mbe", "eliminated"])
            for s in self.steps:
                w.writerow([s.step, len(s.remaining), repr(s.cv_mae), repr(s.cv_mbe), ";".join(s.eliminated)])
        with open(ranking_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "elimination_step"])
            for name, k in sorted(self.ranking.items(), key=lambda kv: (-kv[1], kv[0])):
                w.writerow([name, k])

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "target": self.target,
            "metadata": self.metadata,
            "ranking": dict(sorted(self.ranking.items())),
            "steps": [
                {
                    "step": s.step,
                    "remaining": list(s.remaining),
                    "cv_mae": s.cv_mae,
                    "cv_mbe": s.cv_mbe,
                    "eliminated": list(s.eliminated),
                }
                for s in self.steps
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "RfeTrace":
        steps = [
            RfeStep(s["step"], tuple(s["remaining"]), s["cv_mae"], s["cv_mbe"], tuple(s["eliminated"]))
            for s in d["steps"]
        ]
        return cls(steps, dict(d["ranking"]), d.get("target", "total"), d.get("label", ""), d.get("metadata", {}))


def fold_assignment(n_rows: int, folds: int, seed: int) -> np.ndarray:
    """Fold id per row: a seeded permutation dealt round-robin."""
    perm = np.random.default_rng(np.random.SeedSequence([seed, n_rows, folds])).permutation(n_rows)
    out = np.empty(n_rows, dtype=np.int64)
    out[perm] = np.arange(n_rows) % folds
    return out


def cross_validate(
    X: np.ndarray, y: np.ndarray, cfg: ForestConfig, fold_ids: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-fold predictions and fold-averaged importances."""
    oof = np.zeros(len(y))
    importances = np.zeros(X.shape[1])
    folds = int(fold_ids.max()) + 1
    for k in range(folds):
        test = fold_ids == k
        fold_cfg = dataclasses.replace(cfg, rng_seed=cfg.rng_seed * 1009 + k + 1)
        forest = train_forest(X[~test], y[~test], fold_cfg)
        oof[test] = predict(forest, X[test])
        importances += forest.feature_importances
    return oof, importances / folds


def run_rfe(
    dataset: FlatDataset,
    cfg: ForestConfig = ForestConfig(),
    folds: int = 3,
    step: int = 1,
    min_features: int = 1,
    importance_source: str = "folds",
    label: str = "",
) -> RfeTrace:
    """Eliminate the least important column(s) per iteration until ``min_features``
    remain, recording CV MAE/MBE of every subset.

    ``importance_source="folds"`` ranks by importances averaged over the CV fold
    forests; ``"full"`` refits on all rows. Equal importances remove the larger
    column index first.
    """
    X, y = dataset.X, dataset.y
    n_rows, n_features = X.shape
    if n_rows < folds or folds < 2:
        raise ValueError(f"need at least {max(folds, 2)} rows for {folds}-fold CV, got {n_rows}")
    if step < 1 or step >= n_features:
        raise ValueError(f"step must lie in 1..{n_features - 1}, got {step}")
    if not 1 <= min_features < n_features:
        raise ValueError(f"min_features must lie in 1..{n_features - 1}")
    if importance_source not in ("folds", "full"):
        raise ValueError("importance_source must be 'folds' or 'full'")

    fold_ids = fold_assignment(n_rows, folds, cfg.rng_seed)
    remaining = list(range(n_features))
    steps: list[RfeStep] = []
    ranking: dict[str, int] = {}
    while True:
        Xs = X[:, remaining]
        oof, importances = cross_validate(Xs, y, cfg, fold_ids)
        names = tuple(dataset.columns[c] for c in remaining)
        k = len(steps) + 1
        err = ErrorPair.of(oof, y, f"(RFE step {k})")
        if len(remaining) <= min_features:
            steps.append(RfeStep(k, names, err.mae, err.mbe, ()))
            break
        if importance_source == "full":
            importances = train_forest(Xs, y, cfg).feature_importances
        n_drop = min(step, len(remaining) - min_features)
        order = np.lexsort((-np.asarray(remaining), importances))
        drop = sorted((remaining[i] for i in order[:n_drop]), reverse=True)
        dropped = tuple(dataset.columns[c] for c in drop)
        steps.append(RfeStep(k, names, err.mae, err.mbe, dropped))
        for name in dropped:
            ranking[name] = k
        gone = set(drop)
        remaining = [c for c in remaining if c not in gone]

    for c in remaining:
        ranking[dataset.columns[c]] = len(steps)
    metadata = {
        "forest": cfg.to_dict(),
        "folds": folds,
        "step": step,
        "min_features": min_features,
        "importance_source": importance_source,
        "rows": n_rows,
        "columns": n_features,
    }
    return RfeTrace(steps, ranking, dataset.target, label, metadata)


# --- best-subset listing --------------------------------------------------


@dataclass(frozen=True)
class BestFeature:
    number: int
    sensor: str
    feature: str
    day: Optional[int]

    @property
    def label(self) -> str:
        return f"{self.feature} (Day {self.day})" if self.day is not None else self.feature


def best_features(columns: Sequence[str], catalog: Optional[FeatureCatalog] = None) -> list[BestFeature]:
    """Columns rendered as (sensor, feature title, day), sorted alphabetically."""
    rows = []
    for col in columns:
        try:
            name, day = parse_column(col)
        except ValueError:
            name, day = col, None
        if catalog is not None and name in catalog:
            fdef = catalog[name]
            rows.append((fdef.sensor.value, fdef.title, day))
        else:
            rows.append(("", name, day))
    rows.sort(key=lambda r: (r[0], r[1], -1 if r[2] is None else r[2]))
    return [BestFeature(i, s, f, d) for i, (s, f, d) in enumerate(rows, start=1)]


def write_best_features(path: Union[str, Path], rows: Sequence[BestFeature]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["number", "sensor", "feature", "day"])
        for r in rows:
            w.writerow([r.number, r.sensor, r.feature, "" if r.day is None else r.day])


def read_trace(path: Union[str, Path]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            {
                "step": int(r["step"]),
                "remaining": int(r["remaining"]),
                "cv_mae": float(r["cv_mae"]),
                "cv_mbe": float(r["cv_mbe"]),
                "eliminated": [x for x in r["eliminated"].split(";") if x],
            }
            for r in csv.DictReader(fh)
        ]
