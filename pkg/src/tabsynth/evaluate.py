"""The three sensitivity dimensions: runtime, ML utility, similarity.

Runtime uses wall-clock repetitions of a deterministic workload under an
exclusivity lock. Utility trains baseline learners on a real and a
synthetic arm and scores both on the same held-out real split. Similarity
is the held-out accuracy of a random-forest discriminator between real and
synthetic rows, where 0.5 means indistinguishable.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .data import CLASSIFICATION, KEY, REGRESSION, DataTable
from .learners import (
    Dataset2D,
    ForestConfig,
    accuracy,
    fit_forest,
    fit_linear,
    fit_logistic,
    macro_f1,
    r_squared,
)

DISCRIMINATOR_TRAIN_FRACTION = 0.7
UTILITY_SEEDS = (0, 1, 2, 3, 4)

_timing_lock = threading.Lock()


@dataclass
class RuntimeStat:
    phase: str
    repetitions: list[float]
    mean_seconds: float = field(init=False)

    def __post_init__(self):
        if not self.repetitions:
            raise ValueError("no repetitions recorded")
        self.mean_seconds = float(np.mean(self.repetitions))

    def as_dict(self):
        return {
            "phase": self.phase,
            "repetitions": list(self.repetitions),
            "mean_seconds": self.mean_seconds,
        }


class WorkloadError(RuntimeError):
    """A timed workload failed; carries the repetitions finished so far."""

    def __init__(self, cause: BaseException, partial: RuntimeStat | None):
        super().__init__(f"workload failed: {cause}")
        self.cause = cause
        self.partial = partial


def measure_runtime(workload, repetitions: int = 5, phase: str = "total") -> RuntimeStat:
    """Run a zero-argument workload N times under the timing lock and report
    per-repetition wall-clock seconds (monotonic) plus their mean."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    samples: list[float] = []
    with _timing_lock:
        for _ in range(repetitions):
            start = time.perf_counter()
            try:
                workload()
            except Exception as exc:
                partial = RuntimeStat(phase, samples) if samples else None
                raise WorkloadError(exc, partial) from exc
            samples.append(time.perf_counter() - start)
    return RuntimeStat(phase, samples)


def table_to_features(table: DataTable, include_target: bool = True) -> np.ndarray:
    """Numeric feature matrix over all non-key columns of an encoded table."""
    schema = table.schema
    cols = [
        j for j, s in enumerate(schema.columns)
        if s.kind != KEY and (include_target or s.name != schema.target_column)
    ]
    out = np.empty((table.n_rows, len(cols)), dtype=np.float64)
    for i, row in enumerate(table.rows):
        for k, j in enumerate(cols):
            cell = row[j]
            if isinstance(cell, str):
                raise ValueError("table must be encoded before evaluation")
            out[i, k] = float(cell)
    return out


def table_to_xy(table: DataTable) -> Dataset2D:
    schema = table.schema
    X = table_to_features(table, include_target=False)
    t = schema.target_index
    if schema.task == CLASSIFICATION:
        y = np.asarray([int(row[t]) for row in table.rows], dtype=np.int64)
    else:
        y = np.asarray([float(row[t]) for row in table.rows], dtype=np.float64)
    return Dataset2D(X, y)


@dataclass
class UtilityResult:
    task: str
    models: dict  # model -> metric -> {"real", "synthetic", "delta"}
    seeds: list[int]

    def delta(self, model: str, metric: str) -> float:
        return self.models[model][metric]["delta"]

    def as_dict(self):
        return {"task": self.task, "models": self.models, "seeds": list(self.seeds)}


def _mean_scores(fit, predictor_scores, seeds):
    per_seed = [predictor_scores(fit(seed)) for seed in seeds]
    return {
        metric: float(np.mean([s[metric] for s in per_seed]))
        for metric in per_seed[0]
    }


def evaluate_utility(
    real_train: DataTable,
    synth_train: DataTable,
    real_test: DataTable,
    schema=None,
    seeds=UTILITY_SEEDS,
) -> UtilityResult:
    """Train learners on each arm, score on the shared real test split,
    report per-metric means over the seeds and synthetic-minus-real deltas.

    The two arms must be the same size so sample count is not a confound.
    """
    schema = schema or real_train.schema
    if synth_train.n_rows != real_train.n_rows:
        raise ValueError(
            f"equal-size protocol: synthetic arm has {synth_train.n_rows} rows, "
            f"real arm has {real_train.n_rows}"
        )
    if [c.name for c in synth_train.schema.columns] != [c.name for c in schema.columns]:
        raise ValueError("synthetic table schema does not match")
    arms = {"real": table_to_xy(real_train), "synthetic": table_to_xy(synth_train)}
    test = table_to_xy(real_test)
    seeds = list(seeds)

    if schema.task == CLASSIFICATION:
        n_classes = len(schema.column(schema.target_column).categories)

        def scorer(m):
            pred = m.predict(test.features)
            return {
                "accuracy": accuracy(pred, test.labels),
                "macro_f1": macro_f1(pred, test.labels, n_classes),
            }

        fits = {
            "logistic_regression": lambda data, seed: fit_logistic(data),
            "random_forest": lambda data, seed: fit_forest(
                data, ForestConfig(seed=seed), CLASSIFICATION
            ),
        }
    else:

        def scorer(m):
            return {"r_squared": r_squared(m.predict(test.features), test.labels)}

        fits = {
            "linear_regression": lambda data, seed: fit_linear(data),
            "random_forest": lambda data, seed: fit_forest(
                data, ForestConfig(seed=seed), REGRESSION
            ),
        }

    models = {}
    for name, fit in fits.items():
        per_arm = {
            arm: _mean_scores(lambda seed, d=data: fit(d, seed), scorer, seeds)
            for arm, data in arms.items()
        }
        models[name] = {
            metric: {
                "real": per_arm["real"][metric],
                "synthetic": per_arm["synthetic"][metric],
                "delta": per_arm["synthetic"][metric] - per_arm["real"][metric],
            }
            for metric in per_arm["real"]
        }
    return UtilityResult(task=schema.task, models=models, seeds=seeds)


@dataclass
class SimilarityResult:
    discriminator_accuracy: float
    n_real: int
    n_synth: int
    seed: int
    protocol: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "discriminator_accuracy": self.discriminator_accuracy,
            "n_real": self.n_real,
            "n_synth": self.n_synth,
            "seed": self.seed,
            "protocol": dict(self.protocol),
        }


def _discriminator_split(real_X: np.ndarray, synth_X: np.ndarray, seed: int):
    """Balance by downsampling the larger side, then a stratified 70/30
    train/test split. Returns (X_train, y_train, X_test, y_test)."""
    n = min(len(real_X), len(synth_X))
    if len(real_X) != len(synth_X):
        larger = real_X if len(real_X) > len(synth_X) else synth_X
        keep = np.sort(np.random.default_rng([seed, 0]).permutation(len(larger))[:n])
        if len(real_X) > len(synth_X):
            real_X = real_X[keep]
        else:
            synth_X = synth_X[keep]

    parts = {"train": [], "test": []}
    labels = {"train": [], "test": []}
    for label, side, stream in ((0, real_X, 1), (1, synth_X, 2)):
        order = np.random.default_rng([seed, stream]).permutation(n)
        cut = int(DISCRIMINATOR_TRAIN_FRACTION * n + 0.5)
        for part, rows in (("train", order[:cut]), ("test", order[cut:])):
            parts[part].append(side[rows])
            labels[part].append(np.full(len(rows), label, dtype=np.int64))
    X_train = np.vstack(parts["train"])
    X_test = np.vstack(parts["test"])
    return X_train, np.concatenate(labels["train"]), X_test, np.concatenate(labels["test"])


def discriminator_similarity(real: DataTable, synth: DataTable, seed: int) -> SimilarityResult:
    """Held-out accuracy of a random forest telling real rows (label 0) from
    synthetic rows (label 1); close to 0.5 means high similarity."""
    if [c.name for c in real.schema.columns] != [c.name for c in synth.schema.columns]:
        raise ValueError("tables do not share a schema")
    if real.n_rows < 20 or synth.n_rows < 20:
        raise ValueError("need at least 20 rows on each side")
    real_X = table_to_features(real)
    synth_X = table_to_features(synth)
    X_train, y_train, X_test, y_test = _discriminator_split(real_X, synth_X, seed)
    forest = fit_forest(
        Dataset2D(X_train, y_train), ForestConfig(seed=seed), CLASSIFICATION
    )
    acc = accuracy(forest.predict(X_test), y_test)
    return SimilarityResult(
        discriminator_accuracy=acc,
        n_real=real.n_rows,
        n_synth=synth.n_rows,
        seed=seed,
        protocol={
            "balance": "downsample larger side",
            "split": "stratified 70/30",
            "model": "random_forest",
        },
    )
