"""Experiment configuration, sweep execution, and report emission.

A sweep runs (model grid point x dataset) cells: preprocess, train (timed
with repetitions), generate as many rows as the training split (timed),
then evaluate utility and similarity. Each grid point writes one report
file named by a content hash of everything that could change its result,
so interrupted sweeps resume by skipping finished points.
"""

from __future__ import annotations

import copy
import difflib
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .charts import render_grouped_bars
from .codec import quantize_numbers
from .data import (
    CLASSIFICATION,
    DataTable,
    denormalize_continuous,
    drop_incomplete,
    encode_categoricals,
    load_csv,
    normalize_continuous,
    preprocess,
    shuffle_split,
)
from .evaluate import (
    RuntimeStat,
    discriminator_similarity,
    evaluate_utility,
    measure_runtime,
)
from .model import ModelConfig, calibrate_c, count_params, estimate_size
from .relational import (
    RelationalSchema,
    children_histogram,
    fit_relational,
    generate_relational,
    with_key_column,
)
from .sample import SampleConfig, generate_table
from .train import TrainConfig, fit_table

log = logging.getLogger("tabsynth")

CONFIG_VERSION = 1
REPORT_VERSION = 1

SINGLE_TABLE = "single_table"
RELATIONAL = "relational"


class ConfigError(ValueError):
    pass


def _reject_unknown(mapping: dict, allowed, where: str):
    for key in mapping:
        if key not in allowed:
            hint = difflib.get_close_matches(key, allowed, n=1)
            suffix = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"unknown key {key!r} in {where}{suffix}")


@dataclass
class GridPoint:
    layers: int
    hidden_dim: int
    heads: int

    def validate(self):
        ModelConfig(self.layers, self.hidden_dim, self.heads, 1, 1).validate()
        if self.layers < 1:
            raise ConfigError("grid point layers must be >= 1")

    def label(self):
        return f"L{self.layers}-H{self.hidden_dim}"


@dataclass
class ExperimentConfig:
    dataset: dict
    grid: list[GridPoint]
    tool_mode: str = SINGLE_TABLE
    train: dict = field(default_factory=dict)
    sample: dict = field(default_factory=dict)
    repetitions: int = 5
    seed: int = 0
    test_fraction: float = 0.2
    out_dir: str = "runs"
    schema_version: int = CONFIG_VERSION

    def train_config(self) -> TrainConfig:
        return TrainConfig(seed=self.seed, **self.train)

    def sample_config(self) -> SampleConfig:
        return SampleConfig(seed=self.seed, **self.sample)


_TOP_KEYS = {
    "schema_version", "dataset", "tool_mode", "grid", "train", "sample",
    "repetitions", "seed", "test_fraction", "out_dir",
}
_DATASET_KEYS = {
    "path", "target", "task", "parent_path", "child_path", "parent_key",
    "foreign_key", "max_children_per_parent", "child_target", "child_task",
}
_TRAIN_KEYS = {"epochs", "batch_size", "learning_rate", "grad_clip_norm"}
_SAMPLE_KEYS = {"temperature", "max_attempts_per_row", "max_tokens"}
_POINT_KEYS = {"layers", "hidden_dim", "heads"}


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "config")
    if "dataset" not in doc or "grid" not in doc:
        raise ConfigError("config requires 'dataset' and 'grid'")
    _reject_unknown(doc["dataset"], _DATASET_KEYS, "dataset")
    _reject_unknown(doc.get("train", {}), _TRAIN_KEYS, "train")
    _reject_unknown(doc.get("sample", {}), _SAMPLE_KEYS, "sample")

    grid = []
    if not doc["grid"]:
        raise ConfigError("grid must be non-empty")
    for i, point in enumerate(doc["grid"]):
        _reject_unknown(point, _POINT_KEYS, f"grid[{i}]")
        try:
            gp = GridPoint(**point)
            gp.validate()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"grid[{i}]: {exc}") from exc
        grid.append(gp)

    config = ExperimentConfig(
        dataset=dict(doc["dataset"]),
        grid=grid,
        tool_mode=doc.get("tool_mode", SINGLE_TABLE),
        train=dict(doc.get("train", {})),
        sample=dict(doc.get("sample", {})),
        repetitions=int(doc.get("repetitions", 5)),
        seed=int(doc.get("seed", 0)),
        test_fraction=float(doc.get("test_fraction", 0.2)),
        out_dir=doc.get("out_dir", "runs"),
        schema_version=int(doc.get("schema_version", CONFIG_VERSION)),
    )
    if config.tool_mode not in (SINGLE_TABLE, RELATIONAL):
        raise ConfigError(f"unknown tool_mode {config.tool_mode!r}")
    if config.repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    if not 0.0 < config.test_fraction < 1.0:
        raise ConfigError("test_fraction must be in (0, 1)")
    required = (
        {"path"}
        if config.tool_mode == SINGLE_TABLE
        else {"parent_path", "child_path", "parent_key", "foreign_key",
              "child_target", "child_task"}
    )
    missing = required - set(config.dataset)
    if missing:
        raise ConfigError(f"dataset is missing {sorted(missing)} for {config.tool_mode}")
    if "target" not in config.dataset or "task" not in config.dataset:
        raise ConfigError("dataset requires 'target' and 'task'")
    config.train_config().validate()
    config.sample_config().validate()
    return config


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    return parse_config(doc)


# Conventions echoed into every report so results are self-describing.
_CONVENTIONS = {
    "encoding": "ordinal, first-occurrence category order",
    "normalization": "z-score with population std from the training split",
    "split": "seeded shuffle, test fraction as configured",
    "sentence_template": "'<column> is <value>' clauses joined by ', '",
    "number_precision": "4 fractional digits",
    "column_order": "redrawn uniformly per row per epoch",
    "rejection": "invalid rows rejected and retried up to max_attempts_per_row",
    "utility_protocol": "equal-size arms, 5 learner seeds, shared real test split",
    "discriminator_protocol": "downsample to balance, stratified 70/30, random forest",
    "evaluation_precision": "real arms quantized to the 4-decimal sentence grid",
    "runtime_protocol": "wall-clock repetitions of the full phase, mean reported",
}


def point_hash(config: ExperimentConfig, point: GridPoint) -> str:
    payload = {
        "schema_version": config.schema_version,
        "artifact_version": __version__,
        "dataset": config.dataset,
        "tool_mode": config.tool_mode,
        "point": asdict(point),
        "train": config.train,
        "sample": config.sample,
        "repetitions": config.repetitions,
        "seed": config.seed,
        "test_fraction": config.test_fraction,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _config_echo(config: ExperimentConfig, point: GridPoint) -> dict:
    return {
        "dataset": dict(config.dataset),
        "tool_mode": config.tool_mode,
        "point": asdict(point),
        "train": dict(config.train),
        "sample": dict(config.sample),
        "repetitions": config.repetitions,
        "seed": config.seed,
        "test_fraction": config.test_fraction,
        "conventions": dict(_CONVENTIONS),
    }


def _single_table_point(config: ExperimentConfig, point: GridPoint) -> dict:
    ds = config.dataset
    table = load_csv(ds["path"], ds["target"], ds["task"])
    train_tbl, test_tbl = preprocess(table, config.test_fraction, config.seed)
    model_cfg = ModelConfig(point.layers, point.hidden_dim, point.heads)
    holder = {}

    def train_workload():
        holder["model"], holder["vocab"], holder["trace"] = fit_table(
            train_tbl, model_cfg, config.train_config()
        )

    rt_train = measure_runtime(train_workload, config.repetitions, phase="train")

    def generate_workload():
        holder["synth"], holder["gen_stats"] = generate_table(
            holder["model"], holder["vocab"], train_tbl.schema,
            train_tbl.n_rows, config.sample_config(),
        )

    rt_gen = measure_runtime(generate_workload, config.repetitions, phase="generate")
    rt_total = RuntimeStat(
        "total", [a + b for a, b in zip(rt_train.repetitions, rt_gen.repetitions)]
    )

    # both evaluation arms at sentence precision, in original units
    real_train = denormalize_continuous(quantize_numbers(train_tbl))
    real_test = denormalize_continuous(quantize_numbers(test_tbl))
    synth = holder["synth"]
    utility = evaluate_utility(real_train, synth, real_test)
    similarity = discriminator_similarity(real_train, synth, config.seed)
    exact = count_params(holder["model"].config)

    return {
        "exact_params": exact,
        "model_config": asdict(holder["model"].config),
        "runtime": {s.phase: s.as_dict() for s in (rt_train, rt_gen, rt_total)},
        "utility": utility.as_dict(),
        "similarity": similarity.as_dict(),
        "generation": holder["gen_stats"].as_dict(),
        "train_trace": {
            "first_epoch_loss": holder["trace"].epoch_losses[0],
            "final_epoch_loss": holder["trace"].epoch_losses[-1],
            "tokens_seen": holder["trace"].tokens_seen,
        },
    }


def _load_relational(config: ExperimentConfig):
    ds = config.dataset
    parent = load_csv(ds["parent_path"], ds["target"], ds["task"])
    parent = with_key_column(parent, ds["parent_key"])
    raw_child = load_csv(ds["child_path"], ds["child_target"], ds["child_task"])
    child = with_key_column(raw_child, ds["foreign_key"])
    return parent, child


def _relational_point(config: ExperimentConfig, point: GridPoint) -> dict:
    ds = config.dataset
    parent, child = _load_relational(config)
    parent = encode_categoricals(drop_incomplete(parent))
    child = encode_categoricals(drop_incomplete(child))

    # split parents, keep each child row with its parent's split
    p_train_raw, p_test_raw = shuffle_split(parent, config.test_fraction, config.seed)
    p_train = normalize_continuous(p_train_raw, p_train_raw)
    p_test = normalize_continuous(p_test_raw, p_train_raw)
    key_j = parent.schema.index_of(ds["parent_key"])
    fk_j = child.schema.index_of(ds["foreign_key"])
    train_keys = {row[key_j] for row in p_train.rows}
    c_train_raw = DataTable(
        schema=child.schema,
        rows=[list(r) for r in child.rows if r[fk_j] in train_keys],
    )
    c_train = normalize_continuous(c_train_raw, c_train_raw)

    rel_schema = RelationalSchema(
        parent=p_train.schema,
        parent_key=ds["parent_key"],
        child=c_train.schema,
        foreign_key=ds["foreign_key"],
        max_children_per_parent=ds.get("max_children_per_parent", 16),
    )
    hist = children_histogram(p_train, c_train, rel_schema)
    model_cfg = ModelConfig(point.layers, point.hidden_dim, point.heads)
    holder = {}

    def train_workload():
        holder["rel"] = fit_relational(
            p_train, c_train, rel_schema, model_cfg, config.train_config()
        )

    rt_train = measure_runtime(train_workload, config.repetitions, phase="train")

    def generate_workload():
        holder["parent_s"], holder["child_s"], holder["gen_stats"] = generate_relational(
            holder["rel"], rel_schema, p_train.n_rows, hist, config.sample_config()
        )

    rt_gen = measure_runtime(generate_workload, config.repetitions, phase="generate")
    rt_total = RuntimeStat(
        "total", [a + b for a, b in zip(rt_train.repetitions, rt_gen.repetitions)]
    )

    real_train = denormalize_continuous(quantize_numbers(p_train))
    real_test = denormalize_continuous(quantize_numbers(p_test))
    utility = evaluate_utility(real_train, holder["parent_s"], real_test)
    similarity = discriminator_similarity(real_train, holder["parent_s"], config.seed)

    synth_hist = children_histogram(holder["parent_s"], holder["child_s"], rel_schema)
    exact = count_params(holder["rel"].parent_model.config) + count_params(
        holder["rel"].child_model.config
    )
    return {
        "exact_params": exact,
        "model_config": asdict(holder["rel"].parent_model.config),
        "runtime": {s.phase: s.as_dict() for s in (rt_train, rt_gen, rt_total)},
        "utility": utility.as_dict(),
        "similarity": similarity.as_dict(),
        "generation": holder["gen_stats"].as_dict(),
        "relational": {
            "n_parents": holder["parent_s"].n_rows,
            "n_children": holder["child_s"].n_rows,
            "children_tv_distance": hist.tv_distance(synth_hist),
        },
    }


def run_point(config: ExperimentConfig, point: GridPoint) -> dict:
    """One grid cell; failures are captured into the report, not raised."""
    report = {
        "schema_version": REPORT_VERSION,
        "artifact_version": __version__,
        "point_hash": point_hash(config, point),
        "config": _config_echo(config, point),
        "status": "ok",
        "failure": None,
        "exact_params": None,
        "size_estimate": None,
        "runtime": None,
        "utility": None,
        "similarity": None,
        "generation": None,
    }
    try:
        body = (
            _single_table_point(config, point)
            if config.tool_mode == SINGLE_TABLE
            else _relational_point(config, point)
        )
        report.update(body)
        cal = calibrate_c(report["exact_params"], point.layers, point.hidden_dim)
        est = estimate_size(cal.rounded, point.layers, point.hidden_dim)
        report["size_estimate"] = {
            "c_raw": cal.raw,
            "c": cal.rounded,
            "estimated_params": est.estimated_params,
        }
    except Exception as exc:
        log.warning("grid point %s failed: %s", point.label(), exc)
        report["status"] = "failed"
        report["failure"] = {"error": type(exc).__name__, "message": str(exc)}
    return report


def run_sweep(config: ExperimentConfig) -> list[dict]:
    """Run every grid point, skipping points whose report file already
    exists (content-hash resumability). Returns the reports in grid order."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for point in config.grid:
        path = out / f"report_{point_hash(config, point)}.json"
        if path.exists():
            log.info("skipping finished point %s (%s)", point.label(), path.name)
            with open(path, encoding="utf-8") as fh:
                reports.append(json.load(fh))
            continue
        log.info("running point %s", point.label())
        report = run_point(config, point)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        reports.append(report)
    return reports


def strip_timing(report: dict) -> dict:
    """Report minus wall-clock fields, for determinism comparisons."""
    out = copy.deepcopy(report)
    out.pop("runtime", None)
    return out


def load_reports(directory) -> list[dict]:
    paths = sorted(Path(directory).glob("report_*.json"))
    reports = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            reports.append(json.load(fh))
    return reports


def _flatten(prefix: str, value, into: dict):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, into)
    elif isinstance(value, list):
        into[prefix] = json.dumps(value)
    else:
        into[prefix] = value


def emit_report(reports: list[dict], fmt: str, out_dir) -> Path:
    """Write all reports to one file: a JSON array, or a flattened CSV whose
    column order is listed in a leading comment line."""
    if not reports:
        raise ValueError("no reports to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / "reports.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(reports, fh, indent=2)
            fh.write("\n")
        return path
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")

    flat_rows = []
    for report in reports:
        flat: dict = {}
        _flatten("", report, flat)
        flat_rows.append(flat)
    columns = sorted({key for row in flat_rows for key in row})
    path = out / "reports.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# columns: " + ",".join(columns) + "\n")
        fh.write(",".join(columns) + "\n")
        for row in flat_rows:
            cells = []
            for col in columns:
                value = row.get(col, "")
                text = "" if value is None else str(value)
                if "," in text or '"' in text or "\n" in text:
                    text = '"' + text.replace('"', '""') + '"'
                cells.append(text)
            fh.write(",".join(cells) + "\n")
    return path


def parse_report_json(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


_DIMENSIONS = ("runtime", "utility", "similarity")


def emit_plot(reports: list[dict], dimension: str, out_dir) -> Path:
    """Grouped bars per grid point with the exact parameter count overlaid
    on a secondary log axis; similarity adds the 0.5 chance line."""
    if dimension not in _DIMENSIONS:
        raise ValueError(f"dimension must be one of {_DIMENSIONS}")
    usable = [r for r in reports if r["status"] == "ok"]
    if not usable:
        raise ValueError("no successful reports to plot")
    datasets = {json.dumps(r["config"]["dataset"], sort_keys=True) for r in usable}
    if len(datasets) > 1:
        raise ValueError("cannot plot reports from different datasets together")

    labels = [f"L{r['config']['point']['layers']}" for r in usable]
    secondary = [r["exact_params"] for r in usable]
    ref = None
    if dimension == "runtime":
        series = {
            "train": [r["runtime"]["train"]["mean_seconds"] for r in usable],
            "generate": [r["runtime"]["generate"]["mean_seconds"] for r in usable],
        }
        y_label = "seconds"
    elif dimension == "utility":
        task = usable[0]["utility"]["task"]
        metric = "accuracy" if task == CLASSIFICATION else "r_squared"
        series = {
            f"real ({metric})": [
                r["utility"]["models"]["random_forest"][metric]["real"] for r in usable
            ],
            f"synthetic ({metric})": [
                r["utility"]["models"]["random_forest"][metric]["synthetic"]
                for r in usable
            ],
        }
        y_label = metric
    else:
        series = {
            "discriminator accuracy": [
                r["similarity"]["discriminator_accuracy"] for r in usable
            ]
        }
        y_label = "held-out accuracy"
        ref = 0.5

    svg = render_grouped_bars(
        labels,
        series,
        title=f"{dimension} per layer count",
        y_label=y_label,
        secondary=secondary,
        secondary_label="exact parameters (log)",
        ref_line=ref,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"plot_{dimension}.svg"
    path.write_text(svg, encoding="utf-8")
    return path
