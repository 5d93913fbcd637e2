"""The benchmark harness on a small grid: run a depth sweep with timed
phases, then emit the combined report and the three sensitivity plots.

Run:  python3 demos/sensitivity_sweep.py     (a few minutes; resumable)

The same sweep is available from the command line:

    tabsynth sweep demo_config.json
    tabsynth report runs_demo --format csv
    tabsynth plot runs_demo --dimension runtime
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from tabsynth.data import (
    CATEGORICAL,
    CLASSIFICATION,
    ColumnSpec,
    DataTable,
    TableSchema,
    write_csv,
)
from tabsynth.runner import emit_plot, emit_report, parse_config, run_sweep

work = Path(tempfile.mkdtemp(prefix="tabsynth_demo_"))
rng = np.random.default_rng(0)

schema = TableSchema(
    [
        ColumnSpec("plan", CATEGORICAL, categories=["a", "b"]),
        ColumnSpec("renewed", CATEGORICAL, categories=["no", "yes"]),
    ],
    "renewed",
    CLASSIFICATION,
)
rows = []
for _ in range(500):
    plan = int(rng.integers(2))
    rows.append([plan, plan])
csv_path = work / "subscriptions.csv"
write_csv(DataTable(schema, rows), csv_path)

config_doc = {
    "dataset": {"path": str(csv_path), "target": "renewed", "task": "classification"},
    "tool_mode": "single_table",
    "grid": [{"layers": l, "hidden_dim": 32, "heads": 4} for l in (1, 2, 4)],
    "train": {"epochs": 60, "batch_size": 32},
    "sample": {"temperature": 0.7},
    "repetitions": 5,
    "seed": 0,
    "out_dir": str(work / "runs"),
}
(work / "demo_config.json").write_text(json.dumps(config_doc, indent=2))
print("config written to", work / "demo_config.json")

config = parse_config(config_doc)
print("\nrunning the sweep (5 timed repetitions per phase per point)...")
reports = run_sweep(config)

print(f"\n{'point':<10}{'params':>9}{'train s':>9}{'gen s':>8}"
      f"{'sim acc':>9}{'acc delta':>11}")
for r in reports:
    point = r["config"]["point"]
    label = f"L{point['layers']}-H{point['hidden_dim']}"
    if r["status"] != "ok":
        print(f"{label:<10}  FAILED: {r['failure']['message'][:50]}")
        continue
    acc = r["utility"]["models"]["random_forest"]["accuracy"]
    print(
        f"{label:<10}{r['exact_params']:>9,}"
        f"{r['runtime']['train']['mean_seconds']:>9.2f}"
        f"{r['runtime']['generate']['mean_seconds']:>8.2f}"
        f"{r['similarity']['discriminator_accuracy']:>9.3f}"
        f"{acc['delta']:>+11.3f}"
    )

json_report = emit_report(reports, "json", work / "runs")
csv_report = emit_report(reports, "csv", work / "runs")
print("\nreports:", json_report, "and", csv_report)
for dimension in ("runtime", "utility", "similarity"):
    print("plot:", emit_plot(reports, dimension, work / "runs"))

means = [r["runtime"]["total"]["mean_seconds"] for r in reports]
print("\ntotal-phase means by depth:", [f"{m:.2f}s" for m in means])
print("rerunning the sweep now skips every finished point (content-hash resume).")
