"""Command-line interface.

Subcommands: fit, sample, evaluate, sweep, report, plot. Exit codes:
0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .codec import quantize_numbers
from .data import (
    DataTable,
    denormalize_continuous,
    encode_categoricals,
    load_csv,
    load_schema,
    preprocess,
    renormalize_continuous,
    save_schema,
    shuffle_split,
    write_csv,
)
from .evaluate import discriminator_similarity, evaluate_utility
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .runner import (
    ConfigError,
    load_config,
    load_reports,
    emit_plot,
    emit_report,
    run_sweep,
)
from .sample import SampleConfig, generate_table
from .tokens import load_vocab, save_vocab
from .train import fit_table

log = logging.getLogger("tabsynth")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tabsynth", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out-dir", default=None, help="override output directory")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="train models for every grid point")
    p_fit.add_argument("config")

    p_sample = sub.add_parser("sample", help="generate rows from a checkpoint")
    p_sample.add_argument("checkpoint")
    p_sample.add_argument("-n", "--rows", type=int, required=True)
    p_sample.add_argument("--temperature", type=float, default=0.7)

    p_eval = sub.add_parser("evaluate", help="compare a synthetic CSV to a real one")
    p_eval.add_argument("real_csv")
    p_eval.add_argument("synth_csv")
    p_eval.add_argument("--target", required=True)
    p_eval.add_argument("--task", required=True, choices=["classification", "regression"])
    p_eval.add_argument("--test-fraction", type=float, default=0.2)

    p_sweep = sub.add_parser("sweep", help="run the full benchmark grid")
    p_sweep.add_argument("config")

    p_report = sub.add_parser("report", help="combine point reports into one file")
    p_report.add_argument("directory")
    p_report.add_argument("--format", choices=["json", "csv"], default="json")

    p_plot = sub.add_parser("plot", help="render one sensitivity dimension as SVG")
    p_plot.add_argument("directory")
    p_plot.add_argument(
        "--dimension", choices=["runtime", "utility", "similarity"], required=True
    )
    return parser


def _apply_overrides(config, args):
    if args.seed is not None:
        config.seed = args.seed
    if args.out_dir is not None:
        config.out_dir = args.out_dir
    return config


def cmd_fit(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    if config.tool_mode != "single_table":
        raise UsageError("fit currently trains single-table checkpoints; use sweep for relational runs")
    ds = config.dataset
    table = load_csv(ds["path"], ds["target"], ds["task"])
    train_tbl, _ = preprocess(table, config.test_fraction, config.seed)
    out = Path(config.out_dir)
    for point in config.grid:
        model_cfg = ModelConfig(point.layers, point.hidden_dim, point.heads)
        model, vocab, trace = fit_table(train_tbl, model_cfg, config.train_config())
        point_dir = out / f"fit_L{point.layers}_H{point.hidden_dim}_A{point.heads}"
        point_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, point_dir / "model.tsyn")
        save_vocab(vocab, point_dir / "vocab.json")
        save_schema(train_tbl.schema, point_dir / "table.schema.json")
        log.info(
            "fitted %s: final loss %.4f -> %s",
            point.label(), trace.epoch_losses[-1], point_dir,
        )
        print(point_dir)
    return 0


def cmd_sample(args) -> int:
    ckpt = Path(args.checkpoint)
    model = load_checkpoint(ckpt)
    vocab = load_vocab(ckpt.parent / "vocab.json")
    schema = load_schema(ckpt.parent / "table.schema.json")
    config = SampleConfig(temperature=args.temperature, seed=args.seed or 0)
    table, stats = generate_table(model, vocab, schema, args.rows, config)
    out = Path(args.out_dir or ckpt.parent)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "synthetic.csv"
    write_csv(table, path)
    log.info("generation stats: %s", stats.as_dict())
    print(path)
    return 0


def cmd_evaluate(args) -> int:
    seed = args.seed or 0
    real = load_csv(args.real_csv, args.target, args.task)
    real_train, real_test = preprocess(real, args.test_fraction, seed)

    raw_synth = load_csv(args.synth_csv, args.target, args.task)
    # re-encode against the real schema so category indices agree (an unseen
    # category is an error), then put both sides on the sentence-precision
    # grid in original units
    synth = encode_categoricals(
        DataTable(schema=real_train.schema, rows=raw_synth.rows)
    )
    synth = denormalize_continuous(quantize_numbers(renormalize_continuous(synth)))
    real_train = denormalize_continuous(quantize_numbers(real_train))
    real_test = denormalize_continuous(quantize_numbers(real_test))
    if synth.n_rows < real_train.n_rows:
        raise ValueError(
            f"synthetic CSV has {synth.n_rows} rows; need at least {real_train.n_rows}"
        )
    if synth.n_rows > real_train.n_rows:
        synth, _ = shuffle_split(
            synth, 1.0 - real_train.n_rows / synth.n_rows, seed
        )
    result = {
        "utility": evaluate_utility(real_train, synth, real_test).as_dict(),
        "similarity": discriminator_similarity(real_train, synth, seed).as_dict(),
    }
    print(json.dumps(result, indent=2))
    return 0


def cmd_sweep(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    reports = run_sweep(config)
    failed = [r for r in reports if r["status"] != "ok"]
    log.info("sweep finished: %d points, %d failed", len(reports), len(failed))
    print(json.dumps([{"point": r["config"]["point"], "status": r["status"]} for r in reports]))
    return 0


def cmd_report(args) -> int:
    reports = load_reports(args.directory)
    path = emit_report(reports, args.format, args.out_dir or args.directory)
    print(path)
    return 0


def cmd_plot(args) -> int:
    reports = load_reports(args.directory)
    path = emit_plot(reports, args.dimension, args.out_dir or args.directory)
    print(path)
    return 0


_COMMANDS = {
    "fit": cmd_fit,
    "sample": cmd_sample,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "report": cmd_report,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
