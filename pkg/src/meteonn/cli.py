"""Command line entry point: synth, validate, train, grid, report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .dataset import DataError, Season, generate_synthetic, load_csv, write_csv
from .harness import (
    ExperimentSpec, GridConfig, RunManifest, emit_report, make_manifest, persistence_report,
    run_experiment, run_grid,
)
from .metrics import MetricError
from .models import ModelKind
from .persist import save_model
from .training import DivergenceError

log = logging.getLogger("meteonn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON grid/experiment config file")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--epoch-scale", type=float, help="multiply every epoch count by this factor")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", help="output file (synth) or directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="meteonn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic city CSV")
    p.add_argument("--years", type=int, default=7)
    p.add_argument("--city", default="synthetic")

    p = sub.add_parser("validate", parents=[common], help="check data CSV files")
    p.add_argument("files", nargs="+")

    p = sub.add_parser("train", parents=[common], help="train and score a single experiment")
    p.add_argument("--data", required=True, help="data CSV")
    p.add_argument("--city")
    p.add_argument("--season", required=True, choices=[s.name.lower() for s in Season], type=str.lower)
    p.add_argument("--testing", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--model", required=True, choices=[m.value for m in ModelKind], type=str.upper)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--save", help="write the trained model to this file")

    p = sub.add_parser("grid", parents=[common], help="run the full experiment grid")
    p.add_argument("--data", action="append", default=[], metavar="CITY=CSV",
                   help="data file per city (repeatable); defaults to one synthetic city")

    p = sub.add_parser("report", parents=[common], help="re-emit reports from a manifest")
    p.add_argument("manifest")
    return parser


def _config(args) -> GridConfig:
    cfg = GridConfig.load(args.config) if args.config else GridConfig()
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.epoch_scale is not None:
        changes["epoch_scale"] = args.epoch_scale
    return dataclasses.replace(cfg, **changes)


def _cmd_synth(args) -> int:
    if not args.out:
        raise _UsageError("synth: --out is required")
    series = generate_synthetic(args.seed if args.seed is not None else 0, args.years)
    series = dataclasses.replace(series, city=args.city)
    write_csv(series, args.out)
    print(f"wrote {len(series)} days to {args.out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    for f in args.files:
        s = load_csv(f)
        print(f"{f}: ok, {len(s)} days {s.dates[0]}..{s.dates[-1]}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _config(args)
    city = args.city or Path(args.data).stem
    spec = ExperimentSpec(city, Season.parse(args.season), args.testing, ModelKind.parse(args.model),
                          args.lr, args.epochs, cfg.base_seed)
    data = load_csv(args.data, city)
    row, model = run_experiment(spec, data, cfg, return_model=True)
    base = persistence_report(data, spec.season, spec.testing_id, cfg)
    print(json.dumps({"spec": {"city": spec.city, "season": spec.season.name, "testing_id": spec.testing_id,
                               "model": spec.model_kind.value, "learning_rate": spec.learning_rate,
                               "epochs": spec.epochs, "base_seed": spec.base_seed},
                      "metrics": row.metrics.as_dict(), "persistence": base.as_dict(),
                      "final_train_loss": row.final_train_loss, "train_seconds": row.train_seconds},
                     indent=1))
    if args.save:
        from .harness import prepare_samples

        train, _ = prepare_samples(data, spec.season, spec.testing_id, cfg)
        save_model(args.save, model, train.spec, train.norm)
    return EXIT_OK


def _cmd_grid(args) -> int:
    cfg = _config(args)
    data = {}
    for item in args.data:
        if "=" in item:
            city, path = item.split("=", 1)
        else:
            city, path = Path(item).stem, item
        data[city] = load_csv(path, city)
    if not data:
        s = generate_synthetic(cfg.base_seed, 7)
        data[s.city] = s
    rows = run_grid(list(data), data, cfg, jobs=args.jobs)
    out = Path(args.out or "results")
    emit_report(rows, out, make_manifest(cfg, data, rows))
    failed = sum(1 for r in rows if not hasattr(r, "metrics"))
    print(f"{len(rows)} cells, {failed} failed; reports in {out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    manifest = RunManifest.read(args.manifest)
    out = Path(args.out or Path(args.manifest).parent)
    emit_report(manifest.rows, out)
    print(f"re-emitted {len(manifest.rows)} cells to {out}")
    return EXIT_OK


COMMANDS = {"synth": _cmd_synth, "validate": _cmd_validate, "train": _cmd_train,
            "grid": _cmd_grid, "report": _cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, MetricError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
