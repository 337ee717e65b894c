"""Command-line driver: ``spxnet {ingest,train,benchmark,evaluate,export-curves}``.

Settings come from defaults, then an optional JSON config file, then flags.
The output root is ``--out``, else ``$SPXNET_OUTPUT``, else the config's
``output_dir``. Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import glob
import json
import logging
import os
import sys
from dataclasses import dataclass, field

from . import experiments
from .dataset import SCALING_MODES, build_dataset
from .experiments import MODEL_IDS, evaluate_split, format_table, model_spec, run_benchmark_suite
from .ingest import DEFAULT_END, DEFAULT_START, IngestError, fixture_path, load_csv, select_features
from .layers import Model
from .training import TrainConfig, two_stage_train

OUTPUT_ENV = "SPXNET_OUTPUT"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    data_path: str | None = None  # None means the bundled fixture
    start: str = DEFAULT_START.isoformat()
    end: str = DEFAULT_END.isoformat()
    price_column: str = "close"
    window_len: int = 14
    ratios: tuple = (0.70, 0.15, 0.15)
    scaling: str = "window"
    fc_width: int = 14
    padding: str = "valid"
    train: TrainConfig = field(default_factory=TrainConfig)
    models: tuple = MODEL_IDS
    seeds: tuple = (1, 2, 3)
    output_dir: str = "runs"
    jobs: int = 1

    def validate(self):
        if self.data_path is not None and not os.path.exists(self.data_path):
            raise ConfigError(f"data file not found: {self.data_path}")
        if abs(sum(self.ratios) - 1) > 1e-9 or len(self.ratios) != 3:
            raise ConfigError(f"split ratios must sum to 1: {self.ratios}")
        bad = [m for m in self.models if m not in MODEL_IDS]
        if bad:
            raise ConfigError(f"unknown model(s) {bad}; valid ids: {', '.join(MODEL_IDS)}")
        if self.scaling not in SCALING_MODES:
            raise ConfigError(f"scaling must be one of {SCALING_MODES}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        return self

    @property
    def spec_options(self):
        return {"fc_width": self.fc_width, "padding": self.padding}

    def load_dataset(self):
        start, end = dt.date.fromisoformat(self.start), dt.date.fromisoformat(self.end)
        series = load_csv(self.data_path or fixture_path(), start, end)
        return series, build_dataset(select_features(series, self.price_column),
                                     self.window_len, self.ratios, self.scaling)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    train_fields = {f.name for f in dataclasses.fields(TrainConfig)}
    run_fields = {f.name for f in dataclasses.fields(RunConfig)} - {"train"}
    unknown = set(doc) - run_fields - train_fields - {"train"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    train = dict(doc.pop("train", {}))
    train.update({k: doc.pop(k) for k in list(doc) if k in train_fields})
    for key in ("ratios", "models", "seeds"):
        if key in doc:
            doc[key] = tuple(doc[key])
    try:
        return RunConfig(train=TrainConfig(**train), **doc)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def _parse_seeds(text):
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers: {text!r}")


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "data", None):
        cfg.data_path = args.data
    if getattr(args, "scaling", None):
        cfg.scaling = args.scaling
    if getattr(args, "jobs", None):
        cfg.jobs = args.jobs
    if getattr(args, "models", None):
        cfg.models = tuple(args.models.split(","))
    if getattr(args, "seeds", None):
        cfg.seeds = args.seeds
    if getattr(args, "seed", None) is not None:
        cfg.seeds = (args.seed,)
    if getattr(args, "max_epochs", None):
        cfg.train = dataclasses.replace(cfg.train, max_epochs=args.max_epochs)
    cfg.output_dir = getattr(args, "out", None) or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    return cfg.validate()


def cmd_ingest(args):
    if not os.path.exists(args.path):
        print(f"error: data file not found: {args.path}", file=sys.stderr)
        return 2
    start = dt.date.fromisoformat(args.start) if args.start else None
    end = dt.date.fromisoformat(args.end) if args.end else None
    series = load_csv(args.path, start, end)
    s = series.summary()
    print(f"rows: {s['rows']}")
    print(f"dropped: {s['dropped']}")
    print(f"inconsistent ohlc: {s['inconsistent_ohlc']}")
    print(f"span: {s['start']}..{s['end']}")
    if args.dump_samples:
        ds = build_dataset(select_features(series))
        ds.dump_csv(args.dump_samples)
        print(f"samples: {len(ds)} -> {args.dump_samples}")
    return 0


def cmd_train(args):
    cfg = _resolve(args)
    _, ds = cfg.load_dataset()
    seed = cfg.seeds[0]
    train = dataclasses.replace(cfg.train, seed=seed)
    out = os.path.join(cfg.output_dir, f"{args.model}_seed{seed}")
    os.makedirs(out, exist_ok=True)
    row = _train_artifacts(args.model, ds, train, cfg, out)
    print(f"{args.model} seed {seed}: best_epoch {row['best_epoch']}, "
          f"test accuracy {row['accuracy']:.4f}, precision {row['precision']:.4f}")
    return 0


def _train_artifacts(model_id, ds, train, cfg, out):
    spec = model_spec(model_id, **cfg.spec_options)
    result = two_stage_train(spec.build, ds, train)
    ev = evaluate_split(result.model, ds)
    row = {"model": model_id, "seed": train.seed, **dataclasses.asdict(ev),
           "best_epoch": result.curves.best_epoch, "stopped_epoch": result.curves.stopped_epoch}
    result.model.save(os.path.join(out, "weights.json"))
    result.curves.to_csv(os.path.join(out, "curves.csv"))
    with open(os.path.join(out, "metrics.json"), "w") as fh:
        json.dump(row, fh, indent=2)
        fh.write("\n")
    return row


def cmd_benchmark(args):
    cfg = _resolve(args)
    _, ds = cfg.load_dataset()
    report = run_benchmark_suite(ds, cfg.train, cfg.seeds, cfg.models, cfg.output_dir,
                                 cfg.jobs, cfg.spec_options)
    print(format_table(report))
    print(f"report: {os.path.join(cfg.output_dir, 'report.json')}")
    return 0 if any(r["status"] == "ok" for r in report["runs"]) else 1


def cmd_evaluate(args):
    cfg = _resolve(args)
    _, ds = cfg.load_dataset()
    if not os.path.exists(args.weights):
        print(f"error: weights file not found: {args.weights}", file=sys.stderr)
        return 2
    model = Model.load(args.weights)
    ev = evaluate_split(model, ds, args.split)
    print(f"{model.name} on {args.split}: accuracy {ev.accuracy:.4f}, precision {ev.precision:.4f}, "
          f"n={ev.n_test}")
    return 0


def cmd_export_curves(args):
    root = args.out or os.environ.get(OUTPUT_ENV) or "runs"
    files = sorted(glob.glob(os.path.join(root, "curves", "*_seed*.csv")))
    if not files:
        print(f"error: no curve files under {os.path.join(root, 'curves')}", file=sys.stderr)
        return 2
    dest = args.dest or os.path.join(root, "curves_all.csv")
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "seed", "epoch", "train_loss", "val_loss"])
        for path in files:
            model, seed = os.path.basename(path)[:-4].rsplit("_seed", 1)
            with open(path, newline="") as src:
                for rec in csv.DictReader(src):
                    w.writerow([model, seed, rec["epoch"], rec["train_loss"], rec["val_loss"]])
    print(f"{len(files)} curve files -> {dest}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="spxnet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--data", help="Yahoo-format OHLCV CSV (default: bundled fixture)")
        sp.add_argument("--out", help=f"output root (default: ${OUTPUT_ENV} or config)")
        sp.add_argument("--scaling", choices=SCALING_MODES)
        sp.add_argument("--max-epochs", type=int)

    sp = sub.add_parser("ingest", help="parse a CSV and print a summary")
    sp.add_argument("path")
    sp.add_argument("--start")
    sp.add_argument("--end")
    sp.add_argument("--dump-samples", metavar="CSV", help="also write the per-sample audit CSV")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("train", help="two-stage training of one model")
    common(sp)
    sp.add_argument("--model", required=True, choices=MODEL_IDS)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("benchmark", help="all models x seeds, writes report.json/report.csv")
    common(sp)
    sp.add_argument("--seeds", type=_parse_seeds)
    sp.add_argument("--models", help="comma-separated subset of model ids")
    sp.add_argument("--jobs", type=int)
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("evaluate", help="score saved weights on a split")
    common(sp)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--split", default="test", choices=("train", "val", "test"))
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("export-curves", help="merge per-run curve CSVs into one file")
    sp.add_argument("--out", help="output root holding curves/")
    sp.add_argument("--dest", help="destination CSV (default: <out>/curves_all.csv)")
    sp.set_defaults(func=cmd_export_curves)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, experiments.UnknownSpec) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (IngestError, OSError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
