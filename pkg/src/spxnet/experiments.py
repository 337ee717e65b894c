"""Model zoo, directional evaluation and the benchmark suite."""
from __future__ import annotations

import csv
import json
import logging
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .dataset import Direction, is_up
from .layers import Dense, Model, layer_from_config
from .training import EmptySplit, TrainConfig, two_stage_train

logger = logging.getLogger(__name__)

MODEL_IDS = ("fc1", "fc2", "rnn1", "rnn1fc", "rnn2", "lstm1", "conv1", "conv1fc")
RANDOM_GUESS_ACCURACY = 0.5
REPORT_FORMAT = "spxnet-report"


class UnknownSpec(KeyError):
    def __str__(self):
        return f"unknown model id {self.args[0]!r}; valid ids: {', '.join(MODEL_IDS)}"


@dataclass(frozen=True)
class ModelSpec:
    """Declarative layer stack; ``layers`` are layer config dicts, the Dense(1) head is implicit."""

    id: str
    description: str
    layers: tuple
    head_activation: str = "linear"

    def build(self, seed=0, input_shape=(14, 2)) -> Model:
        stack = [layer_from_config(c) for c in self.layers]
        stack.append(Dense(1, self.head_activation))
        return Model(stack, input_shape, seed=seed, name=self.id)


def model_spec(spec_id: str, fc_width: int = 14, padding: str = "valid",
               head_activation: str | None = None) -> ModelSpec:
    """Layer stacks for the seven benchmarks and the proposed ``conv1fc``.

    Dense models see the window flattened to 28 inputs; recurrent and
    convolutional models see it as a (14, 2) sequence. Recurrent cells use
    tanh, every other hidden layer ReLU. The head is linear except for
    ``conv1fc``, whose head is ReLU.
    """
    flat = {"kind": "flatten"}

    def dense(u):
        return {"kind": "dense", "units": u, "activation": "relu"}

    def rnn(u):
        return {"kind": "simple_rnn", "units": u, "activation": "tanh"}

    conv = {"kind": "conv1d", "filters": 4, "kernel_len": 3, "activation": "relu", "padding": padding}
    table = {
        "fc1": ("Dense(14)", (flat, dense(14)), "linear"),
        "fc2": ("Dense(14) -> Dense(7)", (flat, dense(14), dense(7)), "linear"),
        "rnn1": ("RNN(4)", (rnn(4),), "linear"),
        "rnn1fc": ("RNN(4) -> Dense(4)", (rnn(4), dense(4)), "linear"),
        "rnn2": ("RNN(6)", (rnn(6),), "linear"),
        "lstm1": ("LSTM(6)", ({"kind": "lstm", "units": 6},), "linear"),
        "conv1": ("Conv1D(4, 3)", (conv, flat), "linear"),
        "conv1fc": (f"Conv1D(4, 3) -> Dense({fc_width})", (conv, flat, dense(fc_width)), "relu"),
    }
    if spec_id not in table:
        raise UnknownSpec(spec_id)
    desc, layers, head = table[spec_id]
    return ModelSpec(spec_id, desc, layers, head_activation or head)


def build_model(spec_id: str, seed: int = 0, **kwargs) -> Model:
    return model_spec(spec_id, **kwargs).build(seed)


def predict_direction(model: Model, sample, scaler) -> Direction:
    x = scaler.transform_features(sample.features)[None]
    pred = model.predict(x)[0, 0]
    return Direction(int(is_up(scaler.transform_price(sample.anchor_close, sample.anchor_close), pred)))


@dataclass(frozen=True)
class Evaluation:
    accuracy: float
    precision: float
    no_positive_predictions: bool
    n_test: int
    up_fraction_predicted: float


def direction_metrics(pred_up, true_up) -> Evaluation:
    pred_up, true_up = np.asarray(pred_up, bool), np.asarray(true_up, bool)
    if len(true_up) == 0:
        raise EmptySplit("test split is empty")
    n_pos = int(pred_up.sum())
    precision = float((pred_up & true_up).sum() / n_pos) if n_pos else 0.0
    return Evaluation(float((pred_up == true_up).mean()), precision, n_pos == 0,
                      len(true_up), n_pos / len(true_up))


def evaluate(model: Model, x, anchor, labels) -> Evaluation:
    """Directional accuracy and Up-class precision of a next-close regressor."""
    if len(x) == 0:
        raise EmptySplit("test split is empty")
    pred = model.predict(x)[:, 0]
    return direction_metrics(is_up(anchor, pred), np.asarray(labels) == Direction.UP)


def evaluate_split(model: Model, dataset, split="test") -> Evaluation:
    x, _, anchor, labels = dataset.part(split)
    return evaluate(model, x, anchor, labels)


def majority_baseline(dataset) -> dict:
    """Constant predictor using the majority direction of train+val, scored on test."""
    _, _, _, fit_labels = dataset.part("trainval")
    _, _, _, test_labels = dataset.part("test")
    label = Direction.UP if fit_labels.mean() >= 0.5 else Direction.DOWN
    ev = direction_metrics(np.full(len(test_labels), label == Direction.UP),
                           test_labels == Direction.UP)
    return {"label": label.name, "accuracy": ev.accuracy}


def run_single(spec: ModelSpec, dataset, config: TrainConfig, out_dir=None) -> dict:
    """Two-stage training then test evaluation for one (model, seed)."""
    result = two_stage_train(spec.build, dataset, config)
    ev = evaluate_split(result.model, dataset)
    row = {"model": spec.id, "seed": config.seed, "status": "ok",
           **asdict(ev),
           "best_epoch": result.curves.best_epoch, "stopped_epoch": result.curves.stopped_epoch}
    if out_dir is not None:
        stem = f"{spec.id}_seed{config.seed}"
        os.makedirs(os.path.join(out_dir, "curves"), exist_ok=True)
        os.makedirs(os.path.join(out_dir, "weights"), exist_ok=True)
        result.curves.to_csv(os.path.join(out_dir, "curves", stem + ".csv"))
        result.model.save(os.path.join(out_dir, "weights", stem + ".json"))
    return row


def _run_task(args):
    spec, dataset, config, out_dir = args
    try:
        return run_single(spec, dataset, config, out_dir)
    except Exception as e:  # one failed model must not sink the suite
        logger.exception("%s seed %d failed", spec.id, config.seed)
        return {"model": spec.id, "seed": config.seed, "status": "failed", "error": repr(e)}


def summarize(runs: list[dict], models) -> list[dict]:
    rows = []
    for m in models:
        ok = [r for r in runs if r["model"] == m and r["status"] == "ok"]
        if not ok:
            rows.append({"model": m, "status": "failed", "n_ok": 0})
            continue
        acc = [r["accuracy"] for r in ok]
        rows.append({
            "model": m, "status": "ok", "n_ok": len(ok),
            "accuracy": statistics.median(acc),
            "precision": statistics.median(r["precision"] for r in ok),
            "best_epoch": statistics.median(r["best_epoch"] for r in ok),
            "stopped_epoch": statistics.median(r["stopped_epoch"] for r in ok),
            "accuracy_min": min(acc), "accuracy_max": max(acc),
        })
    return rows


def run_benchmark_suite(dataset, config: TrainConfig, seeds=(1, 2, 3), models=MODEL_IDS,
                        out_dir=None, jobs: int = 1, spec_options: dict | None = None) -> dict:
    """Train and score every model for every seed and assemble the report.

    With ``jobs > 1`` runs go to a process pool; each run owns its model and
    optimizer, so results do not depend on ``jobs``.
    """
    spec_options = spec_options or {}
    specs = [model_spec(m, **spec_options) for m in models]
    tasks = [(s, dataset, replace(config, seed=seed), out_dir) for s in specs for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            runs = list(pool.map(_run_task, tasks))
    else:
        runs = [_run_task(t) for t in tasks]
    cfg = asdict(config)
    cfg.pop("seed")
    report = {
        "format": REPORT_FORMAT,
        "config": cfg,
        "seeds": list(seeds),
        "n_test": len(dataset.part("test")[3]),
        "runs": runs,
        "summary": summarize(runs, models),
        "baselines": {"random_guess": RANDOM_GUESS_ACCURACY,
                      "majority_class": majority_baseline(dataset)},
    }
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def write_report(report: dict, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "report.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "accuracy", "precision", "best_epoch", "seed"])
        for r in report["runs"]:
            if r["status"] == "ok":
                w.writerow([r["model"], r["accuracy"], r["precision"], r["best_epoch"], r["seed"]])
            else:
                w.writerow([r["model"], "FAILED", "", "", r["seed"]])
        for r in report["summary"]:
            if r["status"] == "ok":
                w.writerow([r["model"], r["accuracy"], r["precision"], r["best_epoch"], "median"])
        b = report["baselines"]
        w.writerow(["random_guess", b["random_guess"], "", "", ""])
        w.writerow([f"majority_{b['majority_class']['label'].lower()}",
                    b["majority_class"]["accuracy"], "", "", ""])


def format_table(report: dict) -> str:
    lines = [f"{'model':<14}{'accuracy':>10}{'precision':>11}{'best_ep':>9}"]
    for r in report["summary"]:
        if r["status"] != "ok":
            lines.append(f"{r['model']:<14}{'FAILED':>10}")
            continue
        lines.append(f"{r['model']:<14}{r['accuracy']:>10.4f}{r['precision']:>11.4f}{r['best_epoch']:>9g}")
    b = report["baselines"]
    lines.append(f"{'random guess':<14}{b['random_guess']:>10.4f}")
    lines.append(f"{'majority ' + b['majority_class']['label'].lower():<14}{b['majority_class']['accuracy']:>10.4f}")
    return "\n".join(lines)
