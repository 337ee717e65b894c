import csv
import inspect

import numpy as np
import pytest

from oracles import synthetic_series
from spxnet import dataset as dataset_mod
from spxnet import experiments
from spxnet.dataset import Direction, build_dataset, build_windows
from spxnet.experiments import (
    MODEL_IDS,
    UnknownSpec,
    build_model,
    direction_metrics,
    evaluate,
    model_spec,
    predict_direction,
    run_benchmark_suite,
)
from spxnet.training import EmptySplit, TrainConfig

QUICK = TrainConfig(max_epochs=2, patience=1)


@pytest.fixture(scope="module")
def small():
    return build_dataset(synthetic_series(n=300))


def test_unknown_spec_lists_ids():
    with pytest.raises(UnknownSpec) as e:
        model_spec("conv9")
    assert all(m in str(e.value) for m in MODEL_IDS)


def test_spec_heads():
    assert model_spec("conv1fc").head_activation == "relu"
    assert all(model_spec(m).head_activation == "linear" for m in MODEL_IDS if m != "conv1fc")
    # conv 3*2*4+4, hidden 48*20+20, head 20+1
    assert model_spec("conv1fc", fc_width=20).build().count_params() == 28 + 980 + 21


class Constant:
    """Stand-in model predicting a fixed scaled value."""

    def __init__(self, value):
        self.value = value

    def predict(self, x):
        return np.full((len(x), 1), self.value)


def test_predict_direction_tie_is_down(small):
    sample = build_windows(synthetic_series(n=300))[0]
    assert predict_direction(Constant(1.0), sample, small.scaler) is Direction.DOWN
    assert predict_direction(Constant(1.0 + 1e-9), sample, small.scaler) is Direction.UP


def test_evaluate_metrics():
    x = np.zeros((4, 14, 2))
    anchor = np.ones(4)
    labels = np.array([1, 0, 1, 1])
    ev = evaluate(Constant(2.0), x, anchor, labels)
    assert ev.accuracy == 0.75 and ev.precision == 0.75 and ev.up_fraction_predicted == 1.0
    ev = evaluate(Constant(0.5), x, anchor, labels)
    assert ev.accuracy == 0.25 and ev.precision == 0.0 and ev.no_positive_predictions
    with pytest.raises(EmptySplit):
        evaluate(Constant(0.5), x[:0], anchor[:0], labels[:0])


def test_direction_metrics_example():
    ev = direction_metrics([1, 1, 0, 0], [1, 0, 0, 1])
    assert (ev.accuracy, ev.precision, ev.n_test) == (0.5, 0.5, 4)


def test_comparator_is_shared():
    # labelling and prediction must both route through dataset.is_up
    assert experiments.is_up is dataset_mod.is_up
    src = inspect.getsource(dataset_mod.label_direction)
    assert "is_up(" in src
    for fn in (experiments.evaluate, experiments.predict_direction):
        assert "is_up(" in inspect.getsource(fn)
        assert ">" not in inspect.getsource(fn).replace("->", "")


@pytest.fixture(scope="module")
def suite(tmp_path_factory, small):
    out = tmp_path_factory.mktemp("suite")
    return out, run_benchmark_suite(small, QUICK, out_dir=out)


def test_suite_structure(suite):
    out, report = suite
    assert len(report["runs"]) == 24
    assert all(r["status"] == "ok" for r in report["runs"])
    assert [r["model"] for r in report["summary"]] == list(MODEL_IDS)
    assert len(list((out / "curves").glob("*.csv"))) == 24
    assert len(list((out / "weights").glob("*.json"))) == 24
    assert report["baselines"]["random_guess"] == 0.5


def test_summary_is_median(suite):
    _, report = suite
    for row in report["summary"]:
        acc = sorted(r["accuracy"] for r in report["runs"] if r["model"] == row["model"])
        assert row["accuracy"] == acc[1]


def test_report_csv_rows(suite):
    out, _ = suite
    with open(out / "report.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["model", "accuracy", "precision", "best_epoch", "seed"]
    labels = [r[0] for r in rows[1:]]
    assert "random_guess" in labels
    assert any(lab.startswith("majority_") for lab in labels)
    assert sum(r[4] == "median" for r in rows[1:]) == 8


def test_suite_deterministic(tmp_path, small, suite):
    out, _ = suite
    run_benchmark_suite(small, QUICK, out_dir=tmp_path)
    assert (tmp_path / "report.json").read_bytes() == (out / "report.json").read_bytes()
    for f in (out / "curves").iterdir():
        assert (tmp_path / "curves" / f.name).read_bytes() == f.read_bytes()


def test_process_pool_matches_serial(tmp_path, small):
    serial = run_benchmark_suite(small, QUICK, seeds=(1,), models=("fc1", "conv1"))
    pooled = run_benchmark_suite(small, QUICK, seeds=(1,), models=("fc1", "conv1"), jobs=2)
    assert serial == pooled


def test_failed_run_is_marked(small, monkeypatch):
    real = experiments.two_stage_train

    def flaky(make, ds, cfg):
        if cfg.seed == 2:
            raise FloatingPointError("diverged")
        return real(make, ds, cfg)

    monkeypatch.setattr(experiments, "two_stage_train", flaky)
    report = run_benchmark_suite(small, QUICK, seeds=(1, 2), models=("fc1",))
    status = {r["seed"]: r["status"] for r in report["runs"]}
    assert status == {1: "ok", 2: "failed"}
    assert report["summary"][0]["n_ok"] == 1
    assert "diverged" in report["runs"][1]["error"]


def test_majority_baseline(small):
    b = experiments.majority_baseline(small)
    test_labels = small.part("test")[3]
    share = test_labels.mean()
    assert b["accuracy"] == pytest.approx(share if b["label"] == "UP" else 1 - share)


def test_build_model_ids():
    for m in MODEL_IDS:
        assert build_model(m).name == m
