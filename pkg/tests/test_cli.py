import csv
import json

import numpy as np
import pytest

from oracles import synthetic_series
from spxnet.cli import main

HEADER = "Date,Open,High,Low,Close,Adj Close,Volume\n"


@pytest.fixture(scope="module")
def synth_csv(tmp_path_factory):
    s = synthetic_series(n=300)
    path = tmp_path_factory.mktemp("data") / "synth.csv"
    with open(path, "w") as fh:
        fh.write(HEADER)
        for d, (c, v) in zip(s.dates, s.values.tolist()):
            fh.write(f"{d.isoformat()},{c!r},{c!r},{c!r},{c!r},{c!r},{int(v)}\n")
    return path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_ingest_fixture_summary(capsys):
    from spxnet.ingest import fixture_path
    code, out, _ = run(["ingest", fixture_path()], capsys)
    assert code == 0
    assert "rows: 7559" in out and "dropped: 0" in out
    assert "span: 1990-07-16..2020-07-15" in out


def test_ingest_counts_null_rows(tmp_path, capsys):
    p = tmp_path / "n.csv"
    rows = [f"2020-01-{d:02d},1,2,1,1.5,1.5,10\n" for d in range(1, 6)]
    rows += [f"2020-01-{d:02d},null,null,null,null,null,null\n" for d in range(6, 9)]
    p.write_text(HEADER + "".join(rows))
    code, out, _ = run(["ingest", p], capsys)
    assert code == 0 and "rows: 5" in out and "dropped: 3" in out


def test_ingest_missing_file(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code, _, err = run(["ingest", missing], capsys)
    assert code == 2 and str(missing) in err


def test_ingest_dump_samples(tmp_path, capsys, synth_csv):
    dest = tmp_path / "samples.csv"
    code, out, _ = run(["ingest", synth_csv, "--dump-samples", dest], capsys)
    assert code == 0 and "samples: 286" in out
    assert len(dest.read_text().splitlines()) == 287


def test_invalid_model_is_usage_error(tmp_path, capsys, synth_csv):
    with pytest.raises(SystemExit) as e:
        main(["train", "--model", "conv9", "--data", str(synth_csv)])
    assert e.value.code == 2
    code, _, err = run(["benchmark", "--models", "fc1,conv9", "--data", synth_csv,
                        "--out", tmp_path], capsys)
    assert code == 2 and "conv9" in err and "conv1fc" in err


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"not_a_key": 1}))
    code, _, err = run(["benchmark", "--config", cfg, "--out", tmp_path], capsys)
    assert code == 2 and "not_a_key" in err


def test_train_writes_artifacts_deterministically(tmp_path, capsys, synth_csv):
    outs = []
    for name in ("a", "b"):
        code, out, _ = run(["train", "--model", "conv1fc", "--seed", 5, "--max-epochs", 5,
                            "--data", synth_csv, "--out", tmp_path / name], capsys)
        assert code == 0 and "conv1fc seed 5" in out
        outs.append(tmp_path / name / "conv1fc_seed5")
    for f in ("weights.json", "curves.csv", "metrics.json"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    metrics = json.loads((outs[0] / "metrics.json").read_text())
    assert 0 <= metrics["accuracy"] <= 1


def test_config_file_and_flag_precedence(tmp_path, capsys, synth_csv):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"data_path": str(synth_csv), "max_epochs": 2,
                               "train": {"patience": 1}, "seeds": [7]}))
    code, out, _ = run(["train", "--config", cfg, "--model", "fc1", "--out", tmp_path], capsys)
    assert code == 0 and "fc1 seed 7" in out
    curves = (tmp_path / "fc1_seed7" / "curves.csv").read_text().splitlines()
    assert len(curves) - 1 <= 2
    code, out, _ = run(["train", "--config", cfg, "--model", "fc1", "--seed", 8,
                        "--out", tmp_path], capsys)
    assert "fc1 seed 8" in out


def test_env_var_sets_output_root(tmp_path, capsys, synth_csv, monkeypatch):
    monkeypatch.setenv("SPXNET_OUTPUT", str(tmp_path / "env"))
    code, _, _ = run(["train", "--model", "fc1", "--max-epochs", 1, "--data", synth_csv], capsys)
    assert code == 0 and (tmp_path / "env" / "fc1_seed1" / "weights.json").exists()
    run(["train", "--model", "fc1", "--max-epochs", 1, "--data", synth_csv,
         "--out", tmp_path / "flag"], capsys)
    assert (tmp_path / "flag" / "fc1_seed1").exists()


@pytest.fixture(scope="module")
def bench(tmp_path_factory, synth_csv):
    out = tmp_path_factory.mktemp("bench")
    code = main(["benchmark", "--seeds", "1,2", "--models", "fc1,conv1fc", "--max-epochs", "3",
                 "--data", str(synth_csv), "--out", str(out)])
    return code, out


def test_benchmark_outputs(bench, capsys):
    code, out = bench
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report["runs"]) == 4 and report["seeds"] == [1, 2]
    assert sorted(p.name for p in (out / "curves").iterdir()) == [
        "conv1fc_seed1.csv", "conv1fc_seed2.csv", "fc1_seed1.csv", "fc1_seed2.csv"]


def test_evaluate_saved_weights(bench, capsys, synth_csv):
    _, out = bench
    w = out / "weights" / "conv1fc_seed1.json"
    code, text, _ = run(["evaluate", "--weights", w, "--data", synth_csv], capsys)
    assert code == 0 and text.startswith("conv1fc on test: accuracy")
    report = json.loads((out / "report.json").read_text())
    acc = next(r["accuracy"] for r in report["runs"] if r["model"] == "conv1fc" and r["seed"] == 1)
    assert f"accuracy {acc:.4f}" in text
    code, _, err = run(["evaluate", "--weights", out / "missing.json", "--data", synth_csv], capsys)
    assert code == 2 and "missing.json" in err


def test_export_curves(bench, capsys, tmp_path):
    _, out = bench
    dest = tmp_path / "all.csv"
    code, _, _ = run(["export-curves", "--out", out, "--dest", dest], capsys)
    assert code == 0
    with open(dest) as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["model", "seed", "epoch", "train_loss", "val_loss"]
    assert {(r["model"], r["seed"]) for r in rows} == {
        ("fc1", "1"), ("fc1", "2"), ("conv1fc", "1"), ("conv1fc", "2")}
    assert all(np.isfinite(float(r["val_loss"])) for r in rows)
    code, _, _ = run(["export-curves", "--out", tmp_path / "empty"], capsys)
    assert code == 2
