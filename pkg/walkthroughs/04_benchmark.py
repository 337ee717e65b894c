"""
The benchmark suite
===================

Eight architectures, three seeds each, compared with random guessing
and with always predicting the majority direction. Takes a minute or
two on one core; ``spxnet benchmark`` does the same from the shell.
"""
from spxnet import TrainConfig, build_dataset, load_fixture, run_benchmark_suite, select_features
from spxnet.experiments import format_table

ds = build_dataset(select_features(load_fixture()))
report = run_benchmark_suite(ds, TrainConfig(), seeds=(1, 2, 3), out_dir="runs/walkthrough")
print(format_table(report))

# per-seed spread
for row in report["summary"]:
    print(f"{row['model']:<8} {row['accuracy_min']:.4f} .. {row['accuracy_max']:.4f}")
