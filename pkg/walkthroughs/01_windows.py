"""
From a price CSV to training windows
====================================

Parse the bundled daily S&P 500 file, cut it into 14-day windows and
look at how one window is scaled.
"""
import numpy as np

from spxnet import build_dataset, load_fixture, select_features

series = load_fixture()
print(series.summary())

# two features per day: close and volume
features = select_features(series)
ds = build_dataset(features)
print("samples:", ds.features.shape, "split at", ds.split)

# the raw window behind the first test sample
i = ds.indices("test").start
print("anchor close", ds.anchor_close[i], "next close", ds.target_close[i],
      "label", ds.labels[i])

# every scaled window ends at 1.0; the target is the scaled next close
np.set_printoptions(precision=4, suppress=True)
print(ds.x[i])
print("scaled target", ds.y[i, 0])

# the share of up days in each split
for name in ("train", "val", "test"):
    labels = ds.part(name)[3]
    print(f"{name:>5}: {len(labels)} days, {labels.mean():.3f} up")
