"""Rebuild the bundled S&P 500 daily fixture from PyPI-hosted datasets.

Yahoo Finance is not reachable from the build environment, so the fixture is
assembled from two redistributed copies of the same Yahoo ^GSPC history:

* ``rdatasets`` (R package openintro, ``sp500_1950_2018``): full Yahoo OHLCV
  rows up to 2018-12-07.
* ``skfolio`` (``sp500_index.csv.gz``): daily closes up to 2022-12-28, no
  open/high/low/volume.

Rows after 2018-12-07 therefore carry the real close only. Their
open/high/low are set equal to the close and their volume is the median of
the last 252 real volumes; ``FILLED_FROM`` below marks the first such date.

Usage::

    pip download --no-deps rdatasets skfolio -d /tmp/wheels
    python tools/build_fixture.py /tmp/wheels src/spxnet/data/GSPC_1990-07-15_2020-07-15.csv
"""
import csv
import glob
import io
import lzma
import pickle
import sys
import zipfile

import numpy as np
import pandas as pd

START, END = "1990-07-15", "2020-07-15"
FILLED_FROM = "2018-12-10"
HEADER = ["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"]


def _load_openintro(wheel_dir):
    wheel = glob.glob(f"{wheel_dir}/rdatasets-*.whl")[0]
    with zipfile.ZipFile(wheel) as z:
        raw = z.read("rdatasets/_data/openintro/sp500_1950_2018.pkl.compress")
    df = pickle.loads(lzma.decompress(raw))
    df = df.rename(columns={"Adj.Close": "Adj Close"})
    return df[HEADER].reset_index(drop=True)


def _load_skfolio(wheel_dir):
    wheel = glob.glob(f"{wheel_dir}/skfolio-*.whl")[0]
    with zipfile.ZipFile(wheel) as z:
        raw = z.read("skfolio/datasets/data/sp500_index.csv.gz")
    return pd.read_csv(io.BytesIO(raw), compression="gzip", dtype={"Date": str})


def build(wheel_dir):
    full = _load_openintro(wheel_dir)
    full = full[(full.Date >= START) & (full.Date <= END)]
    closes = _load_skfolio(wheel_dir)
    tail = closes[(closes.Date > full.Date.iloc[-1]) & (closes.Date <= END)]
    assert tail.Date.iloc[0] == FILLED_FROM
    volume = int(np.median(full.Volume.to_numpy()[-252:]))
    rows = [
        [d, o, h, lo, c, a, int(v)]
        for d, o, h, lo, c, a, v in full.itertuples(index=False)
    ]
    rows += [[d, c, c, c, c, c, volume] for d, c in tail.itertuples(index=False)]
    return rows


def main(argv):
    wheel_dir, dest = argv
    rows = build(wheel_dir)
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for row in rows:
            w.writerow([row[0]] + [repr(float(x)) for x in row[1:6]] + [row[6]])
    print(f"wrote {len(rows)} rows to {dest}")


if __name__ == "__main__":
    main(sys.argv[1:])
