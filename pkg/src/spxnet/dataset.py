"""Sliding-window samples, direction labels, chronological split and scaling."""
from __future__ import annotations

import csv
import datetime as dt
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .ingest import FeatureSeries

WINDOW_LEN = 14
SPLIT_RATIOS = (0.70, 0.15, 0.15)
VOLUME_STD_FLOOR = 1e-12


class SeriesTooShort(ValueError):
    pass


class BadRatios(ValueError):
    pass


class DegenerateSplit(BadRatios):
    pass


class Direction(enum.IntEnum):
    DOWN = 0
    UP = 1


def is_up(anchor, value):
    """Strict rise test shared by labelling and prediction; works on arrays."""
    return np.asarray(value) > np.asarray(anchor)


def label_direction(anchor_close: float, target_close: float) -> Direction:
    return Direction(int(is_up(anchor_close, target_close)))


@dataclass(frozen=True)
class WindowSample:
    features: np.ndarray = field(repr=False)  # (window_len, 2), oldest day first
    target_close: float
    anchor_close: float
    label: Direction
    target_date: dt.date | None = None


def build_windows(series: FeatureSeries, window_len: int = WINDOW_LEN) -> list[WindowSample]:
    n = len(series)
    if n < window_len + 1:
        raise SeriesTooShort(f"need at least {window_len + 1} days, got {n}")
    v = series.values
    out = []
    for i in range(n - window_len):
        feats = v[i:i + window_len].copy()
        anchor, target = feats[-1, 0], v[i + window_len, 0]
        out.append(WindowSample(feats, float(target), float(anchor),
                                label_direction(anchor, target), series.dates[i + window_len]))
    return out


def split_chronological(n: int, ratios=SPLIT_RATIOS) -> tuple[int, int]:
    """Return ``(train_end, val_end)``; the test split takes the remainder."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
        raise BadRatios(f"ratios must be three positive numbers summing to 1: {ratios}")
    if n < 3:
        raise DegenerateSplit(f"cannot split {n} samples three ways")
    train_end = math.floor(ratios[0] * n)
    val_end = train_end + math.floor(ratios[1] * n)
    if train_end == 0 or val_end == train_end or val_end == n:
        raise DegenerateSplit(
            f"empty split for n={n}: {train_end}/{val_end - train_end}/{n - val_end}")
    return train_end, val_end


@dataclass(frozen=True)
class Scaler:
    """Train-fitted feature scaling.

    ``mode="window"`` (default) measures every price relative to the
    window's anchor close: ``p -> 1 + (p / anchor - 1) / price_divisor``,
    where ``price_divisor`` is ``RETURN_SPREAD`` times the training std of
    one-day relative moves. Volumes are taken relative to their window mean,
    then z-scored with training statistics.

    ``mode="global"`` divides prices by the training maximum close
    (``price_divisor``) and z-scores raw volume.

    Both maps are increasing in price and send the anchor to a positive
    value, so comparing a scaled value with the scaled anchor gives the same
    direction as comparing raw prices.
    """

    price_divisor: float
    volume_mean: float
    volume_std: float
    mode: str = "global"

    def transform_features(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        out = np.empty_like(features)
        out[..., 0] = self.transform_price(features[..., 0], features[..., -1:, 0])
        vol = features[..., 1]
        if self.mode == "window":
            vol = _relative_volume(vol)
        out[..., 1] = (vol - self.volume_mean) / self.volume_std
        return out

    def transform_price(self, price, anchor=None):
        price = np.asarray(price, dtype=np.float64)
        if self.mode == "window":
            if anchor is None:
                raise ValueError("window scaling needs the anchor close")
            return 1.0 + (price / np.asarray(anchor, dtype=np.float64) - 1.0) / self.price_divisor
        return price / self.price_divisor


SCALING_MODES = ("window", "global")
RETURN_SPREAD = 10.0


def _relative_volume(vol):
    return vol / np.maximum(vol.mean(axis=-1, keepdims=True), VOLUME_STD_FLOOR) - 1.0


def _unique_days(features: np.ndarray) -> np.ndarray:
    # consecutive stride-1 windows: first window plus the newest row of each later one
    return np.concatenate([features[0], features[1:, -1]])


def fit_scaler(features: np.ndarray, targets: np.ndarray, mode: str = "window") -> Scaler:
    """Fit on the training slice: ``features`` (n, window, 2), ``targets`` (n,)."""
    if mode not in SCALING_MODES:
        raise ValueError(f"unknown scaling mode {mode!r}")
    features, targets = np.asarray(features, dtype=np.float64), np.asarray(targets, dtype=np.float64)
    if len(features) == 0:
        raise DegenerateSplit("empty training slice")
    if mode == "window":
        moves = targets / features[:, -1, 0] - 1.0
        divisor = RETURN_SPREAD * max(float(moves.std()), VOLUME_STD_FLOOR)
        vol = _relative_volume(features[..., 1])
    else:
        days = _unique_days(features)
        divisor = float(max(days[:, 0].max(), targets.max()))
        vol = days[:, 1]
    return Scaler(divisor, float(vol.mean()), max(float(vol.std()), VOLUME_STD_FLOOR), mode)


def apply_scaler(scaler: Scaler, features, target):
    features = np.asarray(features, dtype=np.float64)
    return (scaler.transform_features(features),
            scaler.transform_price(target, features[..., -1, 0]))


@dataclass
class WindowedDataset:
    """Stacked samples with split bounds and a train-fitted scaler.

    Raw arrays keep index points and shares; ``x``/``y``/``anchor`` are scaled.
    """

    features: np.ndarray
    target_close: np.ndarray
    anchor_close: np.ndarray
    labels: np.ndarray
    target_dates: list
    split: tuple[int, int]
    scaler: Scaler

    def __post_init__(self):
        self.x = self.scaler.transform_features(self.features)
        self.y = self.scaler.transform_price(self.target_close, self.anchor_close)[:, None]
        self.anchor = self.scaler.transform_price(self.anchor_close, self.anchor_close)

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i) -> WindowSample:
        return WindowSample(self.features[i], float(self.target_close[i]),
                            float(self.anchor_close[i]), Direction(int(self.labels[i])),
                            self.target_dates[i])

    def indices(self, name: str) -> slice:
        tr, va = self.split
        return {"train": slice(0, tr), "val": slice(tr, va), "test": slice(va, len(self)),
                "trainval": slice(0, va)}[name]

    def part(self, name: str):
        """Scaled ``(x, y, anchor, labels)`` for one split."""
        s = self.indices(name)
        return self.x[s], self.y[s], self.anchor[s], self.labels[s]

    def split_name(self, i: int) -> str:
        tr, va = self.split
        return "train" if i < tr else "val" if i < va else "test"

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_index", "split", "anchor_close", "target_close", "label"])
            for i in range(len(self)):
                w.writerow([i, self.split_name(i), repr(float(self.anchor_close[i])),
                            repr(float(self.target_close[i])), Direction(int(self.labels[i])).name])


def build_dataset(series: FeatureSeries, window_len: int = WINDOW_LEN,
                  ratios=SPLIT_RATIOS, scaling: str = "window") -> WindowedDataset:
    samples = build_windows(series, window_len)
    feats = np.stack([s.features for s in samples])
    targets = np.array([s.target_close for s in samples])
    anchors = np.array([s.anchor_close for s in samples])
    labels = np.array([int(s.label) for s in samples], dtype=np.int8)
    split = split_chronological(len(samples), ratios)
    scaler = fit_scaler(feats[:split[0]], targets[:split[0]], scaling)
    return WindowedDataset(feats, targets, anchors, labels,
                           [s.target_date for s in samples], split, scaler)
