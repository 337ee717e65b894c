"""Parsing of Yahoo-Finance-style daily OHLCV CSV files."""
from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, TextIO

import numpy as np

logger = logging.getLogger(__name__)

HEADER = ("Date", "Open", "High", "Low", "Close", "Adj Close", "Volume")
DEFAULT_START = dt.date(1990, 7, 15)
DEFAULT_END = dt.date(2020, 7, 15)
FIXTURE_NAME = "GSPC_1990-07-15_2020-07-15.csv"


class IngestError(ValueError):
    pass


class MissingHeader(IngestError):
    pass


class MalformedRow(IngestError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class DuplicateDate(IngestError):
    def __init__(self, date: dt.date):
        super().__init__(f"duplicate date {date.isoformat()}")
        self.date = date


class EmptySeries(IngestError):
    pass


@dataclass(frozen=True)
class OhlcvRecord:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    adj_close: float
    volume: float

    def is_consistent(self) -> bool:
        lo, hi = sorted((self.open, self.close))
        return self.low <= lo and hi <= self.high


@dataclass
class DailySeries:
    records: list[OhlcvRecord]
    dropped: int = 0
    warnings: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def start(self) -> dt.date:
        return self.records[0].date

    @property
    def end(self) -> dt.date:
        return self.records[-1].date

    def summary(self) -> dict:
        return {
            "rows": len(self.records),
            "dropped": self.dropped,
            "inconsistent_ohlc": self.warnings,
            "start": self.start.isoformat(),
            "end": self.end.isoformat(),
        }


@dataclass
class FeatureSeries:
    """Per-day model inputs. Column 0 is the close, column 1 the volume."""

    dates: list[dt.date]
    values: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.dates)


def _parse_row(fields: list[str], line_no: int) -> OhlcvRecord | None:
    if len(fields) != len(HEADER):
        raise MalformedRow(line_no, f"expected {len(HEADER)} fields, got {len(fields)}")
    if any(f.strip() == "null" for f in fields[1:]):
        return None
    try:
        date = dt.date.fromisoformat(fields[0].strip())
    except ValueError:
        raise MalformedRow(line_no, f"bad date {fields[0]!r}") from None
    try:
        nums = [float(f) for f in fields[1:]]
    except ValueError as e:
        raise MalformedRow(line_no, str(e)) from None
    if not all(math.isfinite(x) for x in nums):
        raise MalformedRow(line_no, "non-finite value")
    rec = OhlcvRecord(date, *nums)
    if rec.close <= 0:
        raise MalformedRow(line_no, f"non-positive close {rec.close}")
    if rec.volume < 0:
        raise MalformedRow(line_no, f"negative volume {rec.volume}")
    return rec


def parse_ohlcv_csv(
    source: TextIO | Iterable[str],
    start: dt.date | None = None,
    end: dt.date | None = None,
) -> DailySeries:
    """Parse a Yahoo daily-history CSV into an ascending :class:`DailySeries`.

    Rows containing a literal ``null`` are dropped and counted. Rows outside
    ``[start, end]`` are filtered after parsing (both bounds optional).
    """
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise MissingHeader("empty input") from None
    if tuple(h.strip().lstrip("﻿") for h in header) != HEADER:
        raise MissingHeader(f"expected header {','.join(HEADER)}, got {','.join(header)}")

    records, dropped, seen = [], 0, set()
    for line_no, fields in enumerate(reader, start=2):
        if not fields:
            continue
        rec = _parse_row(fields, line_no)
        if rec is None:
            dropped += 1
            continue
        if rec.date in seen:
            raise DuplicateDate(rec.date)
        seen.add(rec.date)
        records.append(rec)

    records.sort(key=lambda r: r.date)
    if start is not None:
        records = [r for r in records if r.date >= start]
    if end is not None:
        records = [r for r in records if r.date <= end]
    if not records:
        raise EmptySeries("no valid data rows")

    bad = sum(not r.is_consistent() for r in records)
    if bad:
        logger.warning("%d rows violate low <= open/close <= high", bad)
    return DailySeries(records, dropped=dropped, warnings=bad)


def load_csv(path, start=DEFAULT_START, end=DEFAULT_END) -> DailySeries:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_ohlcv_csv(fh, start=start, end=end)


def load_fixture(start=DEFAULT_START, end=DEFAULT_END) -> DailySeries:
    """The bundled ^GSPC daily history, 1990-07-16 .. 2020-07-15."""
    text = resources.files("spxnet.data").joinpath(FIXTURE_NAME).read_text("utf-8")
    return parse_ohlcv_csv(io.StringIO(text), start=start, end=end)


def fixture_path():
    return resources.files("spxnet.data").joinpath(FIXTURE_NAME)


def to_csv(series: DailySeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in series.records:
        w.writerow([r.date.isoformat()] + [repr(x) for x in
                    (r.open, r.high, r.low, r.close, r.adj_close, r.volume)])
    return buf.getvalue()


def select_features(series: DailySeries, price: str = "close") -> FeatureSeries:
    """Extract the (price, volume) channels. ``price`` is ``"close"`` or ``"adj_close"``."""
    if price not in ("close", "adj_close"):
        raise ValueError(f"unknown price column {price!r}")
    if len(series) == 0:
        raise EmptySeries("no records")
    values = np.array([(getattr(r, price), r.volume) for r in series.records], dtype=np.float64)
    return FeatureSeries([r.date for r in series.records], values)
