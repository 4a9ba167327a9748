"""Empirical order-flow imbalance metrics from trade records.

Three views of the same tape:

  * EWMA imbalance: I_{k+1} = e^{-beta |V_k|} I_k + (1 - e^{-beta |V_k|}) sgn(V_k),
    a per-trade recursion confined to [-1, 1].
  * Bucket imbalance: the tape is cut into consecutive slices of fixed
    absolute volume V; each completed slice reports (buys - sells) / V.
    A trade spanning a boundary is split pro-rata, which conserves volume
    and sign.
  * VPIN: the trailing average of |bucket imbalance| over the last n
    buckets, a standard toxicity proxy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "TradeRecord",
    "ImbalanceSeries",
    "BucketSeries",
    "ewma_imbalance",
    "bucket_imbalance",
    "vpin",
    "ingest_trades",
    "default_beta",
]

TRADE_KINDS = ("execution", "limit_at_touch")


@dataclass(frozen=True)
class TradeRecord:
    index: int
    signed_volume: float
    kind: str = "execution"


@dataclass(frozen=True)
class ImbalanceSeries:
    """EWMA imbalance after each trade, plus the memory parameter used."""

    values: np.ndarray
    beta: float

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("k,I\n")
            for k, v in enumerate(self.values):
                fh.write(f"{k},{v:.12g}\n")


@dataclass(frozen=True)
class BucketSeries:
    """Per-bucket imbalance for completed volume buckets."""

    bucket_volume: float
    values: np.ndarray
    buy_volumes: np.ndarray

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("l,I_tilde\n")
            for l, v in enumerate(self.values):
                fh.write(f"{l},{v:.12g}\n")


def default_beta(v_daily: float, a: float = 30.0) -> float:
    """Memory parameter beta = a / V_daily; a ~ 10..100 sets the intra-day scale."""
    if v_daily <= 0:
        raise ValueError("daily volume must be > 0")
    return a / v_daily


def ewma_imbalance(trades: Iterable[TradeRecord], beta: float, i0: float = 0.0) -> ImbalanceSeries:
    """Run the EWMA recursion over the tape; O(1) state, one value per trade."""
    if beta <= 0:
        raise ValueError("beta must be > 0")
    if not -1.0 <= i0 <= 1.0:
        raise ValueError("initial imbalance must lie in [-1, 1]")
    out = []
    i = float(i0)
    for rec in trades:
        v = rec.signed_volume
        if v == 0:
            raise DataError(f"zero-volume trade at record {rec.index}", location=rec.index)
        w = math.exp(-beta * abs(v))
        i = w * i + (1.0 - w) * math.copysign(1.0, v)
        out.append(i)
    return ImbalanceSeries(values=np.asarray(out), beta=beta)


def bucket_imbalance(trades: Iterable[TradeRecord], bucket_volume: float) -> BucketSeries:
    """Cut the tape into fixed-volume slices; trailing partial slice withheld."""
    if bucket_volume <= 0:
        raise ValueError("bucket volume must be > 0")
    values = []
    buys = []
    fill = 0.0
    buy = 0.0
    for rec in trades:
        v = rec.signed_volume
        if v == 0:
            raise DataError(f"zero-volume trade at record {rec.index}", location=rec.index)
        remaining = abs(v)
        is_buy = v > 0
        while remaining > 0.0:
            take = min(remaining, bucket_volume - fill)
            if is_buy:
                buy += take
            fill += take
            remaining -= take
            if fill >= bucket_volume - 1e-12 * bucket_volume:
                values.append(2.0 * buy / bucket_volume - 1.0)
                buys.append(buy)
                fill = 0.0
                buy = 0.0
    return BucketSeries(
        bucket_volume=bucket_volume,
        values=np.asarray(values),
        buy_volumes=np.asarray(buys),
    )


def vpin(buckets: BucketSeries, n: int) -> np.ndarray:
    """Trailing mean of |bucket imbalance| over the last n buckets.

    Entry j covers buckets j-n .. j-1; the output is empty while fewer than
    n buckets are available.
    """
    if n < 1:
        raise ValueError("window must be >= 1")
    a = np.abs(buckets.values)
    if len(a) < n:
        return np.empty(0)
    c = np.concatenate(([0.0], np.cumsum(a)))
    return (c[n:] - c[:-n]) / n


def _parse_line(fields: Sequence[str], lineno: int, path) -> TradeRecord:
    if len(fields) not in (2, 3):
        raise DataError(f"{path}:{lineno}: expected 2 or 3 fields, got {len(fields)}",
                        location=lineno)
    try:
        index = int(fields[0])
        volume = float(fields[1])
    except ValueError as exc:
        raise DataError(f"{path}:{lineno}: {exc}", location=lineno) from None
    if volume == 0:
        raise DataError(f"{path}:{lineno}: zero signed volume", location=lineno)
    kind = fields[2].strip() if len(fields) == 3 else "execution"
    if kind not in TRADE_KINDS:
        raise DataError(f"{path}:{lineno}: unknown trade kind {kind!r}", location=lineno)
    return TradeRecord(index=index, signed_volume=volume, kind=kind)


def ingest_trades(path, kinds=("execution",)) -> Iterator[TradeRecord]:
    """Stream trade records from a CSV of index,signed_volume[,kind].

    ``kinds`` filters the stream (None keeps everything); a leading header
    row and '#' comment lines are skipped.  Parse errors carry the line
    number.  The file is read lazily, so arbitrarily long tapes use O(1)
    memory.
    """
    def gen():
        with open(path, newline="") as fh:
            for lineno, fields in enumerate(csv.reader(fh), start=1):
                if not fields or (fields[0].lstrip().startswith("#")):
                    continue
                if lineno == 1 and fields[0].strip().lower() in ("index", "k"):
                    continue
                rec = _parse_line(fields, lineno, path)
                if kinds is None or rec.kind in kinds:
                    yield rec

    return gen()
