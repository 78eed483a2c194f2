"""RTT trace parsing, validation, standardization, splitting, and windowing.

The on-disk format is "trace-csv": UTF-8, LF line endings, no header, one
record per line with fields ``timestamp_ms,rtt_ms``. Timestamps are
informational; ordering follows file order and must be monotone
non-decreasing. The sampling interval is inferred as the modal timestamp
delta.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateInputError,
    EmptyInputError,
    TraceParseError,
    TraceValidationError,
)

DEFAULT_INTERVAL_MS = 500.0


@dataclass(frozen=True, eq=False)
class RttTrace:
    """An ordered series of round-trip times in milliseconds.

    All samples must be finite and strictly positive; the sampling period
    ``interval_ms`` must be positive. ``context`` is a free-text label of the
    measurement environment (e.g. "LTE vehicle Berlin").
    """

    samples: np.ndarray
    interval_ms: float = DEFAULT_INTERVAL_MS
    context: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise TraceValidationError("trace must hold at least one sample")
        if not np.all(np.isfinite(samples)):
            raise TraceValidationError("trace samples must be finite")
        if np.any(samples <= 0.0):
            raise TraceValidationError("trace samples must be > 0 ms")
        if not (np.isfinite(self.interval_ms) and self.interval_ms > 0.0):
            raise TraceValidationError("interval_ms must be a positive real")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return int(self.samples.size)


@dataclass(frozen=True)
class Standardizer:
    """Affine map between raw milliseconds and zero-mean unit-variance units."""

    mean: float
    std: float

    def __post_init__(self):
        if not (np.isfinite(self.std) and self.std > 0.0):
            raise DegenerateInputError("standardizer std must be > 0")

    @classmethod
    def fit(cls, values) -> "Standardizer":
        values = np.asarray(values, dtype=np.float64)
        if values.size < 2:
            raise DegenerateInputError("need at least 2 samples to standardize")
        mean = float(values.mean())
        std = float(values.std())  # population (divide-by-Z) std
        if std == 0.0:
            raise DegenerateInputError("cannot standardize a constant series")
        return cls(mean=mean, std=std)

    def transform(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def inverse(self, values) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std + self.mean


@dataclass(frozen=True, eq=False)
class SupervisedSeries:
    """One-step-ahead (input, target) pairs: ``targets[i] == inputs[i+1]``."""

    inputs: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return int(self.inputs.size)


@dataclass(frozen=True)
class SplitSpec:
    """Ordered train/test split; train takes the first ``train_fraction``."""

    train_fraction: float = 0.8

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must lie strictly between 0 and 1")

    def lengths(self, total: int) -> tuple[int, int]:
        train = int(np.floor(self.train_fraction * total))
        return train, total - train


def standardize(trace: RttTrace) -> tuple[np.ndarray, Standardizer]:
    """Standardize a trace to mean 0 / population std 1, returning the map used."""
    s = Standardizer.fit(trace.samples)
    return s.transform(trace.samples), s


def destandardize(series, s: Standardizer) -> np.ndarray:
    """Map standardized values back to milliseconds."""
    return s.inverse(series)


def split(series, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Split a series into ordered (train, test); concatenation restores it."""
    series = np.asarray(series)
    if series.size < 2:
        raise ValueError("need at least 2 samples to split")
    train_len, _ = spec.lengths(series.size)
    return series[:train_len].copy(), series[train_len:].copy()


def to_supervised(series) -> SupervisedSeries:
    """Shift the series by one step to build (x_i, x_{i+1}) training pairs."""
    series = np.asarray(series, dtype=np.float64)
    if series.size < 2:
        raise DegenerateInputError("need at least 2 samples for supervised pairs")
    return SupervisedSeries(inputs=series[:-1].copy(), targets=series[1:].copy())


def _parse_series_lines(text: str):
    timestamps = []
    values = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 2:
            raise TraceParseError(
                f"expected 'timestamp_ms,value' but got {len(fields)} fields", line=lineno
            )
        try:
            ts = float(fields[0])
            value = float(fields[1])
        except ValueError as exc:
            raise TraceParseError(f"non-numeric field ({exc})", line=lineno) from None
        if not np.isfinite(ts):
            raise TraceValidationError(f"line {lineno}: non-finite timestamp")
        timestamps.append(ts)
        values.append((lineno, value))
    return timestamps, values


def _infer_interval(timestamps) -> float:
    if len(timestamps) < 2:
        return DEFAULT_INTERVAL_MS
    deltas = np.diff(np.asarray(timestamps))
    # Round for the mode so accumulated float error cannot fragment the count.
    counts = Counter(np.round(deltas, 6))
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    interval = float(best[0])
    return interval if interval > 0.0 else DEFAULT_INTERVAL_MS


def parse_series(document) -> tuple[np.ndarray, float]:
    """Parse a trace-csv document into (values, inferred interval).

    Lenient variant used for fingerprint files: values may be any finite
    real. ``document`` is ``bytes`` or ``str``.
    """
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TraceParseError(f"document is not UTF-8: {exc}") from None
    timestamps, values = _parse_series_lines(document)
    if not values:
        raise EmptyInputError("document contains no samples")
    for (lineno, value) in values:
        if not np.isfinite(value):
            raise TraceValidationError(f"line {lineno}: non-finite value")
    ts = np.asarray(timestamps)
    if np.any(np.diff(ts) < 0.0):
        raise TraceValidationError("timestamps must be monotone non-decreasing")
    series = np.asarray([v for (_, v) in values], dtype=np.float64)
    return series, _infer_interval(timestamps)


def parse_trace(document, context: str = "") -> RttTrace:
    """Parse and validate a trace-csv document into an RttTrace."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TraceParseError(f"document is not UTF-8: {exc}") from None
    timestamps, values = _parse_series_lines(document)
    if not values:
        raise EmptyInputError("document contains no samples")
    for (lineno, value) in values:
        if not np.isfinite(value) or value <= 0.0:
            raise TraceValidationError(
                f"line {lineno}: rtt must be a finite positive value, got {value!r}"
            )
    ts = np.asarray(timestamps)
    if np.any(np.diff(ts) < 0.0):
        raise TraceValidationError("timestamps must be monotone non-decreasing")
    samples = np.asarray([v for (_, v) in values], dtype=np.float64)
    return RttTrace(samples=samples, interval_ms=_infer_interval(timestamps), context=context)


def serialize_series(values, interval_ms: float = DEFAULT_INTERVAL_MS) -> str:
    """Serialize values to trace-csv with timestamps k*interval_ms.

    Floats are emitted in shortest round-trip decimal form.
    """
    values = np.asarray(values, dtype=np.float64)
    lines = [f"{repr(float(k * interval_ms))},{repr(float(v))}" for k, v in enumerate(values)]
    return "\n".join(lines) + "\n"


def serialize_trace(trace: RttTrace) -> str:
    """Serialize an RttTrace to trace-csv; parse_trace inverts it."""
    return serialize_series(trace.samples, trace.interval_ms)


def load_trace(path, context: str | None = None) -> RttTrace:
    """Read a trace-csv file; context defaults to the file stem."""
    path = Path(path)
    if context is None:
        context = path.stem
    return parse_trace(path.read_bytes(), context=context)


def save_trace(path, trace: RttTrace) -> None:
    Path(path).write_text(serialize_trace(trace), encoding="utf-8", newline="\n")
