"""Accuracy metrics: SMAPE, SMAPE improvement, Pearson r, percentiles, NRMSE."""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateInputError


def smape(actual, predicted) -> float:
    """Scaled symmetric mean absolute percentage error, in [0, 100].

    ``(100/N) * sum |y' - y| / (|y| + |y'|)``. Each term is symmetric under
    swapping actual and predicted, and the whole metric is invariant to a
    common positive rescaling of both inputs.
    """
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if actual.shape != predicted.shape or actual.size < 1:
        raise ValueError("actual and predicted must be equal-length, non-empty")
    denom = np.abs(actual) + np.abs(predicted)
    zero = np.flatnonzero(denom == 0.0)
    if zero.size:
        raise DegenerateInputError(
            f"|actual| + |predicted| is zero at index {int(zero[0])}"
        )
    return float(100.0 * np.mean(np.abs(predicted - actual) / denom))


def smape_improvement(smape_specialized: float, smape_finetuned: float) -> float:
    """Percentage SMAPE improvement of fine-tuning over the from-scratch baseline.

    Positive means the fine-tuned model is better (positive transfer).
    """
    if smape_specialized == 0.0:
        raise ZeroDivisionError("specialized SMAPE must be non-zero")
    return (smape_specialized - smape_finetuned) / smape_specialized * 100.0


def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("inputs must be equal-length with at least 2 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInputError("pearson is undefined for a constant input")
    return float(np.dot(dx, dy) / math.sqrt(sxx * syy))


def percentile(series, p: float) -> float:
    """Nearest-rank percentile: sorted value at 1-based index ceil(p/100 * n)."""
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise ValueError("series must be non-empty")
    if not 0.0 <= p <= 100.0:
        raise ValueError("percentile must lie in [0, 100]")
    ordered = np.sort(series)
    if p == 0.0:
        return float(ordered[0])
    rank = math.ceil(p / 100.0 * series.size)
    return float(ordered[rank - 1])


def nrmse_percentile(real_trace, emulated_runs, p: float) -> float:
    """RMSE of a percentile across runs, normalized by the real trace's std.

    The normalizer is the population standard deviation of ``real_trace``;
    the result is dimensionless.
    """
    real = np.asarray(real_trace, dtype=np.float64)
    runs = [np.asarray(r, dtype=np.float64) for r in emulated_runs]
    if not runs:
        raise ValueError("need at least one emulated run")
    std = float(real.std())
    if std == 0.0:
        raise DegenerateInputError("real trace is constant; NRMSE undefined")
    ref = percentile(real, p)
    deltas = np.asarray([percentile(run, p) - ref for run in runs])
    return float(math.sqrt(np.mean(deltas**2)) / std)
