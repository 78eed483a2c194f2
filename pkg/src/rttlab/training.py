"""Stateful batched training loop, evaluation helpers, and grid search.

Training follows the stateful-batch layout: the (standardized) series is
partitioned into B equal-length contiguous lanes, every optimizer step
consumes one timestep across all lanes, lane states persist across steps
within an epoch and reset to zero at each epoch start. Gradients are
truncated at step boundaries (the carried state is a constant input).
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import RttlabError
from .lstm import (
    LstmArchitecture,
    LstmState,
    ModelWeights,
    backward,
    forward,
    init_weights,
    mse_loss,
)
from .metrics import smape
from .optim import AdamState, adam_step, clip_by_global_norm
from .trace import Standardizer


@dataclass(frozen=True)
class TrainConfig:
    """Training-loop knobs; defaults follow the reference operating point."""

    batch_size: int = 16
    epochs: int = 700
    seed: int = 0
    k_frozen: int = 0
    learning_rate: float = 1e-5
    clip_norm: float = 5.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.k_frozen < 0:
            raise ValueError("k_frozen must be >= 0")


@dataclass(frozen=True)
class HyperGrid:
    """Cartesian hyperparameter search space."""

    layer_counts: tuple = (1, 2, 3, 4)
    hidden_units: tuple = (8, 16, 32, 64, 128, 256, 512)
    batch_sizes: tuple = (4, 8, 16, 32)
    epoch_counts: tuple = (400, 500, 600, 700)

    def __post_init__(self):
        if not (self.layer_counts and self.hidden_units and self.batch_sizes and self.epoch_counts):
            raise ValueError("grid axes must be non-empty")

    def points(self):
        return list(
            itertools.product(self.layer_counts, self.hidden_units, self.batch_sizes, self.epoch_counts)
        )


@dataclass
class TrainReport:
    epoch_mse: list[float] = field(default_factory=list)
    test_mse: float | None = None
    test_smape: float | None = None
    seconds: float = 0.0


def make_lanes(series: np.ndarray, batch_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Partition a series into B contiguous lanes of one-step-ahead pairs.

    Returns (inputs, targets), each (steps, B): column j is lane j, and
    step t of the epoch consumes row t. The tail that does not fill the
    lanes evenly is truncated.
    """
    series = np.asarray(series, dtype=np.float64)
    lane_len = series.size // batch_size
    if lane_len < 2:
        raise ValueError(
            f"series of length {series.size} is too short for {batch_size} stateful lanes"
        )
    lanes = series[: batch_size * lane_len].reshape(batch_size, lane_len)
    return lanes[:, :-1].T.copy(), lanes[:, 1:].T.copy()


def train(
    series,
    arch: LstmArchitecture,
    config: TrainConfig,
    rng: np.random.Generator | None = None,
    initial_weights: ModelWeights | None = None,
    test: tuple | None = None,
) -> tuple[ModelWeights, TrainReport]:
    """Train on a standardized series; returns final-epoch weights and a report.

    ``test``, when given, is ``(standardized test series, Standardizer)``;
    the report then carries the deterministic test MSE (standardized units)
    and test SMAPE computed on destandardized millisecond values.
    """
    series = np.asarray(series, dtype=np.float64)
    if config.k_frozen >= arch.num_layers:
        raise ValueError("k_frozen must leave at least the top LSTM layer trainable")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    inputs, targets = make_lanes(series, config.batch_size)
    steps = inputs.shape[0]

    weights = init_weights(arch, rng) if initial_weights is None else initial_weights.copy()

    started = time.perf_counter()
    report = TrainReport()
    opt = AdamState.init(weights, learning_rate=config.learning_rate)
    for _ in range(config.epochs):
        state = LstmState.zeros(arch, config.batch_size)
        loss_sum = 0.0
        for t in range(steps):
            preds, state, tape = forward(
                inputs[t : t + 1], state, weights, arch, mode="train", rng=rng
            )
            loss_sum += mse_loss(preds, targets[t : t + 1])
            grads = backward(tape, targets[t : t + 1], weights, k_frozen=config.k_frozen)
            grads = clip_by_global_norm(grads, config.clip_norm)
            weights, opt = adam_step(weights, grads, opt, k_frozen=config.k_frozen)
        report.epoch_mse.append(loss_sum / steps)
    report.seconds = time.perf_counter() - started

    if test is not None:
        test_series, test_standardizer = test
        report.test_mse, report.test_smape = evaluate_weights(
            weights, arch, test_series, test_standardizer
        )
    return weights, report


def predict_series(weights: ModelWeights, arch: LstmArchitecture, series) -> np.ndarray:
    """Deterministic one-step-ahead predictions over a standardized series.

    Feeds series[:-1] through a single stateful lane (dropout off, sigma 0)
    and returns predictions aligned with series[1:].
    """
    series = np.asarray(series, dtype=np.float64)
    if series.size < 2:
        raise ValueError("need at least 2 samples to predict")
    state = LstmState.zeros(arch, 1)
    preds, _, _ = forward(series[:-1, None], state, weights, arch, mode="infer", sigma=0.0)
    return preds[:, 0]


def evaluate_weights(
    weights: ModelWeights,
    arch: LstmArchitecture,
    series,
    standardizer: Standardizer | None = None,
) -> tuple[float, float]:
    """Deterministic (test MSE, test SMAPE) on a standardized series.

    MSE is in standardized units as used for model selection. SMAPE is
    computed on millisecond values when a standardizer is supplied.
    """
    series = np.asarray(series, dtype=np.float64)
    preds = predict_series(weights, arch, series)
    actual = series[1:]
    mse = mse_loss(preds, actual)
    if standardizer is not None:
        return mse, smape(standardizer.inverse(actual), standardizer.inverse(preds))
    return mse, smape(actual, preds)


@dataclass
class GridRow:
    layers: int
    hidden: int
    batch: int
    epochs: int
    train_mse: float = float("nan")
    test_mse: float = float("nan")
    test_smape: float = float("nan")
    seconds: float = float("nan")
    error: str | None = None


@dataclass
class GridSearchResult:
    weights: ModelWeights
    arch: LstmArchitecture
    config: TrainConfig
    rows: list[GridRow]


def grid_search(
    train_series,
    test_series,
    grid: HyperGrid,
    rng: np.random.Generator | None = None,
    *,
    test_standardizer: Standardizer | None = None,
    dropout_rate: float = 0.5,
    elu_alpha: float = 1.0,
    sigma: float = 1.0,
) -> GridSearchResult:
    """Train one model per grid point and select by minimum test MSE.

    Ties break toward fewer parameters, then lexicographic (L, N, B,
    epochs). Points that fail keep their row (with the error recorded) and
    are excluded from selection; if every point fails, the last error is
    re-raised.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    points = grid.points()
    seeds = rng.integers(0, 2**63, size=len(points))

    rows: list[GridRow] = []
    candidates = []
    last_error: Exception | None = None
    for (layers, hidden, batch, epochs), seed in zip(points, seeds):
        row = GridRow(layers=layers, hidden=hidden, batch=batch, epochs=epochs)
        rows.append(row)
        try:
            arch = LstmArchitecture(
                num_layers=layers,
                hidden_units=hidden,
                dropout_rate=dropout_rate,
                elu_alpha=elu_alpha,
                sigma=sigma,
            )
            config = TrainConfig(batch_size=batch, epochs=epochs, seed=int(seed))
            weights, report = train(
                train_series,
                arch,
                config,
                test=(np.asarray(test_series, dtype=np.float64), test_standardizer),
            )
        except (RttlabError, ValueError) as exc:
            row.error = str(exc)
            last_error = exc
            continue
        row.train_mse = report.epoch_mse[-1] if report.epoch_mse else float("nan")
        row.test_mse = report.test_mse
        row.test_smape = report.test_smape
        row.seconds = report.seconds
        key = (report.test_mse, arch.num_params(), layers, hidden, batch, epochs)
        candidates.append((key, weights, arch, config))

    if not candidates:
        raise RttlabError("every grid point failed") from last_error
    candidates.sort(key=lambda item: item[0])
    _, weights, arch, config = candidates[0]
    return GridSearchResult(weights=weights, arch=arch, config=config, rows=rows)


def grid_report_csv(rows) -> str:
    """Serialize grid rows to CSV: L,N,B,epochs,train_mse,test_mse,test_smape,seconds."""
    lines = ["L,N,B,epochs,train_mse,test_mse,test_smape,seconds"]
    for r in rows:
        lines.append(
            f"{r.layers},{r.hidden},{r.batch},{r.epochs},"
            f"{_fmt(r.train_mse)},{_fmt(r.test_mse)},{_fmt(r.test_smape)},{_fmt(r.seconds)}"
        )
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if value is None:
        return "nan"
    return repr(float(value))
