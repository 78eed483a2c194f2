"""Layer-freezing transfer learning and the from-scratch baseline.

Fine-tuning copies a source model's weights, freezes the first ``k_frozen``
LSTM layers, and continues training on the (separately standardized)
target data. A specialized model trains from fresh initialization on the
same data and serves as the comparison baseline.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .lstm import LstmArchitecture
from .model_io import LstmModel, ModelMetadata
from .trace import RttTrace, Standardizer
from .training import TrainConfig, TrainReport, evaluate_weights, train


@dataclass(frozen=True)
class FreezeSpec:
    """How many initial LSTM layers keep their source weights untouched."""

    k_frozen: int = 1

    def __post_init__(self):
        if self.k_frozen < 0:
            raise ValueError("k_frozen must be >= 0")


def _standardized(trace: RttTrace) -> tuple[np.ndarray, Standardizer]:
    s = Standardizer.fit(trace.samples)
    return s.transform(trace.samples), s


def fine_tune(
    source: LstmModel,
    target_train: RttTrace,
    freeze: FreezeSpec = FreezeSpec(),
    config: TrainConfig = TrainConfig(),
    rng: np.random.Generator | None = None,
    test_trace: RttTrace | None = None,
) -> tuple[LstmModel, TrainReport]:
    """Continue training a source model on target data with frozen initial layers."""
    if freeze.k_frozen >= source.arch.num_layers:
        raise ValueError(
            f"cannot freeze {freeze.k_frozen} of {source.arch.num_layers} layers; "
            "the top LSTM layer and dense head must stay trainable"
        )
    series, standardizer = _standardized(target_train)
    config = dataclasses.replace(config, k_frozen=freeze.k_frozen)
    test = None
    if test_trace is not None:
        test_series, test_std = _standardized(test_trace)
        test = (test_series, test_std)
    weights, report = train(
        series,
        source.arch,
        config,
        rng=rng,
        initial_weights=source.weights,
        test=test,
    )
    model = LstmModel(
        arch=source.arch,
        weights=weights,
        standardizer=standardizer,
        metadata=ModelMetadata(
            context=target_train.context,
            training_length=len(target_train),
            test_smape=report.test_smape,
            source_context=source.metadata.context,
        ),
    )
    return model, report


def train_specialized(
    target_train: RttTrace,
    arch: LstmArchitecture,
    config: TrainConfig = TrainConfig(),
    rng: np.random.Generator | None = None,
    test_trace: RttTrace | None = None,
) -> tuple[LstmModel, TrainReport]:
    """Train a model from scratch on target data (the transfer baseline)."""
    series, standardizer = _standardized(target_train)
    config = dataclasses.replace(config, k_frozen=0)
    test = None
    if test_trace is not None:
        test_series, test_std = _standardized(test_trace)
        test = (test_series, test_std)
    weights, report = train(series, arch, config, rng=rng, test=test)
    model = LstmModel(
        arch=arch,
        weights=weights,
        standardizer=standardizer,
        metadata=ModelMetadata(
            context=target_train.context,
            training_length=len(target_train),
            test_smape=report.test_smape,
        ),
    )
    return model, report


@dataclass
class ValidationResult:
    """Mean SMAPE with a normal-approximation 95% confidence interval."""

    smapes: list[float] = field(default_factory=list)
    mean_smape: float = float("nan")
    ci_low: float = float("nan")
    ci_high: float = float("nan")

    @property
    def ci_half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0


def out_of_sample_validate(
    target: RttTrace,
    runs: int = 10,
    mode: str = "scratch",
    *,
    arch: LstmArchitecture | None = None,
    source: LstmModel | None = None,
    freeze: FreezeSpec = FreezeSpec(),
    config: TrainConfig = TrainConfig(),
) -> ValidationResult:
    """Rolling-origin validation over the final 20% of the target series.

    Run r trains on the first P_r samples and tests on the following
    window; the ``runs`` origins are equally spaced over the final 20%,
    each testing on a window one spacing wide. runs=1 degenerates to the
    plain 80/20 split. ``mode`` is "scratch" (needs ``arch``) or
    "finetune" (needs ``source``).
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if mode not in ("scratch", "finetune"):
        raise ValueError("mode must be 'scratch' or 'finetune'")
    if mode == "scratch" and arch is None:
        raise ValueError("scratch mode requires an architecture")
    if mode == "finetune" and source is None:
        raise ValueError("finetune mode requires a source model")

    total = len(target)
    first_origin = math.floor(0.8 * total)
    window = (total - first_origin) // runs
    if window < 2:
        raise ValueError(
            f"series of length {total} is too short for {runs} validation windows"
        )

    smapes = []
    for r in range(runs):
        origin = first_origin + r * window
        train_part = RttTrace(
            samples=target.samples[:origin],
            interval_ms=target.interval_ms,
            context=target.context,
        )
        test_part = RttTrace(
            samples=target.samples[origin : origin + window],
            interval_ms=target.interval_ms,
            context=target.context,
        )
        run_config = dataclasses.replace(config, seed=config.seed + r)
        if mode == "scratch":
            model, report = train_specialized(
                train_part, arch, run_config, test_trace=test_part
            )
        else:
            model, report = fine_tune(
                source, train_part, freeze, run_config, test_trace=test_part
            )
        smapes.append(report.test_smape)

    mean = float(np.mean(smapes))
    std = float(np.std(smapes, ddof=1)) if runs > 1 else 0.0
    half = 1.96 * std / math.sqrt(runs)
    return ValidationResult(
        smapes=smapes, mean_smape=mean, ci_low=mean - half, ci_high=mean + half
    )
