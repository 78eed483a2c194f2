"""Autoregressive synthetic RTT trace generation from a trained model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GenerationDivergedError, NumericError
from .lstm import LstmState, forward
from .model_io import LstmModel
from .trace import RttTrace

BURN_IN_STEPS = 10
MIN_RTT_MS = 0.1


@dataclass(frozen=True)
class GenerationSpec:
    """Length, seed value (ms), rng seed, and optional noise override.

    ``seed_value`` is typically the median of the target environment
    sample. ``sigma`` of None uses the model's own ProbAct sigma; the noise
    is what gives generated traces their variability, since inference is
    otherwise a deterministic fixed-point iteration.
    """

    length: int
    seed_value: float
    rng_seed: int = 0
    sigma: float | None = None

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("generation length must be >= 1")
        if not (np.isfinite(self.seed_value) and self.seed_value > 0.0):
            raise ValueError("seed_value must be a positive RTT in ms")
        if self.sigma is not None and self.sigma < 0.0:
            raise ValueError("sigma must be >= 0")


def generate(model: LstmModel, spec: GenerationSpec) -> RttTrace:
    """Generate a synthetic trace one step at a time, feeding outputs back.

    The seed value is standardized with the model's standardizer and fed
    for a short burn-in to settle the hidden state; each subsequent
    prediction (noise included) becomes the next input. Outputs are
    destandardized and clamped to at least 0.1 ms.
    """
    sigma = model.arch.sigma if spec.sigma is None else spec.sigma
    rng = np.random.default_rng(spec.rng_seed)
    arch = model.arch
    state = LstmState.zeros(arch, 1)
    x = float(model.standardizer.transform(spec.seed_value))

    for _ in range(BURN_IN_STEPS):
        _, state, _ = forward(
            np.array([[x]]), state, model.weights, arch, mode="infer", rng=rng, sigma=sigma
        )

    out = np.empty(spec.length)
    for k in range(spec.length):
        try:
            preds, state, _ = forward(
                np.array([[x]]), state, model.weights, arch, mode="infer", rng=rng, sigma=sigma
            )
        except NumericError as exc:
            raise GenerationDivergedError(k) from exc
        x = float(preds[0, 0])
        if not np.isfinite(x):
            raise GenerationDivergedError(k)
        out[k] = x

    samples = np.maximum(model.standardizer.inverse(out), MIN_RTT_MS)
    context = f"synthetic:{model.metadata.context}" if model.metadata.context else "synthetic"
    return RttTrace(samples=samples, interval_ms=500.0, context=context)
