"""Adam optimizer with bias correction, plus global-norm gradient clipping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .lstm import LayerWeights, ModelWeights, map_params, zeros_like_weights


@dataclass(eq=False)
class AdamState:
    """Per-parameter moment accumulators and step counter.

    ``m`` tracks the exponential moving average of gradients, ``v`` of
    squared gradients; both start at zero with t=0 and are bias-corrected
    by 1/(1 - beta^t) at each step.
    """

    m: ModelWeights
    v: ModelWeights
    t: int = 0
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7

    @classmethod
    def init(cls, weights: ModelWeights, learning_rate: float = 1e-5, **kwargs) -> "AdamState":
        return cls(
            m=zeros_like_weights(weights),
            v=zeros_like_weights(weights),
            t=0,
            learning_rate=learning_rate,
            **kwargs,
        )


def adam_step(
    weights: ModelWeights,
    gradients: ModelWeights,
    state: AdamState,
    k_frozen: int = 0,
) -> tuple[ModelWeights, AdamState]:
    """One Adam update; returns new weights and state, inputs untouched.

    m <- b1*m + (1-b1)*g ; v <- b2*v + (1-b2)*g^2 ; with bias corrections
    m/(1-b1^t) and v/(1-b2^t), then theta <- theta - lr * m_hat/(sqrt(v_hat)+eps).
    The first ``k_frozen`` LSTM layers are skipped entirely: their
    parameters and moment accumulators pass through unchanged.
    """
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    lr, eps = state.learning_rate, state.eps

    def update(name, theta, g, m, v):
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
        m_new = b1 * m + (1.0 - b1) * g
        v_new = b2 * v + (1.0 - b2) * (g * g)
        theta_new = theta - lr * (m_new / corr1) / (np.sqrt(v_new / corr2) + eps)
        return theta_new, m_new, v_new

    new_layers, m_layers, v_layers = [], [], []
    for idx, (lw, gl, ml, vl) in enumerate(
        zip(weights.layers, gradients.layers, state.m.layers, state.v.layers)
    ):
        if idx < k_frozen:
            new_layers.append(lw)
            m_layers.append(ml)
            v_layers.append(vl)
            continue
        wx, m_wx, v_wx = update(f"layer{idx}.wx", lw.wx, gl.wx, ml.wx, vl.wx)
        wh, m_wh, v_wh = update(f"layer{idx}.wh", lw.wh, gl.wh, ml.wh, vl.wh)
        b, m_b, v_b = update(f"layer{idx}.b", lw.b, gl.b, ml.b, vl.b)
        new_layers.append(LayerWeights(wx=wx, wh=wh, b=b))
        m_layers.append(LayerWeights(wx=m_wx, wh=m_wh, b=m_b))
        v_layers.append(LayerWeights(wx=v_wx, wh=v_wh, b=v_b))

    w_d, m_wd, v_wd = update("dense.w", weights.w_d, gradients.w_d, state.m.w_d, state.v.w_d)
    b_d, m_bd, v_bd = update("dense.b", weights.b_d, gradients.b_d, state.m.b_d, state.v.b_d)

    new_state = AdamState(
        m=ModelWeights(layers=m_layers, w_d=m_wd, b_d=m_bd),
        v=ModelWeights(layers=v_layers, w_d=v_wd, b_d=v_bd),
        t=t,
        learning_rate=lr,
        beta1=b1,
        beta2=b2,
        eps=eps,
    )
    return ModelWeights(layers=new_layers, w_d=w_d, b_d=b_d), new_state


def clip_by_global_norm(gradients: ModelWeights, max_norm: float = 5.0) -> ModelWeights:
    """Scale all gradients down so their global L2 norm is at most max_norm."""
    total = 0.0
    for _, g in gradients.iter_params():
        flat = g.ravel()
        total += float(np.dot(flat, flat))
    norm = math.sqrt(total)
    if norm <= max_norm or norm == 0.0:
        return gradients
    scale = max_norm / norm
    return map_params(lambda g: g * scale, gradients)
