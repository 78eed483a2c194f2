"""Stacked-LSTM forward pass, ProbAct-ELU output head, and exact BPTT gradients.

The network is a stack of ``num_layers`` LSTM cells (uniform hidden width),
inverted dropout on the final cell's output, and a dense head whose
activation is ELU plus an additive Gaussian perturbation ("ProbAct").
Inputs are scalar per lane per timestep; the output is one scalar
prediction per input.

Weights for the four gates are stored stacked: ``wx`` is (4N, D), ``wh`` is
(4N, N) and ``b`` is (4N,), with row blocks ordered input, forget, output,
candidate. All arithmetic is 64-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

GATE_ORDER = ("i", "f", "o", "c")


@dataclass(frozen=True)
class LstmArchitecture:
    """Shape and head parameters of a stacked-LSTM model."""

    num_layers: int
    hidden_units: int
    dropout_rate: float = 0.5
    elu_alpha: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.elu_alpha <= 0.0:
            raise ValueError("elu_alpha must be > 0")
        if self.sigma < 0.0:
            raise ValueError("sigma must be >= 0")

    def layer_input_dim(self, layer: int) -> int:
        return 1 if layer == 0 else self.hidden_units

    def num_params(self, k_frozen: int = 0) -> int:
        """Trainable parameter count with the first k_frozen layers frozen."""
        n = self.hidden_units
        total = 0
        for layer in range(k_frozen, self.num_layers):
            d = self.layer_input_dim(layer)
            total += 4 * n * (d + n + 1)
        return total + n + 1  # dense head


@dataclass(eq=False)
class LayerWeights:
    wx: np.ndarray  # (4N, D)
    wh: np.ndarray  # (4N, N)
    b: np.ndarray  # (4N,)

    def gate(self, kind: str, which: str) -> np.ndarray:
        """View of one gate's block, e.g. gate('x', 'f') is W_xf."""
        n = self.wh.shape[1]
        k = GATE_ORDER.index(which)
        sl = slice(k * n, (k + 1) * n)
        if kind == "x":
            return self.wx[sl]
        if kind == "h":
            return self.wh[sl]
        if kind == "b":
            return self.b[sl]
        raise ValueError(f"unknown weight kind {kind!r}")


@dataclass(eq=False)
class ModelWeights:
    layers: list[LayerWeights]
    w_d: np.ndarray  # (N,)
    b_d: np.ndarray  # (1,)

    def iter_params(self):
        """Yield (name, array) for every parameter, in a fixed order."""
        for idx, lw in enumerate(self.layers):
            yield f"layer{idx}.wx", lw.wx
            yield f"layer{idx}.wh", lw.wh
            yield f"layer{idx}.b", lw.b
        yield "dense.w", self.w_d
        yield "dense.b", self.b_d

    def copy(self) -> "ModelWeights":
        return map_params(np.copy, self)


def map_params(fn, *trees: ModelWeights) -> ModelWeights:
    """Apply fn elementwise over parallel weight trees, returning a new tree."""
    layers = []
    for lws in zip(*(t.layers for t in trees)):
        layers.append(
            LayerWeights(
                wx=fn(*(lw.wx for lw in lws)),
                wh=fn(*(lw.wh for lw in lws)),
                b=fn(*(lw.b for lw in lws)),
            )
        )
    return ModelWeights(
        layers=layers,
        w_d=fn(*(t.w_d for t in trees)),
        b_d=fn(*(t.b_d for t in trees)),
    )


def zeros_like_weights(weights: ModelWeights) -> ModelWeights:
    return map_params(np.zeros_like, weights)


@dataclass(eq=False)
class LstmState:
    """Hidden and memory-cell state per layer per batch lane: (L, B, N)."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, arch: LstmArchitecture, batch: int) -> "LstmState":
        shape = (arch.num_layers, batch, arch.hidden_units)
        return cls(h=np.zeros(shape), c=np.zeros(shape))

    @property
    def batch(self) -> int:
        return self.h.shape[1]


@dataclass(eq=False)
class ForwardTape:
    """Per-timestep activations recorded by a train-mode forward, for BPTT."""

    arch: LstmArchitecture
    inputs: np.ndarray  # (T, B)
    gates_i: np.ndarray  # (L, T, B, N)
    gates_f: np.ndarray
    gates_o: np.ndarray
    gates_g: np.ndarray  # candidate (tanh) activations
    cells: np.ndarray  # (L, T, B, N)
    hiddens: np.ndarray  # (L, T, B, N)
    h0: np.ndarray  # (L, B, N) state at sequence start
    c0: np.ndarray
    dropout_mask: np.ndarray | None  # (B, N), already scaled by 1/keep
    z: np.ndarray  # (T, B) dense pre-activations
    noise: np.ndarray  # (T, B) ProbAct draws (already scaled by sigma)
    preds: np.ndarray  # (T, B)

    def __len__(self):
        return self.inputs.shape[0]


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _elu(z, alpha):
    return np.where(z > 0, z, alpha * np.expm1(np.minimum(z, 0.0)))


def _elu_prime(z, alpha):
    return np.where(z > 0, 1.0, alpha * np.exp(np.minimum(z, 0.0)))


def probact_elu(z, *, alpha: float = 1.0, sigma: float = 1.0, rng=None):
    """ELU plus additive Gaussian perturbation sigma * N(0, 1).

    With sigma=0 this is plain deterministic ELU (identity for positive
    inputs). Accepts scalars or arrays.
    """
    z = np.asarray(z, dtype=np.float64)
    base = _elu(z, alpha)
    if sigma > 0.0:
        if rng is None:
            raise ValueError("rng is required when sigma > 0")
        base = base + sigma * rng.standard_normal(z.shape)
    return float(base) if base.ndim == 0 else base


def mse_loss(predictions, targets) -> float:
    """Mean squared error between two equal-shape arrays."""
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape or predictions.size < 1:
        raise ValueError("predictions and targets must be equal-shape, non-empty")
    diff = predictions - targets
    return float(np.mean(diff * diff))


def init_weights(arch: LstmArchitecture, seed) -> ModelWeights:
    """Deterministic fan-based uniform initialization.

    Input, recurrent, and dense weights are drawn uniform in
    +-sqrt(6 / (fan_in + fan_out)); biases are zero except the forget-gate
    biases, which are 1 to favor memory retention early in training.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = arch.hidden_units
    layers = []
    for layer in range(arch.num_layers):
        d = arch.layer_input_dim(layer)
        bound_x = np.sqrt(6.0 / (d + n))
        bound_h = np.sqrt(6.0 / (n + n))
        wx = rng.uniform(-bound_x, bound_x, size=(4 * n, d))
        wh = rng.uniform(-bound_h, bound_h, size=(4 * n, n))
        b = np.zeros(4 * n)
        b[n : 2 * n] = 1.0  # forget gate block
        layers.append(LayerWeights(wx=wx, wh=wh, b=b))
    bound_d = np.sqrt(6.0 / (n + 1))
    w_d = rng.uniform(-bound_d, bound_d, size=n)
    b_d = np.zeros(1)
    return ModelWeights(layers=layers, w_d=w_d, b_d=b_d)


def lstm_cell_forward(x, h_prev, c_prev, lw: LayerWeights):
    """One LSTM cell step. Returns (h, c, (i, f, o, g)).

    ``x`` may be a single vector (D,) with (N,) states, or a batch (B, D)
    with (B, N) states.
    """
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x, h_prev, c_prev = x[None], h_prev[None], c_prev[None]
    n = lw.wh.shape[1]
    if x.shape[1] != lw.wx.shape[1] or h_prev.shape[1] != n or c_prev.shape[1] != n:
        raise ValueError(
            f"shape mismatch: x {x.shape}, h {h_prev.shape}, wx {lw.wx.shape}"
        )
    a = x @ lw.wx.T + h_prev @ lw.wh.T + lw.b
    i = _sigmoid(a[:, :n])
    f = _sigmoid(a[:, n : 2 * n])
    o = _sigmoid(a[:, 2 * n : 3 * n])
    g = np.tanh(a[:, 3 * n :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    if single:
        return h[0], c[0], (i[0], f[0], o[0], g[0])
    return h, c, (i, f, o, g)


def forward(
    inputs,
    state: LstmState,
    weights: ModelWeights,
    arch: LstmArchitecture,
    mode: str = "infer",
    rng=None,
    dropout_mask=None,
    sigma: float | None = None,
):
    """Run the stacked net over a (T, B) block of scalar inputs.

    Dropout applies in train mode only (inverted: mask sampled once per
    call with keep probability 1 - dropout_rate, outputs scaled by 1/keep).
    ProbAct noise applies whenever the effective sigma is positive,
    independent of mode; pass ``sigma=0.0`` for deterministic evaluation.
    Randomness is consumed in a fixed order (mask first, then all noise),
    so results are reproducible given the rng seed.

    Returns (predictions (T, B), carried state, ForwardTape).
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise ValueError("inputs must be a (timesteps, lanes) array")
    t_steps, batch = inputs.shape
    n = arch.hidden_units
    n_layers = arch.num_layers
    if state.batch != batch:
        raise ValueError(f"state lanes {state.batch} != input lanes {batch}")
    sigma_eff = arch.sigma if sigma is None else sigma

    mask = None
    if mode == "train" and arch.dropout_rate > 0.0:
        keep = 1.0 - arch.dropout_rate
        if dropout_mask is not None:
            mask = np.asarray(dropout_mask, dtype=np.float64)
        else:
            if rng is None:
                raise ValueError("rng is required for train-mode dropout")
            mask = (rng.random((batch, n)) < keep) / keep
    if sigma_eff > 0.0:
        if rng is None:
            raise ValueError("rng is required when sigma > 0")
        noise = sigma_eff * rng.standard_normal((t_steps, batch))
    else:
        noise = np.zeros((t_steps, batch))

    shape = (n_layers, t_steps, batch, n)
    gi, gf, go, gg = (np.empty(shape) for _ in range(4))
    cells = np.empty(shape)
    hiddens = np.empty(shape)
    z_all = np.empty((t_steps, batch))
    preds = np.empty((t_steps, batch))

    h_cur = state.h.copy()
    c_cur = state.c.copy()
    h0 = state.h.copy()
    c0 = state.c.copy()

    for t in range(t_steps):
        x_in = inputs[t][:, None]
        for layer in range(n_layers):
            h, c, (i, f, o, g) = lstm_cell_forward(
                x_in, h_cur[layer], c_cur[layer], weights.layers[layer]
            )
            gi[layer, t] = i
            gf[layer, t] = f
            go[layer, t] = o
            gg[layer, t] = g
            cells[layer, t] = c
            hiddens[layer, t] = h
            h_cur[layer] = h
            c_cur[layer] = c
            x_in = h
        top = h_cur[-1] if mask is None else h_cur[-1] * mask
        z = top @ weights.w_d + weights.b_d[0]
        pred = _elu(z, arch.elu_alpha) + noise[t]
        if not (np.all(np.isfinite(h_cur)) and np.all(np.isfinite(pred))):
            raise NumericError(f"non-finite activation at timestep {t}")
        z_all[t] = z
        preds[t] = pred

    tape = ForwardTape(
        arch=arch,
        inputs=inputs.copy(),
        gates_i=gi,
        gates_f=gf,
        gates_o=go,
        gates_g=gg,
        cells=cells,
        hiddens=hiddens,
        h0=h0,
        c0=c0,
        dropout_mask=mask,
        z=z_all,
        noise=noise,
        preds=preds,
    )
    return preds, LstmState(h=h_cur, c=c_cur), tape


def backward(
    tape: ForwardTape,
    targets,
    weights: ModelWeights,
    k_frozen: int = 0,
) -> ModelWeights:
    """Gradients of mean-squared error w.r.t. every parameter, via BPTT.

    Propagates through the whole tape; the incoming state at the tape start
    is treated as a constant. ProbAct noise is additive, so its gradient is
    the identity; dropout masks recorded on the tape are respected. Layers
    below ``k_frozen`` get zero gradients and their backward work is
    skipped entirely.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != tape.preds.shape:
        raise ValueError("targets shape does not match the tape's predictions")
    arch = tape.arch
    n_layers = arch.num_layers
    if len(weights.layers) != n_layers:
        raise ValueError("weights do not match the tape's architecture")
    if not 0 <= k_frozen <= n_layers:
        raise ValueError("k_frozen out of range")
    t_steps, batch = tape.preds.shape
    n = arch.hidden_units

    grads = zeros_like_weights(weights)
    dpred = 2.0 * (tape.preds - targets) / (t_steps * batch)
    dz = dpred * _elu_prime(tape.z, arch.elu_alpha)  # (T, B)

    h_top = tape.hiddens[-1]  # (T, B, N)
    if tape.dropout_mask is not None:
        h_dropped = h_top * tape.dropout_mask[None]
    else:
        h_dropped = h_top
    grads.w_d += np.einsum("tb,tbn->n", dz, h_dropped)
    grads.b_d += dz.sum()
    dh_above = dz[..., None] * weights.w_d[None, None, :]
    if tape.dropout_mask is not None:
        dh_above = dh_above * tape.dropout_mask[None]

    if k_frozen == n_layers:
        return grads

    for layer in range(n_layers - 1, k_frozen - 1, -1):
        lw = weights.layers[layer]
        gl = grads.layers[layer]
        i_seq = tape.gates_i[layer]
        f_seq = tape.gates_f[layer]
        o_seq = tape.gates_o[layer]
        g_seq = tape.gates_g[layer]
        c_seq = tape.cells[layer]
        h_seq = tape.hiddens[layer]
        x_seq = tape.inputs[..., None] if layer == 0 else tape.hiddens[layer - 1]
        need_dx = layer > k_frozen
        dx_out = np.empty((t_steps, batch, n)) if need_dx else None

        dh_rec = np.zeros((batch, n))
        dc_rec = np.zeros((batch, n))
        da = np.empty((batch, 4 * n))
        for t in range(t_steps - 1, -1, -1):
            i, f, o, g = i_seq[t], f_seq[t], o_seq[t], g_seq[t]
            c_prev = c_seq[t - 1] if t > 0 else tape.c0[layer]
            h_prev = h_seq[t - 1] if t > 0 else tape.h0[layer]
            tan_c = np.tanh(c_seq[t])
            dh = dh_above[t] + dh_rec
            do = dh * tan_c
            dc = dc_rec + dh * o * (1.0 - tan_c * tan_c)
            da[:, :n] = (dc * g) * i * (1.0 - i)
            da[:, n : 2 * n] = (dc * c_prev) * f * (1.0 - f)
            da[:, 2 * n : 3 * n] = do * o * (1.0 - o)
            da[:, 3 * n :] = (dc * i) * (1.0 - g * g)
            dc_rec = dc * f
            gl.wx += da.T @ x_seq[t]
            gl.wh += da.T @ h_prev
            gl.b += da.sum(axis=0)
            dh_rec = da @ lw.wh
            if need_dx:
                dx_out[t] = da @ lw.wx
        if need_dx:
            dh_above = dx_out

    return grads
