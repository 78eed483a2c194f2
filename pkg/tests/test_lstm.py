import math

import numpy as np
import pytest

from rttlab import (
    LstmArchitecture,
    LstmState,
    NumericError,
    backward,
    forward,
    init_weights,
    lstm_cell_forward,
    mse_loss,
    probact_elu,
)
from rttlab.lstm import LayerWeights, zeros_like_weights


def zero_weights(arch):
    w = init_weights(arch, 0)
    for _, arr in w.iter_params():
        arr[...] = 0.0
    return w


def finite_difference_grads(loss_fn, weights, step=1e-5):
    """Central finite differences over every parameter entry."""
    grads = zeros_like_weights(weights)
    param_pairs = list(zip(weights.iter_params(), grads.iter_params()))
    for (_, theta), (_, g) in param_pairs:
        flat_theta = theta.ravel()
        flat_g = g.ravel()
        for idx in range(flat_theta.size):
            original = flat_theta[idx]
            flat_theta[idx] = original + step
            hi = loss_fn(weights)
            flat_theta[idx] = original - step
            lo = loss_fn(weights)
            flat_theta[idx] = original
            flat_g[idx] = (hi - lo) / (2.0 * step)
    return grads


def assert_grads_close(analytic, numeric, rel=1e-4, abs_tol=1e-7):
    for (name, a), (_, n) in zip(analytic.iter_params(), numeric.iter_params()):
        diff = np.abs(a - n)
        bound = abs_tol + rel * np.abs(n)
        assert np.all(diff <= bound), (
            f"{name}: max diff {diff.max():.3e} exceeds tolerance "
            f"(analytic {a.ravel()[np.argmax(diff)]:.6e}, "
            f"numeric {n.ravel()[np.argmax(diff)]:.6e})"
        )


def test_init_deterministic_and_shaped():
    arch = LstmArchitecture(num_layers=3, hidden_units=8)
    w1 = init_weights(arch, seed=7)
    w2 = init_weights(arch, seed=7)
    for (_, a), (_, b) in zip(w1.iter_params(), w2.iter_params()):
        assert np.array_equal(a, b)
    # layer 1 consumes the scalar input
    assert w1.layers[0].gate("x", "i").shape == (8, 1)
    assert w1.layers[1].gate("x", "i").shape == (8, 8)
    # biases zero except the forget block
    for lw in w1.layers:
        assert np.array_equal(lw.gate("b", "f"), np.ones(8))
        assert np.array_equal(lw.gate("b", "i"), np.zeros(8))
        assert np.array_equal(lw.gate("b", "o"), np.zeros(8))
        assert np.array_equal(lw.gate("b", "c"), np.zeros(8))
    assert np.array_equal(w1.b_d, np.zeros(1))


def test_init_bounds():
    arch = LstmArchitecture(num_layers=1, hidden_units=32)
    w = init_weights(arch, seed=1)
    assert np.max(np.abs(w.layers[0].wx)) <= math.sqrt(6.0 / 33.0)
    assert np.max(np.abs(w.layers[0].wh)) <= math.sqrt(6.0 / 64.0)
    assert np.max(np.abs(w.w_d)) <= math.sqrt(6.0 / 33.0)


def test_cell_all_zero_weights():
    arch = LstmArchitecture(num_layers=1, hidden_units=4)
    lw = zero_weights(arch).layers[0]
    h, c, (i, f, o, g) = lstm_cell_forward(
        np.array([3.7]), np.zeros(4), np.zeros(4), lw
    )
    assert np.allclose(i, 0.5) and np.allclose(f, 0.5) and np.allclose(o, 0.5)
    assert np.array_equal(g, np.zeros(4))
    assert np.array_equal(c, np.zeros(4))
    assert np.array_equal(h, np.zeros(4))


def test_cell_saturated_gates_pass_memory_through():
    arch = LstmArchitecture(num_layers=1, hidden_units=3)
    lw = zero_weights(arch).layers[0]
    n = 3
    lw.b[: 3 * n] = 20.0  # i, f, o biases -> gates ~ 1; candidate bias stays 0
    v = np.array([0.3, -1.2, 0.8])
    h, c, _ = lstm_cell_forward(np.array([0.0]), np.zeros(3), v, lw)
    assert np.allclose(c, v, atol=1e-8)
    assert np.allclose(h, np.tanh(v), atol=1e-8)


def test_cell_gate_ranges():
    arch = LstmArchitecture(num_layers=1, hidden_units=6)
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = init_weights(arch, rng.integers(1 << 30))
        x = rng.normal(size=(5, 1)) * 10
        h_prev = rng.normal(size=(5, 6))
        c_prev = rng.normal(size=(5, 6))
        _, _, (i, f, o, g) = lstm_cell_forward(x, h_prev, c_prev, w.layers[0])
        for gate in (i, f, o):
            assert np.all(gate > 0.0) and np.all(gate < 1.0)
        assert np.all(g > -1.0) and np.all(g < 1.0)


def test_cell_shape_mismatch():
    arch = LstmArchitecture(num_layers=1, hidden_units=4)
    w = zero_weights(arch)
    with pytest.raises(ValueError):
        lstm_cell_forward(np.zeros(2), np.zeros(4), np.zeros(4), w.layers[0])


def test_probact_elu_values():
    assert probact_elu(2.0, sigma=0.0) == 2.0
    assert probact_elu(-1.0, sigma=0.0) == pytest.approx(math.expm1(-1.0), abs=1e-12)
    assert probact_elu(0.0, sigma=0.0) == 0.0


def test_probact_elu_noise_is_zero_mean():
    rng = np.random.default_rng(123)
    z = -0.4
    draws = probact_elu(np.full(100_000, z), sigma=1.0, rng=rng)
    assert abs(draws.mean() - math.expm1(z)) < 0.02


def test_probact_requires_rng_for_noise():
    with pytest.raises(ValueError):
        probact_elu(1.0, sigma=1.0)


def test_mse_loss():
    assert mse_loss([1.0, 3.0], [1.0, 1.0]) == 2.0
    assert mse_loss([2.0], [2.0]) == 0.0
    a, b = [1.0, 5.0], [2.0, -1.0]
    assert mse_loss(a, b) == mse_loss(b, a)
    with pytest.raises(ValueError):
        mse_loss([1.0], [1.0, 2.0])


def test_forward_zero_weights_outputs_elu_of_bias():
    arch = LstmArchitecture(num_layers=2, hidden_units=4, dropout_rate=0.0, sigma=0.0)
    w = zero_weights(arch)
    w.b_d[0] = -0.7
    preds, _, _ = forward(
        np.random.default_rng(0).normal(size=(6, 3)),
        LstmState.zeros(arch, 3),
        w,
        arch,
        mode="infer",
        sigma=0.0,
    )
    assert np.allclose(preds, math.expm1(-0.7), atol=1e-15)


def test_forward_infer_deterministic():
    arch = LstmArchitecture(num_layers=2, hidden_units=8)
    w = init_weights(arch, 3)
    inputs = np.random.default_rng(1).normal(size=(10, 2))
    state = LstmState.zeros(arch, 2)
    p1, _, _ = forward(inputs, state, w, arch, mode="infer", sigma=0.0)
    p2, _, _ = forward(inputs, state, w, arch, mode="infer", sigma=0.0)
    assert np.array_equal(p1, p2)


def test_forward_state_passthrough_bitwise():
    arch = LstmArchitecture(num_layers=3, hidden_units=8)
    w = init_weights(arch, 5)
    rng = np.random.default_rng(2)
    inputs = rng.normal(size=(12, 4))
    state = LstmState.zeros(arch, 4)

    whole, state_whole, _ = forward(inputs, state, w, arch, mode="infer", sigma=0.0)
    first, mid, _ = forward(inputs[:5], state, w, arch, mode="infer", sigma=0.0)
    second, state_split, _ = forward(inputs[5:], mid, w, arch, mode="infer", sigma=0.0)

    assert np.array_equal(np.vstack([first, second]), whole)
    assert np.array_equal(state_split.h, state_whole.h)
    assert np.array_equal(state_split.c, state_whole.c)


def test_forward_state_passthrough_train_mode_fixed_mask():
    arch = LstmArchitecture(num_layers=2, hidden_units=8, dropout_rate=0.5)
    w = init_weights(arch, 5)
    rng = np.random.default_rng(3)
    inputs = rng.normal(size=(8, 2))
    mask = (np.random.default_rng(9).random((2, 8)) < 0.5) / 0.5
    state = LstmState.zeros(arch, 2)

    whole, _, _ = forward(inputs, state, w, arch, mode="train", dropout_mask=mask, sigma=0.0)
    first, mid, _ = forward(inputs[:3], state, w, arch, mode="train", dropout_mask=mask, sigma=0.0)
    second, _, _ = forward(inputs[3:], mid, w, arch, mode="train", dropout_mask=mask, sigma=0.0)
    assert np.array_equal(np.vstack([first, second]), whole)


def test_forward_nonfinite_raises_with_timestep():
    arch = LstmArchitecture(num_layers=1, hidden_units=2, dropout_rate=0.0, sigma=0.0)
    w = zero_weights(arch)
    w.b_d[0] = np.inf
    with pytest.raises(NumericError) as err:
        forward(np.zeros((3, 1)), LstmState.zeros(arch, 1), w, arch, mode="infer", sigma=0.0)
    assert "timestep 0" in str(err.value)


def test_backward_zero_at_minimum():
    arch = LstmArchitecture(num_layers=2, hidden_units=4, dropout_rate=0.0, sigma=0.0)
    w = init_weights(arch, 11)
    inputs = np.random.default_rng(4).normal(size=(7, 3))
    preds, _, tape = forward(inputs, LstmState.zeros(arch, 3), w, arch, mode="train")
    grads = backward(tape, preds, w)
    for _, g in grads.iter_params():
        assert np.max(np.abs(g)) < 1e-12


def test_backward_frozen_layers_zeroed():
    arch = LstmArchitecture(num_layers=3, hidden_units=4, dropout_rate=0.0, sigma=0.0)
    w = init_weights(arch, 12)
    inputs = np.random.default_rng(5).normal(size=(6, 2))
    targets = np.random.default_rng(6).normal(size=(6, 2))
    _, _, tape = forward(inputs, LstmState.zeros(arch, 2), w, arch, mode="train")
    grads = backward(tape, targets, w, k_frozen=2)
    assert np.all(grads.layers[0].wx == 0.0) and np.all(grads.layers[0].wh == 0.0)
    assert np.all(grads.layers[1].wx == 0.0) and np.all(grads.layers[1].b == 0.0)
    assert np.any(grads.layers[2].wx != 0.0)
    assert np.any(grads.w_d != 0.0)


def test_backward_matches_finite_differences_with_dropout_and_noise():
    arch = LstmArchitecture(num_layers=2, hidden_units=8, dropout_rate=0.5, sigma=1.0)
    data_rng = np.random.default_rng(20)
    inputs = data_rng.normal(size=(20, 4))
    targets = data_rng.normal(size=(20, 4))
    state = LstmState(
        h=data_rng.normal(size=(2, 4, 8)) * 0.1, c=data_rng.normal(size=(2, 4, 8)) * 0.1
    )
    weights = init_weights(arch, 21)

    def loss_fn(w):
        preds, _, _ = forward(
            inputs, state, w, arch, mode="train", rng=np.random.default_rng(777)
        )
        return mse_loss(preds, targets)

    _, _, tape = forward(
        inputs, state, weights, arch, mode="train", rng=np.random.default_rng(777)
    )
    analytic = backward(tape, targets, weights)
    numeric = finite_difference_grads(loss_fn, weights)
    assert_grads_close(analytic, numeric)


def test_backward_matches_finite_differences_frozen():
    arch = LstmArchitecture(num_layers=3, hidden_units=5, dropout_rate=0.0, sigma=0.0)
    data_rng = np.random.default_rng(30)
    inputs = data_rng.normal(size=(10, 2))
    targets = data_rng.normal(size=(10, 2))
    state = LstmState.zeros(arch, 2)
    weights = init_weights(arch, 31)

    def loss_fn(w):
        preds, _, _ = forward(inputs, state, w, arch, mode="train")
        return mse_loss(preds, targets)

    _, _, tape = forward(inputs, state, weights, arch, mode="train")
    analytic = backward(tape, targets, weights, k_frozen=1)
    numeric = finite_difference_grads(loss_fn, weights)
    # trainable part must match; frozen part must be exactly zero
    assert np.all(analytic.layers[0].wx == 0.0)
    for name_a, name_n in zip(
        list(analytic.iter_params())[3:], list(numeric.iter_params())[3:]
    ):
        diff = np.abs(name_a[1] - name_n[1])
        assert np.all(diff <= 1e-7 + 1e-4 * np.abs(name_n[1]))


def test_backward_target_shape_contract():
    arch = LstmArchitecture(num_layers=1, hidden_units=3, dropout_rate=0.0, sigma=0.0)
    w = init_weights(arch, 1)
    _, _, tape = forward(np.zeros((4, 2)), LstmState.zeros(arch, 2), w, arch, mode="train")
    with pytest.raises(ValueError):
        backward(tape, np.zeros((3, 2)), w)
