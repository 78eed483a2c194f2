import numpy as np
import pytest

from rttlab import (
    DegenerateInputError,
    nrmse_percentile,
    pearson,
    percentile,
    smape,
    smape_improvement,
)


def test_smape_zero_on_perfect_prediction():
    assert smape([10.0, 20.0], [10.0, 20.0]) == 0.0


def test_smape_hand_values():
    assert smape([1.0], [3.0]) == pytest.approx(50.0, abs=1e-9)  # 100 * 2/4
    assert smape([2.0, 4.0], [1.0, 8.0]) == pytest.approx(100.0 / 3.0, abs=1e-9)


def test_smape_symmetry_and_scale_invariance():
    rng = np.random.default_rng(2)
    a = rng.uniform(1, 100, size=64)
    b = rng.uniform(1, 100, size=64)
    assert smape(a, b) == smape(b, a)
    assert smape(3.7 * a, 3.7 * b) == pytest.approx(smape(a, b), abs=1e-12)


def test_smape_zero_denominator():
    with pytest.raises(DegenerateInputError) as err:
        smape([0.0, 1.0], [0.0, 1.0])
    assert "index 0" in str(err.value)


def test_smape_improvement():
    assert smape_improvement(10.0, 5.0) == pytest.approx(50.0)
    assert smape_improvement(10.0, 10.0) == 0.0
    assert smape_improvement(4.0, 5.0) == pytest.approx(-25.0)
    with pytest.raises(ZeroDivisionError):
        smape_improvement(0.0, 5.0)


def test_pearson_exact_linear():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0)


def test_pearson_hand_value():
    assert pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-9)


def test_pearson_constant_is_degenerate():
    with pytest.raises(DegenerateInputError):
        pearson([1, 1, 1], [1, 2, 3])


def test_percentile_nearest_rank():
    assert percentile([1, 2, 3, 4], 50) == 2.0
    assert percentile([4, 1, 3, 2], 50) == 2.0  # order-independent
    assert percentile([7.0], 13) == 7.0
    assert percentile([5, 1, 9], 100) == 9.0
    assert percentile([5, 1, 9], 0) == 1.0


def test_percentile_monotone_in_p():
    rng = np.random.default_rng(7)
    series = rng.normal(size=83)
    values = [percentile(series, p) for p in range(0, 101, 5)]
    assert all(lo <= hi for lo, hi in zip(values, values[1:]))


def test_nrmse_zero_for_identical_runs():
    real = np.array([10.0, 20.0, 30.0, 40.0])
    assert nrmse_percentile(real, [real.copy(), real.copy()], 50) == 0.0


def test_nrmse_one_for_one_std_offset():
    rng = np.random.default_rng(4)
    real = rng.uniform(10, 50, size=200)
    std = real.std()
    shifted = real + std  # every percentile moves by exactly one std
    assert nrmse_percentile(real, [shifted], 75) == pytest.approx(1.0, abs=1e-12)


def test_nrmse_alternating_offsets():
    rng = np.random.default_rng(8)
    real = rng.uniform(10, 50, size=300)
    d = 3.25
    runs = [real + (d if k % 2 == 0 else -d) for k in range(30)]
    expected = d / real.std()
    assert nrmse_percentile(real, runs, 90) == pytest.approx(expected, abs=1e-12)


def test_nrmse_shift_invariance():
    rng = np.random.default_rng(10)
    real = rng.uniform(10, 50, size=120)
    runs = [real + rng.normal(scale=2.0, size=120) for _ in range(5)]
    base = nrmse_percentile(real, runs, 25)
    shifted = nrmse_percentile(real + 100.0, [r + 100.0 for r in runs], 25)
    assert shifted == pytest.approx(base, abs=1e-9)


def test_nrmse_constant_real_is_degenerate():
    with pytest.raises(DegenerateInputError):
        nrmse_percentile([5.0, 5.0], [[5.0, 5.0]], 50)
