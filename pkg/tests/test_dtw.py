import numpy as np
import pytest

from rttlab import dtw


def brute_force_dtw(a, b):
    """Minimum alignment cost by explicit enumeration of all monotone paths.

    Walks every path from (0, 0) to (n-1, m-1) with steps (1,0), (0,1),
    (1,1), summing |a_i - b_j| along the way. Exponential, for tiny inputs
    only; intentionally independent of the DP recurrence.
    """
    n, m = len(a), len(b)
    best = [float("inf")]

    def walk(i, j, acc):
        acc += abs(a[i] - b[j])
        if i == n - 1 and j == m - 1:
            if acc < best[0]:
                best[0] = acc
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return best[0]


def test_identical_series_cost_zero():
    result = dtw([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert result.cost == 0.0
    assert result.normalized == 0.0


def test_single_cell():
    result = dtw([0.0], [5.0])
    assert result.cost == 5.0
    assert result.path_length == 1
    assert result.normalized == pytest.approx(2.5)


def test_elastic_alignment_hand_example():
    # a=[1,2] aligns to b=[1,1,2] with zero cost: 1->1, 1->1, 2->2.
    assert dtw([1.0, 2.0], [1.0, 1.0, 2.0]).cost == 0.0


def test_matches_brute_force_enumeration():
    rng = np.random.default_rng(42)
    for _ in range(300):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, 7))
        a = rng.normal(size=n)
        b = rng.normal(size=m)
        assert dtw(a, b).cost == pytest.approx(brute_force_dtw(a, b), abs=0.0)


def test_symmetry():
    rng = np.random.default_rng(6)
    for _ in range(25):
        a = rng.normal(size=int(rng.integers(2, 30)))
        b = rng.normal(size=int(rng.integers(2, 30)))
        fwd = dtw(a, b)
        rev = dtw(b, a)
        assert fwd.cost == rev.cost
        assert fwd.normalized == rev.normalized


def test_self_distance_zero():
    rng = np.random.default_rng(13)
    a = rng.normal(size=50)
    assert dtw(a, a).cost == 0.0


def test_normalization_definition():
    rng = np.random.default_rng(14)
    a = rng.normal(size=12)
    b = rng.normal(size=20)
    result = dtw(a, b)
    assert result.normalized == pytest.approx(result.cost / 32.0)


def test_rejects_empty_or_nonfinite():
    with pytest.raises(ValueError):
        dtw([], [1.0])
    with pytest.raises(ValueError):
        dtw([1.0, float("nan")], [1.0])


def test_path_length_bounds():
    rng = np.random.default_rng(15)
    for _ in range(20):
        n = int(rng.integers(1, 15))
        m = int(rng.integers(1, 15))
        result = dtw(rng.normal(size=n), rng.normal(size=m))
        assert max(n, m) <= result.path_length <= n + m - 1
