"""Dynamic time warping distance between two real-valued series.

Classic full-grid dynamic program with local cost |a_i - b_j| and moves
{up, left, diagonal}. The normalized distance divides the accumulated cost
by len(a) + len(b) so values are comparable across series of different
lengths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class DtwResult:
    cost: float
    path_length: int
    normalized: float


@njit(cache=True)
def _dtw_kernel(a, b):  # pragma: no cover - exercised through dtw()
    n = a.shape[0]
    m = b.shape[0]
    prev = np.empty(m)
    cur = np.empty(m)
    prev_len = np.empty(m, dtype=np.int64)
    cur_len = np.empty(m, dtype=np.int64)

    prev[0] = abs(a[0] - b[0])
    prev_len[0] = 1
    for j in range(1, m):
        prev[j] = prev[j - 1] + abs(a[0] - b[j])
        prev_len[j] = prev_len[j - 1] + 1

    for i in range(1, n):
        cur[0] = prev[0] + abs(a[i] - b[0])
        cur_len[0] = prev_len[0] + 1
        for j in range(1, m):
            # Diagonal preferred on ties: it is the shortest continuation.
            best = prev[j - 1]
            best_len = prev_len[j - 1]
            if prev[j] < best or (prev[j] == best and prev_len[j] < best_len):
                best = prev[j]
                best_len = prev_len[j]
            if cur[j - 1] < best or (cur[j - 1] == best and cur_len[j - 1] < best_len):
                best = cur[j - 1]
                best_len = cur_len[j - 1]
            cur[j] = abs(a[i] - b[j]) + best
            cur_len[j] = best_len + 1
        prev, cur = cur, prev
        prev_len, cur_len = cur_len, prev_len

    return prev[m - 1], prev_len[m - 1]


def dtw(a, b) -> DtwResult:
    """Align two series and return the accumulated minimum cost."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size == 0 or b.size == 0:
        raise ValueError("dtw requires two non-empty 1-D series")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("dtw requires finite inputs")
    cost, path_length = _dtw_kernel(a, b)
    return DtwResult(
        cost=float(cost),
        path_length=int(path_length),
        normalized=float(cost) / (a.size + b.size),
    )
