"""Counter-based random streams.

Every variate is a pure function of (seed, stream tag, row, column): the
Philox key holds the seed and a tag, the counter holds the row, and the
column is the position inside the row. Any row can therefore be generated
on its own, in any order or on any worker, with identical results.
"""

from __future__ import annotations

import numpy as np
from scipy import special

DEFAULT_SEED = 20100613
_MASK64 = (1 << 64) - 1

# stream tags
SCREENING = 1
SIM_PRECISION = 2
SIM_FEATURES = 3


def _row_generator(seed: int, tag: int, row: int) -> np.random.Philox:
    key = np.array([seed & _MASK64, tag & _MASK64], dtype=np.uint64)
    # Philox emits 4 words per counter step; rows are spaced in word 2 so
    # columns (word 0) never collide with another row
    counter = np.array([0, 0, row & _MASK64, 0], dtype=np.uint64)
    return np.random.Philox(key=key, counter=counter)


def uniform_row(seed: int, tag: int, row: int, n: int) -> np.ndarray:
    """``n`` uniforms on the open interval (0, 1), column j keyed by (seed, tag, row, j)."""
    raw = _row_generator(seed, tag, row).random_raw(n)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def uniform_block(seed: int, tag: int, rows: range, n: int) -> np.ndarray:
    out = np.empty((len(rows), n))
    for i, r in enumerate(rows):
        out[i] = uniform_row(seed, tag, r, n)
    return out


def normal_row(seed: int, tag: int, row: int, n: int) -> np.ndarray:
    """Standard normals by inversion, so column j depends only on its own uniform."""
    return special.ndtri(uniform_row(seed, tag, row, n))
