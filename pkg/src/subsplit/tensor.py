"""Dense float64 array helpers and the seeded random stream.

Tensors are plain ``numpy.ndarray`` objects of dtype float64, samples as
rows. The helpers here add the shape and index checks the rest of the
package relies on, and never modify their inputs.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

DTYPE = np.float64


class DimensionError(ValueError):
    """Operand shapes do not conform."""


class AmbiguityError(ValueError):
    """An index set names the same row twice where that is not allowed."""


class NonFiniteError(FloatingPointError):
    """A result contains NaN or Inf."""


def as_tensor(x, ndim: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=DTYPE)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d tensor, got shape {arr.shape}")
    return arr


def check_finite(x: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"{what} contains non-finite values")
    return x


def matmul(a, b) -> np.ndarray:
    a = as_tensor(a, 2)
    b = as_tensor(b, 2)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner extents differ: {a.shape} x {b.shape}")
    return a @ b


def _check_index(idx, m: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= m):
        bad = idx[(idx < 0) | (idx >= m)][0]
        raise IndexError(f"row index {bad} out of range for {m} rows")
    return idx


def gather_rows(x, idx: Sequence[int] | np.ndarray) -> np.ndarray:
    """Rows ``x[idx]`` as a new array, in the order given."""
    x = as_tensor(x, 2)
    idx = _check_index(idx, x.shape[0])
    return x[idx]


def scatter_rows(x, idx: Sequence[int] | np.ndarray, rows) -> np.ndarray:
    """Copy of ``x`` with the rows at ``idx`` replaced by ``rows``."""
    x = as_tensor(x, 2)
    idx = _check_index(idx, x.shape[0])
    rows = as_tensor(rows, 2) if idx.size else np.empty((0, x.shape[1]), DTYPE)
    if rows.shape != (idx.size, x.shape[1]):
        raise DimensionError(
            f"scatter of rows {rows.shape} into {x.shape} at {idx.size} indices"
        )
    if np.unique(idx).size != idx.size:
        raise AmbiguityError("scatter index set contains duplicates")
    out = x.copy()
    out[idx] = rows
    return out


def frobenius_sq(x) -> float:
    x = np.asarray(x, dtype=DTYPE)
    return float(np.dot(x.ravel(), x.ravel()))


class RngState:
    """Seeded, counter-based random stream (Philox).

    Identical seeds and identical call sequences give identical draws on
    every platform. ``position`` counts calls made so far.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.position = 0
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def _tick(self):
        self.position += 1
        return self._gen

    def choice(self, m: int, b: int) -> np.ndarray:
        return self._tick().choice(m, size=b, replace=False)

    def permutation(self, m: int) -> np.ndarray:
        return self._tick().permutation(m)

    def normal(self, size) -> np.ndarray:
        return self._tick().standard_normal(size)

    def uniform(self, low, high, size=None):
        return self._tick().uniform(low, high, size)

    def integers(self, low, high, size=None):
        return self._tick().integers(low, high, size)

    def spawn(self, stream: int) -> "RngState":
        """Independent child stream derived from this seed and ``stream``."""
        seq = np.random.SeedSequence([self.seed, int(stream)])
        return RngState(int(seq.generate_state(1, np.uint64)[0]))

    def __repr__(self):
        return f"RngState(seed={self.seed}, position={self.position})"
