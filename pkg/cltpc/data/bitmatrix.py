# cltpc/data/bitmatrix.py
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..config import BLOCK_ROWS
from ..errors import DataError, DimensionMismatch
from .counter_rng import MASK_STREAM, uniforms

logger = logging.getLogger(__name__)

WORD_BITS = 64


class CellState(IntEnum):
    OBS0 = 0
    OBS1 = 1
    MARG = 2


@dataclass(frozen=True)
class BitMatrix:
    """
    N x V binary dataset stored column-major as packed uint64 words.
    - words[c, w] holds rows 64*w .. 64*w+63 of column c, least significant bit first
    - padding bits beyond row N are always 0
    """
    rows: int
    cols: int
    words: np.ndarray  # shape (cols, words_per_col), uint64

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DataError(f"BitMatrix needs N >= 1 and V >= 1, got {self.rows}x{self.cols}")
        if self.words.shape != (self.cols, self.words_per_col) or self.words.dtype != np.uint64:
            raise DataError("packed storage does not match the declared shape")

    @property
    def words_per_col(self) -> int:
        return -(-self.rows // WORD_BITS)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @staticmethod
    def from_array(values) -> "BitMatrix":
        A = np.asarray(values)
        if A.ndim != 2:
            raise DataError(f"expected a 2-D array, got {A.ndim}-D")
        if A.size and not np.isin(A, (0, 1)).all():
            raise DataError("BitMatrix cells must be 0 or 1")
        n, v = A.shape
        if n < 1 or v < 1:
            raise DataError(f"BitMatrix needs N >= 1 and V >= 1, got {n}x{v}")
        wpc = -(-n // WORD_BITS)
        padded = np.zeros((v, wpc * WORD_BITS), dtype=np.uint8)
        padded[:, :n] = A.T
        packed = np.packbits(padded, axis=1, bitorder="little")
        words = np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)
        return BitMatrix(rows=n, cols=v, words=words.reshape(v, wpc))

    def to_array(self) -> np.ndarray:
        """Unpacked (N, V) uint8 array."""
        as_bytes = np.ascontiguousarray(self.words.astype("<u8", copy=False)).view(np.uint8)
        bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
        return np.ascontiguousarray(bits[:, : self.rows].T)

    def column_ones(self) -> np.ndarray:
        return np.bitwise_count(self.words).sum(axis=1, dtype=np.int64)

    def take_rows(self, start: int, stop: int) -> "BitMatrix":
        return BitMatrix.from_array(self.to_array()[start:stop])


@dataclass(frozen=True)
class MaskedBatch:
    """Per-cell query states; cells[r, c] is a CellState value (int8)."""
    cells: np.ndarray

    def __post_init__(self):
        if self.cells.ndim != 2:
            raise DataError("MaskedBatch cells must be 2-D")
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() > CellState.MARG):
            raise DataError("MaskedBatch cells must be Obs0, Obs1 or Marg")

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]

    @staticmethod
    def from_bitmatrix(data: BitMatrix) -> "MaskedBatch":
        return MaskedBatch(cells=data.to_array().astype(np.int8))

    def marg_count(self) -> int:
        return int(np.count_nonzero(self.cells == CellState.MARG))

    def marg_fraction(self) -> float:
        return self.marg_count() / self.cells.size

    def to_bitmatrix(self) -> BitMatrix:
        if self.marg_count():
            raise DataError("batch has marginalized cells; it has no BitMatrix form")
        return BitMatrix.from_array(self.cells.astype(np.uint8))


@dataclass(frozen=True)
class MaskSpec:
    p: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"marginalization probability must be in [0, 1], got {self.p}")


@dataclass(frozen=True)
class PairCounts:
    """joint[i, j, a, b] = number of rows with x_i = a and x_j = b."""
    n: int
    joint: np.ndarray  # shape (V, V, 2, 2), int64


# ---------- pairwise co-occurrence ----------

def _and_counts_row(words: np.ndarray, i: int) -> np.ndarray:
    # popcount(col_i AND col_j) for j >= i
    return np.bitwise_count(words[i][None, :] & words[i:]).sum(axis=1, dtype=np.int64)


def pairwise_counts(data: BitMatrix, jobs: int = 1) -> PairCounts:
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    v, n = data.cols, data.rows
    both = np.zeros((v, v), dtype=np.int64)

    def fill(i: int) -> None:
        both[i, i:] = _and_counts_row(data.words, i)

    if jobs == 1:
        for i in range(v):
            fill(i)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            list(ex.map(fill, range(v)))

    # upper triangle -> symmetric
    both = np.triu(both) + np.triu(both, 1).T
    ones = np.diag(both).copy()

    joint = np.empty((v, v, 2, 2), dtype=np.int64)
    joint[:, :, 1, 1] = both
    joint[:, :, 1, 0] = ones[:, None] - both
    joint[:, :, 0, 1] = ones[None, :] - both
    joint[:, :, 0, 0] = n - ones[:, None] - ones[None, :] + both
    logger.debug("pairwise counts: N=%d V=%d jobs=%d", n, v, jobs)
    return PairCounts(n=n, joint=joint)


# ---------- marginalization masks ----------

def gen_mask(data: BitMatrix, spec: MaskSpec, block_rows: int = BLOCK_ROWS) -> MaskedBatch:
    values = data.to_array()
    cells = values.astype(np.int8)
    cols = np.arange(data.cols, dtype=np.uint64)[None, :]
    for start in range(0, data.rows, block_rows):
        stop = min(start + block_rows, data.rows)
        rows = np.arange(start, stop, dtype=np.uint64)[:, None]
        u = uniforms(spec.seed, MASK_STREAM, rows, cols)
        cells[start:stop][u < spec.p] = CellState.MARG
    return MaskedBatch(cells=cells)


def require_cols(got: int, expected: int) -> None:
    if got != expected:
        raise DimensionMismatch(expected, got)
