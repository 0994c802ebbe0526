"""Sign separation, magnitude-descending sort, equal-cardinality block
partitioning, and CSR encoding of each block.

The filtered tensor is split into a positive and a negative plane
(x = plus - minus).  Each plane's nonzeros are sorted by descending
magnitude (stable by ascending flat index among equal values) and cut
into M contiguous blocks: the first M-1 blocks hold exactly
floor(nnz / M) entries, the last absorbs the remainder.  Each block is
then stored as CSR over the original N x K scatter.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import DenseTensor

PLUS = "plus"
MINUS = "minus"


@dataclass(frozen=True)
class SignPlane:
    sign: str
    sorted_values: np.ndarray = field(repr=False)  # positive, non-increasing
    perm: np.ndarray = field(repr=False)  # original flat indices

    @property
    def nnz(self) -> int:
        return int(self.sorted_values.size)


@dataclass(frozen=True)
class BlockPartition:
    block_ranges: tuple  # ((start, stop), ...) over sorted_values
    m: int  # effective block count
    base_cardinality: int


@dataclass(frozen=True)
class CsrBlock:
    values: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)
    row_ptr: np.ndarray = field(repr=False)  # length N + 1


def sign_separate(x: DenseTensor) -> tuple[np.ndarray, np.ndarray]:
    """Return (plus, minus) dense planes with x == plus - minus exactly."""
    v = x.values
    return np.maximum(v, 0.0), np.maximum(-v, 0.0)


def sort_nonzeros(plane: np.ndarray, sign: str) -> SignPlane:
    """Collect nonzeros of a dense plane, sorted by descending value.

    Equal values keep ascending flat-index order (stable), so the layout
    is reproducible across implementations.
    """
    if np.any(plane < 0):
        raise ValueError("plane values must be non-negative")
    idx = np.flatnonzero(plane)
    vals = plane[idx]
    order = np.lexsort((idx, -vals.astype(np.float64)))
    return SignPlane(sign=sign, sorted_values=vals[order], perm=idx[order].astype(np.int64))


def partition_equal(plane: SignPlane, m: int) -> BlockPartition:
    if m < 1:
        raise ConfigError(f"block count M must be >= 1, got {m}")
    nnz = plane.nnz
    m_eff = max(1, min(m, nnz))
    base = nnz // m_eff
    ranges = []
    start = 0
    for i in range(m_eff):
        stop = start + base if i < m_eff - 1 else nnz
        ranges.append((start, stop))
        start = stop
    return BlockPartition(block_ranges=tuple(ranges), m=m_eff, base_cardinality=base)


def to_csr(plane: SignPlane, rng: tuple[int, int], shape: tuple[int, int]) -> CsrBlock:
    start, stop = rng
    n, k = shape
    if not (0 <= start <= stop <= plane.nnz):
        raise IndexError(f"block range {rng} out of bounds for nnz={plane.nnz}")
    flat = plane.perm[start:stop]
    vals = plane.sorted_values[start:stop]
    if np.any(flat >= n * k):
        raise IndexError("flat index exceeds tensor size")
    # Row-major flat index: ascending flat order == ascending (row, col).
    order = np.argsort(flat, kind="stable")
    flat = flat[order]
    vals = vals[order]
    rows = flat // k
    cols = (flat % k).astype(np.uint32)
    row_ptr = np.zeros(n + 1, dtype=np.uint32)
    np.add.at(row_ptr, rows + 1, 1)
    row_ptr = np.cumsum(row_ptr, dtype=np.uint64).astype(np.uint32)
    return CsrBlock(values=vals, cols=cols, row_ptr=row_ptr)


def densify_csr(block: CsrBlock, shape: tuple[int, int], values=None) -> np.ndarray:
    """Scatter a CSR block back into a flat dense array."""
    n, k = shape
    out = np.zeros(n * k, dtype=np.float64)
    vals = block.values if values is None else values
    for row in range(n):
        lo, hi = int(block.row_ptr[row]), int(block.row_ptr[row + 1])
        out[row * k + block.cols[lo:hi].astype(np.int64)] = vals[lo:hi]
    return out


def csr_flat_indices(block: CsrBlock, shape: tuple[int, int]) -> np.ndarray:
    """Flat positions of a CSR block's entries, in CSR order."""
    n, k = shape
    counts = np.diff(block.row_ptr.astype(np.int64))
    rows = np.repeat(np.arange(n, dtype=np.int64), counts)
    return rows * k + block.cols.astype(np.int64)


def split_planes(x: DenseTensor, m_plus: int, m_minus: int):
    """Full magnitude-split: returns per-sign (SignPlane, BlockPartition)."""
    if x.rows < 1 or x.cols < 1:
        raise ShapeError("empty tensor")
    plus, minus = sign_separate(x)
    plane_p = sort_nonzeros(plus, PLUS)
    plane_m = sort_nonzeros(minus, MINUS)
    return (
        (plane_p, partition_equal(plane_p, m_plus)),
        (plane_m, partition_equal(plane_m, m_minus)),
    )
