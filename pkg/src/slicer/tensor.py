"""Dense 2-D tensor type, the `.tns` file format, and fixture generation.

`.tns` layout (little-endian):
    magic "TNS1" | version u16 = 1 | rows u32 | cols u32 | rows*cols float32
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError, ShapeError, TensorFormatError
from .rng import SplitMix64

_MAGIC = b"TNS1"
_VERSION = 1


@dataclass(frozen=True)
class DenseTensor:
    """Immutable N x K tensor of float32 values in row-major order."""

    rows: int
    cols: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ShapeError(f"tensor shape must be positive, got {self.rows}x{self.cols}")
        vals = np.ascontiguousarray(self.values, dtype=np.float32).reshape(-1)
        if vals.size != self.rows * self.cols:
            raise ShapeError(
                f"value count {vals.size} does not match shape {self.rows}x{self.cols}"
            )
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("tensor contains NaN or Inf")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def as_matrix(self) -> np.ndarray:
        return self.values.reshape(self.rows, self.cols)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and np.array_equal(
                self.values.view(np.uint32), other.values.view(np.uint32)
            )
        )


def save_tensor(t: DenseTensor, path) -> None:
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<HII", _VERSION, t.rows, t.cols))
        f.write(t.values.astype("<f4", copy=False).tobytes())


def load_tensor(path) -> DenseTensor:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 14:
        raise TensorFormatError("file too short for a .tns header")
    if data[:4] != _MAGIC:
        raise TensorFormatError(f"bad magic {data[:4]!r}")
    version, rows, cols = struct.unpack_from("<HII", data, 4)
    if version != _VERSION:
        raise TensorFormatError(f"unsupported .tns version {version}")
    if rows < 1 or cols < 1:
        raise ShapeError(f"stored shape {rows}x{cols} is degenerate")
    expected = 14 + 4 * rows * cols
    if len(data) < expected:
        raise TensorFormatError(
            f"truncated payload: need {expected} bytes, have {len(data)}"
        )
    vals = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=14)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteError("stored tensor contains NaN or Inf")
    return DenseTensor(rows, cols, vals.copy())


def random_tensor(rows: int, cols: int, seed: int, dist: str = "uniform") -> DenseTensor:
    """Deterministic fixture tensor.

    dist "uniform" draws from U(-1, 1); "gaussian" from N(0, 1).  The value
    stream is a pure function of (rows, cols, seed, dist); see slicer.rng
    for the exact recurrence.
    """
    if rows < 1 or cols < 1:
        raise ShapeError(f"tensor shape must be positive, got {rows}x{cols}")
    n = rows * cols
    gen = SplitMix64(seed)
    if dist == "uniform":
        out = [gen.next_uniform() for _ in range(n)]
    elif dist == "gaussian":
        out = []
        while len(out) < n:
            a, b = gen.next_gaussian_pair()
            out.append(a)
            if len(out) < n:
                out.append(b)
    else:
        raise ValueError(f"unknown dist {dist!r}")
    return DenseTensor(rows, cols, np.asarray(out, dtype=np.float32))
