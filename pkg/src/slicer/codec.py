"""End-to-end intermediate-feature codec and the `.sif` wire format.

Encode: top-K filter -> sign separation -> magnitude sort -> equal-
cardinality blocks -> per-block integer quantization (adaptive or fixed
bit widths) -> CSR bitstream.  Decode reverses the process; zeros of the
filtered tensor survive exactly, retained values are reproduced within
half a quantization step per block.

`.sif` layout (little-endian, bit-packed fields MSB-first):

    magic "SIF1" | version u16=1 | N u32 | K u32 | s f32 | lambda f32 |
    q_bit u8 | delta f32 | mode u8 (0=ABQ, 1=fixed Q) |
    M+ u16 | M- u16 | [mode=1: (M+ + M-) Q entries, u8 each] |
    per block, plus-plane blocks first then minus-plane:
        q u8 | o f32 | v_min f32 | nnz u32 | row_ptr (N+1) x u32 |
        cols: nnz x col_bits, padded to byte |
        codes: nnz x q bits, padded to byte |
    crc32 u32 over everything after the magic

col_bits = ceil(log2 K), promoted to 1 when K == 1.
"""

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .bitstream import BitReader, BitWriter
from .errors import ConfigError, CorruptStreamError, StreamFormatError
from .atkf import atkf_filter
from .msplit import CsrBlock, csr_flat_indices, split_planes, to_csr
from .quant import (
    Q_MAX,
    QuantizedBlock,
    QuantSpec,
    abq_select_bits,
    aiq_dequantize,
    aiq_quantize,
    canonicalize_spec,
)
from .tensor import DenseTensor

_MAGIC = b"SIF1"
_VERSION = 1
MODE_ABQ = "abq"
MODE_FIXED = "fixed_q"
_MODE_CODES = {MODE_ABQ: 0, MODE_FIXED: 1}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}

HEADER_BYTES = 32  # magic through M-, excluding Q entries
BLOCK_FIXED_BYTES = 13  # q, o, v_min, nnz
CRC_BYTES = 4
ROW_PTR_ENTRY_BITS = 32


def col_bits(k: int) -> int:
    return max(1, (k - 1).bit_length())


@dataclass(frozen=True)
class CodecConfig:
    s: float
    lam: float = 0.0
    m_plus: int = 1
    m_minus: int = 1
    q_bit: int = 8
    delta: float = 0.01
    mode: str = MODE_ABQ
    fixed_q: tuple = ()  # m_plus + m_minus entries when mode == fixed_q

    def __post_init__(self):
        if not 0.0 <= self.s <= 1.0:
            raise ConfigError(f"s must be in [0, 1], got {self.s}")
        if not 0.0 <= self.lam < 1.0:
            raise ConfigError(f"lambda must be in [0, 1), got {self.lam}")
        if self.m_plus < 1 or self.m_minus < 1:
            raise ConfigError("block counts must be >= 1")
        if not 1 <= self.q_bit <= Q_MAX:
            raise ConfigError(f"q_bit must be in [1, {Q_MAX}], got {self.q_bit}")
        if self.delta < 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}")
        if self.mode not in _MODE_CODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == MODE_FIXED:
            if len(self.fixed_q) != self.m_plus + self.m_minus:
                raise ConfigError(
                    f"fixed_q needs {self.m_plus + self.m_minus} entries, "
                    f"got {len(self.fixed_q)}"
                )
            if any(not 1 <= int(q) <= Q_MAX for q in self.fixed_q):
                raise ConfigError("fixed_q entries must be in [1, 16]")


def broadcast_q(q_per_plane, m_plus: int, m_minus: int) -> tuple:
    """Expand a single per-plane Q vector to the (plus, minus) layout."""
    q = tuple(int(v) for v in q_per_plane)
    if len(q) == m_plus + m_minus:
        return q
    if len(q) == m_plus == m_minus:
        return q + q
    raise ConfigError(
        f"Q vector of length {len(q)} fits neither {m_plus}+{m_minus} "
        f"nor a per-plane broadcast"
    )


@dataclass(frozen=True)
class EncodedBlock:
    """One sign-plane block: quantization spec plus CSR scatter of codes."""

    q: int
    o: float
    v_min: float
    v_max: float
    degenerate: bool
    row_ptr: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)
    codes: np.ndarray = field(repr=False)

    @property
    def nnz(self) -> int:
        return int(self.codes.size)

    @property
    def spec(self) -> QuantSpec:
        return QuantSpec(self.q, self.o, self.v_min, self.v_max, self.degenerate)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EncodedBlock):
            return NotImplemented
        return (
            self.q == other.q
            and np.float32(self.o) == np.float32(other.o)
            and np.float32(self.v_min) == np.float32(other.v_min)
            and self.degenerate == other.degenerate
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.codes, other.codes)
        )


@dataclass(frozen=True)
class CompressedIF:
    rows: int
    cols: int
    s: float
    lam: float
    q_bit: int
    delta: float
    mode: str
    m_plus: int  # effective block counts
    m_minus: int
    q_vector: tuple  # fixed mode only: plus entries then minus entries
    blocks_plus: tuple
    blocks_minus: tuple

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def all_blocks(self) -> tuple:
        return self.blocks_plus + self.blocks_minus

    @property
    def total_nnz(self) -> int:
        return sum(b.nnz for b in self.all_blocks)

    @property
    def payload_bits(self) -> int:
        return payload_bits_exact(self)


def _encode_block_values(csr: CsrBlock, cfg: CodecConfig, q_fixed) -> QuantizedBlock:
    if csr.values.size == 0:
        spec = QuantSpec(q=cfg.q_bit if q_fixed is None else q_fixed,
                         o=1.0, v_min=0.0, v_max=0.0, degenerate=True)
        return QuantizedBlock(spec=spec, codes=np.zeros(0, dtype=np.uint32))
    if q_fixed is not None:
        return aiq_quantize(csr.values, q_fixed)
    _, block = abq_select_bits(csr.values, cfg.q_bit, cfg.delta)
    return block


def encode(x: DenseTensor, cfg: CodecConfig, seed: int = 0) -> CompressedIF:
    filtered = atkf_filter(x, cfg.s, cfg.lam, seed).filtered
    (plane_p, part_p), (plane_m, part_m) = split_planes(filtered, cfg.m_plus, cfg.m_minus)

    shape = (x.rows, x.cols)
    planes = []
    q_used = []
    for plane, part, q_segment in (
        (plane_p, part_p, cfg.fixed_q[: cfg.m_plus]),
        (plane_m, part_m, cfg.fixed_q[cfg.m_plus :]),
    ):
        blocks = []
        for i, rng in enumerate(part.block_ranges):
            csr = to_csr(plane, rng, shape)
            q_fixed = int(q_segment[i]) if cfg.mode == MODE_FIXED else None
            qb = _encode_block_values(csr, cfg, q_fixed)
            spec = canonicalize_spec(qb.spec)
            blocks.append(
                EncodedBlock(
                    q=spec.q,
                    o=float(np.float32(spec.o)),
                    v_min=float(np.float32(spec.v_min)),
                    v_max=spec.v_max,
                    degenerate=spec.degenerate,
                    row_ptr=csr.row_ptr,
                    cols=csr.cols,
                    codes=qb.codes,
                )
            )
            if cfg.mode == MODE_FIXED:
                q_used.append(spec.q)
        planes.append(tuple(blocks))

    return CompressedIF(
        rows=x.rows,
        cols=x.cols,
        s=float(np.float32(cfg.s)),
        lam=float(np.float32(cfg.lam)),
        q_bit=cfg.q_bit,
        delta=float(np.float32(cfg.delta)),
        mode=cfg.mode,
        m_plus=len(planes[0]),
        m_minus=len(planes[1]),
        q_vector=tuple(q_used),
        blocks_plus=planes[0],
        blocks_minus=planes[1],
    )


def _validate_plane(blocks, shape, seen: np.ndarray) -> None:
    n, k = shape
    for block in blocks:
        if block.row_ptr.size != n + 1 or block.row_ptr[0] != 0:
            raise CorruptStreamError("bad row pointer array")
        if int(block.row_ptr[-1]) != block.nnz or np.any(np.diff(block.row_ptr.astype(np.int64)) < 0):
            raise CorruptStreamError("row pointers inconsistent with nnz")
        if block.nnz and int(block.cols.max()) >= k:
            raise CorruptStreamError("column index out of range")
        for row in range(n):
            lo, hi = int(block.row_ptr[row]), int(block.row_ptr[row + 1])
            if hi - lo > 1 and np.any(np.diff(block.cols[lo:hi].astype(np.int64)) <= 0):
                raise CorruptStreamError("columns not strictly increasing within a row")
        idx = csr_flat_indices(block, shape)
        if np.any(seen[idx]):
            raise CorruptStreamError("overlapping supports within a sign plane")
        seen[idx] = True


def decode(c: CompressedIF) -> DenseTensor:
    shape = (c.rows, c.cols)
    flat = np.zeros(c.rows * c.cols, dtype=np.float64)
    for sign, blocks in ((1.0, c.blocks_plus), (-1.0, c.blocks_minus)):
        seen = np.zeros(c.rows * c.cols, dtype=bool)
        _validate_plane(blocks, shape, seen)
        for block in blocks:
            if block.nnz == 0:
                continue
            values = aiq_dequantize(QuantizedBlock(spec=block.spec, codes=block.codes))
            idx = csr_flat_indices(block, shape)
            flat[idx] += sign * values
    return DenseTensor(c.rows, c.cols, flat.astype(np.float32))


def payload_bits_exact(c: CompressedIF) -> int:
    """Exact serialized size in bits, computed from the format arithmetic."""
    cbits = col_bits(c.cols)
    total = HEADER_BYTES
    if c.mode == MODE_FIXED:
        total += len(c.q_vector)
    for block in c.all_blocks:
        total += BLOCK_FIXED_BYTES + 4 * (c.rows + 1)
        total += (block.nnz * cbits + 7) // 8
        total += (block.nnz * block.q + 7) // 8
    total += CRC_BYTES
    return 8 * total


def serialize(c: CompressedIF) -> bytes:
    body = bytearray()
    body += struct.pack(
        "<HIIffBfBHH",
        _VERSION,
        c.rows,
        c.cols,
        np.float32(c.s),
        np.float32(c.lam),
        c.q_bit,
        np.float32(c.delta),
        _MODE_CODES[c.mode],
        c.m_plus,
        c.m_minus,
    )
    if c.mode == MODE_FIXED:
        if len(c.q_vector) != c.m_plus + c.m_minus:
            raise ConfigError("q_vector length does not match block counts")
        body += bytes(int(q) for q in c.q_vector)
    cbits = col_bits(c.cols)
    for block in c.all_blocks:
        body += struct.pack(
            "<BffI", block.q, np.float32(block.o), np.float32(block.v_min), block.nnz
        )
        body += block.row_ptr.astype("<u4").tobytes()
        writer = BitWriter()
        for col in block.cols:
            writer.write(int(col), cbits)
        writer.align()
        for code in block.codes:
            writer.write(int(code), block.q)
        writer.align()
        body += writer.getvalue()
    crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
    return _MAGIC + bytes(body) + struct.pack("<I", crc)


def deserialize(data: bytes) -> CompressedIF:
    if len(data) < HEADER_BYTES + CRC_BYTES:
        raise StreamFormatError("stream too short for a .sif header")
    if data[:4] != _MAGIC:
        raise StreamFormatError(f"bad magic {data[:4]!r}")
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[4:-4]) & 0xFFFFFFFF != stored_crc:
        raise StreamFormatError("CRC mismatch")
    version, rows, cols_n, s, lam, q_bit, delta, mode_code, m_plus, m_minus = struct.unpack_from(
        "<HIIffBfBHH", data, 4
    )
    if version != _VERSION:
        raise StreamFormatError(f"unsupported .sif version {version}")
    if mode_code not in _MODE_NAMES:
        raise StreamFormatError(f"unknown mode code {mode_code}")
    mode = _MODE_NAMES[mode_code]
    pos = HEADER_BYTES
    q_vector = ()
    if mode == MODE_FIXED:
        count = m_plus + m_minus
        if len(data) < pos + count:
            raise StreamFormatError("truncated Q vector")
        q_vector = tuple(data[pos : pos + count])
        pos += count

    cbits = col_bits(cols_n)
    blocks = []
    for _ in range(m_plus + m_minus):
        if len(data) < pos + BLOCK_FIXED_BYTES + 4 * (rows + 1):
            raise StreamFormatError("truncated block header")
        q, o, v_min, nnz = struct.unpack_from("<BffI", data, pos)
        if not 1 <= q <= Q_MAX:
            raise CorruptStreamError(f"bit-width {q} out of range")
        pos += BLOCK_FIXED_BYTES
        row_ptr = np.frombuffer(data, dtype="<u4", count=rows + 1, offset=pos).copy()
        pos += 4 * (rows + 1)
        col_bytes = (nnz * cbits + 7) // 8
        code_bytes = (nnz * q + 7) // 8
        if len(data) - CRC_BYTES < pos + col_bytes + code_bytes:
            raise StreamFormatError("truncated block payload")
        reader = BitReader(data[pos : pos + col_bytes + code_bytes])
        cols = np.asarray([reader.read(cbits) for _ in range(nnz)], dtype=np.uint32)
        reader.align()
        codes = np.asarray([reader.read(q) for _ in range(nnz)], dtype=np.uint32)
        pos += col_bytes + code_bytes
        degenerate = o == 1.0 and (nnz == 0 or (codes.size and int(codes.max()) == 0))
        if degenerate:
            v_max = float(v_min)
        else:
            v_max = float(
                np.float32(np.float64(np.float32(v_min)) + np.float64(np.float32(o)) * ((1 << q) - 1))
            )
        blocks.append(
            EncodedBlock(
                q=int(q),
                o=float(o),
                v_min=float(v_min),
                v_max=v_max,
                degenerate=bool(degenerate),
                row_ptr=row_ptr,
                cols=cols,
                codes=codes,
            )
        )
    if pos != len(data) - CRC_BYTES:
        raise StreamFormatError("trailing bytes after last block")
    return CompressedIF(
        rows=rows,
        cols=cols_n,
        s=float(s),
        lam=float(lam),
        q_bit=int(q_bit),
        delta=float(delta),
        mode=mode,
        m_plus=int(m_plus),
        m_minus=int(m_minus),
        q_vector=q_vector,
        blocks_plus=tuple(blocks[:m_plus]),
        blocks_minus=tuple(blocks[m_plus:]),
    )
