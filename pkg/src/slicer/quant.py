"""Per-block asymmetric integer quantization, the integer-mismatch
distortion metric, and the greedy adaptive bit-width search.

Quantization maps a block of reals onto unsigned q-bit codes:

    o = (v_max - v_min) / (2^q - 1)
    code = clamp(round_half_away((v - v_min) / o), 0, 2^q - 1)
    dequant(code) = code * o + v_min

o and v_min are stored (and used) as float32 so the in-memory codec state
matches the wire format exactly.  A constant block (v_max == v_min) is
degenerate: o = 1 and every code is 0.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

Q_MAX = 16


@dataclass(frozen=True)
class QuantSpec:
    q: int
    o: float  # scale, float32 value
    v_min: float  # float32 value
    v_max: float
    degenerate: bool = False


@dataclass(frozen=True)
class QuantizedBlock:
    spec: QuantSpec
    codes: np.ndarray = field(repr=False)  # uint32, each < 2^q


def _check_q(q: int) -> None:
    if not 1 <= q <= Q_MAX:
        raise ConfigError(f"bit-width must be in [1, {Q_MAX}], got {q}")


def aiq_quantize(values, q: int) -> QuantizedBlock:
    _check_q(q)
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise ConfigError("cannot quantize an empty block")
    if not np.all(np.isfinite(vals)):
        raise ConfigError("block contains non-finite values")
    v_min = np.float32(vals.min())
    v_max = np.float32(vals.max())
    levels = (1 << q) - 1
    if v_max == v_min:
        spec = QuantSpec(q=q, o=1.0, v_min=float(v_min), v_max=float(v_max), degenerate=True)
        return QuantizedBlock(spec=spec, codes=np.zeros(vals.size, dtype=np.uint32))
    # Codes are computed with the full-precision scale; the stored (wire)
    # scale is its float32 rounding, used verbatim on the dequantize side.
    o64 = (np.float64(v_max) - np.float64(v_min)) / levels
    scaled = (vals - np.float64(v_min)) / o64
    codes = np.floor(scaled + 0.5)  # half away from zero; scaled >= 0 here
    codes = np.clip(codes, 0, levels).astype(np.uint32)
    spec = QuantSpec(q=q, o=float(np.float32(o64)), v_min=float(v_min), v_max=float(v_max))
    return QuantizedBlock(spec=spec, codes=codes)


def aiq_dequantize(block: QuantizedBlock) -> np.ndarray:
    spec = block.spec
    if spec.degenerate:
        return np.full(block.codes.size, np.float64(np.float32(spec.v_min)))
    return block.codes.astype(np.float64) * np.float64(np.float32(spec.o)) + np.float64(
        np.float32(spec.v_min)
    )


def canonicalize_spec(spec: QuantSpec) -> QuantSpec:
    """Replace v_max by the value recoverable from the wire fields
    (q, o, v_min), so serialization round-trips are bit-exact."""
    if spec.degenerate:
        return QuantSpec(spec.q, spec.o, spec.v_min, spec.v_min, degenerate=True)
    v_max = np.float32(
        np.float64(np.float32(spec.v_min))
        + np.float64(np.float32(spec.o)) * ((1 << spec.q) - 1)
    )
    return QuantSpec(spec.q, spec.o, spec.v_min, float(v_max))


def ds_metric(t1, q1: int, t2, q2: int) -> float:
    """Mean absolute integer mismatch between a reference code tensor at q1
    bits and a candidate at q2 bits, after shifting the reference down by
    q1 - q2 bits."""
    a = np.asarray(t1, dtype=np.int64)
    b = np.asarray(t2, dtype=np.int64)
    if a.size != b.size or a.size == 0:
        raise ConfigError(f"code tensors must have equal nonzero length, got {a.size} and {b.size}")
    if q2 > q1:
        raise ConfigError(f"reference bit-width q1={q1} must be >= q2={q2}")
    shifted = a >> (q1 - q2)
    return float(np.abs(shifted - b).sum() / a.size)


def abq_select_bits(values, q_bit: int, delta: float) -> tuple[int, QuantizedBlock]:
    """Greedy minimum-bit search: descend q from q_bit and stop at the
    first q whose mismatch against the q_bit reference exceeds delta."""
    _check_q(q_bit)
    if delta < 0:
        raise ConfigError(f"delta must be >= 0, got {delta}")
    reference = aiq_quantize(values, q_bit)
    best_q, best_block = q_bit, reference
    for q in range(q_bit - 1, 0, -1):
        candidate = aiq_quantize(values, q)
        if ds_metric(reference.codes, q_bit, candidate.codes, q) > delta:
            break
        best_q, best_block = q, candidate
    return best_q, best_block


def fixed_q_assign(blocks, q_vector) -> list[QuantizedBlock]:
    """Quantize magnitude-descending blocks at externally assigned widths."""
    if len(blocks) != len(q_vector):
        raise ConfigError(
            f"Q vector length {len(q_vector)} does not match block count {len(blocks)}"
        )
    return [aiq_quantize(vals, int(q)) for vals, q in zip(blocks, q_vector)]
