"""Asymmetric top-K filtering.

Keeps exactly k_keep = floor((1 - s) * T) positions of a tensor, zeroing
the rest.  The cut-off tau is the k_keep-th largest magnitude; asymmetric
thresholds tau_plus = (1 + lam) * tau and tau_minus = -(1 - lam) * tau
define a strictly-retained set, and any remaining slots are filled from
the non-strict elements in descending magnitude, breaking exact-magnitude
ties uniformly at random from the supplied seed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NonFiniteError
from .rng import hash_indices
from .tensor import DenseTensor


@dataclass(frozen=True)
class AtkfResult:
    filtered: DenseTensor
    kept_indices: np.ndarray = field(repr=False)  # sorted flat indices
    tau: float
    tau_plus: float
    tau_minus: float
    k_keep: int
    tau_is_fallback: bool = False  # k_keep == 0: tau holds max |x| instead


def keep_count(s: float, t: int) -> int:
    """floor((1 - s) * t), guarded against float error dropping a unit
    when the true product is an integer (e.g. s=0.9, t=1000 -> 100)."""
    return int(np.floor((1.0 - s) * t + 1e-9))


def _tie_break_order(abs_vals: np.ndarray, indices: np.ndarray, seed: int) -> np.ndarray:
    """Order `indices` by descending |x|, random among exact-magnitude ties."""
    keys = hash_indices(seed, indices)
    order = np.lexsort((keys, -abs_vals[indices].astype(np.float64)))
    return indices[order]


def atkf_filter(x: DenseTensor, s: float, lam: float, seed: int) -> AtkfResult:
    if not 0.0 <= s <= 1.0:
        raise ConfigError(f"sparsity s must be in [0, 1], got {s}")
    if not 0.0 <= lam < 1.0:
        raise ConfigError(f"asymmetry lambda must be in [0, 1), got {lam}")
    vals = x.values.astype(np.float64)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteError("input tensor contains NaN or Inf")

    t = x.size
    k_keep = keep_count(s, t)
    abs_vals = np.abs(vals)

    if k_keep == 0:
        zero = DenseTensor(x.rows, x.cols, np.zeros(t, dtype=np.float32))
        tau = float(abs_vals.max())
        return AtkfResult(
            filtered=zero,
            kept_indices=np.empty(0, dtype=np.int64),
            tau=tau,
            tau_plus=(1.0 + lam) * tau,
            tau_minus=-(1.0 - lam) * tau,
            k_keep=0,
            tau_is_fallback=True,
        )

    # Exact k-th largest magnitude.
    tau = float(np.partition(abs_vals, t - k_keep)[t - k_keep])
    tau_plus = (1.0 + lam) * tau
    tau_minus = -(1.0 - lam) * tau

    strict_mask = (vals > tau_plus) | (vals < tau_minus)
    strict = np.flatnonzero(strict_mask)
    if strict.size >= k_keep:
        # Possible only for lam > 0 on skewed inputs; the exact-cardinality
        # contract wins, so the smallest-magnitude strict entries are dropped.
        kept = _tie_break_order(abs_vals, strict, seed)[:k_keep]
    else:
        pool = _tie_break_order(abs_vals, np.flatnonzero(~strict_mask), seed)
        fill = pool[: k_keep - strict.size]
        kept = np.concatenate([strict, fill])

    kept = np.sort(kept.astype(np.int64))
    out = np.zeros(t, dtype=np.float32)
    out[kept] = x.values[kept]
    return AtkfResult(
        filtered=DenseTensor(x.rows, x.cols, out),
        kept_indices=kept,
        tau=tau,
        tau_plus=tau_plus,
        tau_minus=tau_minus,
        k_keep=k_keep,
    )
