"""Split-point and codec-configuration planning.

All decisions are made pre-execution from closed-form predictions: a
conservative payload bound (every block charged at the maximum bit
width) and a table-driven encode-time estimate.  The single-shot rule
picks the deepest layer satisfying the memory and latency budgets; the
autoregressive rule picks the deepest admissible split and, at it, the
largest feasible step count;
the hierarchical search additionally tunes the codec knobs in
low-to-high accuracy-impact order: block counts first, then sparsity,
then split retreat.
"""

import json
import math
from dataclasses import dataclass, field

from .atkf import keep_count
from .channel import ChannelParams, LatencyBreakdown, total_latency_ar, total_latency_single
from .codec import CodecConfig, MODE_FIXED, col_bits
from .errors import ConfigError, ProfileError
from .profiles import Constraints, DeviceTimeModel, ModelProfile

_HEADER_AND_CRC_BITS = 8 * (32 + 4)
_BLOCK_META_BITS = lambda n: 8 * (13 + 4 * (n + 1)) + 14  # noqa: E731  (+14: section padding)


def _k_keep(shape: tuple[int, int], s: float) -> int:
    n, k = shape
    return keep_count(s, n * k)


def payload_upper_bound(
    shape: tuple[int, int], cfg: CodecConfig, nnz_split: tuple[int, int] | None = None
) -> int:
    """Conservative payload bound in bits: every block charged q_bit.

    When the positive/negative nonzero split is known, the per-plane
    effective block counts are used; otherwise the worst case over all
    splits is charged.
    """
    n, k = shape
    keep = _k_keep(shape, cfg.s)
    if nnz_split is not None:
        nnz_p, nnz_m = nnz_split
        if nnz_p < 0 or nnz_m < 0 or nnz_p + nnz_m != keep:
            raise ConfigError(
                f"nnz split {nnz_split} inconsistent with k_keep={keep} at s={cfg.s}"
            )
        n_blocks = max(1, min(cfg.m_plus, nnz_p)) + max(1, min(cfg.m_minus, nnz_m))
    else:
        # Worst case over sign splits; an empty plane still costs one block.
        n_blocks = max(
            2,
            min(keep, cfg.m_plus + cfg.m_minus),
            min(keep, cfg.m_plus) + 1,
            min(keep, cfg.m_minus) + 1,
        )
    bits = _HEADER_AND_CRC_BITS
    if cfg.mode == MODE_FIXED:
        bits += 8 * n_blocks
    bits += n_blocks * _BLOCK_META_BITS(n)
    bits += keep * (cfg.q_bit + col_bits(k))
    return bits


def encode_time_estimate(cfg: CodecConfig, model: DeviceTimeModel) -> float:
    """Predicted encode time in ms; the ABQ term conservatively assumes
    every block runs at q_bit."""
    n_blocks = cfg.m_plus + cfg.m_minus
    return (
        model.atkf_ms(cfg.s, cfg.lam)
        + model.ms_ms(cfg.m_plus, cfg.m_minus)
        + n_blocks * model.abq_ms(cfg.q_bit)
    )


@dataclass(frozen=True)
class SplitPlan:
    mode: str  # "single_shot" | "ar"
    ell_star: int
    w_star: int | None
    theta: CodecConfig | None
    predicted_b_ub: int | None
    predicted_latency: LatencyBreakdown | None
    feasible: bool
    search_trace: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        lat = self.predicted_latency
        return {
            "mode": self.mode,
            "ell_star": self.ell_star,
            "w_star": self.w_star,
            "feasible": self.feasible,
            "theta": None
            if self.theta is None
            else {
                "s": self.theta.s,
                "lambda": self.theta.lam,
                "m_plus": self.theta.m_plus,
                "m_minus": self.theta.m_minus,
                "q_bit": self.theta.q_bit,
                "delta": self.theta.delta,
                "mode": self.theta.mode,
                "fixed_q": list(self.theta.fixed_q),
            },
            "predicted_b_ub_bits": self.predicted_b_ub,
            "predicted_latency": None
            if lat is None
            else {
                "total_ms": lat.total_ms,
                "device_ms": lat.device_ms,
                "comm_ms": lat.comm_ms,
                "encode_ms": lat.encode_ms,
                "retx_factor": lat.retx_factor,
            },
            "search_trace": [list(entry) for entry in self.search_trace],
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


def _single_feasible(profile, constraints, ch, cfg, model, ell):
    shape = profile.if_shape(ell)
    b_ub = payload_upper_bound(shape, cfg)
    zeta = encode_time_estimate(cfg, model)
    lat = total_latency_single(profile, ell, b_ub, ch, zeta)
    info = profile.layer(ell)
    m_buf = model.buffer_bytes(info.dense_if_bits)
    mem_ok = info.cum_memory_bytes + m_buf <= constraints.memory_budget_bytes
    buf_ok = m_buf <= constraints.encode_buffer_bytes
    lat_ok = lat.total_ms <= constraints.latency_budget_ms
    return mem_ok and buf_ok and lat_ok, b_ub, lat, (mem_ok and buf_ok, lat_ok)


def select_split_single(
    profile: ModelProfile,
    constraints: Constraints,
    ch: ChannelParams,
    cfg: CodecConfig,
    model: DeviceTimeModel,
) -> SplitPlan:
    """Deepest split satisfying memory and predicted-latency budgets."""
    trace = []
    for ell in range(profile.layer_count, 0, -1):
        ok, b_ub, lat, (mem_ok, lat_ok) = _single_feasible(
            profile, constraints, ch, cfg, model, ell
        )
        verdict = "feasible" if ok else ("memory" if not mem_ok else "latency")
        trace.append((f"ell={ell}", verdict))
        if ok:
            return SplitPlan(
                mode="single_shot",
                ell_star=ell,
                w_star=None,
                theta=cfg,
                predicted_b_ub=b_ub,
                predicted_latency=lat,
                feasible=True,
                search_trace=tuple(trace),
            )
    trace.append(("ell=0", "ec_fallback"))
    return SplitPlan(
        mode="single_shot",
        ell_star=0,
        w_star=None,
        theta=cfg,
        predicted_b_ub=None,
        predicted_latency=None,
        feasible=False,
        search_trace=tuple(trace),
    )


def _ar_feasible(profile, constraints, ch, cfg, model, w, ell):
    shape = profile.if_shape(ell)
    b_ub = payload_upper_bound(shape, cfg)
    zeta = encode_time_estimate(cfg, model)
    lat = total_latency_ar(profile, ell, w, b_ub, ch, zeta)
    lat_ok = lat.total_ms <= constraints.latency_budget_ms
    cap_ok = b_ub <= constraints.ar_offload_cap_bits
    return lat_ok and cap_ok, b_ub, lat, (cap_ok, lat_ok)


def select_split_ar(
    profile: ModelProfile,
    constraints: Constraints,
    ch: ChannelParams,
    cfg: CodecConfig,
    model: DeviceTimeModel,
    w_max: int,
) -> SplitPlan:
    """Deepest admissible split, then the largest feasible step count at
    that split (lexicographic with ell dominating)."""
    if w_max < 1:
        raise ConfigError(f"w_max must be >= 1, got {w_max}")
    trace = []
    for ell in range(profile.layer_count, 0, -1):
        for w in range(w_max, 0, -1):
            ok, b_ub, lat, (cap_ok, lat_ok) = _ar_feasible(
                profile, constraints, ch, cfg, model, w, ell
            )
            verdict = "feasible" if ok else ("offload_cap" if not cap_ok else "latency")
            trace.append((f"w={w} ell={ell}", verdict))
            if ok:
                return SplitPlan(
                    mode="ar",
                    ell_star=ell,
                    w_star=w,
                    theta=cfg,
                    predicted_b_ub=b_ub,
                    predicted_latency=lat,
                    feasible=True,
                    search_trace=tuple(trace),
                )
    trace.append(("ell=0", "ec_fallback"))
    return SplitPlan(
        mode="ar",
        ell_star=0,
        w_star=None,
        theta=cfg,
        predicted_b_ub=None,
        predicted_latency=None,
        feasible=False,
        search_trace=tuple(trace),
    )


def select_compression_param(profile: ModelProfile, constraints: Constraints):
    """Highest-scoring compression parameter whose compressed network plus
    the AR working set fits in device memory.  Ties break toward the
    smaller parameter (least compression).  Returns None when nothing
    fits."""
    if not profile.perf_table:
        raise ProfileError("profile has no perf_table")
    cap = constraints.ar_offload_cap_bits
    ar_bytes = 0.0 if math.isinf(cap) else cap / 8.0
    feasible = [
        p
        for p in profile.perf_table
        if profile.compressed_memory_bytes.get(p, float("inf")) + ar_bytes
        <= constraints.memory_budget_bytes
    ]
    if not feasible:
        return None
    return min(feasible, key=lambda p: (-profile.perf_table[p], p))


@dataclass(frozen=True)
class SearchGrids:
    m_grid: tuple = (1, 2, 3, 4)
    s_grid: tuple = (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)
    lam: float = 0.0
    q_bit: int = 8
    delta: float = 0.01

    def m_pairs(self):
        """(1,1),(1,2),(2,1),(2,2),(1,3),...: blocks of increasing max,
        lexicographic within a block."""
        grid = sorted(set(self.m_grid))
        pairs = []
        for top in grid:
            block = [
                (a, b)
                for a in grid
                for b in grid
                if max(a, b) == top and a <= top and b <= top
            ]
            pairs.extend(sorted(block))
        return pairs


def hierarchical_search(
    profile: ModelProfile,
    constraints: Constraints,
    ch: ChannelParams,
    model: DeviceTimeModel,
    grids: SearchGrids = SearchGrids(),
    mode: str = "single_shot",
    w_max: int = 1,
) -> SplitPlan:
    """Three-stage constraint-aware search, most accurate configs first.

    At the current split: sweep block-count pairs at the smallest
    sparsity; if none fits, raise sparsity and re-sweep; if the sparsity
    grid is exhausted, retreat the split and restart.  Feasibility is
    judged purely on the payload bound and time model, never by encoding.
    """
    if mode == "single_shot":
        splits = [(None, ell) for ell in range(profile.layer_count, 0, -1)]
    elif mode == "ar":
        splits = [
            (w, ell)
            for ell in range(profile.layer_count, 0, -1)
            for w in range(w_max, 0, -1)
        ]
    else:
        raise ConfigError(f"unknown search mode {mode!r}")

    trace = []
    for w, ell in splits:
        for s in grids.s_grid:
            for m_plus, m_minus in grids.m_pairs():
                cfg = CodecConfig(
                    s=s,
                    lam=grids.lam,
                    m_plus=m_plus,
                    m_minus=m_minus,
                    q_bit=grids.q_bit,
                    delta=grids.delta,
                )
                if w is None:
                    ok, b_ub, lat, _ = _single_feasible(
                        profile, constraints, ch, cfg, model, ell
                    )
                    label = f"ell={ell} s={s} M=({m_plus},{m_minus})"
                else:
                    ok, b_ub, lat, _ = _ar_feasible(
                        profile, constraints, ch, cfg, model, w, ell
                    )
                    label = f"w={w} ell={ell} s={s} M=({m_plus},{m_minus})"
                trace.append((label, "feasible" if ok else "infeasible"))
                if ok:
                    return SplitPlan(
                        mode=mode,
                        ell_star=ell,
                        w_star=w,
                        theta=cfg,
                        predicted_b_ub=b_ub,
                        predicted_latency=lat,
                        feasible=True,
                        search_trace=tuple(trace),
                    )
    trace.append(("ell=0", "ec_fallback"))
    return SplitPlan(
        mode=mode,
        ell_star=0,
        w_star=None,
        theta=None,
        predicted_b_ub=None,
        predicted_latency=None,
        feasible=False,
        search_trace=tuple(trace),
    )
