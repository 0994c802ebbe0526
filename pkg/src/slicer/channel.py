"""Analytic outage / retransmission channel model and latency evaluators.

Communication latency for a B-bit payload is the transmission time
inflated by the expected number of retransmissions needed to hit the
outage target epsilon, plus the encode time:

    P_o = 1 - exp(-(2^(R/W) - 1) / gamma)
    retx = max(1, ceil(ln(epsilon) / ln(P_o)))
    L_c = (B / R) * retx + zeta
"""

import math
from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class ChannelParams:
    rate_bps: float  # R
    bandwidth_hz: float  # W
    mean_snr: float  # gamma
    epsilon: float  # outage target
    sigma_h2: float = 1.0  # fading variance; carried for config fidelity

    def __post_init__(self):
        if self.rate_bps <= 0 or self.bandwidth_hz <= 0 or self.mean_snr <= 0:
            raise ConfigError("rate, bandwidth, and SNR must be positive")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must be in (0, 1), got {self.epsilon}")


@dataclass(frozen=True)
class LatencyBreakdown:
    comm_ms: float  # includes encode time
    device_ms: float
    encode_ms: float
    total_ms: float
    retx_factor: int


def outage_probability(ch: ChannelParams) -> float:
    return 1.0 - math.exp(-(2.0 ** (ch.rate_bps / ch.bandwidth_hz) - 1.0) / ch.mean_snr)


def retx_factor(ch: ChannelParams, p_outage: float | None = None) -> int:
    p = outage_probability(ch) if p_outage is None else p_outage
    if not 0.0 < p < 1.0:
        raise ConfigError(f"outage probability {p} leaves the retransmission count undefined")
    return max(1, math.ceil(math.log(ch.epsilon) / math.log(p)))


def comm_latency(b_bits: float, ch: ChannelParams, zeta_ms: float = 0.0) -> LatencyBreakdown:
    if b_bits < 0:
        raise ConfigError("payload size must be non-negative")
    retx = retx_factor(ch)
    comm_ms = (b_bits / ch.rate_bps) * retx * 1000.0 + zeta_ms
    return LatencyBreakdown(
        comm_ms=comm_ms,
        device_ms=0.0,
        encode_ms=zeta_ms,
        total_ms=comm_ms,
        retx_factor=retx,
    )


def total_latency_single(
    profile, ell: int, b_bits: float, ch: ChannelParams, zeta_ms: float = 0.0
) -> LatencyBreakdown:
    """End-to-end single-shot latency: front-end compute through layer ell
    plus communication of the (compressed) feature.  ell == 0 is the raw
    input offload baseline."""
    device_ms = profile.cum_device_ms_at(ell)
    comm = comm_latency(b_bits, ch, zeta_ms)
    return LatencyBreakdown(
        comm_ms=comm.comm_ms,
        device_ms=device_ms,
        encode_ms=zeta_ms,
        total_ms=device_ms + comm.comm_ms,
        retx_factor=comm.retx_factor,
    )


def total_latency_ar(
    profile, ell: int, w: int, b_bits: float, ch: ChannelParams, zeta_ms: float = 0.0
) -> LatencyBreakdown:
    """Autoregressive latency: w - 1 full compressed passes on the device,
    one partial compressed pass through layer ell, then the offload."""
    if w < 1:
        raise ConfigError(f"step count w must be >= 1, got {w}")
    device_ms = (w - 1) * profile.compressed_full_pass_ms + profile.cum_compressed_ms_at(ell)
    comm = comm_latency(b_bits, ch, zeta_ms)
    return LatencyBreakdown(
        comm_ms=comm.comm_ms,
        device_ms=device_ms,
        encode_ms=zeta_ms,
        total_ms=device_ms + comm.comm_ms,
        retx_factor=comm.retx_factor,
    )
