"""Model profiles, resource constraints, and the device-time lookup model.

All three are read from JSON files; schemas are documented on the
``from_dict`` constructors and exercised by the bundled files in data/.
"""

import json
from dataclasses import dataclass, field

from .channel import ChannelParams
from .errors import ConfigError, ProfileError


@dataclass(frozen=True)
class LayerInfo:
    cum_memory_bytes: float
    cum_device_ms: float
    cum_compressed_ms: float
    if_rows: int
    if_cols: int
    back_end_ms: float  # server time for the layers after this split

    @property
    def dense_if_bits(self) -> int:
        return 32 * self.if_rows * self.if_cols


@dataclass(frozen=True)
class ModelProfile:
    """Per-layer cumulative costs of one model on one device pair.

    JSON schema::

        {
          "layer_count": L,
          "input_bits": <raw input size in bits>,
          "full_back_end_ms": <server time for the whole model>,
          "compressed_full_pass_ms": <device time for one full compressed pass>,
          "layers": [  # exactly L entries, layer 1 first
            {"cum_memory_bytes":, "cum_device_ms":, "cum_compressed_ms":,
             "if_rows":, "if_cols":, "back_end_ms":}, ...
          ],
          "perf_table": {"<P>": score, ...},              # optional
          "compressed_memory_bytes": {"<P>": bytes, ...}  # optional
        }
    """

    layer_count: int
    input_bits: int
    full_back_end_ms: float
    compressed_full_pass_ms: float
    layers: tuple
    perf_table: dict = field(default_factory=dict)
    compressed_memory_bytes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.layer_count != len(self.layers) or self.layer_count < 1:
            raise ProfileError(
                f"layer_count {self.layer_count} does not match {len(self.layers)} layer entries"
            )
        for a, b in zip(self.layers, self.layers[1:]):
            if b.cum_memory_bytes < a.cum_memory_bytes or b.cum_device_ms < a.cum_device_ms:
                raise ProfileError("cumulative layer quantities must be non-decreasing")

    def layer(self, ell: int) -> LayerInfo:
        if not 1 <= ell <= self.layer_count:
            raise ProfileError(f"split point {ell} out of range 1..{self.layer_count}")
        return self.layers[ell - 1]

    def cum_device_ms_at(self, ell: int) -> float:
        return 0.0 if ell == 0 else self.layer(ell).cum_device_ms

    def cum_compressed_ms_at(self, ell: int) -> float:
        return 0.0 if ell == 0 else self.layer(ell).cum_compressed_ms

    def back_end_ms_at(self, ell: int) -> float:
        return self.full_back_end_ms if ell == 0 else self.layer(ell).back_end_ms

    def if_shape(self, ell: int) -> tuple[int, int]:
        info = self.layer(ell)
        return (info.if_rows, info.if_cols)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelProfile":
        try:
            layers = tuple(
                LayerInfo(
                    cum_memory_bytes=float(e["cum_memory_bytes"]),
                    cum_device_ms=float(e["cum_device_ms"]),
                    cum_compressed_ms=float(e.get("cum_compressed_ms", e["cum_device_ms"])),
                    if_rows=int(e["if_rows"]),
                    if_cols=int(e["if_cols"]),
                    back_end_ms=float(e["back_end_ms"]),
                )
                for e in d["layers"]
            )
            return cls(
                layer_count=int(d["layer_count"]),
                input_bits=int(d["input_bits"]),
                full_back_end_ms=float(d["full_back_end_ms"]),
                compressed_full_pass_ms=float(
                    d.get("compressed_full_pass_ms", layers[-1].cum_compressed_ms if layers else 0.0)
                ),
                layers=layers,
                perf_table={float(k): float(v) for k, v in d.get("perf_table", {}).items()},
                compressed_memory_bytes={
                    float(k): float(v) for k, v in d.get("compressed_memory_bytes", {}).items()
                },
            )
        except KeyError as exc:
            raise ProfileError(f"profile is missing field {exc}") from exc

    @classmethod
    def load(cls, path) -> "ModelProfile":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class Constraints:
    """Budgets: latency (ms), device memory (bytes), per-step offload cap
    (bits), and encode buffer (bytes)."""

    latency_budget_ms: float = float("inf")
    memory_budget_bytes: float = float("inf")
    ar_offload_cap_bits: float = float("inf")
    encode_buffer_bytes: float = float("inf")

    def __post_init__(self):
        for name in (
            "latency_budget_ms",
            "memory_budget_bytes",
            "ar_offload_cap_bits",
            "encode_buffer_bytes",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "Constraints":
        kwargs = {}
        for name in (
            "latency_budget_ms",
            "memory_budget_bytes",
            "ar_offload_cap_bits",
            "encode_buffer_bytes",
        ):
            if name in d and d[name] is not None:
                kwargs[name] = float(d[name])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "Constraints":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def load_channel(path) -> ChannelParams:
    """Channel config JSON: rate_bps, bandwidth_hz, mean_snr, epsilon,
    sigma_h2 (optional)."""
    with open(path) as f:
        d = json.load(f)
    return channel_from_dict(d)


def channel_from_dict(d: dict) -> ChannelParams:
    try:
        return ChannelParams(
            rate_bps=float(d["rate_bps"]),
            bandwidth_hz=float(d["bandwidth_hz"]),
            mean_snr=float(d["mean_snr"]),
            epsilon=float(d["epsilon"]),
            sigma_h2=float(d.get("sigma_h2", 1.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"channel config is missing field {exc}") from exc


def _nearest(grid, value):
    """Nearest grid value; ties resolve to the smaller grid point."""
    return min(sorted(set(grid)), key=lambda g: (abs(g - value), g))


@dataclass(frozen=True)
class DeviceTimeModel:
    """Offline-calibrated encode-time tables, nearest-grid-point lookup.

    JSON schema::

        {
          "t_atkf": [{"s":, "lambda":, "ms":}, ...],
          "t_ms":   [{"m_plus":, "m_minus":, "ms":}, ...],
          "t_abq":  [{"q":, "ms":}, ...],
          "m_buf_bytes": <number or null>   # null -> dense IF size
        }
    """

    t_atkf: dict  # (s, lambda) -> ms
    t_ms: dict  # (m_plus, m_minus) -> ms
    t_abq: dict  # q -> ms
    m_buf_bytes: float | None = None

    @staticmethod
    def zero() -> "DeviceTimeModel":
        return DeviceTimeModel(t_atkf={(0.0, 0.0): 0.0}, t_ms={(1, 1): 0.0}, t_abq={8: 0.0},
                               m_buf_bytes=0.0)

    @staticmethod
    def _lookup_pair(table: dict, a: float, b: float) -> float:
        key = (_nearest([k[0] for k in table], a), _nearest([k[1] for k in table], b))
        if key in table:
            return table[key]
        # Sparse (non cross-product) table: nearest stored pair.
        return table[min(table, key=lambda k: (abs(k[0] - a) + abs(k[1] - b), k))]

    def atkf_ms(self, s: float, lam: float) -> float:
        if not self.t_atkf:
            raise ConfigError("empty t_atkf table")
        return self._lookup_pair(self.t_atkf, s, lam)

    def ms_ms(self, m_plus: int, m_minus: int) -> float:
        if not self.t_ms:
            raise ConfigError("empty t_ms table")
        return self._lookup_pair(self.t_ms, m_plus, m_minus)

    def abq_ms(self, q: int) -> float:
        if not self.t_abq:
            raise ConfigError("empty t_abq table")
        return self.t_abq[_nearest(list(self.t_abq), q)]

    def buffer_bytes(self, dense_if_bits: int) -> float:
        if self.m_buf_bytes is None:
            return dense_if_bits / 8.0
        return self.m_buf_bytes

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceTimeModel":
        return cls(
            t_atkf={
                (float(e["s"]), float(e.get("lambda", 0.0))): float(e["ms"])
                for e in d.get("t_atkf", [])
            },
            t_ms={
                (int(e["m_plus"]), int(e["m_minus"])): float(e["ms"])
                for e in d.get("t_ms", [])
            },
            t_abq={int(e["q"]): float(e["ms"]) for e in d.get("t_abq", [])},
            m_buf_bytes=None if d.get("m_buf_bytes") is None else float(d["m_buf_bytes"]),
        )

    @classmethod
    def load(cls, path) -> "DeviceTimeModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))
