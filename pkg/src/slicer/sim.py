"""Deterministic discrete-event simulation of one back-end server and N
front-end devices.

Each device runs a closed loop: front-end compute, encode, transmission
(analytic channel latency), then queueing at the single FIFO back-end,
which finishes the inference.  The next request is issued when the
previous one completes.  Everything is deterministic; event ties break
by (time, event kind, device id).
"""

import csv
import heapq
import json
from dataclasses import dataclass

from .channel import ChannelParams, comm_latency
from .codec import CodecConfig
from .errors import ConfigError
from .planner import (
    SearchGrids,
    encode_time_estimate,
    hierarchical_search,
    payload_upper_bound,
)
from .profiles import Constraints, DeviceTimeModel, ModelProfile, channel_from_dict

POLICY_EC = "ec_baseline"
POLICY_FIXED = "fixed_split"
POLICY_SLICER = "slicer"

_ARRIVAL = 0
_DEPARTURE = 1


@dataclass(frozen=True)
class SimConfig:
    n_devices: int
    requests_per_device: int
    policy: str
    profile: ModelProfile
    channels: tuple  # one ChannelParams per device
    ell: int | None = None  # fixed_split only
    theta: CodecConfig | None = None  # fixed_split; defaults below
    constraints: Constraints = Constraints()
    grids: SearchGrids = SearchGrids()
    time_model: DeviceTimeModel = DeviceTimeModel.zero()
    think_time_ms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_devices < 1 or self.requests_per_device < 1:
            raise ConfigError("n_devices and requests_per_device must be >= 1")
        if len(self.channels) != self.n_devices:
            raise ConfigError("need one channel per device")
        if self.policy not in (POLICY_EC, POLICY_FIXED, POLICY_SLICER):
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.policy == POLICY_FIXED and self.ell is None:
            raise ConfigError("fixed_split policy requires ell")


@dataclass(frozen=True)
class DeviceTimeline:
    """Per-request latency components for one device, fixed by its plan."""

    ell: int
    front_ms: float
    encode_ms: float
    comm_ms: float
    service_ms: float
    uplink_bits: float


@dataclass(frozen=True)
class SimReport:
    n_devices: int
    requests_per_device: int
    policy: str
    completed: int
    makespan_ms: float
    mean_e2e_ms: float
    p50_e2e_ms: float
    p95_e2e_ms: float
    per_device_mean_e2e_ms: tuple
    backend_busy_ms: float
    backend_throughput_per_s: float
    total_uplink_bits: float
    bits_per_request: float
    queue_trace: tuple  # (time_ms, queue_len) at each arrival/departure

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["per_device_mean_e2e_ms"] = list(self.per_device_mean_e2e_ms)
        d["queue_trace"] = [list(p) for p in self.queue_trace]
        return d

    def save_summary(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


def _device_timeline(cfg: SimConfig, ch: ChannelParams) -> DeviceTimeline:
    profile = cfg.profile
    if cfg.policy == POLICY_EC:
        comm = comm_latency(profile.input_bits, ch, 0.0)
        return DeviceTimeline(
            ell=0,
            front_ms=0.0,
            encode_ms=0.0,
            comm_ms=comm.comm_ms,
            service_ms=profile.back_end_ms_at(0),
            uplink_bits=profile.input_bits,
        )
    if cfg.policy == POLICY_FIXED:
        theta = cfg.theta if cfg.theta is not None else CodecConfig(s=0.9)
        ell = cfg.ell
        b_ub = payload_upper_bound(profile.if_shape(ell), theta)
        zeta = encode_time_estimate(theta, cfg.time_model)
        comm = comm_latency(b_ub, ch, zeta)
        return DeviceTimeline(
            ell=ell,
            front_ms=profile.cum_device_ms_at(ell),
            encode_ms=zeta,
            comm_ms=comm.comm_ms,
            service_ms=profile.back_end_ms_at(ell),
            uplink_bits=b_ub,
        )
    # slicer: plan per device (channels may be heterogeneous)
    plan = hierarchical_search(
        profile, cfg.constraints, ch, cfg.time_model, cfg.grids, mode="single_shot"
    )
    if not plan.feasible:
        # EC fallback per the planner contract.
        comm = comm_latency(profile.input_bits, ch, 0.0)
        return DeviceTimeline(
            ell=0,
            front_ms=0.0,
            encode_ms=0.0,
            comm_ms=comm.comm_ms,
            service_ms=profile.back_end_ms_at(0),
            uplink_bits=profile.input_bits,
        )
    lat = plan.predicted_latency
    return DeviceTimeline(
        ell=plan.ell_star,
        front_ms=lat.device_ms,
        encode_ms=lat.encode_ms,
        comm_ms=lat.comm_ms,
        service_ms=profile.back_end_ms_at(plan.ell_star),
        uplink_bits=plan.predicted_b_ub,
    )


def run_simulation(cfg: SimConfig) -> SimReport:
    timelines = [_device_timeline(cfg, ch) for ch in cfg.channels]

    # Event heap entries: (time, kind, device, request_index)
    events = []
    issued = [0] * cfg.n_devices
    start_times = {}
    latencies = [[] for _ in range(cfg.n_devices)]
    queue = []  # FIFO of (device, request, arrival_time)
    queue_trace = []
    busy_ms = 0.0
    uplink_bits = 0.0
    completed = 0
    makespan = 0.0

    def issue(dev: int, now: float) -> None:
        tl = timelines[dev]
        req = issued[dev]
        issued[dev] += 1
        start_times[(dev, req)] = now
        arrival = now + tl.front_ms + tl.encode_ms + tl.comm_ms
        heapq.heappush(events, (arrival, _ARRIVAL, dev, req))

    for dev in range(cfg.n_devices):
        issue(dev, 0.0)

    server_busy_until = 0.0
    in_service = None
    while events:
        time, kind, dev, req = heapq.heappop(events)
        if kind == _ARRIVAL:
            uplink_bits += timelines[dev].uplink_bits
            queue.append((dev, req, time))
            queue_trace.append((time, len(queue)))
        else:  # departure of the request currently in service
            sdev, sreq = in_service
            in_service = None
            completed += 1
            makespan = max(makespan, time)
            latencies[sdev].append(time - start_times.pop((sdev, sreq)))
            queue_trace.append((time, len(queue)))
            if issued[sdev] < cfg.requests_per_device:
                issue(sdev, time + cfg.think_time_ms)
        if in_service is None and queue:
            ndev, nreq, _arr = queue.pop(0)
            service = timelines[ndev].service_ms
            begin = max(time, server_busy_until)
            finish = begin + service
            server_busy_until = finish
            busy_ms += service
            in_service = (ndev, nreq)
            heapq.heappush(events, (finish, _DEPARTURE, ndev, nreq))

    all_lat = sorted(x for per in latencies for x in per)
    total = completed
    mean = sum(all_lat) / total if total else 0.0

    def pct(p):
        if not all_lat:
            return 0.0
        i = min(len(all_lat) - 1, int(p / 100.0 * len(all_lat)))
        return all_lat[i]

    return SimReport(
        n_devices=cfg.n_devices,
        requests_per_device=cfg.requests_per_device,
        policy=cfg.policy,
        completed=completed,
        makespan_ms=makespan,
        mean_e2e_ms=mean,
        p50_e2e_ms=pct(50),
        p95_e2e_ms=pct(95),
        per_device_mean_e2e_ms=tuple(
            sum(per) / len(per) if per else 0.0 for per in latencies
        ),
        backend_busy_ms=busy_ms,
        backend_throughput_per_s=(completed / (makespan / 1000.0)) if makespan else 0.0,
        total_uplink_bits=uplink_bits,
        bits_per_request=uplink_bits / completed if completed else 0.0,
        queue_trace=tuple(queue_trace),
    )


def compare_policies(cfg_base: SimConfig, cfg_alt: SimConfig) -> dict:
    """Paired metrics for two policies over the same workload."""
    if (
        cfg_base.n_devices != cfg_alt.n_devices
        or cfg_base.requests_per_device != cfg_alt.requests_per_device
    ):
        raise ConfigError("compared configs must share the workload")
    base = run_simulation(cfg_base)
    alt = run_simulation(cfg_alt)
    metrics = {}
    for name in (
        "mean_e2e_ms",
        "backend_busy_ms",
        "backend_throughput_per_s",
        "total_uplink_bits",
        "bits_per_request",
    ):
        b = getattr(base, name)
        a = getattr(alt, name)
        metrics[name] = {"base": b, "alt": a, "ratio": (a / b) if b else float("inf")}
    return {"base_policy": base.policy, "alt_policy": alt.policy, "metrics": metrics}


def sweep_devices(cfg: SimConfig, n_values) -> list[dict]:
    """Re-run the same scenario for several device counts (CSV-friendly)."""
    rows = []
    for n in n_values:
        chans = tuple(cfg.channels[i % len(cfg.channels)] for i in range(n))
        scen = SimConfig(
            n_devices=n,
            requests_per_device=cfg.requests_per_device,
            policy=cfg.policy,
            profile=cfg.profile,
            channels=chans,
            ell=cfg.ell,
            theta=cfg.theta,
            constraints=cfg.constraints,
            grids=cfg.grids,
            time_model=cfg.time_model,
            think_time_ms=cfg.think_time_ms,
            seed=cfg.seed,
        )
        rep = run_simulation(scen)
        rows.append(
            {
                "n_devices": n,
                "policy": rep.policy,
                "completed": rep.completed,
                "makespan_ms": rep.makespan_ms,
                "mean_e2e_ms": rep.mean_e2e_ms,
                "backend_busy_ms": rep.backend_busy_ms,
                "backend_throughput_per_s": rep.backend_throughput_per_s,
                "bits_per_request": rep.bits_per_request,
            }
        )
    return rows


def write_csv(rows: list[dict], path) -> None:
    if not rows:
        raise ConfigError("no rows to write")
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def sim_config_from_dict(d: dict, profile: ModelProfile) -> SimConfig:
    """SimConfig JSON: n_devices, requests_per_device, policy {name, ...},
    channel or channels[], optional constraints/grids/think_time_ms/seed."""
    policy = d["policy"]
    name = policy["name"] if isinstance(policy, dict) else policy
    if "channels" in d:
        chans = tuple(channel_from_dict(c) for c in d["channels"])
        if len(chans) != int(d["n_devices"]):
            raise ConfigError("channels list must match n_devices")
    elif "channel" in d:
        chans = tuple(channel_from_dict(d["channel"]) for _ in range(int(d["n_devices"])))
    else:
        raise ConfigError("sim config needs 'channel' or 'channels'")
    theta = None
    if isinstance(policy, dict) and "theta" in policy:
        t = policy["theta"]
        theta = CodecConfig(
            s=float(t["s"]),
            lam=float(t.get("lambda", 0.0)),
            m_plus=int(t.get("m_plus", 1)),
            m_minus=int(t.get("m_minus", 1)),
            q_bit=int(t.get("q_bit", 8)),
            delta=float(t.get("delta", 0.01)),
        )
    grids = SearchGrids()
    if isinstance(policy, dict) and "grids" in policy:
        g = policy["grids"]
        grids = SearchGrids(
            m_grid=tuple(g.get("m_grid", SearchGrids.m_grid)),
            s_grid=tuple(g.get("s_grid", SearchGrids.s_grid)),
            lam=float(g.get("lambda", 0.0)),
            q_bit=int(g.get("q_bit", 8)),
            delta=float(g.get("delta", 0.01)),
        )
    constraints = Constraints.from_dict(d.get("constraints", {}))
    time_model = (
        DeviceTimeModel.from_dict(d["time_model"]) if "time_model" in d else DeviceTimeModel.zero()
    )
    return SimConfig(
        n_devices=int(d["n_devices"]),
        requests_per_device=int(d["requests_per_device"]),
        policy=name,
        profile=profile,
        channels=chans,
        ell=int(policy["ell"]) if isinstance(policy, dict) and "ell" in policy else None,
        theta=theta,
        constraints=constraints,
        grids=grids,
        time_model=time_model,
        think_time_ms=float(d.get("think_time_ms", 0.0)),
        seed=int(d.get("seed", 0)),
    )
