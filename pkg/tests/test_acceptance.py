"""Acceptance gate: one test per criterion, one printed pass/fail line each."""

import math
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from slicer import (
    ChannelParams,
    CodecConfig,
    Constraints,
    ModelProfile,
    SimConfig,
    abq_select_bits,
    aiq_dequantize,
    aiq_quantize,
    atkf_filter,
    decode,
    deserialize,
    ds_metric,
    encode,
    load_channel,
    outage_probability,
    payload_upper_bound,
    random_tensor,
    retx_factor,
    run_simulation,
    select_split_ar,
    select_split_single,
    serialize,
    total_latency_ar,
    total_latency_single,
)
from slicer.cli import main as cli_main
from slicer.msplit import csr_flat_indices
from slicer.planner import encode_time_estimate
from slicer.profiles import DeviceTimeModel
from slicer.quant import QuantizedBlock
from slicer.sim import POLICY_EC, POLICY_SLICER

DATA = Path(__file__).resolve().parents[1] / "data"
S_GRID = [round(0.05 * i, 2) for i in range(1, 20)]  # 0.05 .. 0.95


@contextmanager
def criterion(capsys, num, desc):
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"[FAIL] criterion {num}: {desc}")
        raise
    with capsys.disabled():
        print(f"[PASS] criterion {num}: {desc}")


def exact_keep(s, t):
    return int((1 - Fraction(str(s))) * t)


def random_cfg(gen):
    return CodecConfig(
        s=float(gen.choice([0.5, 0.6, 0.7, 0.8, 0.9, 0.95])),
        lam=float(gen.choice([0.0, 0.1, 0.3])),
        m_plus=int(gen.integers(1, 4)),
        m_minus=int(gen.integers(1, 4)),
        q_bit=int(gen.choice([2, 4, 8])),
        delta=float(gen.choice([0.0, 0.01, 0.1])),
    )


def test_criterion_1_exact_sparsity(capsys):
    with criterion(capsys, 1, "exact sparsity floor((1-s)T) on 1000 random tensors"):
        gen = np.random.default_rng(1001)
        for trial in range(1000):
            rows = int(gen.integers(1, 257))
            cols = int(gen.integers(1, 257))
            s = float(gen.choice(S_GRID))
            x = random_tensor(rows, cols, seed=trial, dist="gaussian")
            r = atkf_filter(x, s, float(gen.choice([0.0, 0.2])), seed=trial)
            assert len(r.kept_indices) == exact_keep(s, rows * cols)


def test_criterion_2_round_trip_bound(capsys):
    with criterion(capsys, 2, "per-element round-trip error <= o/2 + 4 ulp; zeros exact"):
        gen = np.random.default_rng(1002)
        for trial in range(1000):
            rows = int(gen.integers(2, 24))
            cols = int(gen.integers(2, 24))
            cfg = random_cfg(gen)
            x = random_tensor(rows, cols, seed=trial, dist="gaussian")
            c = encode(x, cfg, seed=trial)
            support = np.zeros(rows * cols, dtype=bool)
            ulp4 = 4 * np.spacing(np.abs(x.values).max())
            for sign, blocks in ((1.0, c.blocks_plus), (-1.0, c.blocks_minus)):
                for b in blocks:
                    if b.nnz == 0:
                        continue
                    idx = csr_flat_indices(b, (rows, cols))
                    vals = aiq_dequantize(QuantizedBlock(spec=b.spec, codes=b.codes))
                    support[idx] = True
                    err = np.abs(sign * vals - x.values[idx].astype(np.float64))
                    assert err.max() <= b.o / 2 + ulp4
            dec = decode(c)
            assert not np.any(dec.values[~support])


def test_criterion_3_serialization_bijection(capsys):
    with criterion(capsys, 3, "serialize/deserialize bit-exact; payload arithmetic exact"):
        gen = np.random.default_rng(1003)
        for trial in range(1000):
            rows = int(gen.integers(1, 20))
            cols = int(gen.integers(1, 20))
            cfg = random_cfg(gen)
            x = random_tensor(rows, cols, seed=2000 + trial)
            c = encode(x, cfg, seed=trial)
            blob = serialize(c)
            c2 = deserialize(blob)
            assert c2 == c
            assert serialize(c2) == blob
            assert c.payload_bits == 8 * len(blob)


def test_criterion_4_ds_oracle(capsys):
    with criterion(capsys, 4, "shift-distortion metric matches wide-integer oracle on 1e5 cases"):
        gen = np.random.default_rng(1004)
        cases = 0
        while cases < 100_000:
            q1 = int(gen.integers(1, 17))
            q2 = int(gen.integers(1, q1 + 1))
            n = int(gen.integers(1, 200))
            t1 = gen.integers(0, 2**q1, size=n)
            t2 = gen.integers(0, 2**q2, size=n)
            expect = Fraction(
                sum(abs((int(a) >> (q1 - q2)) - int(b)) for a, b in zip(t1, t2)), n
            )
            assert ds_metric(t1, q1, t2, q2) == pytest.approx(float(expect), abs=1e-12)
            cases += n


def test_criterion_5_abq_contract(capsys):
    with criterion(capsys, 5, "ABQ feasibility at q_star, monotone in delta, worked q*=3"):
        q_star, _ = abq_select_bits([0.5, 0.9, 1.5, 2.5], 4, 0.1)
        assert q_star == 3
        gen = np.random.default_rng(1005)
        for _ in range(200):
            vals = gen.normal(size=int(gen.integers(1, 60)))
            deltas = sorted(gen.uniform(0.0, 2.0, size=4))
            ref = aiq_quantize(vals, 8)
            stars = []
            for d in deltas:
                q_star, block = abq_select_bits(vals, 8, d)
                assert ds_metric(ref.codes, 8, block.codes, q_star) <= d
                stars.append(q_star)
            assert stars == sorted(stars, reverse=True)


def test_criterion_6_payload_bound_soundness(capsys):
    with criterion(capsys, 6, "exact payload never exceeds the planner bound (1e3 trials)"):
        gen = np.random.default_rng(1006)
        for trial in range(1000):
            rows = int(gen.integers(1, 24))
            cols = int(gen.integers(1, 24))
            cfg = random_cfg(gen)
            x = random_tensor(rows, cols, seed=3000 + trial, dist="gaussian")
            c = encode(x, cfg, seed=trial)
            assert c.payload_bits <= payload_upper_bound((rows, cols), cfg)


def test_criterion_7_compression_ratio(capsys):
    with criterion(capsys, 7, "s=0.95, q=8, M=3+3, K=4096 compresses to <= 3.2 bits/element"):
        cfg = CodecConfig(s=0.95, m_plus=3, m_minus=3, q_bit=8, delta=0.01)
        for seed in range(3):
            x = random_tensor(16, 4096, seed=seed, dist="gaussian")
            c = encode(x, cfg, seed=seed)
            bpe = c.payload_bits / x.size
            assert bpe <= 3.2  # >= 10x below 32-bit dense


def _random_profile(gen, max_layers=20):
    layers = int(gen.integers(2, max_layers + 1))
    mem = np.sort(gen.uniform(5e6, 6e7, size=layers))
    dev = np.sort(gen.uniform(0.5, 25.0, size=layers))
    comp = np.sort(gen.uniform(0.2, 12.0, size=layers))
    entries = [
        {
            "cum_memory_bytes": float(mem[i]),
            "cum_device_ms": float(dev[i]),
            "cum_compressed_ms": float(comp[i]),
            "if_rows": int(gen.integers(4, 64)),
            "if_cols": int(gen.integers(4, 512)),
            "back_end_ms": float(gen.uniform(1.0, 25.0)),
        }
        for i in range(layers)
    ]
    return ModelProfile.from_dict(
        {
            "layer_count": layers,
            "input_bits": 8_000_000,
            "full_back_end_ms": 30.0,
            "compressed_full_pass_ms": float(gen.uniform(2.0, 12.0)),
            "layers": entries,
        }
    )


def test_criterion_8_planner_oracle(capsys):
    with criterion(capsys, 8, "split selections match brute-force enumeration (200 profiles)"):
        gen = np.random.default_rng(1008)
        ch = ChannelParams(rate_bps=6e6, bandwidth_hz=1e7, mean_snr=10.0, epsilon=1e-3)
        model = DeviceTimeModel.zero()
        for trial in range(200):
            profile = _random_profile(gen)
            cfg = random_cfg(gen)
            constraints = Constraints(
                latency_budget_ms=float(gen.uniform(10, 400)),
                memory_budget_bytes=float(gen.uniform(1e7, 8e7)),
                ar_offload_cap_bits=float(gen.uniform(1e4, 1e6)),
            )
            zeta = encode_time_estimate(cfg, model)

            # single-shot oracle: deepest feasible layer
            best = 0
            for ell in range(1, profile.layer_count + 1):
                b = payload_upper_bound(profile.if_shape(ell), cfg)
                lat = total_latency_single(profile, ell, b, ch, zeta)
                info = profile.layer(ell)
                if (
                    info.cum_memory_bytes + model.buffer_bytes(info.dense_if_bits)
                    <= constraints.memory_budget_bytes
                    and lat.total_ms <= constraints.latency_budget_ms
                ):
                    best = max(best, ell)
            plan = select_split_single(profile, constraints, ch, cfg, model)
            assert plan.ell_star == best
            assert plan.feasible == (best > 0)

            # AR oracle: deepest split first, then the largest step count
            w_max = int(gen.integers(1, 9))
            expect = None
            for ell in range(profile.layer_count, 0, -1):
                for w in range(w_max, 0, -1):
                    b = payload_upper_bound(profile.if_shape(ell), cfg)
                    lat = total_latency_ar(profile, ell, w, b, ch, zeta)
                    if (
                        lat.total_ms <= constraints.latency_budget_ms
                        and b <= constraints.ar_offload_cap_bits
                    ):
                        expect = (w, ell)
                        break
                if expect:
                    break
            plan = select_split_ar(profile, constraints, ch, cfg, model, w_max)
            if expect is None:
                assert not plan.feasible and plan.ell_star == 0
            else:
                assert (plan.w_star, plan.ell_star) == expect

        # Worked single-shot example on the bundled three-layer profile.
        profile = ModelProfile.load(DATA / "three_layer_profile.json")
        plan = select_split_single(
            profile,
            Constraints.load(DATA / "constraints.json"),
            load_channel(DATA / "channel.json"),
            CodecConfig(s=0.9, m_plus=2, m_minus=2, q_bit=8),
            DeviceTimeModel.load(DATA / "timemodel.json"),
        )
        assert plan.feasible and plan.ell_star == 2

        # Worked AR example: 10 ms full pass, 4/7/10 ms partials; the budget
        # admits two steps at the deepest split and nothing more.
        ar_profile = ModelProfile.from_dict(
            {
                "layer_count": 3,
                "input_bits": 8_000_000,
                "full_back_end_ms": 15.0,
                "compressed_full_pass_ms": 10.0,
                "layers": [
                    {"cum_memory_bytes": 1e7, "cum_device_ms": 2.0,
                     "cum_compressed_ms": 4.0, "if_rows": 16, "if_cols": 64,
                     "back_end_ms": 12.0},
                    {"cum_memory_bytes": 2e7, "cum_device_ms": 5.0,
                     "cum_compressed_ms": 7.0, "if_rows": 8, "if_cols": 64,
                     "back_end_ms": 8.0},
                    {"cum_memory_bytes": 3e7, "cum_device_ms": 9.0,
                     "cum_compressed_ms": 10.0, "if_rows": 4, "if_cols": 64,
                     "back_end_ms": 4.0},
                ],
            }
        )
        cfg = CodecConfig(s=0.5, m_plus=1, m_minus=1, q_bit=8)
        b3 = payload_upper_bound(ar_profile.if_shape(3), cfg)
        rate = b3 * 500.0  # deepest payload transmits in exactly 2 ms
        ar_ch = ChannelParams(
            rate_bps=rate, bandwidth_hz=100 * rate, mean_snr=10.0, epsilon=1e-3
        )
        plan = select_split_ar(
            ar_profile, Constraints(latency_budget_ms=29.0), ar_ch, cfg,
            DeviceTimeModel.zero(), w_max=5,
        )
        assert (plan.w_star, plan.ell_star) == (2, 3)
        assert plan.predicted_latency.total_ms == pytest.approx(22.0)


def test_criterion_9_channel_spot_values(capsys):
    with criterion(capsys, 9, "outage and retransmission spot values exact to 1e-9"):
        ch = ChannelParams(
            rate_bps=math.log2(11) * 1e7, bandwidth_hz=1e7, mean_snr=10.0, epsilon=1e-3
        )
        assert abs(outage_probability(ch) - (1 - math.exp(-1))) < 1e-9
        assert retx_factor(ch, p_outage=math.exp(-1)) == 7


def test_criterion_10_simulator_scaling(capsys):
    with criterion(
        capsys, 10, "EC busy time linear in N; planner policy >= 2x lighter at N=16"
    ):
        profile = ModelProfile.load(DATA / "example_profile.json")
        ch = load_channel(DATA / "channel.json")
        constraints = Constraints.load(DATA / "constraints.json")

        def run(policy, n):
            cfg = SimConfig(
                n_devices=n,
                requests_per_device=4,
                policy=policy,
                profile=profile,
                channels=(ch,) * n,
                constraints=constraints,
            )
            return run_simulation(cfg)

        ec1 = run(POLICY_EC, 1)
        for n in range(1, 17):
            rep = run(POLICY_EC, n)
            assert rep.backend_busy_ms == pytest.approx(n * ec1.backend_busy_ms)

        ec16 = run(POLICY_EC, 16)
        sl16 = run(POLICY_SLICER, 16)
        assert sl16.completed == ec16.completed
        ec_per_req = ec16.backend_busy_ms / ec16.completed
        sl_per_req = sl16.backend_busy_ms / sl16.completed
        assert ec_per_req >= 2.0 * sl_per_req


def test_criterion_11_pipeline_determinism(capsys, tmp_path):
    with criterion(capsys, 11, "identical inputs and seeds give byte-identical outputs"):
        runner = CliRunner()

        def pipeline(tag):
            x = tmp_path / f"x{tag}.tns"
            sif = tmp_path / f"x{tag}.sif"
            summary = tmp_path / f"s{tag}.json"
            r = runner.invoke(
                cli_main,
                ["gen", "--rows", "32", "--cols", "32", "--seed", "7", "--out", str(x)],
            )
            assert r.exit_code == 0
            r = runner.invoke(
                cli_main,
                ["encode", "--in", str(x), "--out", str(sif), "-s", "0.9",
                 "--blocks", "2,2", "--qbit", "8", "--seed", "5"],
            )
            assert r.exit_code == 0
            r = runner.invoke(
                cli_main,
                ["simulate", "--profile", str(DATA / "example_profile.json"),
                 "--config", str(DATA / "sim_config.json"),
                 "--summary", str(summary)],
            )
            assert r.exit_code == 0
            return x.read_bytes(), sif.read_bytes(), summary.read_bytes()

        assert pipeline("a") == pipeline("b")
