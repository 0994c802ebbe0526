import json
from pathlib import Path

import numpy as np
from click.testing import CliRunner

from slicer import SearchGrids, load_tensor
from slicer.cli import EXIT_FORMAT, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, main

DATA = Path(__file__).resolve().parents[1] / "data"


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_gen_creates_tensor(tmp_path):
    out = tmp_path / "x.tns"
    res = run("gen", "--rows", 8, "--cols", 8, "--seed", 3, "--out", out)
    assert res.exit_code == EXIT_OK
    t = load_tensor(out)
    assert (t.rows, t.cols) == (8, 8)


def test_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.tns", tmp_path / "b.tns"
    run("gen", "--rows", 4, "--cols", 4, "--seed", 9, "--out", a)
    run("gen", "--rows", 4, "--cols", 4, "--seed", 9, "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_encode_decode_round_trip(tmp_path):
    x = tmp_path / "x.tns"
    sif = tmp_path / "x.sif"
    y = tmp_path / "y.tns"
    run("gen", "--rows", 16, "--cols", 16, "--seed", 1, "--out", x)
    res = run(
        "encode", "--in", x, "--out", sif, "-s", 0.8,
        "--blocks", "2,2", "--qbit", 8, "--json",
    )
    assert res.exit_code == EXIT_OK
    info = json.loads(res.output)
    assert info["payload_bits"] == 8 * sif.stat().st_size
    res = run("decode", "--in", sif, "--out", y, "--ref", x, "--json")
    assert res.exit_code == EXIT_OK
    err = json.loads(res.output)
    # The reference is the unfiltered tensor: dropped coefficients dominate
    # the error, which stays below the uniform fixture's value range.
    assert err["max_abs_error"] < 1.0
    assert err["mean_abs_error"] < err["max_abs_error"]
    recon = load_tensor(y)
    assert np.count_nonzero(recon.values) <= sum(b["nnz"] for b in info["blocks"])


def test_encode_fixed_q(tmp_path):
    x = tmp_path / "x.tns"
    sif = tmp_path / "x.sif"
    run("gen", "--rows", 8, "--cols", 8, "--seed", 2, "--out", x)
    res = run(
        "encode", "--in", x, "--out", sif, "-s", 0.75,
        "--blocks", "2,2", "--fixed-q", "8,4", "--json",
    )
    assert res.exit_code == EXIT_OK
    qs = [b["q"] for b in json.loads(res.output)["blocks"]]
    assert qs == [8, 4, 8, 4]


def test_encode_rejects_bad_sparsity(tmp_path):
    x = tmp_path / "x.tns"
    run("gen", "--rows", 4, "--cols", 4, "--out", x)
    res = run("encode", "--in", x, "--out", tmp_path / "o.sif", "-s", 1.5)
    assert res.exit_code == EXIT_USAGE


def test_decode_rejects_corrupt_stream(tmp_path):
    x = tmp_path / "x.tns"
    sif = tmp_path / "x.sif"
    run("gen", "--rows", 8, "--cols", 8, "--out", x)
    run("encode", "--in", x, "--out", sif, "-s", 0.5)
    blob = bytearray(sif.read_bytes())
    blob[10] ^= 0xFF
    sif.write_bytes(bytes(blob))
    res = run("decode", "--in", sif, "--out", tmp_path / "y.tns")
    assert res.exit_code == EXIT_FORMAT


def test_stats_reports_sound_bound(tmp_path):
    x = tmp_path / "x.tns"
    sif = tmp_path / "x.sif"
    run("gen", "--rows", 32, "--cols", 32, "--seed", 5, "--out", x)
    run("encode", "--in", x, "--out", sif, "-s", 0.9, "--blocks", "2,1")
    res = run("stats", "--in", sif, "--json")
    assert res.exit_code == EXIT_OK
    info = json.loads(res.output)
    assert info["payload_bits_exact"] <= info["payload_bits_upper_bound"]
    assert info["nonzeros"] == 102  # floor(0.1 * 1024)


def test_plan_selects_layer_two(tmp_path):
    out = tmp_path / "plan.json"
    res = run(
        "plan",
        "--profile", DATA / "three_layer_profile.json",
        "--constraints", DATA / "constraints.json",
        "--channel", DATA / "channel.json",
        "--timemodel", DATA / "timemodel.json",
        "-s", 0.9, "--blocks", "2,2",
        "--out", out, "--json",
    )
    assert res.exit_code == EXIT_OK
    d = json.loads(out.read_text())
    assert d["ell_star"] == 2
    assert d["feasible"]


def test_plan_infeasible_exit_code(tmp_path):
    tight = tmp_path / "tight.json"
    tight.write_text(json.dumps({"latency_budget_ms": 0.001}))
    res = run(
        "plan",
        "--profile", DATA / "three_layer_profile.json",
        "--constraints", tight,
        "--channel", DATA / "channel.json",
    )
    assert res.exit_code == EXIT_INFEASIBLE


def test_plan_ar(tmp_path):
    res = run(
        "plan-ar",
        "--profile", DATA / "three_layer_profile.json",
        "--constraints", DATA / "constraints.json",
        "--channel", DATA / "channel.json",
        "-s", 0.95, "--qbit", 4, "--w-max", 8, "--json",
    )
    assert res.exit_code == EXIT_OK
    d = json.loads(res.output)
    assert d["mode"] == "ar"
    assert d["feasible"]
    assert d["w_star"] >= 1


def test_search_command(tmp_path):
    out = tmp_path / "plan.json"
    res = run(
        "search",
        "--profile", DATA / "example_profile.json",
        "--constraints", DATA / "constraints.json",
        "--channel", DATA / "channel.json",
        "--timemodel", DATA / "timemodel.json",
        "--out", out, "--json",
    )
    assert res.exit_code == EXIT_OK
    d = json.loads(out.read_text())
    assert d["feasible"]
    assert d["theta"]["s"] in SearchGrids().s_grid
    assert d["ell_star"] >= 1


def test_simulate_command(tmp_path):
    summary = tmp_path / "summary.json"
    csv_out = tmp_path / "sweep.csv"
    res = run(
        "simulate",
        "--profile", DATA / "example_profile.json",
        "--config", DATA / "sim_config.json",
        "--summary", summary,
        "--csv", csv_out,
        "--sweep", "1,4,16",
        "--json",
    )
    assert res.exit_code == EXIT_OK
    rep = json.loads(res.output)
    assert rep["completed"] == rep["n_devices"] * rep["requests_per_device"]
    d = json.loads(summary.read_text())
    assert d["policy"] == "slicer"
    lines = csv_out.read_text().splitlines()
    assert len(lines) == 4  # header + 3 sweep rows


def test_simulate_missing_profile_file():
    res = run(
        "simulate",
        "--profile", "/nonexistent/profile.json",
        "--config", DATA / "sim_config.json",
    )
    assert res.exit_code == EXIT_USAGE  # click reports missing path as usage


def test_entry_point_help():
    res = run("--help")
    assert res.exit_code == EXIT_OK
    for cmd in ("gen", "encode", "decode", "stats", "plan", "plan-ar", "search", "simulate"):
        assert cmd in res.output
