"""Command-line interface.

Subcommands: gen, encode, decode, stats, plan, plan-ar, search, simulate.
Exit codes: 0 success, 2 usage, 3 I/O, 4 file-format, 5 infeasible plan.
"""

import json
import sys

import click
import numpy as np

from .codec import CodecConfig, MODE_ABQ, MODE_FIXED, broadcast_q, decode, deserialize, encode, serialize
from .errors import (
    ConfigError,
    InfeasiblePlanError,
    ProfileError,
    SlicerError,
    StreamFormatError,
    TensorFormatError,
)
from .planner import (
    SearchGrids,
    hierarchical_search,
    payload_upper_bound,
    select_split_ar,
    select_split_single,
)
from .profiles import Constraints, DeviceTimeModel, ModelProfile, load_channel
from .sim import run_simulation, sim_config_from_dict, sweep_devices, write_csv
from .tensor import load_tensor, random_tensor, save_tensor

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_INFEASIBLE = 5


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _run(fn):
    try:
        fn()
    except (TensorFormatError, StreamFormatError) as exc:
        _fail(EXIT_FORMAT, str(exc))
    except InfeasiblePlanError as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    except (ConfigError, ProfileError) as exc:
        _fail(EXIT_USAGE, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    except SlicerError as exc:
        _fail(EXIT_USAGE, str(exc))


@click.group()
def main():
    """Split-computing feature codec, planner, and simulator."""


@main.command()
@click.option("--rows", type=int, required=True)
@click.option("--cols", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dist", type=click.Choice(["uniform", "gaussian"]), default="uniform")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def gen(rows, cols, seed, dist, out_path):
    """Generate a deterministic fixture tensor (.tns)."""

    def go():
        t = random_tensor(rows, cols, seed, dist)
        save_tensor(t, out_path)
        click.echo(f"wrote {rows}x{cols} {dist} tensor (seed {seed}) to {out_path}")

    _run(go)


def _parse_q_list(text):
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ConfigError(f"bad Q list {text!r}; expected comma-separated integers")


@main.command("encode")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--sparsity", "-s", type=float, required=True)
@click.option("--lambda", "lam", type=float, default=0.0, show_default=True)
@click.option("--blocks", default="1,1", show_default=True, help="M+,M- block counts")
@click.option("--qbit", type=int, default=8, show_default=True)
@click.option("--delta", type=float, default=None, help="ABQ distortion budget")
@click.option("--fixed-q", default=None, help="comma-separated Q vector (disables ABQ)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def encode_cmd(in_path, out_path, sparsity, lam, blocks, qbit, delta, fixed_q, seed, as_json):
    """Compress a .tns tensor into a .sif bitstream."""

    def go():
        m = _parse_q_list(blocks)
        if len(m) != 2:
            raise ConfigError("--blocks expects 'M+,M-'")
        m_plus, m_minus = m
        if fixed_q is not None:
            cfg = CodecConfig(
                s=sparsity,
                lam=lam,
                m_plus=m_plus,
                m_minus=m_minus,
                q_bit=qbit,
                delta=0.0 if delta is None else delta,
                mode=MODE_FIXED,
                fixed_q=broadcast_q(_parse_q_list(fixed_q), m_plus, m_minus),
            )
        else:
            cfg = CodecConfig(
                s=sparsity,
                lam=lam,
                m_plus=m_plus,
                m_minus=m_minus,
                q_bit=qbit,
                delta=0.01 if delta is None else delta,
                mode=MODE_ABQ,
            )
        x = load_tensor(in_path)
        c = encode(x, cfg, seed)
        data = serialize(c)
        with open(out_path, "wb") as f:
            f.write(data)
        bits = c.payload_bits
        info = {
            "payload_bits": bits,
            "bits_per_element": bits / x.size,
            "blocks": [
                {"plane": plane, "index": i, "nnz": b.nnz, "q": b.q}
                for plane, blks in (("plus", c.blocks_plus), ("minus", c.blocks_minus))
                for i, b in enumerate(blks)
            ],
        }
        if as_json:
            click.echo(json.dumps(info, indent=2))
        else:
            click.echo(f"payload: {bits} bits ({bits / x.size:.3f} bits/element)")
            for b in info["blocks"]:
                click.echo(
                    f"  {b['plane']} block {b['index']}: nnz={b['nnz']} q={b['q']}"
                )

    _run(go)


@main.command("decode")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--ref", "ref_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
def decode_cmd(in_path, out_path, ref_path, as_json):
    """Reconstruct a tensor from a .sif bitstream."""

    def go():
        with open(in_path, "rb") as f:
            c = deserialize(f.read())
        y = decode(c)
        save_tensor(y, out_path)
        info = {"rows": y.rows, "cols": y.cols}
        if ref_path:
            ref = load_tensor(ref_path)
            if ref.rows != y.rows or ref.cols != y.cols:
                raise ConfigError("--ref tensor shape does not match decoded tensor")
            err = np.abs(ref.values.astype(np.float64) - y.values.astype(np.float64))
            info["max_abs_error"] = float(err.max())
            info["mean_abs_error"] = float(err.mean())
        if as_json:
            click.echo(json.dumps(info, indent=2))
        else:
            msg = f"decoded {y.rows}x{y.cols} tensor to {out_path}"
            if ref_path:
                msg += (
                    f" (max err {info['max_abs_error']:.6g},"
                    f" mean err {info['mean_abs_error']:.6g})"
                )
            click.echo(msg)

    _run(go)


@main.command("stats")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
def stats_cmd(in_path, as_json):
    """Payload statistics of a .sif bitstream."""

    def go():
        with open(in_path, "rb") as f:
            c = deserialize(f.read())
        exact = c.payload_bits
        cfg = CodecConfig(
            s=c.s,
            lam=c.lam,
            m_plus=max(1, c.m_plus),
            m_minus=max(1, c.m_minus),
            q_bit=c.q_bit,
            delta=c.delta,
            mode=c.mode,
            fixed_q=c.q_vector if c.mode == MODE_FIXED else (),
        )
        b_ub = payload_upper_bound(c.shape, cfg)
        info = {
            "shape": [c.rows, c.cols],
            "sparsity_config": c.s,
            "nonzeros": c.total_nnz,
            "actual_sparsity": 1.0 - c.total_nnz / (c.rows * c.cols),
            "payload_bits_exact": exact,
            "payload_bits_upper_bound": b_ub,
            "bits_per_element": exact / (c.rows * c.cols),
            "blocks": [
                {
                    "plane": plane,
                    "index": i,
                    "nnz": b.nnz,
                    "q": b.q,
                    "scale": b.o,
                    "v_min": b.v_min,
                }
                for plane, blks in (("plus", c.blocks_plus), ("minus", c.blocks_minus))
                for i, b in enumerate(blks)
            ],
        }
        if as_json:
            click.echo(json.dumps(info, indent=2))
        else:
            click.echo(
                f"{c.rows}x{c.cols}, nnz {c.total_nnz} "
                f"(sparsity {info['actual_sparsity']:.3f})"
            )
            click.echo(
                f"exact {exact} bits, upper bound {b_ub} bits, "
                f"{info['bits_per_element']:.3f} bits/element"
            )
            for b in info["blocks"]:
                click.echo(
                    f"  {b['plane']} block {b['index']}: nnz={b['nnz']} q={b['q']} "
                    f"o={b['scale']:.6g} v_min={b['v_min']:.6g}"
                )

    _run(go)


def _theta_from_options(sparsity, lam, blocks, qbit, delta):
    m = _parse_q_list(blocks)
    if len(m) != 2:
        raise ConfigError("--blocks expects 'M+,M-'")
    return CodecConfig(s=sparsity, lam=lam, m_plus=m[0], m_minus=m[1], q_bit=qbit, delta=delta)


def _plan_common(profile_path, constraints_path, channel_path, timemodel_path):
    profile = ModelProfile.load(profile_path)
    constraints = Constraints.load(constraints_path)
    ch = load_channel(channel_path)
    model = (
        DeviceTimeModel.load(timemodel_path) if timemodel_path else DeviceTimeModel.zero()
    )
    return profile, constraints, ch, model


def _emit_plan(plan, out_path, as_json):
    if out_path:
        plan.save(out_path)
    if as_json:
        click.echo(json.dumps(plan.to_dict(), indent=2))
    else:
        if plan.mode == "ar" and plan.feasible:
            click.echo(f"selected (w*, ell*) = ({plan.w_star}, {plan.ell_star})")
        elif plan.feasible:
            click.echo(f"selected ell* = {plan.ell_star}")
        if plan.feasible and plan.predicted_latency is not None:
            click.echo(
                f"predicted payload <= {plan.predicted_b_ub} bits, "
                f"latency {plan.predicted_latency.total_ms:.3f} ms"
            )
    if not plan.feasible:
        raise InfeasiblePlanError("no feasible split; falling back to raw-input offload")


_plan_opts = [
    click.option("--profile", "profile_path", required=True, type=click.Path(exists=True)),
    click.option("--constraints", "constraints_path", required=True, type=click.Path(exists=True)),
    click.option("--channel", "channel_path", required=True, type=click.Path(exists=True)),
    click.option("--timemodel", "timemodel_path", default=None, type=click.Path(exists=True)),
    click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False)),
    click.option("--json", "as_json", is_flag=True),
]


def _with_plan_opts(fn):
    for opt in reversed(_plan_opts):
        fn = opt(fn)
    return fn


@main.command("plan")
@_with_plan_opts
@click.option("--sparsity", "-s", type=float, default=0.9, show_default=True)
@click.option("--lambda", "lam", type=float, default=0.0)
@click.option("--blocks", default="1,1", show_default=True)
@click.option("--qbit", type=int, default=8, show_default=True)
@click.option("--delta", type=float, default=0.01, show_default=True)
def plan_cmd(
    profile_path, constraints_path, channel_path, timemodel_path, out_path, as_json,
    sparsity, lam, blocks, qbit, delta,
):
    """Single-shot split selection for a fixed codec configuration."""

    def go():
        profile, constraints, ch, model = _plan_common(
            profile_path, constraints_path, channel_path, timemodel_path
        )
        theta = _theta_from_options(sparsity, lam, blocks, qbit, delta)
        plan = select_split_single(profile, constraints, ch, theta, model)
        _emit_plan(plan, out_path, as_json)

    _run(go)


@main.command("plan-ar")
@_with_plan_opts
@click.option("--sparsity", "-s", type=float, default=0.9, show_default=True)
@click.option("--lambda", "lam", type=float, default=0.0)
@click.option("--blocks", default="1,1", show_default=True)
@click.option("--qbit", type=int, default=8, show_default=True)
@click.option("--delta", type=float, default=0.01, show_default=True)
@click.option("--w-max", type=int, default=8, show_default=True)
def plan_ar_cmd(
    profile_path, constraints_path, channel_path, timemodel_path, out_path, as_json,
    sparsity, lam, blocks, qbit, delta, w_max,
):
    """Autoregressive (w, ell) split selection."""

    def go():
        profile, constraints, ch, model = _plan_common(
            profile_path, constraints_path, channel_path, timemodel_path
        )
        theta = _theta_from_options(sparsity, lam, blocks, qbit, delta)
        plan = select_split_ar(profile, constraints, ch, theta, model, w_max)
        _emit_plan(plan, out_path, as_json)

    _run(go)


@main.command("search")
@_with_plan_opts
@click.option("--mode", type=click.Choice(["single_shot", "ar"]), default="single_shot")
@click.option("--w-max", type=int, default=8, show_default=True)
@click.option("--s-grid", default=None, help="comma-separated sparsity grid")
@click.option("--m-grid", default=None, help="comma-separated block-count grid")
@click.option("--qbit", type=int, default=8, show_default=True)
@click.option("--delta", type=float, default=0.01, show_default=True)
def search_cmd(
    profile_path, constraints_path, channel_path, timemodel_path, out_path, as_json,
    mode, w_max, s_grid, m_grid, qbit, delta,
):
    """Hierarchical constraint-aware configuration search."""

    def go():
        profile, constraints, ch, model = _plan_common(
            profile_path, constraints_path, channel_path, timemodel_path
        )
        grids = SearchGrids(
            m_grid=tuple(int(v) for v in m_grid.split(",")) if m_grid else SearchGrids.m_grid,
            s_grid=tuple(float(v) for v in s_grid.split(",")) if s_grid else SearchGrids.s_grid,
            q_bit=qbit,
            delta=delta,
        )
        plan = hierarchical_search(
            profile, constraints, ch, model, grids, mode=mode, w_max=w_max
        )
        _emit_plan(plan, out_path, as_json)

    _run(go)


@main.command("simulate")
@click.option("--profile", "profile_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--csv", "csv_path", default=None, type=click.Path(dir_okay=False))
@click.option("--summary", "summary_path", default=None, type=click.Path(dir_okay=False))
@click.option("--sweep", default=None, help="comma-separated device counts")
@click.option("--json", "as_json", is_flag=True)
def simulate_cmd(profile_path, config_path, csv_path, summary_path, sweep, as_json):
    """Run the deterministic multi-device simulation."""

    def go():
        profile = ModelProfile.load(profile_path)
        with open(config_path) as f:
            cfg = sim_config_from_dict(json.load(f), profile)
        report = run_simulation(cfg)
        if summary_path:
            report.save_summary(summary_path)
        if csv_path:
            if sweep:
                rows = sweep_devices(cfg, [int(v) for v in sweep.split(",")])
            else:
                rows = sweep_devices(cfg, [cfg.n_devices])
            write_csv(rows, csv_path)
        if as_json:
            click.echo(json.dumps(report.to_dict(), indent=2))
        else:
            click.echo(
                f"{report.policy}: {report.completed} requests, "
                f"mean E2E {report.mean_e2e_ms:.3f} ms, "
                f"server busy {report.backend_busy_ms:.3f} ms, "
                f"throughput {report.backend_throughput_per_s:.3f}/s"
            )

    _run(go)


if __name__ == "__main__":
    main()
