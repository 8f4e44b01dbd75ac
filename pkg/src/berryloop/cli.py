"""Command-line interface and deterministic result serialization.

Subcommands: ``ground`` (AVQITE only), ``loop`` (one Berry-phase run),
``sweep`` (axis over delta | T | dt_max | l2_cut), ``ed-berry`` (Wilson
loop oracle), ``pools`` (pool sizes and elements).  Config lives in JSON
(--config); explicit flags win over file values.  Output files are
byte-stable across reruns: floats carry 17 significant digits, the run
itself contains no randomness, and a single writer emits all files.

Exit codes: 0 success, 2 config/usage error, 3 flagged result with
--strict.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ed
from .berry import make_loop_schedule, run_berry, symmetry_report
from .dynamics import DynConfig
from .imag_time import ItConfig, avqite_run
from .model import (
    ModelParams,
    build_sshh,
    hamiltonian_pool,
    qubit_excitation_pool,
    reference_state,
)
from .resources import sweep_summary, trace_from_trajectory

CSV_VERSION = "# berryloop-v1"

TRAJECTORY_COLUMNS = [
    "step", "t", "rho", "energy", "l2", "n_theta", "cnot", "depth",
    "phi_g1", "phi_g2", "infid_f", "infid_ft",
]

SWEEP_AXES = ("delta", "T", "dt_max", "l2_cut")


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _json_dumps(obj, indent: int = 0) -> str:
    """JSON text with floats at 17 significant digits (byte-stable)."""
    pad = " " * indent
    if isinstance(obj, dict):
        items = []
        for key in obj:
            items.append(f'{pad}  "{key}": '
                         + _json_dumps(obj[key], indent + 2).lstrip())
        if not items:
            return pad + "{}"
        return pad + "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return pad + "[]"
        items = [_json_dumps(x, indent + 2) for x in obj]
        return pad + "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return pad + ("true" if obj else "false")
    if obj is None:
        return pad + "null"
    if isinstance(obj, float):
        if math.isnan(obj):
            return pad + '"nan"'
        return pad + format(obj, ".17g")
    if isinstance(obj, int):
        return pad + str(obj)
    return pad + json.dumps(obj)


@dataclass
class RunConfig:
    """One run (or one sweep) of the Berry-phase protocol."""

    n_sites: int = 4
    t: float = 1.0
    delta: float = -0.3
    u: float = 0.0
    T: float = 20.0
    l2_cut: float = 1e-4
    dtheta_max: float = 0.01
    dt_max: float | None = None
    dt_init: float | None = None
    lambda_reg: float = 1e-6
    dtau: float = 0.02
    l2_cut_it: float = 1e-6
    max_steps: int = 5000
    energy_tol: float = 1e-8
    sweep_axis: str | None = None
    sweep_values: list = field(default_factory=list)
    output: str | None = None
    formats: list = field(default_factory=lambda: ["csv", "json"])
    with_infidelity: bool = True
    with_ed_propagation: bool = False
    strict: bool = False

    def to_dict(self) -> dict:
        return {
            "model": {"n_sites": self.n_sites, "t": self.t,
                      "delta": self.delta, "u": self.u},
            "protocol": {"T": self.T, "l2_cut": self.l2_cut,
                         "dtheta_max": self.dtheta_max,
                         "dt_max": self.dt_max, "dt_init": self.dt_init,
                         "lambda_reg": self.lambda_reg},
            "ground_prep": {"dtau": self.dtau, "l2_cut_it": self.l2_cut_it,
                            "max_steps": self.max_steps,
                            "energy_tol": self.energy_tol},
            "sweep": ({"axis": self.sweep_axis, "values": self.sweep_values}
                      if self.sweep_axis else None),
            "output": {"directory": self.output, "formats": self.formats},
            "analysis": {"with_infidelity": self.with_infidelity,
                         "with_ed_propagation": self.with_ed_propagation},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        cfg = cls()
        model = data.get("model", {})
        for key in ("n_sites", "t", "delta", "u"):
            if key in model:
                setattr(cfg, key, model[key])
        protocol = data.get("protocol", {})
        for key in ("T", "l2_cut", "dtheta_max", "dt_max", "dt_init",
                    "lambda_reg"):
            if key in protocol:
                setattr(cfg, key, protocol[key])
        prep = data.get("ground_prep", {})
        for key in ("dtau", "l2_cut_it", "max_steps", "energy_tol"):
            if key in prep:
                setattr(cfg, key, prep[key])
        sweep = data.get("sweep")
        if sweep:
            cfg.sweep_axis = sweep.get("axis")
            cfg.sweep_values = list(sweep.get("values", []))
        output = data.get("output", {})
        if output.get("directory") is not None:
            cfg.output = output["directory"]
        if "formats" in output:
            cfg.formats = list(output["formats"])
        analysis = data.get("analysis", {})
        for key in ("with_infidelity", "with_ed_propagation"):
            if key in analysis:
                setattr(cfg, key, analysis[key])
        return cfg

    def model_params(self) -> ModelParams:
        return ModelParams(n_sites=self.n_sites, t=self.t, delta=self.delta,
                           u=self.u)

    def it_config(self, params: ModelParams) -> ItConfig:
        return ItConfig(pool=qubit_excitation_pool(params.n_qubits),
                        dtau=self.dtau, l2_cut_it=self.l2_cut_it,
                        max_steps=self.max_steps, energy_tol=self.energy_tol,
                        lambda_reg=self.lambda_reg)

    def dyn_config(self, params: ModelParams) -> DynConfig:
        return DynConfig(pool=hamiltonian_pool(params), l2_cut=self.l2_cut,
                         dtheta_max=self.dtheta_max, dt_init=self.dt_init,
                         dt_max=self.dt_max, lambda_reg=self.lambda_reg)


class ConfigError(ValueError):
    pass


def _apply_flags(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    mapping = {
        "sites": "n_sites", "hopping": "t", "delta": "delta", "u": "u",
        "T": "T", "l2_cut": "l2_cut", "dtheta_max": "dtheta_max",
        "dt_max": "dt_max", "dt_init": "dt_init", "lambda_reg": "lambda_reg",
        "dtau": "dtau", "l2_cut_it": "l2_cut_it", "max_steps": "max_steps",
        "energy_tol": "energy_tol", "output": "output",
    }
    for flag, attr in mapping.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(args, "no_infidelity", False):
        cfg.with_infidelity = False
    if getattr(args, "with_ed_propagation", False):
        cfg.with_ed_propagation = True
    if getattr(args, "strict", False):
        cfg.strict = True
    return cfg


def _load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = RunConfig.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return _apply_flags(cfg, args)


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def trajectory_csv(traj) -> str:
    lines = [CSV_VERSION, ",".join(TRAJECTORY_COLUMNS)]
    for p in traj.points:
        lines.append(",".join([
            str(p.step), _fmt(p.t), _fmt(p.rho), _fmt(p.energy), _fmt(p.l2),
            str(p.n_theta), str(p.cnot), str(p.depth),
            _fmt(p.phi_g1), _fmt(p.phi_g2), _fmt(p.infid_f), _fmt(p.infid_ft),
        ]))
    return "\n".join(lines) + "\n"


def result_dict(result, config: RunConfig) -> dict:
    sym = symmetry_report(result.trajectory) if result.trajectory else None
    trace = (trace_from_trajectory(result.trajectory)
             if result.trajectory else None)
    rows = result.trajectory.points if result.trajectory else []
    infid_f = [p.infid_f for p in rows if not math.isnan(p.infid_f)]
    infid_ft = [p.infid_ft for p in rows if not math.isnan(p.infid_ft)]
    prep = result.prep_report
    return {
        "phi_qc": result.phi_qc,
        "p0": result.p0,
        "overlap_magnitude": result.overlap_magnitude,
        "phi_g": result.phi_g,
        "phi_g1": result.phi_g1,
        "phi_g2": result.phi_g2,
        "phi_b": result.phi_b,
        "phi_b_principal": result.phi_b_principal,
        "warnings": sorted(result.warnings),
        "max_infid_f": max(infid_f) if infid_f else None,
        "max_infid_ft": max(infid_ft) if infid_ft else None,
        "max_cnot": trace.max_cnot if trace else None,
        "max_depth": trace.max_depth if trace else None,
        "n_theta_final": rows[-1].n_theta if rows else None,
        "ground_prep": None if prep is None else {
            "energy": prep.energy, "variance": prep.variance,
            "n_steps": prep.n_steps, "n_params": prep.n_params,
            "cnot_count": prep.cnot_count, "depth": prep.depth,
            "converged": prep.converged, "infidelity": prep.infidelity,
        },
        "symmetry": None if sym is None else {
            "phi_g1_first": sym.phi_g1_first,
            "phi_g1_second": sym.phi_g1_second,
            "phi_g2_first": sym.phi_g2_first,
            "phi_g2_second": sym.phi_g2_second,
            "second_half_unit_fraction": sym.second_half_unit_fraction,
        },
        "config": config.to_dict(),
    }


def write_results(results, config: RunConfig, outdir: str) -> list:
    """Emit trajectory.csv + result.json per run and, for sweeps, a
    top-level summary.csv.  Returns the written paths."""
    base = Path(outdir)
    written = []
    sweeping = config.sweep_axis is not None
    for i, (label, result) in enumerate(results):
        rundir = base / f"point_{i:03d}_{label}" if sweeping else base
        if "csv" in config.formats and result.trajectory is not None:
            path = rundir / "trajectory.csv"
            _write_text(path, trajectory_csv(result.trajectory))
            written.append(path)
        if "json" in config.formats:
            path = rundir / "result.json"
            _write_text(path, _json_dumps(result_dict(result, config)) + "\n")
            written.append(path)
    if sweeping:
        lines = [CSV_VERSION,
                 "axis_value,phi_b_principal,max_infid_f,max_cnot,max_depth"]
        for (label, result) in results:
            rows = result.trajectory.points if result.trajectory else []
            infid_f = [p.infid_f for p in rows if not math.isnan(p.infid_f)]
            trace = trace_from_trajectory(result.trajectory)
            lines.append(",".join([
                label, _fmt(result.phi_b_principal),
                _fmt(max(infid_f)) if infid_f else "nan",
                str(trace.max_cnot), str(trace.max_depth),
            ]))
        path = base / "summary.csv"
        _write_text(path, "\n".join(lines) + "\n")
        written.append(path)
    return written


def _single_run(config: RunConfig, overrides: dict | None = None):
    cfg = RunConfig.from_dict(config.to_dict())
    cfg.with_infidelity = config.with_infidelity
    cfg.with_ed_propagation = config.with_ed_propagation
    for key, value in (overrides or {}).items():
        setattr(cfg, key, value)
    params = cfg.model_params()
    result = run_berry(params, cfg.T, cfg.it_config(params),
                       cfg.dyn_config(params))
    if cfg.with_infidelity:
        if cfg.with_ed_propagation:
            ed.infidelities(result.trajectory, params,
                            make_loop_schedule(cfg.T))
        else:
            _instantaneous_infidelity(result.trajectory, params)
    return result


def _instantaneous_infidelity(traj, params: ModelParams) -> None:
    dense = ed._DenseLoopHamiltonian(params)
    for p in traj.points:
        if p.state is None:
            continue
        _, vecs = np.linalg.eigh(dense.at(p.rho))
        p.infid_f = max(0.0, 1.0 - abs(np.vdot(vecs[:, 0], p.state)) ** 2)


def _sweep_worker(payload):
    config_dict, axis, value, analysis = payload
    cfg = RunConfig.from_dict(config_dict)
    cfg.with_infidelity, cfg.with_ed_propagation = analysis
    overrides = {"delta": value} if axis == "delta" else \
        {"T": value} if axis == "T" else \
        {"dt_max": value} if axis == "dt_max" else \
        {"l2_cut": value}
    return _single_run(cfg, overrides)


def run_sweep(config: RunConfig):
    """Run every sweep point; worker count from BERRYLOOP_THREADS."""
    axis = config.sweep_axis
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")
    if not config.sweep_values:
        return []
    payloads = [
        (config.to_dict(), axis, value,
         (config.with_infidelity, config.with_ed_propagation))
        for value in config.sweep_values
    ]
    threads = int(os.environ.get("BERRYLOOP_THREADS", "1"))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_worker, payloads))
    else:
        results = [_sweep_worker(p) for p in payloads]
    labels = [repr(float(v)) for v in config.sweep_values]
    return list(zip(labels, results))


def _print(args, text: str) -> None:
    if not getattr(args, "quiet", False):
        print(text)


def cmd_ground(args) -> int:
    cfg = _load_config(args)
    params = cfg.model_params()
    h = build_sshh(params, 0.0)
    ansatz, report = avqite_run(h, reference_state(params),
                                cfg.it_config(params))
    exact = ed.ground_state(h)
    overlap = ansatz.evaluate().overlap(exact.ground_state)
    report.infidelity = max(0.0, 1.0 - abs(overlap) ** 2)
    payload = {
        "energy": report.energy, "variance": report.variance,
        "infidelity": report.infidelity, "cnot_count": report.cnot_count,
        "depth": report.depth, "n_params": report.n_params,
        "n_steps": report.n_steps, "converged": report.converged,
        "exact_energy": exact.ground_energy, "gap": exact.gap,
    }
    _print(args, _json_dumps(payload))
    if cfg.strict and not report.converged:
        return 3
    return 0


def cmd_loop(args) -> int:
    cfg = _load_config(args)
    if cfg.sweep_axis:
        raise ConfigError("config declares a sweep; use the sweep subcommand")
    result = _single_run(cfg)
    _print(args, _json_dumps(result_dict(result, cfg)))
    if cfg.output:
        write_results([("run", result)], cfg, cfg.output)
    if cfg.strict and result.warnings:
        return 3
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    if args.axis is not None:
        cfg.sweep_axis = args.axis
    if args.values is not None:
        try:
            cfg.sweep_values = [float(v) for v in args.values.split(",") if v]
        except ValueError as exc:
            raise ConfigError(f"bad sweep values: {exc}") from exc
    if cfg.sweep_axis is None:
        raise ConfigError("sweep requires --axis")
    results = run_sweep(cfg)
    summary = sweep_summary([
        _trace_with_phase(result) for _, result in results
    ])
    payload = {
        "axis": cfg.sweep_axis,
        "points": [
            {"value": label, "phi_b_principal": r.phi_b_principal,
             "max_cnot": row.max_cnot, "max_depth": row.max_depth,
             "warnings": sorted(r.warnings)}
            for (label, r), row in zip(results, summary.rows)
        ],
        "cnot_ratio": summary.cnot_ratio,
        "depth_ratio": summary.depth_ratio,
    }
    _print(args, _json_dumps(payload))
    if cfg.output:
        write_results(results, cfg, cfg.output)
    if cfg.strict and any(r.warnings for _, r in results):
        return 3
    return 0


def _trace_with_phase(result):
    trace = trace_from_trajectory(result.trajectory)
    trace.metadata["phi_b_principal"] = result.phi_b_principal
    trace.metadata["delta"] = result.params.delta
    return trace


def cmd_ed_berry(args) -> int:
    cfg = _load_config(args)
    params = cfg.model_params()
    phi = ed.wilson_loop_berry(params, n_grid=args.n_grid)
    _print(args, _json_dumps({
        "phi_b_principal": phi,
        "delta": params.delta, "u": params.u, "n_grid": args.n_grid,
    }))
    return 0


def cmd_pools(args) -> int:
    cfg = _load_config(args)
    params = cfg.model_params()
    ham = hamiltonian_pool(params)
    exc = qubit_excitation_pool(params.n_qubits)
    payload = {
        "hamiltonian_pool_size": len(ham),
        "qubit_excitation_pool_size": len(exc),
        "hamiltonian_pool": [p.label for p in ham.elements],
    }
    if args.full:
        payload["qubit_excitation_pool"] = [p.label for p in exc.elements]
    _print(args, _json_dumps(payload))
    return 0


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--sites", type=int, help="number of lattice sites N")
    parser.add_argument("--hopping", type=float, help="hopping amplitude t")
    parser.add_argument("--delta", type=float, help="dimerization in [-1, 1]")
    parser.add_argument("--u", type=float, help="on-site interaction U")
    parser.add_argument("--quiet", action="store_true")


def _add_protocol_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--T", type=float, help="loop evolution time")
    parser.add_argument("--l2-cut", dest="l2_cut", type=float)
    parser.add_argument("--dtheta-max", dest="dtheta_max", type=float)
    parser.add_argument("--dt-max", dest="dt_max", type=float)
    parser.add_argument("--dt-init", dest="dt_init", type=float)
    parser.add_argument("--lambda-reg", dest="lambda_reg", type=float)
    parser.add_argument("--dtau", type=float)
    parser.add_argument("--l2-cut-it", dest="l2_cut_it", type=float)
    parser.add_argument("--max-steps", dest="max_steps", type=int)
    parser.add_argument("--energy-tol", dest="energy_tol", type=float)
    parser.add_argument("--output", help="output directory")
    parser.add_argument("--no-infidelity", action="store_true",
                        help="skip the instantaneous-ground-state infidelity")
    parser.add_argument("--with-ed-propagation", action="store_true",
                        help="also compute 1-f_t against the ED-propagated state")
    parser.add_argument("--strict", action="store_true",
                        help="exit 3 on flagged (unconverged/nonadiabatic) results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="berryloop",
        description="Berry phase of the dimerized Fermi-Hubbard chain via "
                    "adaptive variational statevector simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground", help="AVQITE ground-state preparation only")
    _add_model_flags(p)
    _add_protocol_flags(p)
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("loop", help="single Berry-phase loop run")
    _add_model_flags(p)
    _add_protocol_flags(p)
    p.set_defaults(func=cmd_loop)

    p = sub.add_parser("sweep", help="axis sweep over delta | T | dt_max | l2_cut")
    _add_model_flags(p)
    _add_protocol_flags(p)
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--values", help="comma-separated axis values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ed-berry", help="Wilson-loop exact-diagonalization oracle")
    _add_model_flags(p)
    p.add_argument("--n-grid", dest="n_grid", type=int, default=256)
    p.set_defaults(func=cmd_ed_berry)

    p = sub.add_parser("pools", help="print operator pool sizes and elements")
    _add_model_flags(p)
    p.add_argument("--full", action="store_true",
                   help="also list the qubit-excitation pool elements")
    p.set_defaults(func=cmd_pools)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())
