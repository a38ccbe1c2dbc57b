"""Configuration ingestion, scenario execution, and figure datasets.

The command-line surface has five verbs: ``simulate`` (single scenario,
fidelity report plus error budget), ``figure`` (CSV datasets behind the
standard plots), ``sweep`` (amplitude or robustness grids), ``optimize``
(bounded linear adjustment with its search trace), and ``correlate``
(subspace correlation matrix).  Configuration is one YAML file with
nested sections; frequencies are quoted as value-over-2pi in MHz or kHz
and converted to angular units on ingestion.  Unknown keys are rejected
by name.  Outputs are UTF-8 CSV files with a header row and 12
significant digits, plus a JSON manifest recording every resolved
parameter; nothing depends on wall-clock time or randomness, so reruns
are byte-identical.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .dynamics import evolve_unitary
from .geometry import integrate_trajectory, bloch_from_angles
from .metrics import (
    LAMBDA_DEFAULT,
    ErrorBudget,
    amplitude_sweep,
    build_schedule,
    error_budget,
    gate_fidelity,
    open_system_fidelity,
    robustness_sweep,
)
from .pulse import Scheme, SnapTarget, gate_time
from .qocf import (
    correlation_matrix,
    linear_adjust,
    rho02_closed_form,
)
from .system import BlockMode, SystemParams, effective_block_controls

__all__ = ["main", "load_config", "run_simulate", "run_figure", "ConfigError"]

UNITARY_RTOL = 1e-10
LINDBLAD_RTOL = 1e-9
OUTPUT_ENV_VAR = "GEOSNAP_OUT"

DEFAULT_CONFIG = {
    "system": {
        "chi_mhz": 2.5,
        "gamma_decay_khz": 1.45,
        "gamma_phi_khz": 1.45,
        "kerr_khz": 3.0,
        "chi_prime_khz": 5.0,
        "n_max": 10,
    },
    "gate": {
        "thetas": [0.0, -math.pi / 4.0, math.pi / 2.0],
    },
    "drive": {
        "omega_max_mhz": 0.66,
        "scheme": "oss",
        "lambda_over_pi": 0.501,
        "mode": "full",
        "optimize": False,
        "decoherence": False,
    },
    "sweep": {
        "kind": "amplitude",
        "ratio_start": 0.01,
        "ratio_stop": 0.6,
        "ratio_points": 25,
        "ratio_spacing": "log",
        "eps_min": -0.1,
        "eps_max": 0.1,
        "eps_points": 21,
        "eta_min": -0.1,
        "eta_max": 0.1,
        "eta_points": 21,
    },
    "output": {
        "directory": "out",
        "trajectories": False,
        "schedule_csv": False,
        "trajectory_samples": 801,
    },
    "correlate": {
        "chi_tau_values": [0.5, 1.0, 2.0, 5.0, 10.0],
        "envelope": True,
    },
}


class ConfigError(ValueError):
    pass


def _merge_checked(defaults: dict, given: dict, path: str = "") -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in given.items():
        full = f"{path}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown configuration key: {full}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"configuration key {full} must be a mapping")
            merged[key] = _merge_checked(defaults[key], value, f"{full}.")
        else:
            merged[key] = value
    return merged


def load_config(path: str | None) -> dict:
    """Load a YAML config and merge it over the defaults, rejecting unknown keys."""
    given = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            given = yaml.safe_load(fh) or {}
        if not isinstance(given, dict):
            raise ConfigError("configuration root must be a mapping")
    return _merge_checked(DEFAULT_CONFIG, given)


def _system_params(cfg: dict) -> SystemParams:
    s = cfg["system"]
    try:
        return SystemParams.from_linear_frequencies(
            chi_mhz=float(s["chi_mhz"]),
            gamma_decay_khz=float(s["gamma_decay_khz"]),
            gamma_phi_khz=float(s["gamma_phi_khz"]),
            kerr_khz=float(s["kerr_khz"]),
            chi_prime_khz=float(s["chi_prime_khz"]),
            n_max=int(s["n_max"]),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid system parameters: {exc}") from exc


def _target(cfg: dict) -> SnapTarget:
    thetas = cfg["gate"]["thetas"]
    if not isinstance(thetas, (list, tuple)) or not thetas:
        raise ConfigError("gate.thetas must be a nonempty list of angles")
    return SnapTarget(tuple(float(t) for t in thetas))


def _drive(cfg: dict):
    d = cfg["drive"]
    try:
        scheme = Scheme(d["scheme"])
    except ValueError as exc:
        raise ConfigError(f"drive.scheme must be one of oss, pd: {d['scheme']!r}") from exc
    try:
        mode = BlockMode.parse(d["mode"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    omega_max = 2.0 * math.pi * 1e6 * float(d["omega_max_mhz"])
    lam = float(d["lambda_over_pi"]) * math.pi
    if omega_max <= 0.0:
        raise ConfigError("drive.omega_max_mhz must be positive")
    return scheme, mode, omega_max, lam, bool(d["optimize"]), bool(d["decoherence"])


def _out_dir(cfg: dict, override: str | None) -> Path:
    env = os.environ.get(OUTPUT_ENV_VAR)
    directory = override or env or cfg["output"]["directory"]
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12e}"
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _write_manifest(out: Path, cfg: dict, extra: dict) -> Path:
    manifest = {
        "package": "geosnap",
        "version": __version__,
        "config": cfg,
        "tolerances": {
            "unitary_rtol": UNITARY_RTOL,
            "lindblad_rtol": LINDBLAD_RTOL,
        },
        "conventions": {
            "frequencies": "angular (rad/s); config inputs are value/2pi in MHz or kHz",
            "chi_rad_per_s": _system_params(cfg).chi,
            "gamma_decay_rad_per_s": _system_params(cfg).gamma_decay,
            "gamma_phi_rad_per_s": _system_params(cfg).gamma_phi,
            "bloch_frame": "ground state at (0, 0, +1)",
        },
    }
    manifest.update(extra)
    path = out / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return path


def _schedule_rows(schedule, num=2001):
    times = np.linspace(0.0, schedule.duration, num)
    header = ["t"]
    columns = [times]
    for tone in schedule.tones:
        omega, phase, delta = tone.sample(times)
        n = tone.target_level
        header += [f"omega_{n}", f"phi_{n}", f"delta_{n}"]
        columns += [omega, phase, delta]
    return header, zip(*columns)


def _trajectory_rows(schedule, params, mode, n, num):
    controls = effective_block_controls(n, schedule, params, mode)
    traj = integrate_trajectory(controls, (0.0, schedule.duration), num=num)
    x, y, z = bloch_from_angles(traj.zeta, traj.xi)
    header = ["t", "zeta", "xi", "f_plus", "x", "y", "z"]
    rows = zip(traj.times, traj.zeta, traj.xi, traj.f_plus, x, y, z)
    return header, rows


def run_simulate(config: dict, out_dir: Path) -> list[Path]:
    """Single-scenario run: fidelity report, error budget, optional extras."""
    params = _system_params(config)
    target = _target(config)
    scheme, mode, omega_max, lam, optimize, decoherence = _drive(config)
    if target.d > params.n_max:
        raise ConfigError("gate.thetas addresses more levels than system.n_max")

    schedule = build_schedule(target, scheme, omega_max, lam)
    offsets = None
    if optimize:
        adj = linear_adjust(schedule, params, target, mode=mode)
        schedule, offsets = adj.schedule, adj.offsets

    if decoherence:
        fidelity = open_system_fidelity(schedule, params, mode, target)
    else:
        fidelity = gate_fidelity(
            evolve_unitary(schedule, params, mode, rtol=UNITARY_RTOL), target
        )
    budget = error_budget(target, scheme, omega_max, params, lam)

    written = []
    written.append(
        write_csv(
            out_dir / "fidelity_report.csv",
            ["scheme", "mode", "optimized", "decoherence", "omega_ratio", "fidelity"],
            [
                (
                    scheme.value,
                    mode.value,
                    optimize,
                    decoherence,
                    omega_max / params.chi,
                    fidelity,
                )
            ],
        )
    )
    written.append(
        write_csv(
            out_dir / "error_budget.csv",
            ["component", "fidelity_loss"],
            [
                ("counterrotating", budget.counterrotating_loss),
                ("decoherence", budget.decoherence_loss),
                ("higher_order", budget.higher_order_loss),
            ],
        )
    )
    if config["output"]["schedule_csv"]:
        header, rows = _schedule_rows(schedule)
        written.append(write_csv(out_dir / "schedule.csv", header, rows))
    if config["output"]["trajectories"]:
        num = int(config["output"]["trajectory_samples"])
        for n in range(target.d):
            header, rows = _trajectory_rows(schedule, params, mode, n, num)
            written.append(
                write_csv(out_dir / f"trajectory_block{n}.csv", header, rows)
            )
    extra = {
        "results": {
            "fidelity": fidelity,
            "gate_time_s": schedule.duration,
            "error_budget": {
                "counterrotating": budget.counterrotating_loss,
                "decoherence": budget.decoherence_loss,
                "higher_order": budget.higher_order_loss,
            },
        }
    }
    if offsets is not None:
        extra["results"]["offsets"] = {
            "omega_eps": list(offsets.omega_eps),
            "delta_eps": list(offsets.delta_eps),
        }
    written.append(_write_manifest(out_dir, config, extra))
    return written


def _ratio_grid(cfg: dict) -> np.ndarray:
    s = cfg["sweep"]
    n = int(s["ratio_points"])
    a, b = float(s["ratio_start"]), float(s["ratio_stop"])
    if a <= 0 or b <= a or n < 2:
        raise ConfigError("sweep ratio grid must satisfy 0 < start < stop, points >= 2")
    if s["ratio_spacing"] == "log":
        return np.geomspace(a, b, n)
    if s["ratio_spacing"] == "linear":
        return np.linspace(a, b, n)
    raise ConfigError("sweep.ratio_spacing must be 'log' or 'linear'")


def _error_grids(cfg: dict):
    s = cfg["sweep"]
    eps = np.linspace(float(s["eps_min"]), float(s["eps_max"]), int(s["eps_points"]))
    eta = np.linspace(float(s["eta_min"]), float(s["eta_max"]), int(s["eta_points"]))
    return eps, eta


def _amplitude_chunk(job):
    target, scheme, optimize, ratios, decoherence, params, lam, mode = job
    return amplitude_sweep(
        target, scheme, optimize, ratios, decoherence, params, lam, mode
    ).values


def _robustness_chunk(job):
    target, scheme, optimize, eps, eta, omega_max, params, lam, mode = job
    return robustness_sweep(
        target, scheme, optimize, eps, eta, omega_max, params, lam, mode
    ).values


def _run_chunks(worker, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [worker(job) for job in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, jobs))


def run_sweep(config: dict, out_dir: Path, threads: int = 1) -> list[Path]:
    params = _system_params(config)
    target = _target(config)
    scheme, mode, omega_max, lam, optimize, decoherence = _drive(config)
    kind = config["sweep"]["kind"]
    if kind == "amplitude":
        ratios = _ratio_grid(config)
        chunks = np.array_split(ratios, max(1, min(threads, ratios.size)))
        jobs = [
            (target, scheme, optimize, c, decoherence, params, lam, mode)
            for c in chunks
            if c.size
        ]
        values = np.concatenate(_run_chunks(_amplitude_chunk, jobs, threads))
        path = write_csv(
            out_dir / "sweep_amplitude.csv",
            ["omega_ratio", "fidelity"],
            zip(ratios, values),
        )
    elif kind == "robustness":
        eps, eta = _error_grids(config)
        chunks = np.array_split(eps, max(1, min(threads, eps.size)))
        jobs = [
            (target, scheme, optimize, c, eta, omega_max, params, lam, mode)
            for c in chunks
            if c.size
        ]
        values = np.concatenate(_run_chunks(_robustness_chunk, jobs, threads))
        coords = [(e, h) for e in eps for h in eta]
        path = write_csv(
            out_dir / "sweep_robustness.csv",
            ["epsilon", "eta", "fidelity"],
            [c + (v,) for c, v in zip(coords, values)],
        )
    else:
        raise ConfigError("sweep.kind must be 'amplitude' or 'robustness'")
    manifest = _write_manifest(out_dir, config, {"results": {"sweep_kind": kind}})
    return [path, manifest]


def run_optimize(config: dict, out_dir: Path) -> list[Path]:
    params = _system_params(config)
    target = _target(config)
    scheme, mode, omega_max, lam, _, _ = _drive(config)
    schedule = build_schedule(target, scheme, omega_max, lam)
    result = linear_adjust(schedule, params, target, mode=mode)
    written = [
        write_csv(
            out_dir / "offsets.csv",
            ["level", "omega_eps", "delta_eps", "omega_eps_frac", "delta_eps_frac"],
            [
                (
                    n,
                    result.offsets.omega_eps[n],
                    result.offsets.delta_eps[n],
                    result.offsets.omega_eps[n] / omega_max,
                    result.offsets.delta_eps[n] / omega_max,
                )
                for n in range(target.d)
            ],
        ),
        write_csv(
            out_dir / "optimization_trace.csv",
            ["level", "stage", "omega_eps", "delta_eps", "objective"],
            result.trace,
        ),
    ]
    header, rows = _schedule_rows(result.schedule)
    written.append(write_csv(out_dir / "schedule_adjusted.csv", header, rows))
    written.append(
        _write_manifest(
            out_dir,
            config,
            {
                "results": {
                    "fidelity_unadjusted": result.fidelity_unadjusted,
                    "fidelity_adjusted": result.fidelity_adjusted,
                }
            },
        )
    )
    return written


def run_correlate(config: dict, out_dir: Path) -> list[Path]:
    params = _system_params(config)
    target = _target(config)
    _, _, omega_max, _, _, _ = _drive(config)
    chi_taus = [float(x) for x in config["correlate"]["chi_tau_values"]]
    envelope = bool(config["correlate"]["envelope"])
    tau = math.pi**2 / (2.0 * omega_max)
    rho = correlation_matrix(
        target, omega_max, params.chi, tau, envelope=envelope
    )
    written = [
        write_csv(
            out_dir / "correlation_matrix.csv",
            ["i", "j", "rho"],
            [(i, j, rho[i, j]) for i in range(target.d) for j in range(target.d)],
        )
    ]
    rows = []
    for x in chi_taus:
        tau_x = x / params.chi
        rho_x = correlation_matrix(
            target, omega_max, params.chi, tau_x, envelope=envelope
        )
        rows.append((x, rho_x[0, min(2, target.d - 1)], rho02_closed_form(x)))
    written.append(
        write_csv(
            out_dir / "rho02_comparison.csv",
            ["chi_tau", "rho02_numeric", "rho02_reference_form"],
            rows,
        )
    )
    written.append(_write_manifest(out_dir, config, {"results": {}}))
    return written


FIGURES = ("fig2a", "fig2bc", "fig3a", "fig3b", "fig4", "corrC")


def run_figure(config: dict, figure: str, out_dir: Path) -> list[Path]:
    """Emit the CSV dataset behind one of the standard figures."""
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure {figure!r}; choose from {FIGURES}")
    params = _system_params(config)
    target = _target(config)
    _, mode, omega_max, lam, _, _ = _drive(config)
    written = []

    if figure in ("fig2a", "fig3a"):
        scheme = Scheme.ORANGE_SLICE if figure == "fig2a" else Scheme.PATH_DESIGNED
        ratios = _ratio_grid(config)
        columns = {"omega_ratio": ratios}
        for optimized in (False, True):
            for decoherence in (False, True):
                grid = amplitude_sweep(
                    target, scheme, optimized, ratios, decoherence, params, lam, mode
                )
                tag = ("opt" if optimized else "plain") + (
                    "_open" if decoherence else "_closed"
                )
                columns[f"fidelity_{tag}"] = grid.values
        written.append(
            write_csv(
                out_dir / f"{figure}.csv",
                list(columns),
                zip(*columns.values()),
            )
        )
    elif figure == "fig2bc":
        num = int(config["output"]["trajectory_samples"])
        schedule = build_schedule(target, Scheme.ORANGE_SLICE, omega_max, lam)
        adj = linear_adjust(schedule, params, target, mode=mode)
        for tag, sched in (("fig2b", schedule), ("fig2c", adj.schedule)):
            for n in range(target.d):
                header, rows = _trajectory_rows(sched, params, mode, n, num)
                written.append(
                    write_csv(out_dir / f"{tag}_block{n}.csv", header, rows)
                )
    elif figure == "fig3b":
        ratios = _ratio_grid(config)
        rows = []
        for r in ratios:
            om = r * params.chi
            t_oss = gate_time(Scheme.ORANGE_SLICE, om)
            t_pd = gate_time(Scheme.PATH_DESIGNED, om, lam, target)
            rows.append((r, t_oss, t_pd, t_pd / t_oss))
        written.append(
            write_csv(
                out_dir / "fig3b.csv",
                ["omega_ratio", "gate_time_oss", "gate_time_pd", "pd_over_oss"],
                rows,
            )
        )
    elif figure == "fig4":
        eps, eta = _error_grids(config)
        oss = robustness_sweep(
            target, Scheme.ORANGE_SLICE, False, eps, eta, omega_max, params, lam
        )
        pd = robustness_sweep(
            target, Scheme.PATH_DESIGNED, True, eps, eta, omega_max, params, lam
        )
        rows = [
            row_oss[:2] + (row_oss[2], row_pd[2])
            for row_oss, row_pd in zip(oss.to_rows(), pd.to_rows())
        ]
        written.append(
            write_csv(
                out_dir / "fig4.csv",
                ["epsilon", "eta", "fidelity_oss", "fidelity_pd_qocf"],
                rows,
            )
        )
    elif figure == "corrC":
        written.extend(run_correlate(config, out_dir))
        return written

    written.append(_write_manifest(out_dir, config, {"results": {"figure": figure}}))
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="geosnap",
        description="Geometric SNAP gate simulation and pulse synthesis",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="YAML configuration file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument(
            "--threads", type=int, default=1, help="worker processes for sweep grids"
        )
        p.add_argument("--mode", choices=["rwa", "full", "full+ho"], default=None)
        p.add_argument("--scheme", choices=["oss", "pd"], default=None)
        p.add_argument("--optimize", choices=["on", "off"], default=None)

    for verb in ("simulate", "sweep", "optimize", "correlate"):
        common(sub.add_parser(verb))
    fig = sub.add_parser("figure")
    fig.add_argument("figure", choices=list(FIGURES))
    common(fig)

    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        if args.mode is not None:
            config["drive"]["mode"] = args.mode
        if args.scheme is not None:
            config["drive"]["scheme"] = args.scheme
        if args.optimize is not None:
            config["drive"]["optimize"] = args.optimize == "on"
        out_dir = _out_dir(config, args.out)
        if args.verb == "simulate":
            written = run_simulate(config, out_dir)
        elif args.verb == "figure":
            written = run_figure(config, args.figure, out_dir)
        elif args.verb == "sweep":
            written = run_sweep(config, out_dir, threads=max(1, args.threads))
        elif args.verb == "optimize":
            written = run_optimize(config, out_dir)
        else:
            written = run_correlate(config, out_dir)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
