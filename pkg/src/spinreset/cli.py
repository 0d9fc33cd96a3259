"""Command line surface: stationary tables, ensembles, sweeps, fits.

Every file-writing invocation drops a JSON manifest next to its outputs
recording the resolved configuration, so a run can be repeated exactly.
All frequencies are entered relative to delta (omega means omega/delta,
gamma means gamma/delta, times are in units of 1/delta); delta=0 is the
resonant special case and uses omega itself as the unit.

Exit codes: 0 success, 2 usage error, 3 validation or output error,
4 verification failure, 5 unreadable input file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .analysis import (
    McTemplate,
    PowerLawFit,
    SweepResult,
    REGIME_CLOSED,
    REGIME_MIXTURE,
    ensemble_lqu,
    estimate_discontinuity,
    fit_power_law,
    sweep_stationary,
)
from .observables import connected_correlation, connected_correlation_closed_form, lqu
from .renewal import (
    WaitingKind,
    WaitingTime,
    renewal_state_at_time,
    stationary_density_closed_form,
    stationary_state_p1,
    stationary_state_p2,
)
from .spin_dynamics import DriveParams, free_qubit_poly
from .trajectory_sim import EnsembleStats, ProtocolKind, SimConfig, run_ensemble

WORKERS_ENV = "SPINRESET_WORKERS"

SWEEP_COLUMNS = ("omega_over_delta", "density", "density_stderr", "correlation",
                 "correlation_stderr", "lqu", "lqu_stderr", "regime")
SERIES_COLUMNS = ("time", "density", "density_stderr", "two_point",
                  "two_point_stderr", "correlation", "correlation_stderr")


class UnreadableInput(Exception):
    pass


# ---------------------------------------------------------------------------
# Manifest and table emission.
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    """Record of one command invocation and the files it produced."""

    command: str
    argv: list
    config: dict
    seed: int | None
    version: str
    wall_time: float
    outputs: list = field(default_factory=list)

    def write(self, prefix: str):
        path = prefix + ".manifest.json"
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)
            fh.write("\n")
        return path


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def _sweep_rows(sweep: SweepResult):
    for i in range(len(sweep.omega_over_delta)):
        yield (sweep.omega_over_delta[i], sweep.density[i], sweep.density_stderr[i],
               sweep.correlation[i], sweep.correlation_stderr[i],
               sweep.lqu[i], sweep.lqu_stderr[i], sweep.regime[i])


def _time_unit(stats: EnsembleStats) -> float:
    # the time column is emitted as t*delta, mirroring the input groups
    d = stats.config.params.delta
    return d if d > 0.0 else 1.0


def _series_rows(stats: EnsembleStats):
    unit = _time_unit(stats)
    for i in range(len(stats.times)):
        yield (stats.times[i] * unit, stats.density[i], stats.density_stderr[i],
               stats.two_point[i], stats.two_point_stderr[i],
               stats.correlation[i], stats.correlation_stderr[i])


def _csv_text(columns, rows) -> str:
    lines = [", ".join(columns)]
    for row in rows:
        lines.append(", ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _dist_dict(dist: WaitingTime) -> dict:
    return {"kind": dist.kind.value, "gamma": dist.gamma, "t_max": dist.t_max}


def _dist_from_dict(d: dict) -> WaitingTime:
    kind = WaitingKind(d["kind"])
    if kind is WaitingKind.POISSON:
        return WaitingTime.poisson(d["gamma"])
    return WaitingTime.chopped(d["gamma"], d["t_max"])


def _sweep_json(sweep: SweepResult, manifest: RunManifest | None) -> dict:
    doc = {
        "kind": "sweep",
        "protocol": sweep.protocol.value,
        "dist": _dist_dict(sweep.dist),
        "delta": sweep.delta,
        "n_spins": sweep.n_spins,
        "columns": list(SWEEP_COLUMNS),
        "omega_over_delta": sweep.omega_over_delta.tolist(),
        "density": sweep.density.tolist(),
        "density_stderr": sweep.density_stderr.tolist(),
        "correlation": sweep.correlation.tolist(),
        "correlation_stderr": sweep.correlation_stderr.tolist(),
        "lqu": sweep.lqu.tolist(),
        "lqu_stderr": sweep.lqu_stderr.tolist(),
        "regime": list(sweep.regime),
        "row_errors": {str(k): v for k, v in sweep.row_errors.items()},
        "fits": {k: asdict(v) for k, v in sweep.fits.items()},
    }
    if manifest is not None:
        doc["manifest"] = asdict(manifest)
    return doc


def _sweep_from_json(doc: dict) -> SweepResult:
    return SweepResult(
        protocol=ProtocolKind(doc["protocol"]),
        dist=_dist_from_dict(doc["dist"]),
        delta=doc["delta"],
        omega_over_delta=np.array(doc["omega_over_delta"], dtype=float),
        density=np.array(doc["density"], dtype=float),
        density_stderr=np.array(doc["density_stderr"], dtype=float),
        correlation=np.array(doc["correlation"], dtype=float),
        correlation_stderr=np.array(doc["correlation_stderr"], dtype=float),
        lqu=np.array(doc["lqu"], dtype=float),
        lqu_stderr=np.array(doc["lqu_stderr"], dtype=float),
        regime=list(doc["regime"]),
        n_spins=doc.get("n_spins"),
    )


def _series_json(stats: EnsembleStats, manifest: RunManifest | None) -> dict:
    unit = _time_unit(stats)
    doc = {
        "kind": "ensemble",
        "protocol": stats.config.protocol.value,
        "dist": _dist_dict(stats.config.dist),
        "n_spins": stats.config.n_spins,
        "n_trajectories": stats.n_trajectories,
        "columns": list(SERIES_COLUMNS),
        "time": (stats.times * unit).tolist(),
        "density": stats.density.tolist(),
        "density_stderr": stats.density_stderr.tolist(),
        "two_point": stats.two_point.tolist(),
        "two_point_stderr": stats.two_point_stderr.tolist(),
        "correlation": stats.correlation.tolist(),
        "correlation_stderr": stats.correlation_stderr.tolist(),
        "wall_time": stats.wall_time,
    }
    if stats.window_density is not None:
        lq, lq_err = ensemble_lqu(stats)
        doc["window"] = {
            "range": [w * unit for w in stats.config.average_window],
            "density": stats.window_density,
            "density_stderr": stats.window_density_stderr,
            "two_point": stats.window_two_point,
            "two_point_stderr": stats.window_two_point_stderr,
            "correlation": stats.window_correlation,
            "correlation_stderr": stats.window_correlation_stderr,
            "lqu": lq,
            "lqu_stderr": lq_err,
        }
    if manifest is not None:
        doc["manifest"] = asdict(manifest)
    return doc


def write_table(result, fmt: str, path: str, manifest: RunManifest | None = None) -> list:
    """Write a sweep or time-series table as CSV and/or JSON files.

    fmt is csv, json, or both; path is the stem the extensions are
    appended to.  Returns the list of files written.
    """
    if isinstance(result, SweepResult):
        csv_text = _csv_text(SWEEP_COLUMNS, _sweep_rows(result))
        json_doc = _sweep_json(result, manifest)
    elif isinstance(result, EnsembleStats):
        csv_text = _csv_text(SERIES_COLUMNS, _series_rows(result))
        json_doc = _series_json(result, manifest)
    else:
        raise ValueError(f"cannot serialize {type(result).__name__}")
    written = []
    if fmt in ("csv", "both"):
        with open(path + ".csv", "w") as fh:
            fh.write(csv_text)
        written.append(path + ".csv")
    if fmt in ("json", "both"):
        with open(path + ".json", "w") as fh:
            json.dump(json_doc, fh, indent=2)
            fh.write("\n")
        written.append(path + ".json")
    return written


# ---------------------------------------------------------------------------
# Minimal SVG line plots (polylines and ticks, nothing else).
# ---------------------------------------------------------------------------

_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b")


def write_svg(path: str, x, series, labels, xlabel: str, ylabel: str):
    """One panel, one or more polylines over a shared x axis."""
    width, height = 640, 480
    ml, mr, mt, mb = 72, 16, 20, 48
    x = np.asarray(x, dtype=float)
    series = [np.asarray(y, dtype=float) for y in series]
    finite = np.concatenate([y[np.isfinite(y)] for y in series] or [np.array([0.0])])
    if finite.size == 0:
        finite = np.array([0.0, 1.0])
    x_lo, x_hi = float(x.min()), float(x.max())
    y_lo, y_hi = float(finite.min()), float(finite.max())
    if x_hi - x_lo < 1e-300:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    pad = max(0.05 * (y_hi - y_lo), 1e-3 * max(abs(y_lo), abs(y_hi), 1.0))
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(v):
        return ml + (v - x_lo) / (x_hi - x_lo) * (width - ml - mr)

    def sy(v):
        return height - mb - (v - y_lo) / (y_hi - y_lo) * (height - mt - mb)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
    ]
    for i in range(5):
        xv = x_lo + i * (x_hi - x_lo) / 4
        yv = y_lo + i * (y_hi - y_lo) / 4
        parts.append(f'<line x1="{sx(xv):.1f}" y1="{height - mb}" x2="{sx(xv):.1f}" '
                     f'y2="{height - mb + 5}" stroke="black"/>')
        parts.append(f'<text x="{sx(xv):.1f}" y="{height - mb + 18}" '
                     f'text-anchor="middle">{xv:.4g}</text>')
        parts.append(f'<line x1="{ml - 5}" y1="{sy(yv):.1f}" x2="{ml}" '
                     f'y2="{sy(yv):.1f}" stroke="black"/>')
        parts.append(f'<text x="{ml - 8}" y="{sy(yv):.1f}" text-anchor="end" '
                     f'dominant-baseline="middle">{yv:.4g}</text>')
    parts.append(f'<text x="{(ml + width - mr) / 2:.1f}" y="{height - 12}" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="16" y="{(mt + height - mb) / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {(mt + height - mb) / 2:.1f})">{ylabel}</text>')
    for k, (y, label) in enumerate(zip(series, labels)):
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y) if math.isfinite(b))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{width - mr - 8}" y="{mt + 16 + 16 * k}" text-anchor="end" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
    return path


# ---------------------------------------------------------------------------
# Argument handling.
# ---------------------------------------------------------------------------


def _parse_grid(text: str):
    try:
        if ":" in text:
            lo, hi, step = (float(v) for v in text.split(":"))
            if step <= 0.0 or hi < lo:
                raise ValueError
            count = int(round((hi - lo) / step))
            vals = [lo + k * step for k in range(count + 1)]
            return [v for v in vals if v <= hi + 1e-9]
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"grid must be lo:hi:step or a comma list, got {text!r}") from None


def _parse_window(text: str):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be lo:hi, got {text!r}") from None
    return lo, hi


def _parse_n_list(text: str):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of integers, got {text!r}") from None


def _add_physics_args(p, omega=True):
    if omega:
        p.add_argument("--omega", type=float, required=True,
                       help="drive amplitude over delta (or absolute when --delta 0)")
    p.add_argument("--delta", type=float, default=1.0, help="detuning scale (0 for resonant drive)")
    p.add_argument("--gamma", type=float, default=None, help="reset rate over delta (default 0.5)")
    p.add_argument("--dist", choices=("poisson", "chopped"), default="poisson",
                   help="waiting-time law between resets")
    p.add_argument("--tmax", type=float, default=None,
                   help="cutoff of the chopped-exponential law (units of 1/delta)")


def _add_mc_args(p, trajectories=10000):
    p.add_argument("--trajectories", type=int, default=trajectories)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker threads (default ${WORKERS_ENV} or 1)")
    p.add_argument("--time", type=float, default=None,
                   help="observation time (default 30, or 2000 at finite N)")


def _add_output_args(p):
    p.add_argument("--output", "-o", default=None,
                   help="output path stem; omit to print CSV on stdout")
    p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p.add_argument("--svg", action="store_true", help="also write SVG line plots")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinreset",
        description="Stationary states and trajectory ensembles of driven spins under stochastic resetting.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stationary", help="exact stationary observables at one parameter point")
    p.add_argument("--protocol", type=int, choices=(1, 2), required=True)
    _add_physics_args(p)
    p.add_argument("--n-spins", type=int, default=None)
    _add_output_args(p)
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("ensemble", help="Monte Carlo trajectory ensemble time series")
    p.add_argument("--protocol", type=int, choices=(1, 2, 3), required=True)
    _add_physics_args(p)
    p.add_argument("--n-spins", type=int, default=None)
    _add_mc_args(p)
    p.add_argument("--points", type=int, default=61, help="sample grid size over [0, T]")
    p.add_argument("--window", type=_parse_window, default=None,
                   help="lo:hi time window for quasi-stationary averages")
    _add_output_args(p)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("sweep", help="stationary observables across an omega/delta grid")
    p.add_argument("--protocol", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--grid", type=_parse_grid, required=True, help="lo:hi:step or comma list")
    _add_physics_args(p, omega=False)
    p.add_argument("--n-spins", type=int, default=None)
    p.add_argument("--mc", action="store_true", help="force Monte Carlo on every row")
    _add_mc_args(p)
    p.add_argument("--window-points", type=int, default=11)
    _add_output_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("finite-size", help="majority-vote protocol crossover curves at finite N")
    p.add_argument("--n-spins", type=_parse_n_list, required=True, help="comma list of odd N")
    p.add_argument("--grid", type=_parse_grid, default=_parse_grid("0.85:1.1:0.05"))
    _add_physics_args(p, omega=False)
    _add_mc_args(p)
    p.add_argument("--window-points", type=int, default=26)
    _add_output_args(p)
    p.set_defaults(func=cmd_finite_size)

    p = sub.add_parser("fit", help="power-law exponent fit on an existing sweep file")
    p.add_argument("--input", required=True, help="sweep .csv or .json file")
    p.add_argument("--observable", choices=("density", "correlation", "lqu"), required=True)
    p.add_argument("--critical-point", type=float, default=1.0)
    p.add_argument("--window", type=_parse_window, default=None)
    p.add_argument("--baseline", type=float, default=None,
                   help="value subtracted before the log-log fit (default per observable)")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify", help="run the oracle cross-checks")
    p.set_defaults(func=cmd_verify)
    return parser


def _resolve_workers(args) -> int:
    if getattr(args, "workers", None) is not None:
        return args.workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return 1


def _resolve_physics(args):
    """(params, dist, unit, delta_zero) from dimensionless CLI groups."""
    delta = args.delta
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    delta_zero = delta == 0.0
    unit = 1.0 if delta_zero else delta
    omega = getattr(args, "omega", None)
    params = None if omega is None else DriveParams(omega=omega * unit, delta=delta)
    gamma = (0.5 if args.gamma is None else args.gamma) * unit
    if args.dist == "chopped":
        if args.tmax is None:
            raise ValueError("--dist chopped requires --tmax")
        dist = WaitingTime.chopped(gamma, args.tmax / unit)
    else:
        if args.tmax is not None:
            raise ValueError("--tmax only applies to --dist chopped")
        dist = WaitingTime.poisson(gamma)
    return params, dist, unit, delta_zero


def _config_echo(args, extra=None) -> dict:
    skip = {"func", "command", "argv"}
    doc = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    for k, v in list(doc.items()):
        if isinstance(v, tuple):
            doc[k] = list(v)
    if extra:
        doc.update(extra)
    return doc


def _emit(result, args, manifest: RunManifest, svg_series=None):
    """Write files when --output is set, otherwise print the CSV."""
    if args.output is None:
        if isinstance(result, SweepResult):
            sys.stdout.write(_csv_text(SWEEP_COLUMNS, _sweep_rows(result)))
        else:
            sys.stdout.write(_csv_text(SERIES_COLUMNS, _series_rows(result)))
        return 0
    outputs = write_table(result, args.format, args.output, manifest)
    if getattr(args, "svg", False) and svg_series:
        for name, (x, ys, labels, xlabel, ylabel) in svg_series.items():
            outputs.append(write_svg(f"{args.output}.{name}.svg", x, ys, labels, xlabel, ylabel))
    manifest.outputs = outputs
    outputs.append(manifest.write(args.output))
    print("\n".join(outputs))
    return 0


# ---------------------------------------------------------------------------
# Subcommand bodies.
# ---------------------------------------------------------------------------


def cmd_stationary(args) -> int:
    t0 = time.perf_counter()
    params, dist, unit, delta_zero = _resolve_physics(args)
    protocol = ProtocolKind(args.protocol)
    if protocol is ProtocolKind.UNCONDITIONAL_RESET:
        st = stationary_state_p1(params, dist)
        regime = REGIME_CLOSED
    else:
        st = stationary_state_p2(params, dist, args.n_spins)
        if args.n_spins is not None:
            regime = REGIME_MIXTURE
        else:
            regime = REGIME_CLOSED if params.omega <= params.delta else REGIME_MIXTURE
    result = SweepResult(
        protocol=protocol, dist=dist, delta=args.delta, n_spins=args.n_spins,
        omega_over_delta=np.array([args.omega]),
        density=np.array([st.density]), density_stderr=np.array([0.0]),
        correlation=np.array([connected_correlation(st.pair_state)]),
        correlation_stderr=np.array([0.0]),
        lqu=np.array([lqu(st.pair_state).value]), lqu_stderr=np.array([0.0]),
        regime=[regime],
    )
    manifest = RunManifest(
        command="stationary", argv=list(args.argv), seed=None, version=__version__,
        config=_config_echo(args, {"delta_zero": delta_zero, "note": st.note}),
        wall_time=time.perf_counter() - t0)
    return _emit(result, args, manifest)


def _resolve_horizon(args, protocol, unit) -> float:
    """Observation time in internal units from the T*delta CLI group."""
    horizon = args.time
    if horizon is None:
        finite = getattr(args, "n_spins", None) is not None
        long_run = finite and protocol is not ProtocolKind.UNCONDITIONAL_RESET
        horizon = 2000.0 if long_run else 30.0
    return horizon / unit


def cmd_ensemble(args) -> int:
    t0 = time.perf_counter()
    params, dist, unit, delta_zero = _resolve_physics(args)
    protocol = ProtocolKind(args.protocol)
    workers = _resolve_workers(args)
    horizon = _resolve_horizon(args, protocol, unit)
    if args.points < 2:
        raise ValueError(f"--points must be >= 2, got {args.points}")
    window = None if args.window is None else (args.window[0] / unit, args.window[1] / unit)
    config = SimConfig(
        protocol=protocol, params=params, dist=dist,
        observation_time=horizon,
        sample_grid=tuple(np.linspace(0.0, horizon, args.points)),
        n_trajectories=args.trajectories, seed=args.seed,
        n_spins=args.n_spins, workers=workers,
        average_window=window,
    )
    stats = run_ensemble(config)
    manifest = RunManifest(
        command="ensemble", argv=list(args.argv), seed=args.seed, version=__version__,
        config=_config_echo(args, {"delta_zero": delta_zero, "observation_time": horizon,
                                   "workers": workers}),
        wall_time=time.perf_counter() - t0)
    svg = {"density": (stats.times * unit, [stats.density], ["density"],
                       "time * delta", "density")}
    return _emit(stats, args, manifest, svg_series=svg)


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    _, dist, unit, delta_zero = _resolve_physics(args)
    if delta_zero:
        raise ValueError("sweeps need delta > 0 (the grid is in units of delta)")
    protocol = ProtocolKind(args.protocol)
    workers = _resolve_workers(args)
    horizon = _resolve_horizon(args, protocol, unit)
    template = McTemplate(
        n_trajectories=args.trajectories, observation_time=horizon, seed=args.seed,
        workers=workers, window_points=args.window_points, n_spins=args.n_spins)
    sweep = sweep_stationary(protocol, dist, args.grid, mc=template,
                             delta=args.delta, use_mc=args.mc)
    for i, err in sorted(sweep.row_errors.items()):
        print(f"row {i} (omega/delta={sweep.omega_over_delta[i]}) failed: {err}",
              file=sys.stderr)
    manifest = RunManifest(
        command="sweep", argv=list(args.argv), seed=args.seed, version=__version__,
        config=_config_echo(args, {"observation_time": horizon, "workers": workers}),
        wall_time=time.perf_counter() - t0)
    x = sweep.omega_over_delta
    svg = {
        "density": (x, [sweep.density], ["density"], "omega/delta", "density"),
        "correlation": (x, [sweep.correlation], ["correlation"], "omega/delta", "correlation"),
        "lqu": (x, [sweep.lqu], ["lqu"], "omega/delta", "lqu"),
    }
    return _emit(sweep, args, manifest, svg_series=svg)


def cmd_finite_size(args) -> int:
    t0 = time.perf_counter()
    _, dist, unit, delta_zero = _resolve_physics(args)
    if delta_zero:
        raise ValueError("finite-size sweeps need delta > 0")
    workers = _resolve_workers(args)
    horizon = (2000.0 if args.time is None else args.time) / unit
    sweeps = {}
    for n in args.n_spins:
        template = McTemplate(
            n_trajectories=args.trajectories, observation_time=horizon, seed=args.seed,
            workers=workers, average_window=(0.95 * horizon, horizon),
            window_points=args.window_points, n_spins=n)
        sweeps[n] = sweep_stationary(ProtocolKind.CONDITIONAL_TWO_STATE, dist, args.grid,
                                     mc=template, delta=args.delta)
    manifest = RunManifest(
        command="finite-size", argv=list(args.argv), seed=args.seed, version=__version__,
        config=_config_echo(args, {"observation_time": horizon, "workers": workers}),
        wall_time=time.perf_counter() - t0)
    if args.output is None:
        for n, sweep in sweeps.items():
            sys.stdout.write(f"# N = {n}\n")
            sys.stdout.write(_csv_text(SWEEP_COLUMNS, _sweep_rows(sweep)))
        return 0
    outputs = []
    for n, sweep in sweeps.items():
        outputs.extend(write_table(sweep, args.format, f"{args.output}_N{n}", manifest))
    if args.svg:
        x = args.grid
        ys = [sweeps[n].density for n in args.n_spins]
        labels = [f"N={n}" for n in args.n_spins]
        outputs.append(write_svg(f"{args.output}.density.svg", x, ys, labels,
                                 "omega/delta", "density"))
    manifest.outputs = outputs
    outputs.append(manifest.write(args.output))
    print("\n".join(outputs))
    return 0


def _read_sweep_file(path: str) -> SweepResult:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UnreadableInput(f"cannot read {path}: {exc}") from exc
    if path.endswith(".json"):
        try:
            doc = json.loads(text)
            return _sweep_from_json(doc)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UnreadableInput(f"{path} is not a sweep JSON file: {exc}") from exc
    # CSV: the table alone carries no protocol metadata; defaults are
    # fine because the fit only consumes the numeric columns
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or [c.strip() for c in lines[0].split(",")] != list(SWEEP_COLUMNS):
        raise UnreadableInput(f"{path} does not start with the sweep CSV header")
    rows = []
    for ln in lines[1:]:
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) != len(SWEEP_COLUMNS):
            raise UnreadableInput(f"{path}: malformed row {ln!r}")
        try:
            rows.append([float(c) for c in cells[:7]] + [cells[7]])
        except ValueError as exc:
            raise UnreadableInput(f"{path}: malformed row {ln!r}") from exc
    cols = list(zip(*rows)) if rows else [[]] * 8
    return SweepResult(
        protocol=ProtocolKind.UNCONDITIONAL_RESET, dist=WaitingTime.poisson(0.5), delta=1.0,
        omega_over_delta=np.array(cols[0], dtype=float),
        density=np.array(cols[1], dtype=float),
        density_stderr=np.array(cols[2], dtype=float),
        correlation=np.array(cols[3], dtype=float),
        correlation_stderr=np.array(cols[4], dtype=float),
        lqu=np.array(cols[5], dtype=float),
        lqu_stderr=np.array(cols[6], dtype=float),
        regime=list(cols[7]),
    )


def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    sweep = _read_sweep_file(args.input)
    fit = fit_power_law(sweep, args.observable, critical_point=args.critical_point,
                        window=args.window, baseline=args.baseline)
    doc = asdict(fit)
    doc["observable"] = args.observable
    text = json.dumps(doc, indent=2) + "\n"
    sys.stdout.write(text)
    if args.output is not None:
        with open(args.output + ".json", "w") as fh:
            fh.write(text)
        manifest = RunManifest(
            command="fit", argv=list(args.argv), seed=None, version=__version__,
            config=_config_echo(args), wall_time=time.perf_counter() - t0,
            outputs=[args.output + ".json"])
        manifest.write(args.output)
    return 0


# ---------------------------------------------------------------------------
# Oracle cross-checks.
# ---------------------------------------------------------------------------


def _verify_checks():
    from .renewal import exp_weighted_average
    from .spin_dynamics import free_two_spin_state
    from .observables import hermitian_sqrt
    from .finite_size import ApproxVariant, transition_prob_approx, transition_prob_exact

    checks = []

    def check(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    # closed-form density vs term-by-term average vs adaptive quadrature
    worst_poly = worst_quad = 0.0
    for om in (0.3, 0.7, 1.0, 1.6):
        params = DriveParams(omega=om, delta=1.0)
        dist = WaitingTime.poisson(0.5)
        exact = stationary_density_closed_form(params, dist)
        st = stationary_state_p1(params, dist)
        worst_poly = max(worst_poly, abs(st.density - exact))
        quad = exp_weighted_average(
            dist, lambda t: free_two_spin_state(params, t, "up", "up")[0, 0].real
            + free_two_spin_state(params, t, "up", "up")[1, 1].real)
        worst_quad = max(worst_quad, abs(quad - exact))
    check("density: closed form vs renewal average", worst_poly < 1e-10, f"max {worst_poly:.2e}")
    check("density: closed form vs quadrature", worst_quad < 1e-8, f"max {worst_quad:.2e}")

    # correlation closed form vs the stationary two-spin state
    worst = 0.0
    for om in (0.5, 1.0, 1.5):
        params = DriveParams(omega=om, delta=1.0)
        st = stationary_state_p1(params, WaitingTime.poisson(0.5))
        worst = max(worst, abs(connected_correlation(st.pair_state)
                               - connected_correlation_closed_form(1, params, 0.5)))
    check("correlation: closed form vs renewal average", worst < 1e-10, f"max {worst:.2e}")

    # chopped-exponential density identity
    worst = 0.0
    params = DriveParams(omega=1.0, delta=1.0)
    for gtm in (1.0, 5.0, 20.0):
        dist = WaitingTime.chopped(0.5, gtm / 0.5)
        st = stationary_state_p1(params, dist)
        worst = max(worst, abs(st.density - stationary_density_closed_form(params, dist)))
    check("chopped law: average vs closed form", worst < 1e-10, f"max {worst:.2e}")

    # conditional-protocol mixture vs its closed form
    params = DriveParams(omega=2.0, delta=1.0)
    st2 = stationary_state_p2(params, WaitingTime.poisson(0.5))
    gap = abs(connected_correlation(st2.pair_state)
              - connected_correlation_closed_form(2, params, 0.5))
    check("majority protocol: mixture vs closed form", gap < 1e-10, f"{gap:.2e}")

    # finite-N threshold probabilities against the erf approximation
    ps = np.linspace(0.05, 0.95, 37)
    diffs = []
    for n in (51, 201, 1001):
        diffs.append(max(abs(transition_prob_exact(n, p)
                             - transition_prob_approx(n, p, ApproxVariant.NORMAL_ERF))
                         for p in ps))
    check("finite N: erf error shrinks with N",
          diffs[0] > diffs[1] > diffs[2] and diffs[2] < 5e-3,
          f"{[f'{d:.2e}' for d in diffs]}")

    # discord measure unit cases
    up = np.zeros((4, 4)); up[0, 0] = 1.0
    bell = np.zeros((4, 4)); bell[0, 0] = bell[0, 3] = bell[3, 0] = bell[3, 3] = 0.5
    vals = (lqu(up).value, lqu(np.eye(4) / 4).value, lqu(bell).value)
    check("discord: product, mixed, Bell",
          abs(vals[0]) < 1e-10 and abs(vals[1]) < 1e-10 and abs(vals[2] - 1.0) < 1e-8,
          f"{vals[0]:.1e}, {vals[1]:.1e}, {vals[2] - 1.0:.1e}")
    m = hermitian_sqrt(bell)
    check("matrix square root round-trip", np.max(np.abs(m @ m - bell)) < 1e-8)

    # Monte Carlo against the exact density (fixed seed)
    params = DriveParams(omega=1.0, delta=1.0)
    dist = WaitingTime.poisson(0.5)
    config = SimConfig(
        protocol=ProtocolKind.UNCONDITIONAL_RESET, params=params, dist=dist,
        observation_time=30.0, sample_grid=tuple(np.linspace(20.0, 30.0, 6)),
        n_trajectories=2000, seed=0, average_window=(20.0, 30.0))
    stats = run_ensemble(config)
    target = stationary_density_closed_form(params, dist)
    pull = abs(stats.window_density - target) / stats.window_density_stderr
    check("Monte Carlo vs closed form (4 sigma)", pull < 4.0, f"pull {pull:.2f}")

    # finite-time renewal state approaches the stationary one
    st = stationary_state_p1(params, dist)
    gap = np.max(np.abs(renewal_state_at_time(params, 0.5, 60.0) - st.state))
    check("finite-time renewal state converges", gap < 1e-8, f"{gap:.2e}")
    return checks


def cmd_verify(args) -> int:
    checks = _verify_checks()
    width = max(len(name) for name, _, _ in checks)
    failed = 0
    for name, ok, detail in checks:
        status = "ok" if ok else "FAIL"
        print(f"{name:<{width}}  {status:<4}  {detail}")
        failed += not ok
    if failed:
        print(f"{failed} of {len(checks)} checks failed")
        return 4
    print(f"all {len(checks)} checks passed")
    return 0


def execute_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help and usage errors
        code = exc.code
        return code if isinstance(code, int) else 2
    args.argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return args.func(args)
    except UnreadableInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(execute_command())


if __name__ == "__main__":
    main()
