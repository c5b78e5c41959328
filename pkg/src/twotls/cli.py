"""Command-line interface: spectra, transmission maps, two-photon reports,
operating-point search and validation runs.

Exit codes: 0 success, 1 usage error, 2 numerical precondition violation,
3 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import linear
from .core import GridError, SystemParams, default_grid, make_pulse
from .nonlinear import (channel_probabilities, copropagating_channels, counterpropagating_channels,
                        standing_wave_channels)
from .optimize import OBJECTIVES, Axis, NonConvergenceWarning, optimize_operating_point
from .validate import SUITES, run_suites

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 1, 2, 3

COMMANDS = ("spectrum", "map", "two-photon", "optimize", "validate")
PARAM_FIELDS = tuple(f.name for f in fields(SystemParams))
SWEEPABLE = {
    "spectrum": PARAM_FIELDS + ("omega",),
    "map": PARAM_FIELDS + ("T", "g2T"),
    "two-photon": PARAM_FIELDS + ("T", "g2T"),
    "optimize": PARAM_FIELDS + ("T",),
    "validate": (),
}
GEOMETRIES = {
    "standing": standing_wave_channels,
    "copropagating": copropagating_channels,
    "counterpropagating": counterpropagating_channels,
}

# map panels: (delta T, Delta T)
PANELS = {"a": (0.0, 0.0), "b": (10.0, 0.0), "c": (0.0, 10.0), "d": (10.0, 10.0)}

# preset -> (command, fixed values, default sweeps)
PRESETS = {
    "fig3": ("spectrum", {"Delta": 0.0}, ["delta:0.1:1:4", "omega:-3:3:241"]),
    "fig4": ("spectrum", {"delta": 0.0}, ["Delta:0.1:1:4", "omega:-3:3:241"]),
    "fig5a": ("map", {}, ["phi:0:6.283185307179586:100", "g2T:0.001:20:100"]),
    "fig5b": ("map", {}, ["phi:0:6.283185307179586:100", "g2T:0.001:20:100"]),
    "fig5c": ("map", {}, ["phi:0:6.283185307179586:100", "g2T:0.001:20:100"]),
    "fig5d": ("map", {}, ["phi:0:6.283185307179586:100", "g2T:0.001:20:100"]),
    "fig6": ("two-photon", {"delta": 0.0, "beta": 0.0, "geometry": "copropagating"},
             ["phi:0:6.283185307179586:49"]),
    "fig7": ("two-photon", {"delta": 0.0, "beta": 0.0, "geometry": "counterpropagating"},
             ["phi:0:6.283185307179586:49"]),
    "fig8": ("two-photon", {"Delta": 0.0, "beta": 0.0, "geometry": "counterpropagating"},
             ["phi:0:6.283185307179586:49"]),
}


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class SweepAxis:
    name: str
    lo: float
    hi: float
    n: int

    def values(self) -> list[float]:
        if self.n == 1:
            return [self.lo]
        return [float(v) for v in np.linspace(self.lo, self.hi, self.n)]

    def spec(self) -> str:
        return f"{self.name}:{self.lo!r}:{self.hi!r}:{self.n}"


def parse_sweep(text: str) -> SweepAxis:
    parts = text.split(":")
    if len(parts) != 4:
        raise UsageError(f"--sweep expects name:lo:hi:n, got {text!r}")
    name, lo, hi, n = parts
    try:
        lo_f, hi_f, n_i = float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError(f"--sweep {text!r}: lo and hi must be numbers and n an integer") from None
    if n_i < 1:
        raise UsageError(f"--sweep {text!r}: need n >= 1")
    if n_i > 1 and not lo_f != hi_f:
        raise UsageError(f"--sweep {text!r}: degenerate range")
    if not (math.isfinite(lo_f) and math.isfinite(hi_f)):
        raise UsageError(f"--sweep {text!r}: range must be finite")
    return SweepAxis(name, lo_f, hi_f, n_i)


@dataclass
class RunConfig:
    """Fully resolved run description; serialised next to every output."""

    command: str
    g2: float = 1.0
    delta: float = 0.0
    Delta: float = 0.0
    beta: float = 0.0
    phi: float = 0.0
    delay: float = 0.0
    pulse: str = "square"
    T: float = 1.0
    grid_n: int = 2048
    sweeps: list[str] = field(default_factory=list)
    out: str | None = None
    format: str | None = None
    non_markov: bool = False
    preset: str | None = None
    mode: str = "traveling"
    geometry: str = "standing"
    objective: str = "sorter"
    budget: int = 200
    suites: list[str] | None = None
    oracle_n: int = 512
    seed: int = 0
    dump: str | None = None
    jobs: int = 1

    def params(self) -> SystemParams:
        return SystemParams(**{k: getattr(self, k) for k in PARAM_FIELDS})

    def axes(self) -> list[SweepAxis]:
        return [parse_sweep(s) for s in self.sweeps]

    def as_dict(self) -> dict:
        return asdict(self)


CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < preset < config file < command-line flags."""
    values: dict = {}
    given = {k: v for k, v in vars(args).items() if k in CONFIG_KEYS and v is not None and k != "command"}
    cfg_path = getattr(args, "config", None)
    file_values: dict = {}
    if cfg_path:
        try:
            file_values = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {cfg_path}: {exc}") from None
        if not isinstance(file_values, dict):
            raise UsageError(f"config {cfg_path} must hold a JSON object")
        unknown = set(file_values) - CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if file_values.get("command", args.command) != args.command:
            raise UsageError(f"config is for {file_values['command']!r}, not {args.command!r}")
    preset = given.get("preset", file_values.get("preset"))
    if preset is not None:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        command, fixed, sweeps = PRESETS[preset]
        if command != args.command:
            raise UsageError(f"preset {preset} belongs to the {command} command")
        values.update(fixed)
        values["sweeps"] = list(sweeps)
        if preset in ("fig6", "fig7"):
            values["T"] = 1.0 / given.get("g2", file_values.get("g2", 1.0))
        if preset == "fig8":
            g2 = given.get("g2", file_values.get("g2", 1.0))
            values["T"] = 5.0 / g2
            values["delta"] = 10.0 / values["T"]
    values.update({k: v for k, v in file_values.items() if k != "command"})
    values.update(given)
    cfg = RunConfig(command=args.command, **values)
    _check_config(cfg)
    return cfg


def _check_config(cfg: RunConfig) -> None:
    if cfg.pulse not in ("square", "gaussian"):
        raise UsageError(f"--pulse must be square or gaussian, got {cfg.pulse!r}")
    if cfg.format not in (None, "csv", "json"):
        raise UsageError(f"--format must be csv or json, got {cfg.format!r}")
    if cfg.grid_n < 16:
        raise UsageError(f"--grid-n must be at least 16, got {cfg.grid_n}")
    if cfg.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if not cfg.T > 0:
        raise UsageError(f"--T must be positive, got {cfg.T}")
    for a in cfg.axes():
        low = min(a.lo, a.hi)
        if (a.name == "T" and low <= 0) or (a.name in ("g2T", "g2") and low < 0):
            raise UsageError(f"sweep {a.name} must stay positive (g2 and g2T may be zero), got [{a.lo}, {a.hi}]")
    if cfg.non_markov and cfg.command not in ("spectrum", "map"):
        raise UsageError("--non-markov applies to the linear commands (spectrum, map) only")
    if cfg.geometry not in GEOMETRIES:
        raise UsageError(f"--geometry must be one of {', '.join(GEOMETRIES)}")
    if cfg.objective not in OBJECTIVES:
        raise UsageError(f"--objective must be one of {', '.join(OBJECTIVES)}")
    if cfg.mode not in ("traveling", "c", "d"):
        raise UsageError(f"--mode must be traveling, c or d, got {cfg.mode!r}")
    if cfg.suites is not None:
        bad = [s for s in cfg.suites if s not in SUITES]
        if bad:
            raise UsageError(f"unknown suites {bad}; choose from {', '.join(SUITES)}")
    axes = cfg.axes()
    names = [a.name for a in axes]
    allowed = SWEEPABLE[cfg.command]
    for name in names:
        if name not in allowed:
            raise UsageError(f"cannot sweep {name!r} in {cfg.command}; choose from {', '.join(allowed) or 'nothing'}")
    if len(set(names)) != len(names):
        raise UsageError(f"parameter swept twice: {names}")
    if "T" in names and "g2T" in names:
        raise UsageError("sweep either T or g2T, not both")
    if cfg.command == "map" and not {"phi"} <= set(names):
        raise UsageError("map needs a phi sweep and a T or g2T sweep")
    if cfg.command == "map" and not ({"T", "g2T"} & set(names)):
        raise UsageError("map needs a phi sweep and a T or g2T sweep")
    if cfg.command == "optimize" and not axes:
        raise UsageError("optimize needs at least one --sweep axis as search box")
    try:
        cfg.params()
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# --------------------------------------------------------------------------
# point evaluation (top level so that worker processes can import them)

def _point_values(cfg: RunConfig, point: dict) -> tuple[SystemParams, float]:
    """System parameters and pulse duration at one sweep point, with preset ties."""
    vals = {k: getattr(cfg, k) for k in PARAM_FIELDS}
    T = cfg.T
    for name, v in point.items():
        if name in PARAM_FIELDS:
            vals[name] = v
        elif name == "T":
            T = v
    if cfg.command == "map" and cfg.preset in ("fig5a", "fig5b", "fig5c", "fig5d"):
        dT, DT = PANELS[cfg.preset[-1]]
        vals["delta"], vals["Delta"] = dT / T, DT / T
    if "g2T" in point:
        vals["g2"] = point["g2T"] / T
    if cfg.preset == "fig3" and "phi" not in point:
        vals["phi"] = -math.atan(vals["delta"] / vals["g2"]) if vals["g2"] > 0 else 0.0
    if cfg.preset == "fig4" and "phi" not in point:
        ratio = vals["Delta"] / vals["g2"] if vals["g2"] > 0 else 0.0
        if abs(ratio) > 1:
            raise UsageError(f"fig4 needs |Delta| <= g2, got Delta/g2 = {ratio}")
        vals["phi"] = -math.asin(ratio)
    if cfg.preset in ("fig6", "fig7"):
        vals["Delta"] = vals["g2"] * abs(math.sin(vals["phi"]))
    return SystemParams(**vals), T


def _eval_spectrum(cfg: RunConfig, point: dict) -> dict:
    p, _ = _point_values(cfg, point)
    w = point.get("omega", 0.0)
    markov = not cfg.non_markov
    row = {}
    if cfg.mode == "traveling":
        t, r = linear.traveling_transfer(p, markov)
        tw, rw = complex(t(w)), complex(r(w))
        row.update({"T": abs(tw) ** 2, "arg_t/rad": math.atan2(tw.imag, tw.real),
                    "arg_r/rad": math.atan2(rw.imag, rw.real)})
    else:
        ratio = complex(linear.standing_wave_transfer(p, cfg.mode, markov)(w))
        row.update({"abs": abs(ratio), "arg/rad": math.atan2(ratio.imag, ratio.real)})
    if p.g2 > 0:
        row = {"omega/g2": w / p.g2, "phi/rad": p.phi, **row}
    return row


def _eval_map(cfg: RunConfig, point: dict) -> dict:
    p, T = _point_values(cfg, point)
    if cfg.non_markov or cfg.pulse != "square":
        pulse = make_pulse(cfg.pulse, T, default_grid(T, p.g2, cfg.grid_n, cfg.pulse))
        value = linear.pulse_transmission(p, pulse, markov=not cfg.non_markov)
    else:
        value = linear.square_pulse_transmission(p, T)
    return {"g2T": p.g2 * T, "deltaT": p.delta * T, "DeltaT": p.Delta * T, "transmission": float(value)}


def _eval_two_photon(cfg: RunConfig, point: dict, index: int = 0) -> dict:
    p, T = _point_values(cfg, point)
    pulse = make_pulse(cfg.pulse, T, default_grid(T, p.g2, cfg.grid_n, cfg.pulse))
    channels = GEOMETRIES[cfg.geometry](p, pulse)
    rep = channel_probabilities(channels, cfg.geometry)
    if cfg.dump:
        out = Path(cfg.dump)
        out.mkdir(parents=True, exist_ok=True)
        for name, wf in channels.items():
            np.save(out / f"point{index:05d}_{name}.npy", np.abs(wf.values) ** 2)
    row = {"g2T": p.g2 * T, "Delta": p.Delta, "delta": p.delta}
    row.update({f"P_{k}": v for k, v in rep.probabilities.items()})
    row.update({f"P_lin_{k}": v for k, v in rep.linear_probabilities.items()})
    row.update({"residual": rep.conservation_residual, "consistent": rep.consistent})
    return row


EVALUATORS = {"spectrum": _eval_spectrum, "map": _eval_map, "two-photon": _eval_two_photon}


def _evaluate(job):
    cfg, index, point = job
    if cfg.command == "two-photon":
        return _eval_two_photon(cfg, point, index)
    return EVALUATORS[cfg.command](cfg, point)


def sweep_points(cfg: RunConfig) -> list[dict]:
    axes = cfg.axes()
    if cfg.command == "spectrum" and "omega" not in [a.name for a in axes]:
        axes.append(SweepAxis("omega", 0.0, 0.0, 1))
    names = [a.name for a in axes]
    return [dict(zip(names, combo)) for combo in itertools.product(*(a.values() for a in axes))]


def run_sweep(cfg: RunConfig) -> list[dict]:
    """Evaluate every sweep point; rows come back in sweep order."""
    points = sweep_points(cfg)
    jobs = [(cfg, i, pt) for i, pt in enumerate(points)]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_evaluate, jobs, chunksize=max(1, len(jobs) // (4 * cfg.jobs))))
    else:
        results = [_evaluate(j) for j in jobs]
    return [{**pt, **res} for pt, res in zip(points, results)]


# --------------------------------------------------------------------------
# output

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    header = list(rows[0])
    for r in rows[1:]:
        header += [k for k in r if k not in header]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(k, "")) for k in header])
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit(cfg: RunConfig, rows: list[dict] | None = None, report: dict | None = None,
         default_format: str = "csv", stream=None) -> None:
    """Write results plus the resolved config.

    JSON output embeds the config; CSV output gets a sibling
    ``<out>.config.json`` (or a leading ``#`` line on stdout).
    """
    fmt = cfg.format or default_format
    config = _clean(cfg.as_dict())
    if fmt == "json":
        body = {"config": config, "results": _clean(report if report is not None else rows)}
        text = json.dumps(body, indent=2, sort_keys=True) + "\n"
        header = None
    else:
        text = _csv_text(_clean(rows if rows is not None else _report_rows(report)))
        header = "# config: " + json.dumps(config, sort_keys=True) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
        if header is not None:
            Path(cfg.out + ".config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    else:
        stream = stream or sys.stdout
        stream.write((header or "") + text)


def _report_rows(report) -> list[dict]:
    if isinstance(report, dict) and "trace" in report:
        return report["trace"]
    if isinstance(report, dict) and "suites" in report:
        return [{"suite": s["suite"], **c} for s in report["suites"] for c in s["checks"]]
    return [report]


# --------------------------------------------------------------------------
# commands

def cmd_spectrum(cfg: RunConfig) -> int:
    emit(cfg, rows=run_sweep(cfg))
    return EXIT_OK


def cmd_map(cfg: RunConfig) -> int:
    emit(cfg, rows=run_sweep(cfg))
    return EXIT_OK


def cmd_two_photon(cfg: RunConfig) -> int:
    rows = run_sweep(cfg)
    emit(cfg, rows=rows)
    return EXIT_OK


def cmd_optimize(cfg: RunConfig) -> int:
    axes = [Axis(a.name, a.lo, a.hi, a.n) for a in cfg.axes()]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergenceWarning)
        res = optimize_operating_point(cfg.objective, cfg.params(), cfg.T, axes, cfg.pulse,
                                       cfg.grid_n, cfg.geometry if cfg.objective == "linearity" else None,
                                       cfg.budget)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    emit(cfg, report=res.as_dict(), default_format="json")
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    options = {
        "oracle": {"n": cfg.oracle_n},
        "unitarity": {"seed": cfg.seed},
        "cavity": {"seed": cfg.seed},
        "cancellation": {"seed": cfg.seed},
        "conservation": {"seed": cfg.seed, "n": cfg.grid_n},
    }
    results = run_suites(cfg.suites, **options)
    report = {"passed": all(r.passed for r in results), "suites": [r.as_dict() for r in results]}
    emit(cfg, report=report, default_format="json")
    for r in results:
        print(f"{r.name}: {'passed' if r.passed else 'FAILED'} in {r.runtime:.2f} s", file=sys.stderr)
        if not r.passed:
            detail = r.error or "; ".join(f"{c.name}: observed {c.observed:.3g}, expected {c.expected:.3g} "
                                          f"+- {c.tolerance:.1g}" for c in r.failures())
            print(f"FAILED {r.name}: {detail}", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


HANDLERS = {"spectrum": cmd_spectrum, "map": cmd_map, "two-photon": cmd_two_photon,
            "optimize": cmd_optimize, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("system")
    for name in PARAM_FIELDS:
        g.add_argument(f"--{name}", type=float, default=None)
    g = common.add_argument_group("pulse and grid")
    g.add_argument("--pulse", choices=("square", "gaussian"), default=None)
    g.add_argument("--T", type=float, default=None, help="pulse duration")
    g.add_argument("--grid-n", dest="grid_n", type=int, default=None, help="number of time nodes")
    g = common.add_argument_group("run")
    g.add_argument("--sweep", dest="sweeps", action="append", default=None, metavar="PARAM:LO:HI:N",
                   help="sweep axis, repeatable")
    g.add_argument("--config", default=None, help="JSON config; flags override its values")
    g.add_argument("--out", default=None, help="output path (default stdout)")
    g.add_argument("--format", choices=("csv", "json"), default=None)
    g.add_argument("--non-markov", dest="non_markov", action="store_true", default=None,
                   help="frequency-dependent separation phase (linear commands only)")
    g.add_argument("--preset", default=None, help=f"figure preset: {', '.join(PRESETS)}")
    g.add_argument("--jobs", type=int, default=None, help="worker processes for sweeps")

    parser = argparse.ArgumentParser(
        prog="twotls", description="Photon scattering from two emitters in a waveguide.",
        epilog="exit codes: 0 success, 1 usage error, 2 numerical precondition, 3 validation failure")
    sub = parser.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("spectrum", parents=[common], help="single-photon transmission spectra")
    sp.add_argument("--mode", choices=("traveling", "c", "d"), default=None)
    sub.add_parser("map", parents=[common], help="square-pulse transmission over (phi, g2T)")
    tp = sub.add_parser("two-photon", parents=[common], help="two-photon channel probabilities")
    tp.add_argument("--geometry", choices=tuple(GEOMETRIES), default=None)
    tp.add_argument("--dump", default=None, help="directory for |f|^2 arrays (.npy)")
    op = sub.add_parser("optimize", parents=[common], help="operating-point search")
    op.add_argument("--objective", choices=tuple(OBJECTIVES), default=None)
    op.add_argument("--geometry", choices=tuple(GEOMETRIES), default=None)
    op.add_argument("--budget", type=int, default=None, help="maximum objective evaluations")
    vp = sub.add_parser("validate", parents=[common], help="invariant and oracle suites")
    vp.add_argument("--suites", nargs="+", default=None, choices=tuple(SUITES))
    vp.add_argument("--oracle-n", dest="oracle_n", type=int, default=None)
    vp.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return HANDLERS[cfg.command](cfg)
    except GridError as exc:
        print(f"error: numerical precondition: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
