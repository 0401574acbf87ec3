"""Command-line entry point: ``grasshopper <command> ...``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 130 interrupted (a checkpoint is written first when a run is in
progress).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import signal
import sys
import tempfile
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import analysis, analytic, oracle
from .analytic import format_float, unit_ball_radius
from .errors import GrasshopperError, StarShapeError
from .lattice import (
    Lattice,
    build_kernel,
    dump_configuration,
    init_shape,
    load_configuration,
    move_delta,
    total_probability,
)
from .optimizer import (
    AnnealSchedule,
    TemperingConfig,
    anneal,
    calibrate_schedule,
    parallel_tempering,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERRUPTED = 0, 1, 2, 130
OUTPUT_ENV = "GRASSHOPPER_OUTPUT_DIR"


class UsageError(Exception):
    pass


class Interrupted(Exception):
    pass


# --- config files -----------------------------------------------------------

_POS = {"type": "number", "exclusiveMinimum": 0}
_COUNT = {"type": "integer", "minimum": 0}

RUN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["mode", "dimension", "M"],
    "properties": {
        "mode": {"enum": ["anneal", "tempering"]},
        "dimension": {"enum": [2, 3]},
        "d": _POS,
        "d_grid": {"type": "array", "items": _POS},
        "d_unit": {"enum": ["absolute", "R0"]},
        "M": {"type": "integer", "minimum": 2},
        "room": {"type": "number", "minimum": 1},
        "init": {
            "type": "object",
            "additionalProperties": False,
            "required": ["shape"],
            "properties": {
                "shape": {"enum": ["ball", "shell", "cog", "random_blob"]},
                "rho": {"type": "number", "minimum": 0},
                "rho_unit": {"enum": ["absolute", "R0"]},
                "n": {"type": "integer", "minimum": 2},
                "eps": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "density": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T_start": _POS,
                "T_end": _POS,
                "start_factor": _POS,
                "end_ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "steps_per_temperature": _COUNT,
                "cooling_factor": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "max_sweeps": _COUNT,
            },
        },
        "tempering": {
            "type": "object",
            "additionalProperties": False,
            "required": ["swap_interval"],
            "properties": {
                "temperatures": {"type": "array", "items": _POS, "minItems": 1},
                "T_low": _POS,
                "T_high": _POS,
                "replicas": {"type": "integer", "minimum": 1},
                "swap_interval": _COUNT,
                "sweeps": _COUNT,
            },
        },
        "p_local": {"type": "number", "minimum": 0, "maximum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "checkpoint_every": _COUNT,
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"prefix": {"type": "string", "minLength": 1}, "dir": {"type": "string"}},
        },
    },
}


def load_run_config(path, sweep=False):
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, RUN_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"invalid config at {where}: {exc.message}") from exc
    if sweep and "d_grid" not in cfg:
        raise UsageError("sweep configs need a d_grid")
    if not sweep and "d" not in cfg:
        raise UsageError("solve configs need d")
    if cfg["mode"] == "tempering" and "tempering" not in cfg:
        raise UsageError("tempering mode needs a tempering block")
    if cfg.get("init", {}).get("shape") == "cog" and cfg["dimension"] != 2:
        raise UsageError("cog initial shapes are 2D only")
    if cfg.get("init", {}).get("shape") == "shell" and cfg["dimension"] != 3:
        raise UsageError("shell initial shapes are 3D only")
    return cfg


def config_digest(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


# --- io helpers -------------------------------------------------------------

def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _log(path, message):
    # timestamps live only here so primary outputs stay byte-stable
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as fh:
        fh.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {message}\n")


def output_dir(args, cfg=None):
    if getattr(args, "output_dir", None):
        return Path(args.output_dir)
    if cfg is not None and cfg.get("output", {}).get("dir"):
        return Path(cfg["output"]["dir"])
    return Path(os.environ.get(OUTPUT_ENV, "."))


class StopFlag:
    """SIGINT handler that asks the optimizer to stop at the next sweep boundary."""

    def __init__(self):
        self.raised = False
        self._old = None

    def __call__(self):
        return self.raised

    def __enter__(self):
        def handler(signum, frame):
            self.raised = True

        try:
            self._old = signal.signal(signal.SIGINT, handler)
        except ValueError:
            self._old = None
        return self

    def __exit__(self, *exc):
        if self._old is not None:
            signal.signal(signal.SIGINT, self._old)
        return False


# --- runs -------------------------------------------------------------------

def _absolute(value, unit, N):
    return value * unit_ball_radius(N) if unit == "R0" else value


def prepare_run(cfg, d):
    N, M = cfg["dimension"], cfg["M"]
    init = dict(cfg.get("init", {"shape": "ball"}))
    shape = init.pop("shape")
    if "rho" in init:
        init["rho"] = _absolute(init["rho"], init.pop("rho_unit", "absolute"), N)
    init.pop("rho_unit", None)
    default_room = 1.0
    if shape == "shell":
        default_room = oracle.ShellSpec(init.get("rho", 0.0)).outer_radius / unit_ball_radius(3) + 0.05
    elif shape == "cog":
        default_room = 1.0 + init.get("eps", 0.0) / unit_ball_radius(2) + 0.05
    elif shape == "random_blob":
        default_room = init.get("density", 0.5) ** (-1.0 / N) + 0.05
    lattice = Lattice.for_problem(N, d, M, room=cfg.get("room", default_room))
    kernel = build_kernel(lattice, analytic.ProblemSpec(N, d), M)
    config = init_shape(lattice, M, shape, **init)
    return lattice, kernel, config


def _schedule(cfg, config, kernel, seed):
    block = dict(cfg.get("schedule", {}))
    if "T_start" in block:
        T_start = block["T_start"]
        return AnnealSchedule(
            T_start=T_start,
            T_end=block.get("T_end", block.get("end_ratio", 1e-4) * T_start),
            steps_per_temperature=block.get("steps_per_temperature", config.occupied_count),
            cooling_factor=block.get("cooling_factor", 0.95),
            max_sweeps=block.get("max_sweeps"),
        )
    return calibrate_schedule(
        config, kernel, seed=seed,
        start_factor=block.get("start_factor", 10.0),
        end_ratio=block.get("end_ratio", 1e-4),
        cooling_factor=block.get("cooling_factor", 0.95),
        steps_per_temperature=block.get("steps_per_temperature"),
        max_sweeps=block.get("max_sweeps"),
    )


def _tempering(cfg):
    block = cfg["tempering"]
    if "temperatures" in block:
        temps = block["temperatures"]
    elif {"T_low", "T_high", "replicas"} <= block.keys():
        temps = np.geomspace(block["T_low"], block["T_high"], block["replicas"]).tolist()
        if block["replicas"] == 1:
            temps = [block["T_low"]]
    else:
        raise UsageError("tempering needs temperatures or T_low/T_high/replicas")
    return TemperingConfig(tuple(temps), block["swap_interval"], block.get("sweeps", 100))


def run_point(cfg, d, prefix, outdir, threads, stop, resume_state=None):
    """Run one optimization and write ``<prefix>.json`` and ``<prefix>.dump``.

    Returns the summary dict; raises :class:`Interrupted` after writing a
    checkpoint if ``stop`` fires.
    """
    seed = cfg.get("seed", 0)
    lattice, kernel, initial = prepare_run(cfg, d)
    ckpt_path = outdir / f"{prefix}.checkpoint.json"
    digest = config_digest(cfg)
    extras = {}

    def save_checkpoint(state):
        atomic_write(ckpt_path, json.dumps({"config_digest": digest, "d": d, "extras": extras, "state": state}))

    p_local = cfg.get("p_local", 0.8)
    every = cfg.get("checkpoint_every", 0)
    if cfg["mode"] == "anneal":
        schedule = _schedule(cfg, initial, kernel, seed)
        extras["schedule"] = schedule.__dict__
        record = anneal(initial, kernel, schedule, seed, resume=resume_state, checkpoint=save_checkpoint,
                        checkpoint_every=every, should_stop=stop, p_local=p_local)
    else:
        tempering = _tempering(cfg)
        initials = [initial] + [initial.copy() for _ in range(tempering.replicas - 1)]
        record = parallel_tempering(initials, kernel, tempering, seed, threads=threads, resume=resume_state,
                                    checkpoint=save_checkpoint, checkpoint_every=every, should_stop=stop,
                                    p_local=p_local)
    if not record.completed:
        save_checkpoint(record.state)
        raise Interrupted(str(ckpt_path))
    best = record.best_configuration
    summary = summarize(best, d)
    payload = record.to_json()
    payload["summary"] = summary
    payload["config_digest"] = digest
    atomic_write(outdir / f"{prefix}.json", dumps(payload))
    atomic_write(outdir / f"{prefix}.dump",
                 dump_configuration(best, d, seed=seed, probability=record.best_probability))
    if ckpt_path.exists():
        ckpt_path.unlink()
    summary["best_probability"] = record.best_probability
    return summary


def summarize(config, d):
    comps = analysis.connected_components(config)
    out = {"components": len(comps), "dominant_mode": None, "mode_amplitude": None}
    if config.lattice.dimension == 2:
        try:
            modes = analysis.cog_spectrum(config)
            out["dominant_mode"], out["mode_amplitude"] = modes[0]
            out["regime"] = "cogwheel"
        except StarShapeError:
            out["regime"] = "disconnected" if len(comps) > 1 else "not star-shaped"
        out["isotropic"] = None
        out["cavities"] = None
    else:
        out["cavities"] = analysis.cavity_count(config)
        out["regime"] = analysis.classify_regime(config)
        out["isotropic"] = out["regime"] in ("solid ball", "shell")
    return out


# --- commands ---------------------------------------------------------------

def _emit(text):
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _grid(spec):
    start, stop, num = spec
    return np.linspace(float(start), float(stop), int(num))


def cmd_analytic(args):
    kind = args.kind
    if kind == "disk":
        if args.curve:
            _emit(_probability_csv(_grid(args.curve), analytic.disk_probability))
        else:
            _emit(format_float(analytic.disk_probability(_req(args, "d"))))
    elif kind == "ball":
        if args.curve:
            _emit(_probability_csv(_grid(args.curve), analytic.ball_probability))
        else:
            _emit(format_float(analytic.ball_probability(_req(args, "d"))))
    elif kind == "halfspace":
        N = _req(args, "N")
        d = args.d if args.d is not None else 1.0
        if args.curve:
            kd = _grid(args.curve)
            coeff = np.array([analytic.halfspace_stability(x / d, d, N) for x in kd])
            curve = analytic.StabilityCurve("half_space", float(N), kd, coeff, dimension=N, meta={"d": d})
            _emit(curve.to_csv())
        else:
            k = args.k if args.k is not None else _req(args, "kd") / d
            _emit(format_float(analytic.halfspace_stability(k, d, N)))
    elif kind == "diskmode":
        n = _req(args, "n")
        if args.curve:
            _emit(analytic.disk_curve(n, _grid(args.curve)).to_csv())
        else:
            _emit(format_float(analytic.disk_stability(n, _req(args, "d"))))
    elif kind == "firstzero":
        _emit(format_float(analytic.disk_first_zero(_req(args, "n"))))
    elif kind == "modes":
        table = analytic.most_unstable_modes(_req(args, "d"), args.nmax)
        lines = ["mode,coefficient"] + [f"{n},{format_float(v)}" for n, v in table[: args.top]]
        _emit("\n".join(lines))
    return EXIT_OK


def _req(args, name):
    value = getattr(args, name)
    if value is None:
        raise UsageError(f"--{name} is required here")
    return value


def _probability_csv(ds, fn):
    lines = ["d,probability"] + [f"{format_float(d)},{format_float(fn(d))}" for d in ds]
    return "\n".join(lines)


def _set_threads(n):
    if n:
        import numba

        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def cmd_solve(args):
    cfg = load_run_config(args.config)
    outdir = output_dir(args, cfg)
    prefix = cfg.get("output", {}).get("prefix", Path(args.config).stem)
    d = _absolute(cfg["d"], cfg.get("d_unit", "absolute"), cfg["dimension"])
    resume = _read_checkpoint(outdir / f"{prefix}.checkpoint.json", cfg) if args.resume else None
    log = outdir / f"{prefix}.log"
    _log(log, f"solve start config={args.config} resume={bool(resume)}")
    with StopFlag() as stop:
        try:
            summary = run_point(cfg, d, prefix, outdir, args.threads, stop, resume)
        except Interrupted as exc:
            _log(log, f"interrupted; checkpoint {exc}")
            print(f"interrupted; checkpoint written to {exc}", file=sys.stderr)
            return EXIT_INTERRUPTED
    _log(log, "solve done")
    line = f"best_probability {format_float(summary['best_probability'])}"
    if cfg["dimension"] == 2 and summary["dominant_mode"] is not None:
        line += f"\ndominant_mode {summary['dominant_mode']}"
    else:
        line += f"\nregime {summary['regime']}"
    _emit(line)
    return EXIT_OK


def _read_checkpoint(path, cfg):
    if not path.exists():
        raise UsageError(f"no checkpoint at {path}")
    data = json.loads(path.read_text())
    if data.get("config_digest") != config_digest(cfg):
        raise UsageError("checkpoint was written for a different config")
    return data["state"]


SWEEP_COLUMNS = ["d", "best_probability", "components", "cavities", "dominant_mode",
                 "mode_amplitude", "isotropic", "regime"]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def cmd_sweep(args):
    cfg = load_run_config(args.config, sweep=True)
    outdir = output_dir(args, cfg)
    prefix = cfg.get("output", {}).get("prefix", Path(args.config).stem)
    log = outdir / f"{prefix}.log"
    rows = []
    _log(log, f"sweep start points={len(cfg['d_grid'])}")
    with StopFlag() as stop:
        for i, d_raw in enumerate(cfg["d_grid"]):
            d = _absolute(d_raw, cfg.get("d_unit", "absolute"), cfg["dimension"])
            point = f"{prefix}_{i:03d}"
            done = outdir / f"{point}.json"
            point_cfg = {k: v for k, v in cfg.items() if k != "d_grid"} | {"d": d_raw}
            summary = None
            if done.exists():
                stored = json.loads(done.read_text())
                if stored.get("config_digest") == config_digest(point_cfg):
                    summary = stored["summary"] | {"best_probability": stored["best_probability"]}
            if summary is None:
                ckpt = outdir / f"{point}.checkpoint.json"
                resume = _read_checkpoint(ckpt, point_cfg) if ckpt.exists() else None
                try:
                    summary = run_point(point_cfg, d, point, outdir, args.threads, stop, resume)
                except Interrupted as exc:
                    _log(log, f"interrupted at point {i}; checkpoint {exc}")
                    print(f"interrupted; checkpoint written to {exc}", file=sys.stderr)
                    return EXIT_INTERRUPTED
                _log(log, f"point {i} d={d!r} done")
            rows.append([float(d_raw)] + [summary.get(c) for c in SWEEP_COLUMNS[1:]])
    lines = [",".join(SWEEP_COLUMNS)] + [",".join(_cell(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    atomic_write(outdir / f"{prefix}.csv", text)
    _emit(text)
    return EXIT_OK


def cmd_verify(args):
    target = args.target
    if target == "ball":
        d, M = _req(args, "d"), args.M or 40000
        (row,) = analysis.discretization_report("ball", d, [M])
        deviation, tol = abs(row[4]), args.tol if args.tol is not None else 0.01
        report = {"target": "ball", "d": d, "M": M, "h": row[1], "discrete": row[2], "continuum": row[3],
                  "relative_deviation": row[4]}
    elif target == "shell":
        d, M = _req(args, "d"), args.M or 40000
        rho = args.rho if args.rho is not None else oracle.optimal_shell_radius(d)[0]
        (row,) = analysis.discretization_report("shell", d, [M], rho=rho)
        deviation, tol = abs(row[4]), args.tol if args.tol is not None else 0.01
        report = {"target": "shell", "d": d, "M": M, "rho": rho, "h": row[1], "discrete": row[2],
                  "continuum": row[3], "relative_deviation": row[4]}
    elif target == "halfspace":
        N, kd = _req(args, "N"), _req(args, "kd")
        numeric = oracle.halfspace_stability_numeric(kd, 1.0, N)
        closed = analytic.halfspace_stability(kd, 1.0, N)
        deviation, tol = abs(numeric - closed), args.tol if args.tol is not None else 1e-6
        report = {"target": "halfspace", "N": N, "kd": kd, "numeric": numeric, "closed_form": closed,
                  "absolute_deviation": numeric - closed}
    elif target == "diskpert":
        n, d, eps = _req(args, "n"), _req(args, "d"), _req(args, "eps")
        numeric = oracle.perturbation_coefficient({n: 1.0}, d, eps)
        closed = analytic.disk_stability(n, d)
        deviation, tol = abs(numeric - closed) / abs(closed), args.tol if args.tol is not None else 0.02
        report = {"target": "diskpert", "n": n, "d": d, "eps": eps, "numeric": numeric, "closed_form": closed,
                  "relative_deviation": (numeric - closed) / closed}
    else:
        N, d, M = _req(args, "N"), _req(args, "d"), args.M or 2000
        worst = delta_trials(N, d, M, args.trials, args.seed)
        deviation, tol = worst, args.tol if args.tol is not None else 1e-12
        report = {"target": "delta", "N": N, "d": d, "M": M, "trials": args.trials,
                  "worst_relative_deviation": worst}
    report["tolerance"] = tol
    report["passed"] = bool(deviation <= tol)
    _emit(json.dumps(report, sort_keys=True))
    if not report["passed"]:
        print(f"verification failed: deviation {deviation!r} exceeds {tol!r}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def delta_trials(N, d, M, trials, seed=0):
    """Worst relative mismatch between move_delta and a full recompute over random moves."""
    lattice = Lattice.for_problem(N, d, M, room=1.3)
    kernel = build_kernel(lattice, d, M)
    config = init_shape(lattice, M, "random_blob", seed=seed)
    rng = np.random.default_rng(seed)
    allowed = np.flatnonzero(lattice.allowed_mask())
    p = total_probability(config, kernel)
    worst = 0.0
    done = 0
    while done < trials:
        src = int(config.cells[rng.integers(M)])
        dst = int(allowed[rng.integers(allowed.size)])
        if config.grid[dst]:
            continue
        dp = move_delta(config, kernel, src, dst)
        config.apply_move(src, dst)
        p_new = total_probability(config, kernel)
        worst = max(worst, abs(p_new - (p + dp)) / max(abs(p_new), 1e-300))
        p = p_new
        done += 1
    return worst


def cmd_analyze(args):
    try:
        config, header = load_configuration(Path(args.dump).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read dump: {exc}") from exc
    d = header.get("d")
    N = config.lattice.dimension
    expected = None
    if args.expect_shell:
        if N != 3:
            raise UsageError("--expect-shell needs a 3D dump")
        rho = oracle.optimal_shell_radius(d)[0]
        expected = [rho, oracle.ShellSpec(rho).outer_radius]
    report = analysis.radial_histogram(config, bins=args.bins, expected=expected)
    report.components = len(analysis.connected_components(config))
    report.cavities = analysis.cavity_count(config) if N == 3 else None
    note = None
    if N == 2:
        try:
            report.modes = analysis.cog_spectrum(config)[: args.top]
        except StarShapeError as exc:
            note = str(exc)
    out = report.to_json() | {"d": d, "M": config.occupied_count}
    if note:
        out["spectrum_error"] = note
    if N == 3:
        out["regime"] = analysis.classify_regime(config)
    text = dumps(out)
    if args.out:
        base = Path(args.out)
        atomic_write(base.with_suffix(".json"), text)
        atomic_write(base.parent / f"{base.name}_hist.csv", report.histogram_csv())
        if N == 2 and report.modes:
            atomic_write(base.parent / f"{base.name}_modes.csv", analysis.spectrum_csv(report.modes))
    _emit(text)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="grasshopper", description="Grasshopper lawn probabilities, stability and optimization.")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (results do not depend on it)")
    parser.add_argument("--output-dir", default=None, help=f"output directory (default ${OUTPUT_ENV} or .)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="closed-form probabilities and stability coefficients")
    p.add_argument("kind", choices=["disk", "ball", "halfspace", "diskmode", "firstzero", "modes"])
    p.add_argument("--d", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--k", type=float)
    p.add_argument("--kd", type=float)
    p.add_argument("--nmax", type=int, default=18)
    p.add_argument("--top", type=int, default=2, help="rows printed by 'modes'")
    p.add_argument("--curve", nargs=3, metavar=("START", "STOP", "NUM"),
                   help="emit a CSV over an evenly spaced grid instead of one value")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("solve", help="optimize one lawn from a JSON config")
    p.add_argument("config")
    p.add_argument("--resume", action="store_true", help="continue from the checkpoint next to the outputs")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="optimize over a d grid; resumable per point")
    p.add_argument("config")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="oracle and discretization checks")
    p.add_argument("target", choices=["ball", "shell", "halfspace", "diskpert", "delta"])
    p.add_argument("--d", type=float)
    p.add_argument("--M", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--kd", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("analyze", help="boundary, histogram and spectrum of a configuration dump")
    p.add_argument("dump")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--expect-shell", action="store_true", help="compare radii with the optimal 3-shell")
    p.add_argument("--out", help="write <out>.json and CSV files")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        _set_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GrasshopperError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
