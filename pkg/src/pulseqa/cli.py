"""Command-line entry point.

Units everywhere: times in hbar/Delta, energies (eps, C) in Delta. Outputs are
CSV for tabular data and JSON for summaries; every file is written in one go
after the computation succeeds, so a failed run leaves nothing half-written.
Ensemble runs additionally keep a resumption manifest while they progress.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .dynamics import evolve, evolve_many, min_gap
from .errors import InputError, NumericalError
from .model import AnnealSpec, PulseSchedule, SpinGlassInstance, generate_instance
from .suddentm import approx_from_spec, pulse_inside, tm_solve
from .sweep import (
    PRESETS,
    Bounds,
    InstanceResult,
    Sampling,
    default_threads,
    ensemble_seeds,
    instance_schedules,
    optimize_instance,
    relative_sp,
    run_instances,
    summarize,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

ENSEMBLE_COLUMNS = ["instance_seed", "p_s0", "p_sp_max", "p_sp_av", "std", "best_tc", "best_td", "best_c"]
SCALING_COLUMNS = ["n", "r_sp_max", "r_sp_av", "std_max", "std_av", "p_s0_mean"]


# -- output helpers ---------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def json_text(data) -> str:
    return json.dumps(data, indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_outputs(files: dict[Path, str]) -> None:
    """Write every file via a temporary sibling and rename; clean up on failure."""
    done = []
    try:
        for path, text in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".part")
            try:
                with os.fdopen(fd, "w", newline="") as fh:
                    fh.write(text)
                os.replace(tmp, path)
            except BaseException:
                Path(tmp).unlink(missing_ok=True)
                raise
            done.append(path)
    except BaseException:
        for path in done:
            path.unlink(missing_ok=True)
        raise


# -- argument parsing -------------------------------------------------------

def _positive(kind):
    def parse(text):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
        return value
    return parse


def _pair(text):
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from None
    return lo, hi


def _n_range(text):
    try:
        if ":" in text:
            lo, hi = (int(x) for x in text.split(":"))
            return list(range(lo, hi + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI or a comma list, got {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file of option values; explicit flags win")
    p.add_argument("--threads", type=_positive(int),
                   help="worker processes (default: $PULSEQA_THREADS, else available cores)")


def _add_sampling(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pulse sampling")
    g.add_argument("--preset", choices=sorted(PRESETS),
                   help="named sampling protocol; explicit sampling flags below override its fields")
    g.add_argument("--strategy", choices=["grid", "uniform-random"], help="sampling strategy (default grid)")
    g.add_argument("--samples", help="sample count, or NTC,NTD,NC for a grid shape")
    g.add_argument("--tc-range", type=_pair, help="pulse centre range LO,HI as fractions of t_f")
    g.add_argument("--td-range", type=_pair, help="pulse duration range LO,HI as fractions of t_f")
    g.add_argument("--c-range", type=_pair, help="pulse amplitude range LO,HI in Delta")
    g.add_argument("--c-min-abs", type=float, help="smallest |C| (Delta) for two-sign random sampling")
    g.add_argument("--av-mode", choices=["union", "best-sign"],
                   help="P_SP,av over all samples, or the better of the C>0 / C<0 halves")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulseqa",
        description="Quantum annealing with a rectangular longitudinal pulse. "
                    "Times are in hbar/Delta, energies in Delta (Delta = 1).",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    for name, helptext in (("single-sweep", "single-qubit SP along C, t_D, or over a (C, t_D) grid"),
                           ("tm-compare", "transfer-matrix vs numerical SP table with agreement summary")):
        p = sub.add_parser(name, help=helptext, description=helptext)
        _add_common(p)
        p.add_argument("--eps", type=float, help="longitudinal field eps (Delta); required")
        p.add_argument("--tf", type=_positive(float), help="annealing time t_f (hbar/Delta); required")
        axes = ["C", "td", "contour"] if name == "single-sweep" else ["C", "td"]
        p.add_argument("--axis", choices=axes, help="swept parameter; required")
        p.add_argument("--min", type=float, help="sweep start (Delta for C, hbar/Delta for td)")
        p.add_argument("--max", type=float, help="sweep end (same units as --min)")
        p.add_argument("--steps", type=_positive(int), help="points along the sweep (default 100)")
        p.add_argument("--tc", type=float, help="pulse centre t_C (hbar/Delta, default t_f/2)")
        p.add_argument("--td", type=float, help="fixed pulse duration t_D (hbar/Delta) for --axis C")
        p.add_argument("--c", type=float, help="fixed pulse amplitude C (Delta) for --axis td")
        if name == "single-sweep":
            g = p.add_argument_group("contour grid")
            g.add_argument("--c-min", type=float, help="smallest C (Delta, default 0)")
            g.add_argument("--c-max", type=float, help="largest C (Delta, default 2)")
            g.add_argument("--c-steps", type=_positive(int), help="C grid points (default 100)")
            g.add_argument("--td-min", type=float, help="smallest t_D (hbar/Delta, default 0)")
            g.add_argument("--td-max", type=float,
                           help="largest t_D (hbar/Delta, default: widest window inside [0, t_f])")
            g.add_argument("--td-steps", type=_positive(int), help="t_D grid points (default 100)")
        p.add_argument("--integrator", choices=["reference", "batched"],
                       help="reference midpoint integrator (default) or the batched split-operator one")
        p.add_argument("--dt", type=_positive(float), help="time step (hbar/Delta)")
        p.add_argument("--out", type=Path, help="output CSV path; required")
        p.set_defaults(func=cmd_single_sweep if name == "single-sweep" else cmd_tm_compare)

    p = sub.add_parser("instance", help="traces and SP summary for one spin-glass instance",
                       description="Evolve one instance with and without a pulse; optionally trace "
                                   "populations and spectra, or optimise the pulse over a preset.")
    _add_common(p)
    p.add_argument("--instance", type=Path, help="instance JSON file (otherwise generated from --n/--seed)")
    p.add_argument("--n", type=int, help="qubit count for a generated instance")
    p.add_argument("--seed", type=int, help="instance seed for a generated instance")
    p.add_argument("--tf", type=_positive(float), help="annealing time t_f (hbar/Delta); required")
    p.add_argument("--pulse", type=float, nargs=3, metavar=("TC", "TD", "C"),
                   help="pulse centre (hbar/Delta), duration (hbar/Delta) and amplitude (Delta)")
    _add_sampling(p)
    p.add_argument("--trace", action="store_true", help="write P0/P1/norm traces and spectra as CSV")
    p.add_argument("--trace-samples", type=int, help="uniformly spaced trace times (default 201)")
    p.add_argument("--levels", type=_positive(int), help="energies per spectrum row (default: all)")
    p.add_argument("--dt", type=_positive(float), help="time step (hbar/Delta)")
    p.add_argument("--out", type=Path, help="output directory; required")
    p.set_defaults(func=cmd_instance)

    p = sub.add_parser("ensemble", help="pulse optimisation over a random ensemble",
                       description="Ensemble CSV plus statistics JSON. Interrupted runs resume from "
                                   "the manifest written next to the CSV.")
    _add_common(p)
    p.add_argument("--n", type=int, help="qubit count; required")
    p.add_argument("--count", type=int, help="number of instances (>= 2); required")
    p.add_argument("--tf", type=_positive(float), help="annealing time t_f (hbar/Delta); required")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    _add_sampling(p)
    p.add_argument("--bins", type=_positive(int), help="P_S0 bins on [0, 1] (default 10)")
    p.add_argument("--dt", type=_positive(float), help="time step (hbar/Delta, default t_f/1000)")
    p.add_argument("--out", type=Path, help="ensemble CSV path; required")
    p.add_argument("--stats", type=Path, help="statistics JSON path (default: CSV path with .json)")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("scaling", help="relative SP versus qubit count",
                       description="One ensemble per qubit count; one row of relative SP per n.")
    _add_common(p)
    p.add_argument("--n-range", type=_n_range, help="qubit counts LO:HI or a,b,c within [1, 12]; required")
    p.add_argument("--count", type=int, help="instances per qubit count (>= 2); required")
    p.add_argument("--tf", type=_positive(float), help="annealing time t_f (hbar/Delta); required")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    _add_sampling(p)
    p.add_argument("--dt", type=_positive(float), help="time step (hbar/Delta, default t_f/1000)")
    p.add_argument("--out", type=Path, help="output CSV path; required")
    p.set_defaults(func=cmd_scaling)
    return parser


def _sub_parser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv) -> argparse.Namespace:
    """Parse flags, then re-parse with the config file as defaults so flags win."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            config = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise InputError("config file must hold a JSON object")
        sub = _sub_parser(parser, args.command)
        known = {a.dest for a in sub._actions} - {"help", "config", "func"}
        unknown = sorted(set(config) - known)
        if unknown:
            raise InputError(f"unknown config keys for {args.command}: {unknown}")
        config = {k.replace("-", "_"): v for k, v in config.items()}
        for key in ("tc_range", "td_range", "c_range"):
            if key in config:
                config[key] = tuple(config[key])
        sub.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise InputError(f"missing required option(s): {', '.join(missing)}")


def _or(value, default):
    return default if value is None else value


_NOT_ECHOED = {"func", "config", "threads", "out", "stats"}


def effective_config(args) -> dict:
    """Options that determine the results; output paths and thread count are left out."""
    out = {}
    for key, value in vars(args).items():
        if key in _NOT_ECHOED:
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, tuple):
            value = list(value)
        out[key] = value
    return out


def resolve_sampling(args) -> Sampling | None:
    """Preset (if any) with explicit sampling flags applied on top."""
    explicit = [args.strategy, args.samples, args.tc_range, args.td_range, args.c_range,
                args.c_min_abs, args.av_mode]
    if args.preset is None and all(v is None for v in explicit):
        return None
    base = PRESETS[args.preset] if args.preset else Sampling()
    b = base.bounds
    bounds = Bounds(tc=_or(args.tc_range, b.tc), td=_or(args.td_range, b.td), c=_or(args.c_range, b.c),
                    c_min_abs=_or(args.c_min_abs, b.c_min_abs))
    count = base.count
    if args.samples is not None:
        parts = str(args.samples).split(",")
        try:
            values = [int(x) for x in parts]
        except ValueError:
            raise InputError(f"--samples must be an integer or NTC,NTD,NC, got {args.samples!r}") from None
        count = values[0] if len(values) == 1 else tuple(values)
    return Sampling(_or(args.strategy, base.strategy), count, bounds, _or(args.av_mode, base.av_mode))


# -- single-qubit sweeps ----------------------------------------------------

def _single_qubit_points(args) -> tuple[SpinGlassInstance, list[float], list[PulseSchedule]]:
    _require(args, "eps", "tf", "axis", "out")
    tc = _or(args.tc, args.tf / 2)
    steps = _or(args.steps, 100)
    if args.axis == "C":
        _require(args, "td")
        lo, hi = _or(args.min, 0.0), _or(args.max, 6.0)
        values = [float(x) for x in np.linspace(lo, hi, steps)] if steps > 1 else [lo]
        pulses = [PulseSchedule(tc, args.td, c) for c in values]
    else:
        _require(args, "c")
        lo, hi = _or(args.min, args.tf / steps), _or(args.max, args.tf)
        values = [float(x) for x in np.linspace(lo, hi, steps)] if steps > 1 else [lo]
        pulses = [PulseSchedule(tc, td, args.c) for td in values]
    if lo > hi:
        raise InputError(f"--min {lo} exceeds --max {hi}")
    return SpinGlassInstance.single(args.eps), values, pulses


def _numeric_sp(inst, t_f, pulses, integrator, dt) -> np.ndarray:
    if integrator == "batched":
        return evolve_many(inst, t_f, pulses, dt)
    return np.array([evolve(AnnealSpec(inst, t_f, p), dt).sp for p in pulses])


def _tm_row(inst, t_f, pulse) -> tuple[float | None, float | None]:
    if not pulse_inside(pulse, t_f):
        return None, None
    spec = AnnealSpec(inst, t_f, pulse)
    return tm_solve(spec).sp, approx_from_spec(spec)


def _comparison(args):
    inst, values, pulses = _single_qubit_points(args)
    num = _numeric_sp(inst, args.tf, pulses, _or(args.integrator, "reference"), args.dt)
    rows = []
    for v, p, sp in zip(values, pulses, num):
        tm, appr = _tm_row(inst, args.tf, p)
        rows.append((v, sp, tm, appr))
    return rows


def cmd_single_sweep(args) -> dict:
    if args.axis == "contour":
        _require(args, "eps", "tf", "out")
        tc = _or(args.tc, args.tf / 2)
        c_values = np.linspace(_or(args.c_min, 0.0), _or(args.c_max, 2.0), _or(args.c_steps, 100))
        td_max = _or(args.td_max, 2 * min(tc, args.tf - tc))
        td_values = np.linspace(_or(args.td_min, 0.0), td_max, _or(args.td_steps, 100))
        pulses = [PulseSchedule(tc, float(td), float(c)) for c in c_values for td in td_values]
        inst = SpinGlassInstance.single(args.eps)
        num = _numeric_sp(inst, args.tf, pulses, _or(args.integrator, "reference"), args.dt)
        rows = [(p.c, p.t_d, sp) for p, sp in zip(pulses, num)]
        write_outputs({args.out: csv_text(["C", "t_D", "sp_num"], rows)})
        return {"rows": len(rows), "max_sp": float(num.max())}
    rows = _comparison(args)
    write_outputs({args.out: csv_text(["sweep_param", "sp_num", "sp_tm", "sp_appr"], rows)})
    return {"rows": len(rows)}


def local_extrema(values) -> tuple[list[int], list[int]]:
    """Indices of interior strict local maxima and minima."""
    v = np.asarray(values, dtype=float)
    inner = np.arange(1, len(v) - 1)
    maxima = inner[(v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])]
    minima = inner[(v[1:-1] < v[:-2]) & (v[1:-1] <= v[2:])]
    return maxima.tolist(), minima.tolist()


def extrema_offsets(reference, other) -> list[int | None]:
    """For each interior maximum of ``reference``, the index distance to the nearest maximum of ``other``."""
    ref_max, _ = local_extrema(reference)
    other_max, _ = local_extrema(other)
    if not other_max:
        return [None for _ in ref_max]
    return [int(min(abs(k - j) for j in other_max)) for k in ref_max]


def cmd_tm_compare(args) -> dict:
    rows = _comparison(args)
    valid = [r for r in rows if r[2] is not None]
    num = [r[1] for r in valid]
    tm = [r[2] for r in valid]
    summary = {
        "points": len(rows),
        "tm_points": len(valid),
        "max_abs_dev": max((abs(a - b) for a, b in zip(num, tm)), default=None),
        "numeric_maxima": local_extrema(num)[0],
        "tm_maxima": local_extrema(tm)[0],
        "maxima_offsets": extrema_offsets(num, tm),
    }
    write_outputs({args.out: csv_text(["sweep_param", "sp_num", "sp_tm", "sp_appr"], rows)})
    return summary


# -- instance ---------------------------------------------------------------

def _load_instance(args) -> SpinGlassInstance:
    if args.instance is not None:
        if not args.instance.exists():
            raise InputError(f"instance file {args.instance} not found")
        return SpinGlassInstance.load(args.instance)
    _require(args, "n", "seed")
    if not 1 <= args.n <= 12:
        raise InputError(f"--n must be in [1, 12], got {args.n}")
    return generate_instance(args.n, args.seed)


def cmd_instance(args) -> dict:
    _require(args, "tf", "out")
    inst = _load_instance(args)
    t_f = args.tf
    sampling = resolve_sampling(args)
    summary = {"instance": inst.to_dict(), "t_f": t_f}
    gap = min_gap(AnnealSpec(inst, t_f))
    summary["gap"] = asdict(gap)

    pulse = PulseSchedule(*args.pulse) if args.pulse else None
    if sampling is not None:
        schedules = instance_schedules(t_f, sampling, inst.seed)
        opt = optimize_instance(inst, t_f, schedules, args.dt, sampling.av_mode)
        summary["optimisation"] = {
            "sampling": sampling.to_dict(), "p_s0": opt.p_s0, "p_sp_max": opt.p_sp_max,
            "p_sp_av": opt.p_sp_av, "std": opt.std, "best_pulse": asdict(opt.best_pulse),
            "improved_params_mean": opt.improved_params_mean, "n_improved": opt.n_improved,
        }
        pulse = pulse or opt.best_pulse

    dt = args.dt
    if dt is not None and dt > t_f / 100:
        raise InputError(f"--dt {dt} exceeds t_f/100")
    samples = _or(args.trace_samples, 201) if args.trace else 0
    if args.trace and samples < 2:
        raise InputError("--samples must be >= 2")
    runs = {"conventional": AnnealSpec(inst, t_f)}
    if pulse is not None:
        runs["pulsed"] = AnnealSpec(inst, t_f, pulse)
        summary["pulse"] = asdict(pulse)
    files = {}
    for label, spec in runs.items():
        res = evolve(spec, dt, trace_samples=samples, levels=args.levels)
        summary[f"sp_{label}"] = res.sp
        if args.trace:
            files[args.out / f"trace_{label}.csv"] = csv_text(["t", "P0", "P1", "norm"], res.trace)
            k = res.spectrum.shape[1] - 1
            files[args.out / f"spectrum_{label}.csv"] = csv_text(["t"] + [f"E{i}" for i in range(k)], res.spectrum)
    summary["config"] = effective_config(args)
    files[args.out / "summary.json"] = json_text(summary)
    write_outputs(files)
    return {k: v for k, v in summary.items() if k.startswith("sp_")}


# -- ensembles --------------------------------------------------------------

def _result_record(index: int, r: InstanceResult) -> dict:
    return {
        "index": index, "seed": r.seed, "p_s0": r.p_s0, "p_sp_max": r.p_sp_max, "p_sp_av": r.p_sp_av,
        "std": r.std, "best_pulse": [r.best_pulse.t_c, r.best_pulse.t_d, r.best_pulse.c],
        "improved_params_mean": r.improved_params_mean, "n_improved": r.n_improved,
        "improved_abs_c_mean": r.improved_abs_c_mean,
    }


def _from_record(rec: dict) -> InstanceResult:
    improved = rec["improved_params_mean"]
    return InstanceResult(
        seed=rec["seed"], p_s0=rec["p_s0"], p_sp_max=rec["p_sp_max"], p_sp_av=rec["p_sp_av"], std=rec["std"],
        best_pulse=PulseSchedule(*rec["best_pulse"]),
        improved_params_mean=tuple(improved) if improved is not None else None,
        n_improved=rec["n_improved"], improved_abs_c_mean=rec["improved_abs_c_mean"],
    )


def _threads(args) -> int:
    return args.threads if args.threads is not None else default_threads()


def ensemble_rows(results: list[InstanceResult]) -> list[tuple]:
    return [(r.seed, r.p_s0, r.p_sp_max, r.p_sp_av, r.std, r.best_pulse.t_c, r.best_pulse.t_d, r.best_pulse.c)
            for r in results]


def run_resumable(n: int, seeds: list[int], t_f: float, sampling: Sampling, dt, threads: int,
                  manifest: Path, identity: dict) -> list[InstanceResult]:
    """Run instances, appending each finished one to ``manifest`` (JSON lines).

    The first line records ``identity``; a manifest written for a different
    configuration is rejected rather than silently mixed in.
    """
    done: dict[int, InstanceResult] = {}
    identity = json.loads(json.dumps(identity))
    if manifest.exists():
        lines = manifest.read_text().splitlines()
        if not lines or json.loads(lines[0]) != {"config": identity}:
            raise InputError(f"{manifest} belongs to a different run; remove it to start afresh")
        for line in lines[1:]:
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                break  # torn final line from an interrupted write
            done[rec["index"]] = _from_record(rec)
    else:
        manifest.parent.mkdir(parents=True, exist_ok=True)
        manifest.write_text(json.dumps({"config": identity}) + "\n")

    pending = [k for k in range(len(seeds)) if k not in done]
    with manifest.open("a") as fh:
        def record(j, res):
            k = pending[j]
            done[k] = res
            fh.write(json.dumps(_result_record(k, res)) + "\n")
            fh.flush()
        run_instances(n, [seeds[k] for k in pending], t_f, sampling, dt, threads, on_result=record)
    return [done[k] for k in range(len(seeds))]


def _ensemble_inputs(args):
    sampling = resolve_sampling(args)
    if sampling is None:
        raise InputError("give --preset or explicit sampling flags")
    if args.dt is not None and args.dt > args.tf / 100:
        raise InputError(f"--dt {args.dt} exceeds t_f/100")
    return sampling, _or(args.seed, 0)


def _aggregate_extras(results: list[InstanceResult], t_f: float) -> dict:
    improved = [r.improved_params_mean for r in results if r.improved_params_mean is not None]
    abs_c = [r.improved_abs_c_mean for r in results if r.improved_abs_c_mean is not None]
    out = {"count": len(results)}
    if improved:
        tc, td, c = np.mean(improved, axis=0)
        out["improved_mean_tc_over_tf"] = float(tc / t_f)
        out["improved_mean_td_over_tf"] = float(td / t_f)
        out["improved_mean_c"] = float(c)
    if abs_c:
        out["improved_mean_abs_c"] = float(np.mean(abs_c))
    return out


def cmd_ensemble(args) -> dict:
    _require(args, "n", "count", "tf", "out")
    if args.count < 2:
        raise InputError("--count must be >= 2")
    if not 1 <= args.n <= 12:
        raise InputError(f"--n must be in [1, 12], got {args.n}")
    sampling, master = _ensemble_inputs(args)
    stats_path = args.stats or args.out.with_suffix(".json")
    manifest = args.out.with_name(args.out.name + ".manifest.jsonl")
    bins = _or(args.bins, 10)
    identity = {"n": args.n, "count": args.count, "t_f": args.tf, "master_seed": master, "dt": args.dt,
                "sampling": sampling.to_dict()}
    seeds = ensemble_seeds(master, args.count)
    results = run_resumable(args.n, seeds, args.tf, sampling, args.dt, _threads(args), manifest, identity)
    config = effective_config(args)
    config["resolved"] = dict(identity, bins=bins)
    stats = summarize(results, bins, config)
    data = stats.to_dict()
    data.update(_aggregate_extras(results, args.tf))
    write_outputs({args.out: csv_text(ENSEMBLE_COLUMNS, ensemble_rows(results)), stats_path: json_text(data)})
    manifest.unlink(missing_ok=True)
    return {k: data[k] for k in ("fit_a", "fit_b", "crossover", "frac_av_improved", "frac_max_improved")}


def cmd_scaling(args) -> dict:
    _require(args, "n_range", "count", "tf", "out")
    if args.count < 2:
        raise InputError("--count must be >= 2")
    if not args.n_range or any(not 1 <= n <= 12 for n in args.n_range):
        raise InputError("qubit counts must lie in [1, 12]")
    sampling, master = _ensemble_inputs(args)
    seeds = ensemble_seeds(master, args.count)
    threads = _threads(args)
    ensembles = {n: summarize(run_instances(n, seeds, args.tf, sampling, args.dt, threads))
                 for n in sorted(set(args.n_range))}
    points = relative_sp(ensembles)
    rows = [(p.n, p.r_sp_max, p.r_sp_av, p.std_max, p.std_av, p.p_s0_mean) for p in points]
    write_outputs({args.out: csv_text(SCALING_COLUMNS, rows)})
    return {"rows": len(rows)}


# -- entry point ------------------------------------------------------------

def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        summary = args.func(args)
    except InputError as exc:
        print(f"pulseqa: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"pulseqa: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"pulseqa: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if summary:
        print(json.dumps(summary, default=_json_default))
    return EXIT_OK


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))


if __name__ == "__main__":
    sys.exit(main())
