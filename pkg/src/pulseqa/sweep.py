"""Pulse-parameter sampling, per-instance optimisation and ensemble statistics."""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dynamics import evolve_many
from .errors import InputError
from .model import PulseSchedule, SpinGlassInstance, derive_seed, generate_instance, rng_from_seed

SP_SLACK = 1e-9


@dataclass(frozen=True)
class Bounds:
    """Sampling box. ``tc`` and ``td`` are fractions of t_f; ``c`` is in Delta.

    For random sampling with ``c`` spanning both signs, half of the samples
    draw C from [c_min_abs, c[1]] and half from [c[0], -c_min_abs].
    """

    tc: tuple[float, float] = (0.1, 0.9)
    td: tuple[float, float] = (0.05, 1.0)
    c: tuple[float, float] = (-1.0, 1.0)
    c_min_abs: float = 0.0

    def __post_init__(self):
        for name in ("tc", "td", "c"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise InputError(f"empty or invalid {name} bounds ({lo}, {hi})")
        if self.td[0] < 0:
            raise InputError("pulse duration bounds must be >= 0")
        if self.c_min_abs < 0:
            raise InputError("c_min_abs must be >= 0")

    @property
    def both_signs(self) -> bool:
        return self.c[0] < 0 < self.c[1]


@dataclass(frozen=True)
class Sampling:
    strategy: str = "grid"
    count: int | tuple[int, int, int] = 27
    bounds: Bounds = field(default_factory=Bounds)
    av_mode: str = "union"
    """``union`` averages all samples; ``best-sign`` averages the C > 0 and
    C < 0 sub-samplings separately and keeps the larger mean."""

    def __post_init__(self):
        if self.strategy not in ("grid", "uniform-random"):
            raise InputError(f"unknown sampling strategy {self.strategy!r}")
        if self.av_mode not in ("union", "best-sign"):
            raise InputError(f"unknown averaging mode {self.av_mode!r}")
        if total_count(self.count) < 1:
            raise InputError("sample count must be >= 1")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["count"] = list(self.count) if isinstance(self.count, tuple) else self.count
        return out


def total_count(count) -> int:
    if isinstance(count, (tuple, list)):
        if len(count) != 3 or any(int(k) < 1 for k in count):
            raise InputError(f"grid shape must be three positive counts, got {count}")
        return int(np.prod(count))
    return int(count)


_REDUCED = Bounds(tc=(0.3, 0.7), td=(0.1, 0.5), c=(-0.5, 0.5), c_min_abs=0.05)

PRESETS: dict[str, Sampling] = {
    # 11 centres x 6 durations x 41 amplitudes = 2706 samples.
    "fig5": Sampling("grid", (11, 6, 41), Bounds(tc=(0.1, 0.9), td=(0.1, 0.6), c=(-1.0, 1.0)), "union"),
    "fig5-reduced": Sampling("grid", (5, 5, 20), Bounds(tc=(0.1, 0.9), td=(0.1, 0.6), c=(-1.0, 1.0)), "union"),
    "fig7a": Sampling("uniform-random", 90, _REDUCED, "best-sign"),
    "fig7b": Sampling("uniform-random", 60, _REDUCED, "best-sign"),
}


def sample_schedules(t_f: float, strategy: str = "grid", bounds: Bounds | None = None,
                     count: int | tuple[int, int, int] = 27, seed: int = 0) -> list[PulseSchedule]:
    """Deterministic list of pulse schedules inside ``bounds``.

    ``grid``: Cartesian product ordered (t_C, t_D, C) with C varying fastest.
    An integer count must be a perfect cube; a single point per axis sits at
    the interval midpoint. ``uniform-random``: independent uniform draws from
    a Philox stream keyed by ``seed``.
    """
    if not t_f > 0:
        raise InputError("t_f must be > 0")
    bounds = bounds or Bounds()
    if strategy == "grid":
        if isinstance(count, (tuple, list)):
            shape = tuple(int(k) for k in count)
            total_count(shape)
        else:
            side = round(count ** (1 / 3))
            if side < 1 or side ** 3 != count:
                raise InputError(f"grid count {count} is not a perfect cube; pass a 3-tuple shape")
            shape = (side, side, side)
        axes = [_axis(bounds.tc, shape[0], t_f), _axis(bounds.td, shape[1], t_f), _axis(bounds.c, shape[2], 1.0)]
        return [PulseSchedule(float(tc), float(td), float(c)) for tc, td, c in itertools.product(*axes)]
    if strategy == "uniform-random":
        count = total_count(count)
        rng = rng_from_seed(seed)
        tc = rng.uniform(*bounds.tc, size=count) * t_f
        td = rng.uniform(*bounds.td, size=count) * t_f
        mag = rng.uniform(size=count)
        if bounds.both_signs:
            n_pos = (count + 1) // 2
            lo = bounds.c_min_abs
            c = np.empty(count)
            c[:n_pos] = lo + mag[:n_pos] * (bounds.c[1] - lo)
            c[n_pos:] = -(lo + mag[n_pos:] * (-bounds.c[0] - lo))
        else:
            c = bounds.c[0] + mag * (bounds.c[1] - bounds.c[0])
        return [PulseSchedule(float(a), float(b), float(v)) for a, b, v in zip(tc, td, c)]
    raise InputError(f"unknown sampling strategy {strategy!r}")


def _axis(interval: tuple[float, float], m: int, scale: float) -> np.ndarray:
    lo, hi = interval
    if m == 1:
        return np.array([(lo + hi) / 2 * scale])
    return np.linspace(lo, hi, m) * scale


@dataclass
class InstanceResult:
    seed: int
    p_s0: float
    p_sp_max: float
    p_sp_av: float
    std: float
    best_pulse: PulseSchedule
    improved_params_mean: tuple[float, float, float] | None
    n_improved: int
    improved_abs_c_mean: float | None = None
    """Mean |C| over the samples with sp > p_s0."""
    sp: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    c_values: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)


def _population_stats(values: np.ndarray) -> tuple[float, float]:
    return float(np.mean(values)), float(np.std(values))


def optimize_instance(instance: SpinGlassInstance, t_f: float, schedules: list[PulseSchedule],
                      dt: float | None = None, av_mode: str = "union") -> InstanceResult:
    """Evolve once without a pulse and once per schedule; aggregate.

    Schedules with C = 0 or t_D = 0 are the conventional schedule and are
    assigned p_s0 exactly. The standard deviation is the population value
    over the averaged samples.
    """
    if not schedules:
        raise InputError("need at least one schedule")
    active = [k for k, p in enumerate(schedules) if p.active]
    runs = evolve_many(instance, t_f, [None] + [schedules[k] for k in active], dt)
    p_s0 = float(runs[0])
    sp = np.full(len(schedules), p_s0)
    sp[active] = runs[1:]

    c = np.array([p.c for p in schedules])
    if av_mode == "best-sign" and (c > 0).any() and (c < 0).any():
        groups = [sp[c > 0], sp[c < 0]]
        stats = [_population_stats(g) for g in groups]
        p_sp_av, std = max(stats, key=lambda m: m[0])
    else:
        p_sp_av, std = _population_stats(sp)

    best = int(np.argmax(sp))
    mask = sp > p_s0
    params = np.array([(p.t_c, p.t_d, p.c) for p in schedules])
    improved = tuple(float(x) for x in params[mask].mean(axis=0)) if mask.any() else None
    return InstanceResult(
        seed=instance.seed,
        p_s0=p_s0,
        p_sp_max=float(sp[best]),
        p_sp_av=p_sp_av,
        std=std,
        best_pulse=schedules[best],
        improved_params_mean=improved,
        n_improved=int(mask.sum()),
        improved_abs_c_mean=float(np.mean(np.abs(c[mask]))) if mask.any() else None,
        sp=sp,
        c_values=c,
    )


@dataclass
class EnsembleStats:
    results: list[InstanceResult]
    fit_a: float | None
    fit_b: float | None
    crossover: float | None
    frac_av_improved: float
    frac_max_improved: float
    frac_max_improved_5pct: float
    binned: list[tuple[float, float, float, int]]
    """(bin centre, mean P_SP,av, population std, instance count) for non-empty bins."""
    flags: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "fit_a": self.fit_a,
            "fit_b": self.fit_b,
            "crossover": self.crossover,
            "frac_av_improved": self.frac_av_improved,
            "frac_max_improved": self.frac_max_improved,
            "frac_max_improved_5pct": self.frac_max_improved_5pct,
            "bins": [{"center": c, "mean": m, "std": s, "count": k} for c, m, s, k in self.binned],
            "flags": list(self.flags),
            "config": self.config,
        }


def linear_fit(x, y) -> tuple[float, float] | None:
    """Least-squares y = a x + b, or None when x has no spread."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.ptp(x) == 0.0:
        return None
    design = np.column_stack([x, np.ones_like(x)])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(a), float(b)


def crossover_point(a: float, b: float, tol: float = 1e-12) -> float | None:
    """Where a x + b meets y = x; None when the line is parallel to it."""
    return None if abs(1.0 - a) <= tol else b / (1.0 - a)


def binned_average(x, y, bins: int = 10) -> list[tuple[float, float, float, int]]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    edges = np.linspace(0.0, 1.0, bins + 1)
    which = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, bins - 1)
    out = []
    for k in range(bins):
        sel = y[which == k]
        if sel.size:
            out.append((float((edges[k] + edges[k + 1]) / 2), float(sel.mean()), float(sel.std()), int(sel.size)))
    return out


def summarize(results: list[InstanceResult], bins: int = 10, config: dict | None = None) -> EnsembleStats:
    p_s0 = np.array([r.p_s0 for r in results])
    p_av = np.array([r.p_sp_av for r in results])
    p_max = np.array([r.p_sp_max for r in results])
    flags = []
    fit = linear_fit(p_s0, p_av)
    if fit is None:
        flags.append("fit-undefined")
        a = b = cross = None
    else:
        a, b = fit
        cross = crossover_point(a, b)
        if cross is None:
            flags.append("fit-parallel-to-identity")
    return EnsembleStats(
        results=results,
        fit_a=a,
        fit_b=b,
        crossover=cross,
        frac_av_improved=float(np.mean(p_av > p_s0)),
        frac_max_improved=float(np.mean(p_max > p_s0)),
        frac_max_improved_5pct=float(np.mean(p_max > 1.05 * p_s0)),
        binned=binned_average(p_s0, p_av, bins),
        flags=flags,
        config=dict(config or {}),
    )


def instance_schedules(t_f: float, sampling: Sampling, instance_seed: int) -> list[PulseSchedule]:
    return sample_schedules(t_f, sampling.strategy, sampling.bounds, sampling.count,
                            seed=derive_seed(instance_seed, 1))


def run_instance(n: int, seed: int, t_f: float, sampling: Sampling, dt: float | None) -> InstanceResult:
    instance = generate_instance(n, seed)
    schedules = instance_schedules(t_f, sampling, seed)
    return optimize_instance(instance, t_f, schedules, dt, sampling.av_mode)


def _run_indexed(args) -> tuple[int, InstanceResult]:
    index, n, seed, t_f, sampling, dt = args
    return index, run_instance(n, seed, t_f, sampling, dt)


def default_threads() -> int:
    env = os.environ.get("PULSEQA_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise InputError(f"PULSEQA_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise InputError("PULSEQA_THREADS must be >= 1")
        return value
    return os.cpu_count() or 1


def run_instances(n: int, seeds: list[int], t_f: float, sampling: Sampling,
                  dt: float | None = None, threads: int = 1, on_result=None) -> list[InstanceResult]:
    """Evaluate instances, returning results in input order whatever ``threads`` is.

    ``on_result(index, result)`` is called as each instance completes, in
    completion order; callers that persist partial progress use it.
    """
    jobs = [(k, n, s, t_f, sampling, dt) for k, s in enumerate(seeds)]
    results: dict[int, InstanceResult] = {}
    if threads <= 1 or len(jobs) <= 1:
        for job in jobs:
            k, res = _run_indexed(job)
            results[k] = res
            if on_result:
                on_result(k, res)
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for k, res in pool.map(_run_indexed, jobs):
                results[k] = res
                if on_result:
                    on_result(k, res)
    return [results[k] for k in sorted(results)]


def ensemble_seeds(master_seed: int, count: int) -> list[int]:
    return [derive_seed(master_seed, k) for k in range(count)]


def ensemble_run(n: int, instance_count: int, t_f: float, sampling: Sampling, master_seed: int = 0,
                 dt: float | None = None, threads: int = 1, bins: int = 10) -> EnsembleStats:
    if instance_count < 2:
        raise InputError("an ensemble needs at least 2 instances")
    seeds = ensemble_seeds(master_seed, instance_count)
    results = run_instances(n, seeds, t_f, sampling, dt, threads)
    config = {"n": n, "count": instance_count, "t_f": t_f, "master_seed": master_seed,
              "dt": dt, "bins": bins, "sampling": sampling.to_dict()}
    return summarize(results, bins, config)


@dataclass(frozen=True)
class ScalingPoint:
    n: int
    r_sp_max: float | None
    r_sp_av: float | None
    std_max: float | None
    std_av: float | None
    p_s0_mean: float


def relative_sp(ensembles: dict[int, EnsembleStats]) -> list[ScalingPoint]:
    """(mean P_SP - mean P_S0) / mean P_S0 for i = max and av, per qubit count.

    The reported spreads are population deviations over instances of
    (P_SP,i - P_S0) / mean P_S0.
    """
    points = []
    for n in sorted(ensembles):
        res = ensembles[n].results
        p0 = np.array([r.p_s0 for r in res])
        pmax = np.array([r.p_sp_max for r in res])
        pav = np.array([r.p_sp_av for r in res])
        mean0 = float(p0.mean())
        if mean0 <= 0.0:
            points.append(ScalingPoint(n, None, None, None, None, mean0))
            continue
        points.append(ScalingPoint(
            n=n,
            r_sp_max=float((pmax.mean() - mean0) / mean0),
            r_sp_av=float((pav.mean() - mean0) / mean0),
            std_max=float(np.std((pmax - p0) / mean0)),
            std_av=float(np.std((pav - p0) / mean0)),
            p_s0_mean=mean0,
        ))
    return points


def with_count(sampling: Sampling, count) -> Sampling:
    return replace(sampling, count=count)
