"""Time evolution of the pulsed annealing schedule and spectral diagnostics.

Two integrators live here:

``evolve``
    Reference path. Exponential midpoint rule, psi <- exp(-i H(t_mid) dt) psi,
    with each step propagator built from the eigendecomposition of
    H(t_mid). The grid is split at 0, t1, t2, t_f so no step straddles a
    pulse edge.

``evolve_many``
    Batched path for parameter sweeps. Fourth-order split-operator scheme
    (Yoshida composition of Strang steps) acting on a whole batch of pulse
    schedules at once. The diagonal part is applied as phases and the
    transverse part factorises into single-qubit rotations. Each schedule
    keeps its own segment grid, so pulse edges are still step boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InputError, NumericalError
from .model import (
    DELTA as DELTA_X,
    AnnealSpec,
    PulseSchedule,
    SpinGlassInstance,
    ds_hamiltonian,
    multiqubit_h,
    x_sum,
)
from .numcore import hermitian_eig

DEFAULT_STEPS = 20000
"""Reference integrator: default dt = t_f / DEFAULT_STEPS."""

FAST_STEPS = 1000
"""Batched integrator: default dt = t_f / FAST_STEPS (fourth order)."""

DEGENERACY_TOL = 1e-10
NORM_TOL = 1e-8

_YOSHIDA_OUTER = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_YOSHIDA_INNER = 1.0 - 2.0 * _YOSHIDA_OUTER


@dataclass
class EvolutionResult:
    final_state: np.ndarray
    sp: float
    trace: np.ndarray | None = None
    """Rows of (t, P0, P1, norm) when tracing was requested."""
    spectrum: np.ndarray | None = None
    """Rows of (t, E0, E1, ...) sampled on the same times as ``trace``."""


@dataclass
class GapReport:
    e_min: float
    t_min: float
    s_min: float
    adiabatic_rhs: float
    degenerate: bool = False


def ground_state_initial(spec: AnnealSpec) -> np.ndarray:
    """Lowest eigenvector of the pulse-free H(0) = Delta sum_i sigma_x^i."""
    return hermitian_eig(multiqubit_h(0.0, spec.without_pulse())).ground


def segment_bounds(spec: AnnealSpec) -> list[float]:
    """0, t1, t2, t_f with the pulse window clamped to [0, t_f]."""
    points = [0.0, spec.t_f]
    if spec.pulse_active:
        p = spec.pulse
        points += [min(max(p.t1, 0.0), spec.t_f), min(max(p.t2, 0.0), spec.t_f)]
    return sorted(set(points))


def time_grid(spec: AnnealSpec, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Step start times and widths; every segment gets ceil(length / dt) steps."""
    return _grid(segment_bounds(spec), dt)


def _grid(bounds, dt: float) -> tuple[np.ndarray, np.ndarray]:
    starts, widths = [], []
    for a, b in zip(bounds[:-1], bounds[1:]):
        m = max(1, int(np.ceil((b - a) / dt - 1e-9)))
        h = (b - a) / m
        starts.append(a + h * np.arange(m))
        widths.append(np.full(m, h))
    return np.concatenate(starts), np.concatenate(widths)


def _check_dt(spec: AnnealSpec, dt: float | None, steps: int) -> float:
    if dt is None:
        return spec.t_f / steps
    if not dt > 0:
        raise InputError(f"dt must be > 0, got {dt}")
    if dt > spec.t_f / 100 * (1 + 1e-12):
        raise InputError(f"dt={dt} exceeds t_f/100")
    return float(dt)


def final_ground_projector(instance: SpinGlassInstance) -> np.ndarray:
    """Basis indices spanning the ground manifold of H_t (diagonal)."""
    energies = instance.diagonal
    return np.flatnonzero(energies <= energies.min() + DEGENERACY_TOL)


def success_probability(psi, spec: AnnealSpec) -> float:
    """|<psi_0(t_f)|psi>|^2 against the pulse-free final Hamiltonian.

    H(t_f) = H_t is diagonal, so the ground manifold is the set of basis
    states of minimum energy; a degenerate manifold contributes its full
    projection.
    """
    psi = np.asarray(psi)
    if psi.shape != (1 << spec.n,):
        raise InputError(f"state of shape {psi.shape} does not match {spec.n} qubits")
    idx = final_ground_projector(spec.instance)
    return float(np.sum(np.abs(psi[idx]) ** 2))


def _propagators_2x2(spec: AnnealSpec, t_mid: np.ndarray, h: np.ndarray) -> np.ndarray:
    """exp(-i H(t_mid) h) for a single qubit in closed form, shape (m, 2, 2)."""
    s = t_mid / spec.t_f
    a = s * spec.instance.eps[0] + spec.pulse_amplitude(t_mid)
    b = (1 - s) * spec.delta
    r = np.hypot(a, b)
    phase = r * h
    c = np.cos(phase)
    sinc = np.where(r > 0, np.sin(phase) / np.where(r > 0, r, 1.0), h)
    u = np.empty((len(t_mid), 2, 2), dtype=complex)
    u[:, 0, 0] = c - 1j * sinc * a
    u[:, 1, 1] = c + 1j * sinc * a
    u[:, 0, 1] = u[:, 1, 0] = -1j * sinc * b
    return u


def _chain_product(us: np.ndarray) -> np.ndarray:
    """u[m-1] @ ... @ u[1] @ u[0] by pairwise reduction."""
    while len(us) > 1:
        if len(us) % 2:
            tail = us[-1:]
            us = us[:-1]
        else:
            tail = None
        us = us[1::2] @ us[0::2]
        if tail is not None:
            us = np.concatenate([us, tail])
    return us[0]


def _trace_row(spec: AnnealSpec, t: float, psi: np.ndarray, levels: int) -> tuple[list, list]:
    es = hermitian_eig(multiqubit_h(t, spec))
    amps = es.vectors.conj().T @ psi
    pops = np.abs(amps) ** 2
    p1 = pops[1] if len(pops) > 1 else 0.0
    return [t, pops[0], p1, np.linalg.norm(psi)], [t, *es.values[:levels]]


def integrate(hamiltonian, psi0, bounds, dt: float, sample_times=()) -> tuple[np.ndarray, list]:
    """Exponential-midpoint propagation of ``psi0`` under ``hamiltonian(t)``.

    ``bounds`` lists the segment boundaries (first and last are the start and
    end times); no step crosses one. Snapshots ``(t, psi)`` are taken at the
    grid point nearest each of ``sample_times`` and labelled with that grid
    time.
    """
    starts, widths = _grid(list(bounds), dt)
    psi = np.asarray(psi0, dtype=complex).copy()
    sample_times = np.asarray(sample_times, dtype=float)
    snapshots = []
    k = 0
    for t0, h in zip(starts, widths):
        while k < len(sample_times) and sample_times[k] < t0 + h / 2:
            snapshots.append((float(t0), psi.copy()))
            k += 1
        es = hermitian_eig(hamiltonian(t0 + h / 2))
        psi = es.vectors @ (np.exp(-1j * es.values * h) * (es.vectors.conj().T @ psi))
        if not np.all(np.isfinite(psi)):
            raise NumericalError("non-finite state", float(t0 + h))
    snapshots += [(float(bounds[-1]), psi.copy())] * (len(sample_times) - k)
    return psi, snapshots


def _check_norm(psi: np.ndarray, t: float) -> None:
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > NORM_TOL:
        raise NumericalError(f"norm drift {drift:.3g} exceeds {NORM_TOL}", t)


def evolve(spec: AnnealSpec, dt: float | None = None, trace_samples: int = 0,
           levels: int | None = None) -> EvolutionResult:
    """Integrate the Schrodinger equation from the initial ground state.

    With ``trace_samples >= 2`` the populations of the two lowest
    instantaneous eigenstates of H(t) (pulse included), the state norm and
    the lowest ``levels`` energies are recorded at that many uniformly spaced
    times. Each sample is taken at the grid point nearest to the requested
    time and labelled with that grid time.
    """
    dt = _check_dt(spec, dt, DEFAULT_STEPS)
    psi = ground_state_initial(spec).astype(complex)
    levels = (1 << spec.n) if levels is None else levels

    if spec.n == 1 and trace_samples < 2:
        starts, widths = time_grid(spec, dt)
        psi = _chain_product(_propagators_2x2(spec, starts + widths / 2, widths)) @ psi
        if not np.all(np.isfinite(psi)):
            raise NumericalError("non-finite state", spec.t_f)
        _check_norm(psi, spec.t_f)
        return EvolutionResult(psi, success_probability(psi, spec))

    sample_times = np.linspace(0.0, spec.t_f, trace_samples) if trace_samples >= 2 else ()
    psi, snapshots = integrate(lambda t: multiqubit_h(t, spec), psi, segment_bounds(spec), dt, sample_times)
    trace, spectrum = [], []
    for t, state in snapshots:
        row, erow = _trace_row(spec, t, state, levels)
        trace.append(row)
        spectrum.append(erow)
    _check_norm(psi, spec.t_f)
    result = EvolutionResult(psi, success_probability(psi, spec))
    if trace:
        result.trace = np.array(trace, dtype=float)
        result.spectrum = np.array(spectrum, dtype=float)
        drift = np.max(np.abs(result.trace[:, 3] - 1.0))
        if drift > NORM_TOL:
            raise NumericalError(f"norm drift {drift:.3g} exceeds {NORM_TOL}")
    return result


def _rotate_x_butterfly(psi: np.ndarray, angle: np.ndarray, n: int) -> np.ndarray:
    batch = psi.shape[0]
    c = np.cos(angle)[:, None, None]
    s = -1j * np.sin(angle)[:, None, None]
    out = np.empty_like(psi)
    for q in range(n):
        high = 1 << q
        low = (1 << n) >> (q + 1)
        v = psi.reshape(batch, high, 2, low)
        w = out.reshape(batch, high, 2, low)
        a0 = v[:, :, 0, :]
        a1 = v[:, :, 1, :]
        np.multiply(c, a0, out=w[:, :, 0, :])
        w[:, :, 0, :] += s * a1
        np.multiply(c, a1, out=w[:, :, 1, :])
        w[:, :, 1, :] += s * a0
        psi, out = out, psi
    return psi


@lru_cache(maxsize=None)
def _hadamard(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalised H^(x)n and the sum-of-sigma_x eigenvalue n - 2 popcount(k) of each column."""
    h = np.array([[1.0]])
    for _ in range(n):
        h = np.kron(h, np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0))
    popcount = np.array([bin(k).count("1") for k in range(1 << n)])
    return h.astype(complex), popcount


GEMM_MAX_QUBITS = 8
PHASE_RESYNC = 64


def _rotate_x(psi: np.ndarray, angle: np.ndarray, n: int) -> np.ndarray:
    """Apply prod_q exp(-i angle sigma_x^q) to every row of ``psi`` (batch, 2**n).

    Small registers use the Hadamard basis, where sum_q sigma_x^q is diagonal
    with eigenvalue n - 2 popcount(k); larger ones rotate qubit by qubit.
    """
    if n > GEMM_MAX_QUBITS:
        return _rotate_x_butterfly(psi, angle, n)
    h, popcount = _hadamard(n)
    levels = np.exp(-1j * angle[:, None] * (n - 2 * np.arange(n + 1))[None, :])
    return ((psi @ h) * levels[:, popcount]) @ h


def _propagate_batch(diag: np.ndarray, zsum: np.ndarray, n: int, t_f: float,
                     pulses: list[PulseSchedule | None], dt: float) -> np.ndarray:
    """Fourth-order split-operator evolution of ``len(pulses)`` rows.

    ``diag`` holds one problem diagonal per row. Every row runs on its own
    segment grid (0, t1, t2, t_f); rows that finish early are held fixed.
    Within a segment the diagonal phase argument is linear in the step
    index, so phases advance by a fixed per-step ratio. They are recomputed
    exactly at each segment start and every ``PHASE_RESYNC`` steps, which
    keeps the modulus error of the recurrence from growing with run length.
    """
    size = len(pulses)
    bounds = np.empty((size, 4))
    amp = np.zeros(size)
    for k, p in enumerate(pulses):
        if p is not None and p.active:
            t1 = min(max(p.t1, 0.0), t_f)
            t2 = min(max(p.t2, 0.0), t_f)
            amp[k] = p.c
        else:
            t1 = t2 = 0.0
        bounds[k] = (0.0, t1, t2, t_f)
    lengths = np.diff(bounds, axis=1)
    counts = np.where(lengths > 0, np.maximum(1, np.ceil(lengths / dt - 1e-9)), 0).astype(int)
    widths = np.divide(lengths, counts, out=np.zeros_like(lengths), where=counts > 0)
    ends = np.cumsum(counts, axis=1)
    firsts = ends - counts
    total = ends[:, -1]
    rows = np.arange(size)

    psi0 = hermitian_eig(float(DELTA_X) * x_sum(n)).ground
    psi = np.tile(psi0, (size, 1))
    stages = ((_YOSHIDA_OUTER, 0.0),
              (_YOSHIDA_INNER, _YOSHIDA_OUTER),
              (_YOSHIDA_OUTER, _YOSHIDA_OUTER + _YOSHIDA_INNER))
    phase = [np.ones_like(psi) for _ in stages]
    ratio = [np.ones_like(psi) for _ in stages]
    for it in range(int(total.max())):
        seg = np.minimum((it >= ends[:, 0]).astype(int) + (it >= ends[:, 1]) + (it >= ends[:, 2]), 2)
        j = it - firsts[rows, seg]
        active = it < total
        h = np.where(active, widths[rows, seg], 0.0)
        t0 = bounds[rows, seg]
        c = np.where(seg == 1, amp, 0.0)
        reset = np.flatnonzero((j % PHASE_RESYNC == 0) | (it == total))
        done = np.flatnonzero(~active)
        if done.size:
            frozen = psi[done]
        for (weight, offset), ph, ra in zip(stages, phase, ratio):
            step = weight * h
            if reset.size:
                r = reset
                half = 0.5 * step[r, None]
                s0 = (t0[r] + (j[r] + offset + weight / 2) * h[r]) / t_f
                ph[r] = np.exp(-1j * half * (s0[:, None] * diag[r] + c[r, None] * zsum[None, :]))
                ra[r] = np.exp(-1j * (half * h[r, None] / t_f) * diag[r])
            s = (t0 + (j + offset + weight / 2) * h) / t_f
            psi *= ph
            psi = _rotate_x(psi, (1 - s) * step, n)
            psi *= ph
            ph *= ra
        if done.size:
            psi[done] = frozen
        if it % 256 == 255 and not np.all(np.isfinite(psi)):
            raise NumericalError("non-finite state in batched evolution", float(t0.max()))
    norms = np.linalg.norm(psi, axis=1)
    if not np.all(np.isfinite(norms)) or np.max(np.abs(norms - 1.0)) > NORM_TOL:
        raise NumericalError(f"norm drift {np.max(np.abs(norms - 1.0)):.3g} in batched evolution", t_f)
    return psi


def evolve_many(instance: SpinGlassInstance, t_f: float, pulses: list[PulseSchedule | None],
                dt: float | None = None) -> np.ndarray:
    """Success probabilities for a batch of pulse schedules on one instance."""
    return evolve_instances([(instance, pulses)], t_f, dt)[0]


def evolve_instances(jobs: list[tuple[SpinGlassInstance, list[PulseSchedule | None]]],
                     t_f: float, dt: float | None = None) -> list[np.ndarray]:
    """Batched success probabilities for several instances of equal size.

    Rows do not interact, but BLAS may round a row differently depending on
    the batch it sits in, so callers needing bit-identical output must keep
    the grouping fixed.
    """
    if not jobs:
        return []
    n = jobs[0][0].n
    if any(inst.n != n for inst, _ in jobs):
        raise InputError("all instances in a batch must have the same qubit count")
    dt = _check_dt(AnnealSpec(jobs[0][0], t_f), dt, FAST_STEPS)
    sizes = [len(p) for _, p in jobs]
    if sum(sizes) == 0:
        return [np.zeros(0) for _ in jobs]
    diag = np.concatenate([np.tile(inst.diagonal, (len(p), 1)) for inst, p in jobs])
    pulses = [p for _, ps in jobs for p in ps]
    psi = _propagate_batch(diag, jobs[0][0].z_sum, n, t_f, pulses, dt)
    out = []
    row = 0
    for (inst, _), m in zip(jobs, sizes):
        idx = final_ground_projector(inst)
        out.append(np.sum(np.abs(psi[row:row + m][:, idx]) ** 2, axis=1))
        row += m
    return out


def spectrum_trace(spec: AnnealSpec, samples: int, levels: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``levels`` eigenvalues of H(t) at ``samples`` uniform times, pulse included."""
    if samples < 2:
        raise InputError("need at least 2 samples")
    times = np.linspace(0.0, spec.t_f, samples)
    levels = (1 << spec.n) if levels is None else levels
    energies = np.array([hermitian_eig(multiqubit_h(t, spec)).values[:levels] for t in times])
    return times, energies


def gap_closed_form(t, eps: float, spec: AnnealSpec):
    """E_G(t) = 2 sqrt((1 - t/t_f)^2 Delta^2 + (t/t_f eps + C Lambda(t))^2), one qubit only."""
    if spec.n != 1:
        raise InputError("closed-form gap only exists for a single qubit")
    s = np.asarray(t, dtype=float) / spec.t_f
    a = s * eps + spec.pulse_amplitude(t)
    return 2.0 * np.hypot((1 - s) * spec.delta, a)


def _pulse_free_h(instance: SpinGlassInstance, s: float) -> np.ndarray:
    return np.diag(s * instance.diagonal) + (1 - s) * x_sum(instance.n)


def _gap_at(instance: SpinGlassInstance, s: float) -> float:
    values = np.linalg.eigvalsh(_pulse_free_h(instance, s))
    return float(values[1] - values[0])


def _coupling_at(instance: SpinGlassInstance, s: float, dh: np.ndarray) -> float:
    """|<psi_0|dH/ds|psi_1>|, summed in quadrature over a degenerate first-excited level."""
    values, vectors = np.linalg.eigh(_pulse_free_h(instance, s))
    excited = np.flatnonzero(np.abs(values[1:] - values[1]) <= DEGENERACY_TOL) + 1
    amps = vectors[:, excited].conj().T @ (dh @ vectors[:, 0])
    return float(np.sqrt(np.sum(np.abs(amps) ** 2)))


def _refine(f, grid: np.ndarray, values: np.ndarray, sign: float) -> tuple[float, float]:
    """Golden-section polish of the grid extremum of ``sign * f``."""
    k = int(np.argmin(sign * values))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    best_x, best_v = grid[k], values[k]
    if 0 < k < len(grid) - 1:
        res = minimize_scalar(lambda x: sign * f(x), bracket=(lo, grid[k], hi), method="golden",
                              options={"xtol": 1e-10})
        if lo <= res.x <= hi and sign * res.fun <= sign * best_v:
            best_x, best_v = float(res.x), sign * float(res.fun)
    return float(best_x), float(best_v)


def min_gap(spec: AnnealSpec, points: int = 2001) -> GapReport:
    """Minimum pulse-free gap E_01(s) and the adiabatic-condition estimate.

    ``adiabatic_rhs`` is max_s |<psi_0|dH/ds|psi_1>| / min_s E_01(s)^2.
    """
    if spec.pulse_active:
        raise InputError("min_gap is defined for the pulse-free schedule")
    inst = spec.instance
    grid = np.linspace(0.0, 1.0, points)
    gaps = np.array([_gap_at(inst, s) for s in grid])
    s_min, e_min = _refine(lambda s: _gap_at(inst, s), grid, gaps, 1.0)
    dh = ds_hamiltonian(inst)
    couplings = np.array([_coupling_at(inst, s, dh) for s in grid])
    _, c_max = _refine(lambda s: _coupling_at(inst, s, dh), grid, couplings, -1.0)
    degenerate = e_min < 1e-12
    rhs = float("inf") if degenerate else c_max / e_min ** 2
    return GapReport(e_min=e_min, t_min=s_min * spec.t_f, s_min=s_min,
                     adiabatic_rhs=rhs, degenerate=degenerate)
