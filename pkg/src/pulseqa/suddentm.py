"""Semi-analytic single-qubit solver: adiabatic phases plus sudden mixing.

Away from the pulse edges the qubit is assumed to follow the instantaneous
eigenstates, picking up a relative phase. At each edge the Hamiltonian jumps
and the state is re-expanded in the new eigenbasis.

Conventions used throughout:

* amplitude vectors are ordered (ground, excited);
* the adiabatic propagator over [t_s, t_q] is diag(e^{+i zeta}, e^{-i zeta})
  with zeta the integral of the half gap sqrt((s eps + C)^2 + ((1-s) Delta)^2),
  i.e. the eigenvalue magnitude, so the relative phase is 2 zeta;
* the mixing matrix at an edge is the overlap matrix <new_i|old_j> of the
  eigenvectors (cos th/2, sin th/2) and (-sin th/2, cos th/2), a rotation by
  half the angle difference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InputError, NumericalError
from .model import AnnealSpec, PulseSchedule, SpinGlassInstance

SEGMENTS = ("A", "B", "C")


@dataclass(frozen=True)
class MixingAngles:
    theta0: float
    thetaC: float


@dataclass(frozen=True)
class TransferState:
    b0: complex
    b1: complex

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.b0, self.b1])


@dataclass(frozen=True)
class TransferResult:
    sp: float
    state: TransferState
    p_on: float
    p_off: float
    zeta: tuple[float, float, float]
    """Phases of segments A (before), B (during) and C (after the pulse)."""


def _single(spec: AnnealSpec) -> float:
    if spec.n != 1:
        raise InputError("the transfer-matrix solver handles a single qubit only")
    return spec.instance.eps[0]


def mixing_angle(t: float, eps: float, c: float, spec: AnnealSpec) -> float:
    """theta with cos = (s eps + c)/E', sin = (1 - s) Delta/E'; in [0, pi]."""
    s = t / spec.t_f
    z = s * eps + c
    x = (1 - s) * spec.delta
    if z == 0.0 and x == 0.0:
        raise NumericalError("mixing angle undefined where the gap closes", t)
    return math.atan2(x, z)


def mixing_angles(t: float, eps: float, spec: AnnealSpec) -> MixingAngles:
    c = spec.pulse.c if spec.pulse is not None else 0.0
    return MixingAngles(mixing_angle(t, eps, 0.0, spec), mixing_angle(t, eps, c, spec))


def eigvecs(theta: float) -> np.ndarray:
    """Columns: ground (-sin th/2, cos th/2) and excited (cos th/2, sin th/2)."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[-s, c], [c, s]])


def mixing_matrix(theta_from: float, theta_to: float) -> np.ndarray:
    """Sudden re-expansion <new_i|old_j> in (ground, excited) order."""
    return eigvecs(theta_to).T @ eigvecs(theta_from)


def mixing_probability(t: float, eps: float, spec: AnnealSpec) -> float:
    """p_s = sin^2((theta_C - theta_0)/2), the ground-to-excited weight at a pulse edge."""
    if spec.pulse is None:
        return 0.0
    if not (0.0 < t < spec.t_f):
        raise InputError(f"t={t} must lie strictly inside (0, t_f)")
    ang = mixing_angles(t, eps, spec)
    return math.sin((ang.thetaC - ang.theta0) / 2) ** 2


def _half_gap(t, eps: float, c: float, spec: AnnealSpec):
    s = t / spec.t_f
    return math.hypot(s * eps + c, (1 - s) * spec.delta)


def segment_phase(t_s: float, t_q: float, eps: float, spec: AnnealSpec, segment: str) -> float:
    """zeta_j(t_q, t_s): integral of the half gap over [t_s, t_q].

    The pulse amplitude enters only for segment ``"B"``. When ``spec`` carries a
    pulse, the interval must match the segment (A before t1, B inside the
    window, C after t2).
    """
    if segment not in SEGMENTS:
        raise InputError(f"segment must be one of {SEGMENTS}, got {segment!r}")
    if not (0.0 <= t_s <= t_q <= spec.t_f):
        raise InputError(f"need 0 <= t_s <= t_q <= t_f, got [{t_s}, {t_q}]")
    c = 0.0
    p = spec.pulse
    if segment == "B":
        if p is None:
            raise InputError("segment B requires a pulse")
        if t_s < p.t1 - 1e-12 or t_q > p.t2 + 1e-12:
            raise InputError(f"[{t_s}, {t_q}] is not inside the pulse window [{p.t1}, {p.t2}]")
        c = p.c
    elif p is not None and p.active:
        if segment == "A" and t_q > p.t1 + 1e-12:
            raise InputError(f"segment A must end before the pulse starts at {p.t1}")
        if segment == "C" and t_s < p.t2 - 1e-12:
            raise InputError(f"segment C must start after the pulse ends at {p.t2}")
    if t_q == t_s:
        return 0.0
    value, _ = quad(_half_gap, t_s, t_q, args=(eps, c, spec), epsabs=0.0, epsrel=1e-12, limit=200)
    return value


def phase_matrix(zeta: float) -> np.ndarray:
    return np.diag([np.exp(1j * zeta), np.exp(-1j * zeta)])


def tm_solve(spec: AnnealSpec) -> TransferResult:
    """Compose U_C N_2 U_B N_1 U_A on the initial ground state."""
    eps = _single(spec)
    p = spec.pulse
    if p is None or not p.active:
        zeta = segment_phase(0.0, spec.t_f, eps, spec.without_pulse(), "A")
        state = TransferState(complex(np.exp(1j * zeta)), 0j)
        return TransferResult(1.0, state, 0.0, 0.0, (zeta, 0.0, 0.0))
    if p.t1 < 0.0 or p.t2 > spec.t_f:
        raise InputError(f"pulse window [{p.t1}, {p.t2}] must lie inside [0, t_f]")
    t1, t2 = p.t1, p.t2
    th0_1 = mixing_angle(t1, eps, 0.0, spec)
    thc_1 = mixing_angle(t1, eps, p.c, spec)
    thc_2 = mixing_angle(t2, eps, p.c, spec)
    th0_2 = mixing_angle(t2, eps, 0.0, spec)
    zeta = (segment_phase(0.0, t1, eps, spec, "A"),
            segment_phase(t1, t2, eps, spec, "B"),
            segment_phase(t2, spec.t_f, eps, spec, "C"))
    n1 = mixing_matrix(th0_1, thc_1)
    n2 = mixing_matrix(thc_2, th0_2)
    total = phase_matrix(zeta[2]) @ n2 @ phase_matrix(zeta[1]) @ n1 @ phase_matrix(zeta[0])
    b = total @ np.array([1.0 + 0j, 0j])
    return TransferResult(
        sp=float(abs(b[0]) ** 2),
        state=TransferState(complex(b[0]), complex(b[1])),
        p_on=math.sin((thc_1 - th0_1) / 2) ** 2,
        p_off=math.sin((th0_2 - thc_2) / 2) ** 2,
        zeta=zeta,
    )


def tm_evolve(eps: float, spec: AnnealSpec) -> float:
    """Transfer-matrix success probability for a single qubit with field ``eps``."""
    if spec.n != 1 or spec.instance.eps[0] != eps:
        spec = AnnealSpec(SpinGlassInstance.single(eps), spec.t_f, spec.pulse)
    return tm_solve(spec).sp


def approx_sp(p_s: float, zeta2: float) -> float:
    """1 - 4 p_s (1 - p_s) sin^2(zeta2); exact when both edges mix equally."""
    if not (0.0 <= p_s <= 1.0):
        raise InputError(f"p_s must be in [0, 1], got {p_s}")
    return 1.0 - 4.0 * p_s * (1.0 - p_s) * math.sin(zeta2) ** 2


def approx_from_spec(spec: AnnealSpec) -> float:
    """approx_sp with p_s taken at the pulse onset and zeta2 over the window."""
    res = tm_solve(spec)
    return approx_sp(res.p_on, res.zeta[1])


def pulse_inside(pulse: PulseSchedule, t_f: float) -> bool:
    return pulse.t1 >= 0.0 and pulse.t2 <= t_f
