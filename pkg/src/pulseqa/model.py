"""Pulsed annealing Hamiltonians and random spin-glass instances.

Units: hbar = 1 and the transverse amplitude Delta = 1, so energies are in
Delta and times in hbar/Delta.

Basis convention: qubit 0 is the most significant bit of the basis index
(Kronecker order), and sigma_z|0> = +|0>, i.e. bit 0 carries spin +1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InputError
from .numcore import MAX_QUBITS, SIGMA_X, SIGMA_Z

DELTA = 1.0


@dataclass(frozen=True)
class PulseSchedule:
    """Rectangular longitudinal pulse of amplitude ``c`` centred at ``t_c``."""

    t_c: float
    t_d: float
    c: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.t_c, self.t_d, self.c)):
            raise InputError(f"non-finite pulse parameters {self}")
        if self.t_d < 0:
            raise InputError(f"pulse duration must be >= 0, got {self.t_d}")

    @property
    def t1(self) -> float:
        return self.t_c - self.t_d / 2

    @property
    def t2(self) -> float:
        return self.t_c + self.t_d / 2

    @property
    def active(self) -> bool:
        return self.c != 0.0 and self.t_d > 0.0

    def window(self, t):
        return pulse_window(t, self)


def pulse_window(t, pulse: PulseSchedule | None):
    """1 on the closed interval [t_c - t_d/2, t_c + t_d/2], else 0."""
    if pulse is None:
        return np.zeros_like(t, dtype=float) if np.ndim(t) else 0.0
    inside = (np.asarray(t) >= pulse.t1) & (np.asarray(t) <= pulse.t2)
    return inside.astype(float) if np.ndim(t) else float(inside)


@dataclass(frozen=True)
class SpinGlassInstance:
    n: int
    eps: tuple[float, ...]
    couplings: tuple[tuple[int, int, float], ...] = ()
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise InputError(f"qubit count must be in [1, {MAX_QUBITS}], got {self.n}")
        if len(self.eps) != self.n:
            raise InputError(f"expected {self.n} fields, got {len(self.eps)}")
        seen = set()
        for i, j, value in self.couplings:
            if not (0 <= i < j < self.n):
                raise InputError(f"coupling ({i}, {j}) needs 0 <= i < j < n")
            if (i, j) in seen:
                raise InputError(f"duplicate coupling ({i}, {j})")
            if not math.isfinite(value):
                raise InputError(f"non-finite coupling ({i}, {j})")
            seen.add((i, j))
        if not all(math.isfinite(e) for e in self.eps):
            raise InputError("non-finite field")
        object.__setattr__(self, "couplings", tuple(sorted(self.couplings)))

    @classmethod
    def single(cls, eps: float) -> "SpinGlassInstance":
        return cls(1, (float(eps),))

    @cached_property
    def spins(self) -> np.ndarray:
        """(2**n, n) table of spin values +-1 for every basis state."""
        idx = np.arange(1 << self.n)
        bits = (idx[:, None] >> (self.n - 1 - np.arange(self.n))) & 1
        return 1 - 2 * bits

    @cached_property
    def diagonal(self) -> np.ndarray:
        """Problem energies for all basis states (diagonal of H_t)."""
        s = self.spins
        energy = s @ np.asarray(self.eps, dtype=float)
        for i, j, value in self.couplings:
            energy = energy + value * s[:, i] * s[:, j]
        return energy

    @cached_property
    def z_sum(self) -> np.ndarray:
        return self.spins.sum(axis=1).astype(float)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "eps": [float(e) for e in self.eps],
            "J": [[i, j, float(v)] for i, j, v in self.couplings],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, data) -> "SpinGlassInstance":
        if not isinstance(data, dict):
            raise InputError("$: instance must be a JSON object")
        for key in ("n", "seed", "eps", "J"):
            if key not in data:
                raise InputError(f"$.{key}: missing required key")
        extra = set(data) - {"n", "seed", "eps", "J"}
        if extra:
            raise InputError(f"$: unexpected keys {sorted(extra)}")
        if not isinstance(data["n"], int) or isinstance(data["n"], bool):
            raise InputError("$.n: expected integer")
        if not isinstance(data["seed"], int) or isinstance(data["seed"], bool):
            raise InputError("$.seed: expected integer")
        if not isinstance(data["eps"], list):
            raise InputError("$.eps: expected array")
        for k, e in enumerate(data["eps"]):
            if not _is_number(e):
                raise InputError(f"$.eps[{k}]: expected number")
        if not isinstance(data["J"], list):
            raise InputError("$.J: expected array")
        couplings = []
        for k, entry in enumerate(data["J"]):
            if (not isinstance(entry, list) or len(entry) != 3
                    or not all(isinstance(x, int) and not isinstance(x, bool) for x in entry[:2])
                    or not _is_number(entry[2])):
                raise InputError(f"$.J[{k}]: expected [int i, int j, number value]")
            couplings.append((entry[0], entry[1], float(entry[2])))
        try:
            return cls(data["n"], tuple(float(e) for e in data["eps"]), tuple(couplings), data["seed"])
        except InputError as exc:
            raise InputError(f"$: {exc}") from None

    @classmethod
    def load(cls, path) -> "SpinGlassInstance":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


@dataclass(frozen=True)
class AnnealSpec:
    instance: SpinGlassInstance
    t_f: float
    pulse: PulseSchedule | None = None
    delta: float = field(default=DELTA)

    def __post_init__(self):
        if not (math.isfinite(self.t_f) and self.t_f > 0):
            raise InputError(f"annealing time must be > 0, got {self.t_f}")
        if self.delta != DELTA:
            raise InputError("Delta is the unit of energy and must equal 1")

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def pulse_active(self) -> bool:
        return self.pulse is not None and self.pulse.active

    def without_pulse(self) -> "AnnealSpec":
        return AnnealSpec(self.instance, self.t_f, None)

    def with_pulse(self, pulse: PulseSchedule | None) -> "AnnealSpec":
        return AnnealSpec(self.instance, self.t_f, pulse)

    def pulse_amplitude(self, t) -> float:
        return 0.0 if self.pulse is None else self.pulse.c * pulse_window(t, self.pulse)


def _check_time(t: float, spec: AnnealSpec) -> None:
    if not (0.0 <= t <= spec.t_f):
        raise InputError(f"t={t} outside [0, t_f={spec.t_f}]")


def single_qubit_h(t: float, eps: float, spec: AnnealSpec) -> np.ndarray:
    _check_time(t, spec)
    s = t / spec.t_f
    return (s * eps + spec.pulse_amplitude(t)) * SIGMA_Z + (1 - s) * spec.delta * SIGMA_X


def x_sum(n: int) -> np.ndarray:
    """Dense sum of sigma_x over all qubits."""
    dim = 1 << n
    out = np.zeros((dim, dim))
    idx = np.arange(dim)
    for q in range(n):
        out[idx, idx ^ (1 << (n - 1 - q))] += 1.0
    return out


def multiqubit_h(t: float, spec: AnnealSpec) -> np.ndarray:
    """(t/t_f) H_t + C Lambda(t) sum_i sigma_z^i + (1 - t/t_f) Delta sum_i sigma_x^i."""
    _check_time(t, spec)
    s = t / spec.t_f
    inst = spec.instance
    diag = s * inst.diagonal + spec.pulse_amplitude(t) * inst.z_sum
    return np.diag(diag) + (1 - s) * spec.delta * x_sum(inst.n)


def ds_hamiltonian(instance: SpinGlassInstance) -> np.ndarray:
    """dH/ds of the pulse-free schedule: H_t - Delta sum_i sigma_x^i."""
    return np.diag(instance.diagonal) - DELTA * x_sum(instance.n)


def target_energy(instance: SpinGlassInstance, z) -> float:
    """Classical Ising energy of bitstring ``z`` (bit 0 -> spin +1)."""
    bits = [int(b) for b in z]
    if len(bits) != instance.n or any(b not in (0, 1) for b in bits):
        raise InputError(f"expected {instance.n} bits, got {z!r}")
    spin = [1 - 2 * b for b in bits]
    energy = sum(e * s for e, s in zip(instance.eps, spin))
    energy += sum(v * spin[i] * spin[j] for i, j, v in instance.couplings)
    return float(energy)


_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, index: int) -> int:
    """Per-instance seed: splitmix64(splitmix64(master) xor index), 63-bit."""
    return splitmix64(splitmix64(master & _MASK64) ^ (index & _MASK64)) >> 1


def rng_from_seed(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox keyed by ``seed``)."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


def generate_instance(n: int, seed: int) -> SpinGlassInstance:
    """Gaussian fields and couplings with zero mean and unit variance.

    Draw order: the n fields first, then J_ij for i < j in lexicographic
    order, all from ``rng_from_seed(seed).standard_normal``.
    """
    if n < 1:
        raise InputError(f"qubit count must be >= 1, got {n}")
    rng = rng_from_seed(seed)
    eps = rng.standard_normal(n)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    values = rng.standard_normal(len(pairs))
    couplings = tuple((i, j, float(v)) for (i, j), v in zip(pairs, values))
    return SpinGlassInstance(n, tuple(float(e) for e in eps), couplings, seed)
