"""Dense linear algebra helpers for state vectors of up to 12 qubits.

States are plain 1-D complex ``ndarray`` objects of length ``2**n`` and
operators are dense ``(2**n, 2**n)`` arrays. The functions here validate
their inputs and fix the conventions the rest of the package relies on
(eigenvalue order, eigenvector phase gauge).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

MAX_QUBITS = 12

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
IDENTITY_2 = np.eye(2)


@dataclass(frozen=True)
class EigenSystem:
    """Full spectrum in ascending order; ``vectors[:, k]`` pairs with ``values[k]``."""

    values: np.ndarray
    vectors: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    @property
    def ground(self) -> np.ndarray:
        return self.vectors[:, 0]


def qubit_count(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise InputError(f"dimension {dim} is not a power of two >= 2")
    if n > MAX_QUBITS:
        raise InputError(f"{n} qubits exceeds the supported maximum of {MAX_QUBITS}")
    return n


def as_state(amplitudes, normalize: bool = False) -> np.ndarray:
    psi = np.asarray(amplitudes, dtype=complex)
    if psi.ndim != 1:
        raise InputError(f"state must be 1-D, got shape {psi.shape}")
    qubit_count(psi.size)
    if not np.all(np.isfinite(psi)):
        raise InputError("state has non-finite amplitudes")
    if normalize:
        norm = np.linalg.norm(psi)
        if norm == 0.0:
            raise InputError("cannot normalize the zero vector")
        psi = psi / norm
    return psi


def basis_state(index: int, n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[index] = 1.0
    return psi


def as_hermitian(matrix, atol: float = 1e-12) -> np.ndarray:
    h = np.asarray(matrix)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InputError(f"operator must be square, got shape {h.shape}")
    qubit_count(h.shape[0])
    if not np.all(np.isfinite(h)):
        raise InputError("operator has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - h.conj().T)) > atol * scale:
        raise InputError("operator is not Hermitian")
    return h


def fix_phase(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate each column so its largest-magnitude component is real positive.

    Components within ``tol`` of the column maximum count as tied; the one
    with the lowest index wins, so the gauge does not flicker between
    numerically equal entries.
    """
    v = np.array(vectors, dtype=complex, copy=True)
    mags = np.abs(v)
    top = mags.max(axis=0)
    pivots = np.argmax(mags >= top - tol * np.maximum(top, 1.0), axis=0)
    cols = np.arange(v.shape[1])
    pivot_vals = v[pivots, cols]
    v *= (np.abs(pivot_vals) / pivot_vals)[None, :]
    v[pivots, cols] = np.abs(pivot_vals)
    return v


def hermitian_eig(h) -> EigenSystem:
    """Full eigendecomposition of a Hermitian operator.

    Backed by LAPACK (``numpy.linalg.eigh``) with the phase gauge from
    :func:`fix_phase` applied, so identical input gives bit-identical output.
    """
    h = as_hermitian(h)
    values, vectors = np.linalg.eigh(h)
    return EigenSystem(values, fix_phase(vectors))


def apply(h, psi) -> np.ndarray:
    h = np.asarray(h)
    psi = np.asarray(psi, dtype=complex)
    if h.ndim != 2 or psi.ndim != 1 or h.shape[1] != psi.shape[0]:
        raise InputError(f"cannot apply operator {h.shape} to state {psi.shape}")
    return h @ psi


def overlap(phi, psi) -> complex:
    """Inner product <phi|psi>, conjugating the first argument."""
    phi = np.asarray(phi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if phi.shape != psi.shape or phi.ndim != 1:
        raise InputError(f"overlap of mismatched states {phi.shape} and {psi.shape}")
    return complex(np.vdot(phi, psi))


def expm_hermitian(h, dt: float) -> np.ndarray:
    """exp(-i h dt) through the eigenbasis; unitary to machine precision."""
    es = hermitian_eig(h)
    return (es.vectors * np.exp(-1j * es.values * dt)) @ es.vectors.conj().T
