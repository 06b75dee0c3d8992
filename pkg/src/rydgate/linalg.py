"""Small dense complex kernel: Hermiticity test, exp(-iH dt), midpoint oracle.

The piecewise-constant evolver is the reference oracle for the adaptive
propagator: H(t) is frozen at each interval midpoint and exponentiated
exactly, which is second-order accurate in the time dependence and exact
for the constant Foerster block.  Hermitian matrices go through an
eigendecomposition (exactly unitary slices); non-Hermitian effective
Hamiltonians use the scaling-and-squaring Pade exponential.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from . import _kernels
from .model import TimeDependentModel
from .propagator import _compile_model

__all__ = [
    "evolve_piecewise_constant",
    "hermitian_check",
    "matrix_exponential",
]

HERMITIAN_ATOL = 1e-12


def hermitian_check(m: np.ndarray) -> bool:
    """True iff ``max |m_ij - conj(m_ji)| < 1e-12``; rejects non-square input."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    return bool(np.max(np.abs(m - m.conj().T)) < HERMITIAN_ATOL)


def matrix_exponential(m: np.ndarray, dt: float) -> np.ndarray:
    """Return ``exp(-i m dt)``.

    Hermitian input uses the eigendecomposition (result unitary to
    roundoff); general input falls back to the Pade scaling-and-squaring
    exponential.
    """
    m = np.asarray(m, dtype=np.complex128)
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    if hermitian_check(m):
        w, v = np.linalg.eigh(m)
        u = (v * np.exp(-1j * dt * w)) @ v.conj().T
    else:
        u = scipy.linalg.expm(-1j * dt * m)
    if not np.all(np.isfinite(u)):
        raise FloatingPointError("matrix exponential overflowed")
    return u


def evolve_piecewise_constant(m: TimeDependentModel, n_steps: int,
                              psi0: np.ndarray | None = None) -> np.ndarray:
    """Evolve by exponentiating H at each of ``n_steps`` interval midpoints."""
    if n_steps < 1:
        raise ValueError("need at least one step")
    if psi0 is None:
        psi0 = np.zeros(m.dim, dtype=np.complex128)
        psi0[0] = 1.0
    else:
        psi0 = np.asarray(psi0, dtype=np.complex128)
        if psi0.shape != (m.dim,):
            raise ValueError("initial state dimension mismatch")
    if m.hermitian:
        arrays = _compile_model(m)
        return _kernels.evolve_midpoint_hermitian(*arrays, psi0, 0.0,
                                                  m.duration, n_steps)
    dt = m.duration / n_steps
    psi = psi0.copy()
    for j in range(n_steps):
        h = m.hamiltonian((j + 0.5) * dt)
        psi = scipy.linalg.expm(-1j * dt * h) @ psi
    return psi
