"""Adaptive propagation of i d|psi>/dt = H(t)|psi> over the pulse window.

A Dormand-Prince 5(4) pair with error-based step control integrates each
manifold.  The first step is capped by the fastest scale in H (the
Foerster block sets a ~2 ns oscillation at B = 2*pi*500 MHz, which naive
steppers under-resolve); afterwards the embedded error estimate governs
the step size.  Population and unwrapped-phase histories can be recorded
on a uniform grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import TimeDependentModel
from .waveform import CHANNEL_SPLINE

__all__ = [
    "PropagationError",
    "PropagationResult",
    "phase_trace",
    "propagate",
    "trajectory_csv",
]

DEFAULT_TOL = 1e-11
POPULATION_FLOOR = 1e-12


class PropagationError(RuntimeError):
    """Integration could not proceed (step-size underflow)."""


@dataclass(frozen=True)
class PropagationResult:
    """Final state plus optional uniform-grid history.

    ``phases`` are unwrapped per basis state and set to NaN wherever the
    population is below ``POPULATION_FLOOR``.  ``max_norm_drift`` is the
    largest deviation of the squared norm from 1 over accepted steps; it
    is NaN for non-Hermitian (decaying) models, where norm loss is
    physical.
    """

    final_state: np.ndarray
    t_samples: np.ndarray | None
    amplitudes: np.ndarray | None
    populations: np.ndarray | None
    phases: np.ndarray | None
    step_count: int
    max_norm_drift: float


def _compile_model(m: TimeDependentModel):
    """Flatten a model into the array form consumed by the kernels."""
    n_terms = len(m.terms)
    dim = m.dim
    ckind = np.zeros(n_terms, dtype=np.int64)
    cparams = np.zeros((n_terms, 8), dtype=np.float64)
    cscale = np.zeros(n_terms, dtype=np.float64)
    coffset = np.zeros(n_terms, dtype=np.float64)
    mats = np.zeros((n_terms, dim, dim), dtype=np.complex128)
    table_rows = []
    for k, (_, ch, matrix) in enumerate(m.terms):
        ckind[k] = ch.kind
        cscale[k] = ch.scale
        coffset[k] = ch.offset
        mats[k] = matrix
        if ch.kind == CHANNEL_SPLINE:
            tg, npieces = ch.params
            cparams[k, :3] = (tg, npieces, float(len(table_rows)))
            table_rows.extend(ch.table)
        else:
            cparams[k, :len(ch.params)] = ch.params
    if table_rows:
        ctable = np.ascontiguousarray(np.vstack(table_rows))
    else:
        ctable = np.zeros((0, 4), dtype=np.float64)
    return ckind, cparams, cscale, coffset, ctable, mats


def _spectral_bound(m: TimeDependentModel, grid: int = 257) -> float:
    """Upper bound on max |eigenvalue| of H(t): max row sum over a grid."""
    bound = 0.0
    for t in np.linspace(0.0, m.duration, grid):
        h = m.hamiltonian(float(t))
        bound = max(bound, float(np.max(np.sum(np.abs(h), axis=1))))
    return bound


def propagate(m: TimeDependentModel, psi0: np.ndarray | None = None,
              tol: float = DEFAULT_TOL, record: int = 0) -> PropagationResult:
    """Integrate the model over ``[0, duration]``.

    Parameters
    ----------
    m : TimeDependentModel
    psi0 : ndarray, optional
        Initial state; defaults to the first basis state.
    tol : float
        Local error tolerance per step (both absolute and relative),
        within ``[1e-13, 1e-6]``.
    record : int
        If >= 2, record amplitudes at ``record`` uniform times.
    """
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError(f"tol={tol} outside [1e-13, 1e-6]")
    if psi0 is None:
        psi0 = np.zeros(m.dim, dtype=np.complex128)
        psi0[0] = 1.0
    else:
        psi0 = np.asarray(psi0, dtype=np.complex128)
        if psi0.shape != (m.dim,):
            raise ValueError("initial state dimension mismatch")
        if not np.all(np.isfinite(psi0)):
            raise ValueError("initial state must be finite")

    arrays = _compile_model(m)
    bound = _spectral_bound(m)
    h_first_cap = 0.02 / bound if bound > 0 else m.duration
    if record >= 2:
        record_ts = np.linspace(0.0, m.duration, record)
    else:
        record_ts = np.zeros(0, dtype=np.float64)

    status, t_reached, psi, samples, n_steps, drift = _kernels.integrate_adaptive(
        *arrays, psi0, 0.0, m.duration, tol, h_first_cap, record_ts)
    if status != 0:
        raise PropagationError(f"step size underflow at t={t_reached:.6e} us")

    if record >= 2:
        populations = np.abs(samples) ** 2
        phases = phase_trace(samples) if record >= 256 else None
        result_samples = samples
        ts = record_ts
    else:
        populations = phases = result_samples = ts = None
    return PropagationResult(
        final_state=psi,
        t_samples=ts,
        amplitudes=result_samples,
        populations=populations,
        phases=phases,
        step_count=int(n_steps),
        max_norm_drift=float(drift) if m.hermitian else float("nan"),
    )


def phase_trace(amplitudes: np.ndarray) -> np.ndarray:
    """Unwrapped phase per basis state from recorded amplitude samples.

    Unwrapping continues across low-population gaps from the last defined
    point; samples with population below ``POPULATION_FLOOR`` are NaN.
    """
    amplitudes = np.asarray(amplitudes)
    if amplitudes.ndim != 2 or amplitudes.shape[0] < 256:
        raise ValueError("need at least 256 recorded samples")
    out = np.full(amplitudes.shape, np.nan)
    defined = np.abs(amplitudes) ** 2 >= POPULATION_FLOOR
    for j in range(amplitudes.shape[1]):
        idx = np.nonzero(defined[:, j])[0]
        if idx.size:
            out[idx, j] = np.unwrap(np.angle(amplitudes[idx, j]))
    return out


def trajectory_csv(result: PropagationResult, labels, path) -> None:
    """Write the recorded history as CSV: t, populations, unwrapped phases."""
    if result.t_samples is None or result.phases is None:
        raise ValueError("result carries no recorded phase history")
    labels = list(labels)
    header = (["t_us"] + [f"pop_{lb}" for lb in labels]
              + [f"phase_{lb}" for lb in labels])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, t in enumerate(result.t_samples):
            row = [repr(float(t))]
            row += [repr(float(v)) for v in result.populations[i]]
            row += [repr(float(v)) for v in result.phases[i]]
            writer.writerow(row)
