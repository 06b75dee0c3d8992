"""Parameter sweeps, robustness perturbations, and linear fits.

One sweep varies a single scalar axis.  With no perturbation the axis is
a physics field (blockade strength, Foerster defect, or decay rate); with
a perturbation kind the axis is the perturbation magnitude:

- ``amplitude_scale``: both drives scaled by 1 + value (value dimensionless);
- ``power_imbalance``: only the control-atom drive scaled by 1 + value;
- ``doppler_offset_pair``: quasi-static detuning offsets value*(u1, u2) MHz
  added to the control/target drives (atom velocities constant over the
  microsecond pulse), evaluated in the full two-atom model since the
  symmetric reduction no longer applies.

Each point is scored deterministically (closed-form leakage expectation
when decay is on) or by trajectory sampling when MCWF settings are given.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .metrics import assemble_gate, local_phase_correction
from .mcwf import TrajectorySpec, deterministic_leakage_error, estimate_gate_error
from .model import (PhysicsParams, build_full_two_atom, build_symmetric_blockade,
                    build_two_level)
from .propagator import propagate
from .waveform import adjust

__all__ = [
    "FitResult",
    "MCWFSettings",
    "SweepPoint",
    "SweepSpec",
    "fit_linear",
    "run_sweep",
    "sweep_csv",
]

TWO_PI = 2.0 * math.pi

PERTURBATIONS = ("none", "amplitude_scale", "doppler_offset_pair",
                 "power_imbalance")
PHYSICS_AXES = ("B_MHz", "delta_p_MHz", "gamma_per_us")


@dataclass(frozen=True)
class MCWFSettings:
    """Per-point trajectory sampling settings (same seed at every point)."""

    n_trajectories: int
    base_seed: int


@dataclass(frozen=True)
class SweepSpec:
    """Base configuration plus one swept axis.

    ``score`` selects the deterministic figure of merit: ``corrected``
    applies the single-qubit phase correction, ``strict`` scores against
    C-Z directly.  ``direction`` only matters for ``doppler_offset_pair``.
    """

    waveform: object
    physics: PhysicsParams
    axis_name: str
    values: tuple[float, ...]
    perturbation: str = "none"
    direction: tuple[float, float] = (1.0, -1.0)
    mcwf: MCWFSettings | None = None
    score: str = "corrected"
    tol: float = 1e-11

    def __post_init__(self):
        if self.perturbation not in PERTURBATIONS:
            raise ValueError(f"perturbation must be one of {PERTURBATIONS}")
        if self.perturbation == "none" and self.axis_name not in PHYSICS_AXES:
            raise ValueError(f"unperturbed sweeps take an axis from {PHYSICS_AXES}")
        if len(self.values) == 0:
            raise ValueError("values list must be non-empty")
        if not all(np.isfinite(v) for v in self.values):
            raise ValueError("axis values must be finite")
        if self.score not in ("strict", "corrected"):
            raise ValueError("score must be 'strict' or 'corrected'")


@dataclass(frozen=True)
class SweepPoint:
    """One sweep row; ``stderr`` is None for deterministic evaluation."""

    axis_value: float
    gate_error: float
    stderr: float | None


@dataclass(frozen=True)
class FitResult:
    """Ordinary-least-squares line through sweep points."""

    slope: float
    intercept: float
    r_squared: float


def _point_models(spec: SweepSpec, value: float):
    """Manifold models (|00>, |01>, |10>) and physics at one axis point.

    |0> is the driven qubit state, so under an asymmetric perturbation the
    |01> manifold follows the control-atom drive and |10> the target's.
    """
    w, p = spec.waveform, spec.physics
    if spec.perturbation == "none":
        if spec.axis_name == "B_MHz":
            p = replace(p, B=TWO_PI * value)
        elif spec.axis_name == "delta_p_MHz":
            p = replace(p, delta_p=TWO_PI * value)
        else:
            p = replace(p, gamma=value)
        return (build_symmetric_blockade(w, p), build_two_level(w),
                build_two_level(w)), p
    if spec.perturbation == "amplitude_scale":
        ws = adjust(w, omega_factor=1.0 + value)
        return (build_symmetric_blockade(ws, p), build_two_level(ws),
                build_two_level(ws)), p
    if spec.perturbation == "power_imbalance":
        wc = adjust(w, omega_factor=1.0 + value)
        return (build_full_two_atom(wc, w, p), build_two_level(wc),
                build_two_level(w)), p
    u1, u2 = spec.direction
    wc = adjust(w, delta_offset=TWO_PI * value * u1)
    wt = adjust(w, delta_offset=TWO_PI * value * u2)
    return (build_full_two_atom(wc, wt, p), build_two_level(wc),
            build_two_level(wt)), p


def _deterministic_error(models, score: str, tol: float) -> float:
    amps = [propagate(m, tol=tol).final_state[0] for m in models]
    gate = assemble_gate(*amps)
    if score == "strict":
        return gate.E
    return local_phase_correction(gate).corrected.E


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepPoint]:
    """Evaluate the gate error at every axis value, in axis order."""
    points = []
    for value in spec.values:
        models, p = _point_models(spec, value)
        if spec.mcwf is not None:
            tspec = TrajectorySpec(models=models, gamma=p.gamma,
                                   n_trajectories=spec.mcwf.n_trajectories,
                                   base_seed=spec.mcwf.base_seed, tol=spec.tol)
            stats = estimate_gate_error(tspec, workers=workers)
            points.append(SweepPoint(value, stats.mean_gate_error,
                                     stats.standard_error))
        elif p.gamma > 0.0:
            err = deterministic_leakage_error(models, p.gamma, tol=spec.tol)
            points.append(SweepPoint(value, err, None))
        else:
            err = _deterministic_error(models, spec.score, spec.tol)
            points.append(SweepPoint(value, err, None))
    return points


def fit_linear(points) -> FitResult:
    """Least-squares line through (x, y) pairs.

    Constant ordinates fit exactly (zero residual over zero variance), so
    that degenerate case is defined as R-squared = 1.
    """
    xy = np.asarray([(p[0], p[1]) for p in points], dtype=float)
    if xy.shape[0] < 2:
        raise ValueError("need at least two points")
    x, y = xy[:, 0], xy[:, 1]
    if np.ptp(x) == 0.0:
        raise ValueError("abscissae are degenerate")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return FitResult(float(slope), float(intercept), float(r2))


def sweep_csv(spec: SweepSpec, points, path) -> None:
    """Write sweep rows as CSV (stderr column only for sampled sweeps)."""
    sampled = spec.mcwf is not None
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["axis_name", "axis_value", "gate_error"]
        writer.writerow(header + ["stderr"] if sampled else header)
        for pt in points:
            row = [spec.axis_name, repr(pt.axis_value), repr(pt.gate_error)]
            if sampled:
                row.append(repr(pt.stderr))
            writer.writerow(row)
