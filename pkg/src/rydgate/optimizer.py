"""Waveform parameter search by derivative-free gate-error minimization.

The objective builds a waveform from a parameter vector, propagates the
participating manifolds without decay, assembles the two-qubit gate, and
scores it either strictly against C-Z or after the single-qubit phase
correction.  Population return and the entangling-phase relation are not
penalized separately: both are implied by a small gate error, so the
scalar objective subsumes them.

The search is Nelder-Mead with adaptive simplex parameters and seeded
random restarts inside the bounds; it is gradient-free because each
evaluation is a cheap smooth simulation.  Results are deterministic for
a given seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, minimize

from .metrics import assemble_gate, local_phase_correction
from .model import PhysicsParams, build_symmetric_blockade, build_two_level
from .propagator import PropagationError, propagate
from .waveform import BernsteinWaveform, SinusoidalWaveform

__all__ = [
    "FAMILY_PARAMS",
    "OptimizationProblem",
    "OptimizationReport",
    "PENALTY",
    "TARGETS",
    "objective",
    "optimize",
    "trace_csv",
]

PENALTY = 1.0

FAMILY_PARAMS = {
    "sinusoidal": ("Omega0_MHz", "Omega1_MHz", "Omega2_MHz",
                   "Delta0_MHz", "Delta1_MHz", "Delta2_MHz"),
    "bernstein": ("beta1_MHz", "beta2_MHz", "beta3_MHz", "beta4_MHz",
                  "Delta0_MHz"),
    "constant_two_level": ("Omega_MHz",),
}

TARGETS = ("strict_CZ", "controlled_PHASE_with_correction")


@dataclass(frozen=True)
class OptimizationProblem:
    """Search specification over one waveform family.

    ``bounds`` is one (lo, hi) pair per family parameter, in MHz.  The
    ``constant_two_level`` family is a calibration toy -- a constant
    resonant drive on one atom scored by the distance of the return
    amplitude from -1 (a full Rabi cycle) -- with no physics block.
    ``stop_below`` ends the search early once the best error falls below
    it; ``None`` runs the full budget.
    """

    family: str
    bounds: tuple[tuple[float, float], ...]
    physics: PhysicsParams | None
    target: str = "controlled_PHASE_with_correction"
    budget: int = 10000
    seed: int = 0
    Tg_us: float = 1.0
    stop_below: float | None = None
    tol: float = 1e-9

    def __post_init__(self):
        if self.family not in FAMILY_PARAMS:
            raise ValueError(f"unknown waveform family {self.family!r}")
        names = FAMILY_PARAMS[self.family]
        if len(self.bounds) != len(names):
            raise ValueError(f"{self.family} takes {len(names)} parameters "
                             f"({', '.join(names)}), got {len(self.bounds)} bounds")
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError("bounds must be finite with lo < hi")
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}")
        if self.budget < 1:
            raise ValueError("budget must be at least one evaluation")
        if self.family != "constant_two_level" and self.physics is None:
            raise ValueError("physics parameters required for gate families")


@dataclass(frozen=True)
class OptimizationReport:
    """Best point found, with the monotone best-so-far convergence trace."""

    best_params: tuple[float, ...]
    best_error: float
    n_evaluations: int
    trace: tuple[float, ...]
    budget_exhausted: bool


def _build_waveform(params, problem: OptimizationProblem):
    if problem.family == "sinusoidal":
        return SinusoidalWaveform(*params, Tg_us=problem.Tg_us)
    if problem.family == "bernstein":
        return BernsteinWaveform(beta=tuple(params[:4]), delta0=params[4],
                                 Tg_us=problem.Tg_us)
    return SinusoidalWaveform(params[0], 0.0, 0.0, 0.0, 0.0, 0.0,
                              Tg_us=problem.Tg_us)


def objective(params, problem: OptimizationProblem) -> float:
    """Gate error of the waveform encoded by ``params`` (MHz units).

    Out-of-bounds points, invalid waveforms, and propagation failures all
    score the flat penalty value, keeping the search inside the feasible
    region without extra machinery.
    """
    params = np.asarray(params, dtype=float)
    for x, (lo, hi) in zip(params, problem.bounds):
        if not lo <= x <= hi:
            return PENALTY
    try:
        w = _build_waveform(params, problem)
        if problem.family == "constant_two_level":
            amp = propagate(build_two_level(w), tol=problem.tol).final_state[0]
            return float(abs(amp + 1.0) ** 2 / 4.0)
        a00 = propagate(build_symmetric_blockade(w, problem.physics),
                        tol=problem.tol).final_state[0]
        a01 = propagate(build_two_level(w), tol=problem.tol).final_state[0]
        gate = assemble_gate(a00, a01, a01)
        if problem.target == "strict_CZ":
            return gate.E
        return local_phase_correction(gate).corrected.E
    except (ValueError, PropagationError):
        return PENALTY


class _BudgetExhausted(Exception):
    pass


class _TargetReached(Exception):
    pass


def optimize(problem: OptimizationProblem, x0=None) -> OptimizationReport:
    """Minimize the gate error with restarted Nelder-Mead.

    Restart initial points are drawn uniformly inside the bounds from a
    generator seeded by ``problem.seed`` (``x0``, when given, replaces the
    first draw as a warm start).  Each restart runs an adaptive
    Nelder-Mead capped at a share of the remaining budget; the search
    stops when the budget is exhausted or the best error falls below
    ``stop_below``.
    """
    lo = np.array([b[0] for b in problem.bounds])
    hi = np.array([b[1] for b in problem.bounds])
    d = lo.size
    rng = np.random.default_rng(problem.seed)
    trace: list[float] = []
    best = PENALTY
    best_x = None

    def scored(params):
        nonlocal best, best_x
        if len(trace) >= problem.budget:
            raise _BudgetExhausted
        val = objective(params, problem)
        if val < best:
            best = val
            best_x = np.array(params, dtype=float)
        trace.append(best)
        if problem.stop_below is not None and best < problem.stop_below:
            raise _TargetReached
        return val

    per_restart = max(150 * d, 400)
    exhausted = False
    try:
        while len(trace) < problem.budget:
            start = rng.uniform(lo, hi)
            if x0 is not None:
                start, x0 = np.asarray(x0, dtype=float), None
            cap = min(per_restart, problem.budget - len(trace))
            minimize(scored, start, method="Nelder-Mead",
                     bounds=Bounds(lo, hi),
                     options={"maxfev": cap, "xatol": 1e-10,
                              "fatol": 1e-14, "adaptive": True})
        exhausted = True
    except _BudgetExhausted:
        exhausted = True
    except _TargetReached:
        pass
    if best_x is None:
        best_x = lo.copy()
    return OptimizationReport(tuple(float(x) for x in best_x), float(best),
                              len(trace), tuple(trace), exhausted)


def trace_csv(report: OptimizationReport, path) -> None:
    """Write the best-so-far convergence trace as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eval", "best_error"])
        for i, e in enumerate(report.trace, start=1):
            writer.writerow([i, repr(e)])
