"""Time-dependent Hamiltonians for the blockade-gate manifolds.

Each computational basis state of the two-qubit gate evolves inside its
own closed manifold:

* ``|01>`` / ``|10>`` -- a driven two-level system (one atom coupled),
* ``|00>`` -- the symmetric four-state ladder
  ``|00> <-> |R> <-> |rr'> <-> |pp'>`` with the Foerster exchange block,
* ``|11>`` -- not coupled at all; its amplitude is identically 1.

A five-state variant with independent drive on each atom is provided for
asymmetric perturbation studies; under identical driving it is unitarily
equivalent to the four-state reduction.

Hamiltonian entries are angular frequencies in rad/us; time is in us.
Models are immutable bundles of ``(coefficient kind, channel, matrix)``
terms with ``H(t) = sum_k coeff_k(t) * M_k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .waveform import Channel, CHANNEL_CONST

__all__ = [
    "PP_CONVENTIONS",
    "PP_LITERAL",
    "PP_ROTATING",
    "PhysicsParams",
    "TimeDependentModel",
    "apply_decay",
    "build_full_two_atom",
    "build_symmetric_blockade",
    "build_two_level",
    "model_to_json",
]

SQRT2 = math.sqrt(2.0)

PP_LITERAL = "literal"
PP_ROTATING = "rotating_frame"
PP_CONVENTIONS = (PP_LITERAL, PP_ROTATING)
_UNIT = Channel(CHANNEL_CONST, (1.0,), 1.0)


@dataclass(frozen=True)
class PhysicsParams:
    """Static interaction parameters.

    Attributes
    ----------
    B : float
        Foerster exchange coupling, rad/us.
    delta_p : float
        Foerster energy penalty on the exchanged pair state, rad/us.
    gamma : float
        Uniform Rydberg decay rate, 1/us (applied via :func:`apply_decay`).
    pp_diagonal_convention : str
        ``"literal"`` places ``delta_p`` alone on the ``|pp'>`` diagonal;
        ``"rotating_frame"`` uses ``2*Delta(t) + delta_p``.
    """

    B: float
    delta_p: float
    gamma: float = 0.0
    pp_diagonal_convention: str = PP_LITERAL

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("decay rate must be nonnegative")
        if self.pp_diagonal_convention not in (PP_LITERAL, PP_ROTATING):
            raise ValueError(
                f"unknown pp diagonal convention {self.pp_diagonal_convention!r}")


@dataclass(frozen=True)
class TimeDependentModel:
    """H(t) = sum of channel-weighted constant matrices.

    ``terms`` is a tuple of ``(kind, channel, matrix)`` with kind one of
    ``"unit"``, ``"omega"``, ``"delta"``; the unit channel is the constant
    1.  ``excitation_counts`` gives the number of excited (decaying)
    electrons per basis state.
    """

    basis_labels: tuple[str, ...]
    terms: tuple[tuple[str, Channel, np.ndarray], ...]
    hermitian: bool
    excitation_counts: tuple[int, ...]
    duration: float

    def __post_init__(self):
        dim = len(self.basis_labels)
        for _, _, m in self.terms:
            if m.shape != (dim, dim):
                raise ValueError("term matrix dimension mismatch")
        if len(self.excitation_counts) != dim:
            raise ValueError("excitation count per basis state required")
        if any(c not in (0, 1, 2) for c in self.excitation_counts):
            raise ValueError("excitation counts must be 0, 1, or 2")
        if self.duration <= 0:
            raise ValueError("model duration must be positive")

    @property
    def dim(self) -> int:
        return len(self.basis_labels)

    def hamiltonian(self, t: float) -> np.ndarray:
        """Assemble the dense H(t) in rad/us."""
        h = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for _, channel, matrix in self.terms:
            h += channel(t) * matrix
        return h


def build_two_level(w, enhancement: float = 1.0) -> TimeDependentModel:
    """Driven two-level system {ground, rydberg} with optional sqrt(2) drive.

    H(t) = [[0, e*Omega(t)/2], [e*Omega(t)/2, Delta(t)]] where the
    enhancement ``e`` is 1 for a singly-coupled atom and sqrt(2) for the
    symmetric bright combination of two atoms under ideal blockade.
    """
    if not math.isclose(enhancement, 1.0) and not math.isclose(enhancement, SQRT2):
        raise ValueError("enhancement must be 1 or sqrt(2)")
    m_omega = np.array([[0.0, enhancement / 2.0],
                        [enhancement / 2.0, 0.0]], dtype=np.complex128)
    m_delta = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=np.complex128)
    return TimeDependentModel(
        basis_labels=("g", "r"),
        terms=(("omega", w.omega_channel(), m_omega),
               ("delta", w.delta_channel(), m_delta)),
        hermitian=True,
        excitation_counts=(0, 1),
        duration=w.Tg_us,
    )


def build_symmetric_blockade(w, p: PhysicsParams) -> TimeDependentModel:
    """Four-state |00> manifold under symmetric driving.

    Basis ``(|00>, |R>, |rr'>, |pp'>)`` with couplings
    ``(sqrt(2)/2) Omega(t)`` on |00><->|R| and |R><->|rr'|, diagonal
    ``Delta(t)`` on |R> and ``2 Delta(t)`` on |rr'>, and the constant
    Foerster block ``B`` between |rr'> and |pp'> with penalty ``delta_p``.
    """
    c = SQRT2 / 2.0
    m_omega = np.zeros((4, 4), dtype=np.complex128)
    m_omega[0, 1] = m_omega[1, 0] = c
    m_omega[1, 2] = m_omega[2, 1] = c
    m_delta = np.zeros((4, 4), dtype=np.complex128)
    m_delta[1, 1] = 1.0
    m_delta[2, 2] = 2.0
    if p.pp_diagonal_convention == PP_ROTATING:
        m_delta[3, 3] = 2.0
    m_unit = np.zeros((4, 4), dtype=np.complex128)
    m_unit[2, 3] = m_unit[3, 2] = p.B
    m_unit[3, 3] = p.delta_p
    return TimeDependentModel(
        basis_labels=("00", "R", "rr", "pp"),
        terms=(("unit", _UNIT, m_unit),
               ("omega", w.omega_channel(), m_omega),
               ("delta", w.delta_channel(), m_delta)),
        hermitian=True,
        excitation_counts=(0, 1, 2, 2),
        duration=w.Tg_us,
    )


def build_full_two_atom(w_control, w_target, p: PhysicsParams) -> TimeDependentModel:
    """Five-state |00> manifold with independent drive on each atom.

    Basis ``(|00>, |r0>, |0r'>, |rr'>, |pp'>)``; the control drive couples
    |00><->|r0> and |0r'><->|rr'>, the target drive couples |00><->|0r'>
    and |r0><->|rr'>; diagonals carry the respective detunings and the
    Foerster block is unchanged.
    """
    if w_control.Tg_us != w_target.Tg_us:
        raise ValueError("control and target drives must share the gate time")
    half = 0.5
    mc_omega = np.zeros((5, 5), dtype=np.complex128)
    mc_omega[0, 1] = mc_omega[1, 0] = half
    mc_omega[2, 3] = mc_omega[3, 2] = half
    mt_omega = np.zeros((5, 5), dtype=np.complex128)
    mt_omega[0, 2] = mt_omega[2, 0] = half
    mt_omega[1, 3] = mt_omega[3, 1] = half
    mc_delta = np.zeros((5, 5), dtype=np.complex128)
    mc_delta[1, 1] = 1.0
    mc_delta[3, 3] = 1.0
    mt_delta = np.zeros((5, 5), dtype=np.complex128)
    mt_delta[2, 2] = 1.0
    mt_delta[3, 3] = 1.0
    if p.pp_diagonal_convention == PP_ROTATING:
        mc_delta[4, 4] = 1.0
        mt_delta[4, 4] = 1.0
    m_unit = np.zeros((5, 5), dtype=np.complex128)
    m_unit[3, 4] = m_unit[4, 3] = p.B
    m_unit[4, 4] = p.delta_p
    return TimeDependentModel(
        basis_labels=("00", "r0", "0r", "rr", "pp"),
        terms=(("unit", _UNIT, m_unit),
               ("omega", w_control.omega_channel(), mc_omega),
               ("delta", w_control.delta_channel(), mc_delta),
               ("omega", w_target.omega_channel(), mt_omega),
               ("delta", w_target.delta_channel(), mt_delta)),
        hermitian=True,
        excitation_counts=(0, 1, 1, 2, 2),
        duration=w_control.Tg_us,
    )


def apply_decay(m: TimeDependentModel, gamma: float) -> TimeDependentModel:
    """Add -i*(gamma/2)*(excitation count) to each diagonal entry.

    Decay goes to an absorbing reservoir outside the manifold, so the
    effective Hamiltonian simply loses norm; gamma = 0 returns the model
    unchanged.
    """
    if gamma < 0:
        raise ValueError("decay rate must be nonnegative")
    if gamma == 0:
        return m
    sink = np.diag(np.asarray(m.excitation_counts, dtype=np.complex128))
    decay = -0.5j * gamma * sink
    terms = list(m.terms)
    for i, (kind, channel, matrix) in enumerate(terms):
        if kind == "unit":
            terms[i] = (kind, channel, matrix + decay)
            break
    else:
        terms.append(("unit", _UNIT, decay))
    return replace(m, terms=tuple(terms), hermitian=False)


def model_to_json(m: TimeDependentModel) -> str:
    """Dump basis labels and dense term matrices as re/im pairs (row-major)."""
    doc = {
        "basis_labels": list(m.basis_labels),
        "hermitian": m.hermitian,
        "excitation_counts": list(m.excitation_counts),
        "terms": [
            {
                "kind": kind,
                "matrix_re_im": [[v.real, v.imag] for v in matrix.ravel()],
            }
            for kind, _, matrix in m.terms
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2)
