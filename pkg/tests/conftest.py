import math

import numpy as np
import pytest

from rydgate.metrics import assemble_gate, local_phase_correction
from rydgate.model import PhysicsParams, build_symmetric_blockade, build_two_level
from rydgate.propagator import propagate
from rydgate.waveform import BernsteinWaveform, SinusoidalWaveform

TWO_PI = 2.0 * math.pi

SINUSOIDAL_PARAMS = (2.564, 0.950, 0.116, 1.004, -1.093, -0.002)
BERNSTEIN_BETA = (1.419, 0.0, 5.076, 13.425)
BERNSTEIN_DELTA0 = -3.512


@pytest.fixture(scope="session")
def sinusoidal_waveform():
    return SinusoidalWaveform(*SINUSOIDAL_PARAMS)


@pytest.fixture(scope="session")
def bernstein_waveform():
    return BernsteinWaveform(beta=BERNSTEIN_BETA, delta0=BERNSTEIN_DELTA0)


@pytest.fixture(scope="session")
def physics():
    return PhysicsParams(B=TWO_PI * 500.0, delta_p=TWO_PI * -3.0)


def gate_from(waveform, physics, tol=1e-12):
    a00 = propagate(build_symmetric_blockade(waveform, physics),
                    tol=tol).final_state[0]
    a01 = propagate(build_two_level(waveform), tol=tol).final_state[0]
    return assemble_gate(a00, a01, a01)


@pytest.fixture(scope="session")
def sinusoidal_gate(sinusoidal_waveform, physics):
    return gate_from(sinusoidal_waveform, physics)


@pytest.fixture(scope="session")
def bernstein_gate(bernstein_waveform, physics):
    return gate_from(bernstein_waveform, physics)


@pytest.fixture(scope="session")
def bernstein_corrected(bernstein_gate):
    return local_phase_correction(bernstein_gate)


def zero_state(dim, index=0):
    psi = np.zeros(dim, dtype=np.complex128)
    psi[index] = 1.0
    return psi
