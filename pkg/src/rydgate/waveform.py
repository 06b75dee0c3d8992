"""Pulse waveform families for the modulated gate drive.

Conventions
-----------
Time is measured in microseconds.  Stored coefficients are linear
frequencies in MHz; :meth:`eval` returns angular frequencies in rad/us.
Each waveform carries an ``angular`` flag: when set, coefficients are
interpreted as cycles (multiplied by 2*pi on evaluation), otherwise they
are used as bare angular rates.  The flag is resolved once by the
``calibrate-convention`` command and then pinned in configuration files.

Three families are supported:

* ``sinusoidal`` -- three-term amplitude and detuning modulation,
* ``bernstein`` -- symmetric Bernstein-pair amplitude envelope with a
  constant detuning,
* ``sampled`` -- cubic interpolation through uniformly spaced samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BernsteinWaveform",
    "Channel",
    "SampledWaveform",
    "SinusoidalWaveform",
    "WaveformReport",
    "adjust",
    "bernstein_basis",
    "export_samples",
    "validate",
    "waveform_from_dict",
    "waveform_to_dict",
]

TWO_PI = 2.0 * math.pi

# Channel kind tags shared with the compiled evaluator.
CHANNEL_CONST = 0
CHANNEL_SIN3 = 1
CHANNEL_BERNSTEIN = 2
CHANNEL_SPLINE = 3


def bernstein_basis(nu: int, n: int, x: float) -> float:
    """Bernstein basis polynomial b_{nu,n}(x) = C(n,nu) x^nu (1-x)^(n-nu).

    Parameters
    ----------
    nu : int
        Basis index, ``0 <= nu <= n``.
    n : int
        Polynomial degree.
    x : float
        Evaluation point in ``[0, 1]``.
    """
    if not 0 <= nu <= n:
        raise ValueError(f"basis index nu={nu} outside [0, {n}]")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    return math.comb(n, nu) * x**nu * (1.0 - x) ** (n - nu)


@dataclass(frozen=True)
class Channel:
    """Flattened description of one scalar control channel.

    The compiled propagator evaluates channels as
    ``scale * family(t, params) + offset`` with ``offset`` in rad/us.
    ``table`` holds cubic-piece coefficients for the spline kind.
    """

    kind: int
    params: tuple[float, ...]
    scale: float
    offset: float = 0.0
    table: np.ndarray | None = None

    def __call__(self, t: float) -> float:
        return self.scale * _family_value(self, t) + self.offset


def _family_value(ch: Channel, t: float) -> float:
    if ch.kind == CHANNEL_CONST:
        return ch.params[0]
    if ch.kind == CHANNEL_SIN3:
        c0, c1, c2, tg = ch.params
        return c0 + c1 * math.cos(TWO_PI * t / tg) + c2 * math.sin(math.pi * t / tg)
    if ch.kind == CHANNEL_BERNSTEIN:
        b1, b2, b3, b4, deg, tg = ch.params
        x = t / tg
        n = int(deg)
        total = 0.0
        for nu, beta in enumerate((b1, b2, b3, b4), start=1):
            total += beta * (bernstein_basis(nu, n, x) + bernstein_basis(n - nu, n, x))
        return total
    if ch.kind == CHANNEL_SPLINE:
        tg, npieces = ch.params
        j = min(int(t / tg * npieces), int(npieces) - 1)
        dx = t - j * (tg / npieces)
        c = ch.table[j]
        return ((c[0] * dx + c[1]) * dx + c[2]) * dx + c[3]
    raise ValueError(f"unknown channel kind {ch.kind}")


class _WaveformBase:
    """Shared evaluation plumbing; concrete families define channels."""

    def eval(self, t: float) -> tuple[float, float]:
        """Return ``(Omega, Delta)`` in rad/us at time ``t`` in ``[0, Tg]``."""
        if not 0.0 <= t <= self.Tg_us:
            raise ValueError(f"t={t} outside pulse window [0, {self.Tg_us}]")
        return self.omega_channel()(t), self.delta_channel()(t)

    def _scale(self) -> float:
        return TWO_PI if self.angular else 1.0


@dataclass(frozen=True)
class SinusoidalWaveform(_WaveformBase):
    """Three-term sinusoidal amplitude and detuning modulation.

    Omega(t) = Omega0 + Omega1*cos(2*pi*t/Tg) + Omega2*sin(pi*t/Tg), and
    the same form for Delta(t); all six coefficients in MHz.
    """

    omega0: float
    omega1: float
    omega2: float
    delta0: float
    delta1: float
    delta2: float
    Tg_us: float = 1.0
    angular: bool = True

    def __post_init__(self):
        if self.Tg_us <= 0:
            raise ValueError("gate time must be positive")
        grid = np.linspace(0.0, self.Tg_us, 10_000)
        omega = (self.omega0
                 + self.omega1 * np.cos(TWO_PI * grid / self.Tg_us)
                 + self.omega2 * np.sin(np.pi * grid / self.Tg_us))
        if omega.min() < 0:
            raise ValueError("Omega(t) must stay nonnegative over the pulse")

    def omega_channel(self) -> Channel:
        return Channel(CHANNEL_SIN3, (self.omega0, self.omega1, self.omega2, self.Tg_us),
                       self._scale())

    def delta_channel(self) -> Channel:
        return Channel(CHANNEL_SIN3, (self.delta0, self.delta1, self.delta2, self.Tg_us),
                       self._scale())


@dataclass(frozen=True)
class BernsteinWaveform(_WaveformBase):
    """Symmetric Bernstein-pair amplitude envelope with constant detuning.

    Omega(t) = sum_{nu=1..4} beta_nu * (b_{nu,n}(t/Tg) + b_{n-nu,n}(t/Tg)),
    summed literally, so for n = 8 the nu = 4 = n/2 term is counted twice.
    The envelope starts and ends at exactly zero amplitude.
    """

    beta: tuple[float, float, float, float]
    delta0: float
    n: int = 8
    Tg_us: float = 1.0
    angular: bool = True

    def __post_init__(self):
        if self.Tg_us <= 0:
            raise ValueError("gate time must be positive")
        if self.n < 8 or self.n % 2:
            raise ValueError("polynomial degree must be even and >= 8")
        if len(self.beta) != 4:
            raise ValueError("expected exactly four envelope coefficients")
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))

    def omega_channel(self) -> Channel:
        return Channel(CHANNEL_BERNSTEIN, (*self.beta, float(self.n), self.Tg_us),
                       self._scale())

    def delta_channel(self) -> Channel:
        return Channel(CHANNEL_CONST, (self.delta0,), self._scale())


@dataclass(frozen=True)
class SampledWaveform(_WaveformBase):
    """Cubic interpolation through uniform (Omega, Delta) samples in MHz.

    Samples are taken at ``linspace(0, Tg, len(samples))``.  Cubic rather
    than linear interpolation keeps the drive free of spurious
    high-frequency content.
    """

    omega_samples: tuple[float, ...]
    delta_samples: tuple[float, ...]
    Tg_us: float = 1.0
    angular: bool = True

    def __post_init__(self):
        if self.Tg_us <= 0:
            raise ValueError("gate time must be positive")
        om = np.asarray(self.omega_samples, dtype=float)
        de = np.asarray(self.delta_samples, dtype=float)
        if om.size < 16 or de.size < 16:
            raise ValueError("need at least 16 samples per channel")
        if om.size != de.size:
            raise ValueError("Omega and Delta sample counts differ")
        if not (np.all(np.isfinite(om)) and np.all(np.isfinite(de))):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "omega_samples", tuple(float(v) for v in om))
        object.__setattr__(self, "delta_samples", tuple(float(v) for v in de))

    def _spline_channel(self, values: tuple[float, ...]) -> Channel:
        from scipy.interpolate import CubicSpline

        x = np.linspace(0.0, self.Tg_us, len(values))
        spline = CubicSpline(x, np.asarray(values, dtype=float))
        table = np.ascontiguousarray(spline.c.T)  # (npieces, 4), cubic term first
        return Channel(CHANNEL_SPLINE, (self.Tg_us, float(len(values) - 1)),
                       self._scale(), table=table)

    def omega_channel(self) -> Channel:
        return self._spline_channel(self.omega_samples)

    def delta_channel(self) -> Channel:
        return self._spline_channel(self.delta_samples)


Waveform = SinusoidalWaveform | BernsteinWaveform | SampledWaveform


@dataclass(frozen=True)
class _AdjustedWaveform:
    """Waveform wrapper with a scaled amplitude and shifted detuning.

    Used for miscalibration studies: drive amplitude scaled by a constant
    factor and a constant detuning offset (rad/us) added, e.g. a Doppler
    shift for a moving atom.
    """

    base: Waveform
    omega_factor: float = 1.0
    delta_offset: float = 0.0  # rad/us

    @property
    def Tg_us(self) -> float:
        return self.base.Tg_us

    @property
    def angular(self) -> bool:
        return self.base.angular

    def eval(self, t: float) -> tuple[float, float]:
        return self.omega_channel()(t), self.delta_channel()(t)

    def omega_channel(self) -> Channel:
        ch = self.base.omega_channel()
        return Channel(ch.kind, ch.params, ch.scale * self.omega_factor,
                       ch.offset * self.omega_factor, ch.table)

    def delta_channel(self) -> Channel:
        ch = self.base.delta_channel()
        return Channel(ch.kind, ch.params, ch.scale,
                       ch.offset + self.delta_offset, ch.table)


def adjust(w, omega_factor: float = 1.0, delta_offset: float = 0.0):
    """Scale the amplitude channel and/or add a detuning offset (rad/us)."""
    if omega_factor == 1.0 and delta_offset == 0.0:
        return w
    if isinstance(w, _AdjustedWaveform):
        return _AdjustedWaveform(w.base, w.omega_factor * omega_factor,
                                 w.delta_offset + delta_offset)
    return _AdjustedWaveform(w, omega_factor, delta_offset)


@dataclass(frozen=True)
class WaveformReport:
    """Symmetry and endpoint diagnostics from :func:`validate`."""

    symmetry_omega: float
    symmetry_delta: float
    omega_start: float
    omega_end: float
    delta_start: float
    delta_end: float
    omega_min: float
    omega_max: float


def validate(w, grid_points: int = 1001) -> WaveformReport:
    """Report time symmetry about Tg/2, endpoints, and amplitude range.

    Symmetry residuals are ``max |f(t) - f(Tg - t)|`` over a uniform grid,
    in rad/us.
    """
    ts = np.linspace(0.0, w.Tg_us, grid_points)
    om = np.array([w.eval(t)[0] for t in ts])
    de = np.array([w.eval(t)[1] for t in ts])
    return WaveformReport(
        symmetry_omega=float(np.max(np.abs(om - om[::-1]))),
        symmetry_delta=float(np.max(np.abs(de - de[::-1]))),
        omega_start=float(om[0]),
        omega_end=float(om[-1]),
        delta_start=float(de[0]),
        delta_end=float(de[-1]),
        omega_min=float(om.min()),
        omega_max=float(om.max()),
    )


_SINUSOIDAL_KEYS = ("Omega0_MHz", "Omega1_MHz", "Omega2_MHz",
                    "Delta0_MHz", "Delta1_MHz", "Delta2_MHz")


def waveform_to_dict(w) -> dict:
    """Serialize a waveform to the interchange schema.

    The schema is ``{"family": ..., "params": {...}, "Tg_us": number,
    "angular": bool}``.
    """
    if isinstance(w, SinusoidalWaveform):
        params = dict(zip(_SINUSOIDAL_KEYS, (w.omega0, w.omega1, w.omega2,
                                             w.delta0, w.delta1, w.delta2)))
        family = "sinusoidal"
    elif isinstance(w, BernsteinWaveform):
        params = {"beta_MHz": list(w.beta), "n": w.n, "Delta0_MHz": w.delta0}
        family = "bernstein"
    elif isinstance(w, SampledWaveform):
        params = {"omega_MHz": list(w.omega_samples),
                  "delta_MHz": list(w.delta_samples)}
        family = "sampled"
    else:
        raise ValueError(f"cannot serialize waveform of type {type(w).__name__}")
    return {"family": family, "params": params, "Tg_us": w.Tg_us, "angular": w.angular}


def waveform_from_dict(d: dict):
    """Build a waveform from the interchange schema; unknown keys rejected."""
    extra = set(d) - {"family", "params", "Tg_us", "angular"}
    if extra:
        raise ValueError(f"unknown waveform keys: {sorted(extra)}")
    missing = {"family", "params", "Tg_us", "angular"} - set(d)
    if missing:
        raise ValueError(f"missing waveform keys: {sorted(missing)}")
    family, params = d["family"], dict(d["params"])
    tg, angular = float(d["Tg_us"]), bool(d["angular"])
    if family == "sinusoidal":
        extra = set(params) - set(_SINUSOIDAL_KEYS)
        if extra:
            raise ValueError(f"unknown sinusoidal params: {sorted(extra)}")
        vals = [float(params.pop(k, 0.0)) for k in _SINUSOIDAL_KEYS]
        return SinusoidalWaveform(*vals, Tg_us=tg, angular=angular)
    if family == "bernstein":
        extra = set(params) - {"beta_MHz", "n", "Delta0_MHz"}
        if extra:
            raise ValueError(f"unknown bernstein params: {sorted(extra)}")
        return BernsteinWaveform(beta=tuple(params["beta_MHz"]),
                                 delta0=float(params["Delta0_MHz"]),
                                 n=int(params.get("n", 8)),
                                 Tg_us=tg, angular=angular)
    if family == "sampled":
        extra = set(params) - {"omega_MHz", "delta_MHz"}
        if extra:
            raise ValueError(f"unknown sampled params: {sorted(extra)}")
        return SampledWaveform(omega_samples=tuple(params["omega_MHz"]),
                               delta_samples=tuple(params["delta_MHz"]),
                               Tg_us=tg, angular=angular)
    raise ValueError(f"unknown waveform family {family!r}")


def export_samples(w, n_samples: int, path) -> None:
    """Write uniformly sampled (t, Omega, Delta) triples as CSV."""
    if n_samples < 2:
        raise ValueError("need at least two samples")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_us", "omega_rad_per_us", "delta_rad_per_us"])
        for t in np.linspace(0.0, w.Tg_us, n_samples):
            om, de = w.eval(float(t))
            writer.writerow([repr(float(t)), repr(om), repr(de)])
