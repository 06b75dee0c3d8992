"""Compiled numerical kernels: channel evaluation, adaptive RK, midpoint oracle.

The compiled layer works on flattened model arrays (term kind tags, channel
parameter rows, term matrices); see ``propagator._compile_model``.  All
arithmetic is kept in a fixed evaluation order -- no fastmath -- so results
are bit-reproducible across runs and worker counts.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Channel kind tags (mirrors waveform.py).
CONST = 0
SIN3 = 1
BERNSTEIN = 2
SPLINE = 3

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def _binomial(n: int, k: int) -> float:
    if k < 0 or k > n:
        return 0.0
    if k > n - k:
        k = n - k
    acc = 1.0
    for i in range(k):
        acc = acc * (n - i) / (i + 1)
    return acc


@njit(cache=True)
def _bernstein(nu: int, n: int, x: float) -> float:
    return _binomial(n, nu) * x**nu * (1.0 - x) ** (n - nu)


@njit(cache=True)
def _channel_value(kind, params, scale, offset, table, t):
    if kind == CONST:
        val = params[0]
    elif kind == SIN3:
        tg = params[3]
        val = (params[0]
               + params[1] * math.cos(TWO_PI * t / tg)
               + params[2] * math.sin(math.pi * t / tg))
    elif kind == BERNSTEIN:
        n = int(params[4])
        x = t / params[5]
        val = 0.0
        for nu in range(1, 5):
            val += params[nu - 1] * (_bernstein(nu, n, x) + _bernstein(n - nu, n, x))
    else:  # SPLINE
        tg = params[0]
        npieces = int(params[1])
        row0 = int(params[2])
        j = int(t / tg * npieces)
        if j > npieces - 1:
            j = npieces - 1
        dx = t - j * (tg / npieces)
        c = table[row0 + j]
        val = ((c[0] * dx + c[1]) * dx + c[2]) * dx + c[3]
    return scale * val + offset


@njit(cache=True)
def _hamiltonian(ckind, cparams, cscale, coffset, ctable, mats, t, out):
    dim = mats.shape[1]
    for a in range(dim):
        for b in range(dim):
            out[a, b] = 0.0
    for k in range(ckind.shape[0]):
        w = _channel_value(ckind[k], cparams[k], cscale[k], coffset[k], ctable, t)
        for a in range(dim):
            for b in range(dim):
                out[a, b] += w * mats[k, a, b]


@njit(cache=True)
def _rhs(ckind, cparams, cscale, coffset, ctable, mats, t, y, hbuf, out):
    _hamiltonian(ckind, cparams, cscale, coffset, ctable, mats, t, hbuf)
    dim = y.shape[0]
    for a in range(dim):
        acc = 0.0 + 0.0j
        for b in range(dim):
            acc += hbuf[a, b] * y[b]
        out[a] = -1j * acc
    return out


@njit(cache=True)
def integrate_adaptive(ckind, cparams, cscale, coffset, ctable, mats,
                       psi0, t0, t1, tol, h_first_cap, record_ts):
    """Dormand-Prince 5(4) with FSAL, step-doubling safety off, PI control off.

    Steps are clamped to land exactly on each requested sample time.
    Returns ``(status, t_reached, psi, samples, n_steps, max_norm_drift)``
    where status 0 means success and 1 means step-size underflow.
    """
    dim = psi0.shape[0]
    y = psi0.copy()
    hbuf = np.zeros((dim, dim), dtype=np.complex128)
    k1 = np.zeros(dim, dtype=np.complex128)
    k2 = np.zeros(dim, dtype=np.complex128)
    k3 = np.zeros(dim, dtype=np.complex128)
    k4 = np.zeros(dim, dtype=np.complex128)
    k5 = np.zeros(dim, dtype=np.complex128)
    k6 = np.zeros(dim, dtype=np.complex128)
    k7 = np.zeros(dim, dtype=np.complex128)
    ytmp = np.zeros(dim, dtype=np.complex128)
    ynew = np.zeros(dim, dtype=np.complex128)

    n_samples = record_ts.shape[0]
    samples = np.zeros((n_samples, dim), dtype=np.complex128)
    isample = 0
    while isample < n_samples and record_ts[isample] <= t0:
        samples[isample] = y
        isample += 1

    span = t1 - t0
    h = min(h_first_cap, span / 64.0)
    if h <= 0.0:
        h = span
    h_min = span * 1e-14
    t = t0
    n_steps = 0
    max_drift = 0.0

    _rhs(ckind, cparams, cscale, coffset, ctable, mats, t, y, hbuf, k1)

    while t < t1:
        if h < h_min:
            return 1, t, y, samples, n_steps, max_drift
        if t + h > t1:
            h = t1 - t
        hit = -1
        if isample < n_samples and record_ts[isample] <= t + h:
            h = record_ts[isample] - t
            hit = isample
            if h <= 0.0:
                samples[isample] = y
                isample += 1
                continue

        # Dormand-Prince stages (k1 carried over, FSAL)
        for a in range(dim):
            ytmp[a] = y[a] + h * (0.2 * k1[a])
        _rhs(ckind, cparams, cscale, coffset, ctable, mats, t + 0.2 * h, ytmp, hbuf, k2)
        for a in range(dim):
            ytmp[a] = y[a] + h * (3.0 / 40.0 * k1[a] + 9.0 / 40.0 * k2[a])
        _rhs(ckind, cparams, cscale, coffset, ctable, mats, t + 0.3 * h, ytmp, hbuf, k3)
        for a in range(dim):
            ytmp[a] = y[a] + h * (44.0 / 45.0 * k1[a] - 56.0 / 15.0 * k2[a]
                                  + 32.0 / 9.0 * k3[a])
        _rhs(ckind, cparams, cscale, coffset, ctable, mats, t + 0.8 * h, ytmp, hbuf, k4)
        for a in range(dim):
            ytmp[a] = y[a] + h * (19372.0 / 6561.0 * k1[a] - 25360.0 / 2187.0 * k2[a]
                                  + 64448.0 / 6561.0 * k3[a] - 212.0 / 729.0 * k4[a])
        _rhs(ckind, cparams, cscale, coffset, ctable, mats, t + 8.0 / 9.0 * h, ytmp,
             hbuf, k5)
        for a in range(dim):
            ytmp[a] = y[a] + h * (9017.0 / 3168.0 * k1[a] - 355.0 / 33.0 * k2[a]
                                  + 46732.0 / 5247.0 * k3[a] + 49.0 / 176.0 * k4[a]
                                  - 5103.0 / 18656.0 * k5[a])
        _rhs(ckind, cparams, cscale, coffset, ctable, mats, t + h, ytmp, hbuf, k6)
        for a in range(dim):
            ynew[a] = y[a] + h * (35.0 / 384.0 * k1[a] + 500.0 / 1113.0 * k3[a]
                                  + 125.0 / 192.0 * k4[a] - 2187.0 / 6784.0 * k5[a]
                                  + 11.0 / 84.0 * k6[a])
        _rhs(ckind, cparams, cscale, coffset, ctable, mats, t + h, ynew, hbuf, k7)

        # embedded 4th-order error estimate
        err = 0.0
        for a in range(dim):
            e = h * (71.0 / 57600.0 * k1[a] - 71.0 / 16695.0 * k3[a]
                     + 71.0 / 1920.0 * k4[a] - 17253.0 / 339200.0 * k5[a]
                     + 22.0 / 525.0 * k6[a] - 1.0 / 40.0 * k7[a])
            ya = abs(y[a])
            yb = abs(ynew[a])
            sc = tol + tol * (ya if ya > yb else yb)
            q = abs(e) / sc
            err += q * q
        err = math.sqrt(err / dim)

        if err <= 1.0:
            t_new = t + h
            if hit >= 0:
                t_new = record_ts[hit]
                samples[hit] = ynew
                isample += 1
            t = t_new
            for a in range(dim):
                y[a] = ynew[a]
                k1[a] = k7[a]
            n_steps += 1
            norm2 = 0.0
            for a in range(dim):
                norm2 += y[a].real * y[a].real + y[a].imag * y[a].imag
            drift = abs(norm2 - 1.0)
            if drift > max_drift:
                max_drift = drift
            if err == 0.0:
                factor = 5.0
            else:
                factor = 0.9 * err ** -0.2
                if factor > 5.0:
                    factor = 5.0
                elif factor < 0.2:
                    factor = 0.2
            h = h * factor
        else:
            factor = 0.9 * err ** -0.2
            if factor < 0.2:
                factor = 0.2
            elif factor > 1.0:
                factor = 1.0
            h = h * factor

    return 0, t, y, samples, n_steps, max_drift


@njit(cache=True)
def evolve_midpoint_hermitian(ckind, cparams, cscale, coffset, ctable, mats,
                              psi0, t0, t1, n_steps):
    """Piecewise-constant evolution, H sampled at interval midpoints.

    Exact for constant H; second-order in the time dependence.  Hermitian
    path via eigendecomposition; the exponential of each slice is exactly
    unitary.
    """
    dim = psi0.shape[0]
    y = psi0.copy()
    hbuf = np.zeros((dim, dim), dtype=np.complex128)
    dt = (t1 - t0) / n_steps
    for j in range(n_steps):
        tm = t0 + (j + 0.5) * dt
        _hamiltonian(ckind, cparams, cscale, coffset, ctable, mats, tm, hbuf)
        w, v = np.linalg.eigh(hbuf)
        proj = v.conj().T @ y
        for a in range(dim):
            proj[a] = proj[a] * np.exp(-1j * dt * w[a])
        y = v @ proj
    return y
