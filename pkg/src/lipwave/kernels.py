"""Hot numeric kernels with numba and numpy implementations.

Two loops dominate runtime: synthesizing the received multipath signal
sample by sample, and the strided FIR evaluation that fuses low-pass
filtering with moving-average decimation. Both exist as numba @njit
kernels (parallel over output samples, deterministic: each output index
is computed independently) and as vectorized numpy/scipy fallbacks.
Dispatch happens per call through lipwave.backend.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import fftconvolve

from lipwave.backend import use_numba

try:
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via numpy backend
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        return wrap

    prange = range  # type: ignore[assignment]

_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# multipath synthesis: out[n] = sum_p sum_k g_p * cos(2*pi*f_k*(n/fs - d[p,n]/c) - theta_p)


@njit(cache=True, nogil=True, parallel=True)
def _synth_paths_numba(d, gains, thetas, freqs, fs, inv_c, out):  # pragma: no cover - jitted
    n_paths, n = d.shape
    n_freq = freqs.shape[0]
    for i in prange(n):
        t = i / fs
        acc = 0.0
        for p in range(n_paths):
            tau = t - d[p, i] * inv_c
            g = gains[p]
            th = thetas[p]
            for k in range(n_freq):
                acc += g * math.cos(_TWO_PI * freqs[k] * tau - th)
        out[i] = acc
    return out


def _synth_paths_numpy(d, gains, thetas, freqs, fs, inv_c, out):
    n = d.shape[1]
    t = np.arange(n, dtype=np.float64) / fs
    for p in range(d.shape[0]):
        tau = t - d[p] * inv_c
        for f in freqs:
            out += gains[p] * np.cos(_TWO_PI * f * tau - thetas[p])
    return out


def synth_paths(d, gains, thetas, freqs, fs, speed_of_sound):
    """Sum of per-path, per-frequency cosines on the receive grid.

    d is (paths, samples) total propagation length in meters; returns a
    float64 array of length samples.
    """
    d = np.ascontiguousarray(d, dtype=np.float64)
    gains = np.ascontiguousarray(gains, dtype=np.float64)
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    freqs = np.ascontiguousarray(freqs, dtype=np.float64)
    out = np.zeros(d.shape[1], dtype=np.float64)
    if d.shape[0] == 0 or d.shape[1] == 0:
        return out
    inv_c = 1.0 / float(speed_of_sound)
    if use_numba() and _HAVE_NUMBA:
        return _synth_paths_numba(d, gains, thetas, freqs, float(fs), inv_c, out)
    return _synth_paths_numpy(d, gains, thetas, freqs, float(fs), inv_c, out)


# ---------------------------------------------------------------------------
# strided FIR: out[m] = sum_j taps[j] * z[m*hop + offset - j], zero outside z


@njit(cache=True, nogil=True, parallel=True)
def _strided_fir_numba(z, taps, offset, hop, out):  # pragma: no cover - jitted
    n = z.shape[0]
    n_taps = taps.shape[0]
    for m in prange(out.shape[0]):
        base = m * hop + offset
        j_start = base - (n - 1)
        if j_start < 0:
            j_start = 0
        j_stop = base + 1
        if j_stop > n_taps:
            j_stop = n_taps
        acc = 0.0
        for j in range(j_start, j_stop):
            acc += taps[j] * z[base - j]
        out[m] = acc
    return out


def _strided_fir_numpy(z, taps, offset, hop, out):
    full = fftconvolve(z, taps, mode="full")
    idx = offset + hop * np.arange(out.shape[0])
    valid = idx < full.shape[0]
    out[valid] = full[idx[valid]]
    return out


def strided_fir(z, taps, offset, hop, n_out):
    """Evaluate a causal FIR at output indices m*hop + offset only.

    Equivalent to np.convolve(z, taps)[offset::hop][:n_out] with zero
    padding outside z; used to fuse low-pass filtering with decimation.
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    taps = np.ascontiguousarray(taps, dtype=np.float64)
    out = np.zeros(int(n_out), dtype=np.float64)
    if n_out <= 0 or z.shape[0] == 0:
        return out
    if use_numba() and _HAVE_NUMBA:
        return _strided_fir_numba(z, taps, int(offset), int(hop), out)
    return _strided_fir_numpy(z, taps, int(offset), int(hop), out)


def warmup_kernels() -> None:
    """Trigger numba compilation with tiny inputs (no-op on numpy backend)."""
    d = np.ones((1, 4))
    synth_paths(d, np.ones(1), np.zeros(1), np.array([100.0]), 48000.0, 343.0)
    strided_fir(np.ones(16), np.ones(3), 2, 4, 3)
