"""Coherent detector: per-channel I/Q mixing, low-pass filtering,
moving-average decimation to 480 Hz, baseband assembly and phase
extraction, plus the Doppler/STFT comparison baseline.

Per channel the receiver multiplies the input by cos(2*pi*f_k*t) and
-sin(2*pi*f_k*t), low-pass filters both products and decimates with a
200-sample moving average hopping by 100 samples (48 kHz -> 480 Hz).
The complex baseband is B = I + jQ = (A/2) * exp(-j*phi), so the
propagation phase is recovered as phi = -angle(B).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve, firwin, kaiserord

from lipwave.backend import use_numba
from lipwave.kernels import strided_fir
from lipwave.signal_synth import SampleBuffer, WaveformConfig, channel_frequencies

MA_WINDOW = 200
MA_HOP = 100

# Demodulation low-pass: passband holds lip-motion bandwidth, stopband
# starts at half the 700 Hz channel spacing so neighbours are rejected.
LPF_CUTOFF_HZ = 200.0
LPF_STOP_HZ = 350.0
LPF_ATTEN_DB = 80.0

EPS_MAGNITUDE = 1e-9


@dataclass
class BasebandStream:
    """Complex baseband per channel at the decimated rate."""

    channels: np.ndarray  # (K, M) complex128
    rate_hz: float
    channel_frequencies_hz: np.ndarray
    warmup_samples: int = 0  # leading samples touched by filter edge effects
    tail_samples: int = 0

    def __post_init__(self) -> None:
        self.channels = np.asarray(self.channels, dtype=np.complex128)
        self.channel_frequencies_hz = np.asarray(self.channel_frequencies_hz, dtype=np.float64)
        if self.channels.ndim != 2:
            raise ValueError("channels must be (K, M)")
        if self.channels.shape[0] != self.channel_frequencies_hz.shape[0]:
            raise ValueError("one frequency per channel required")
        if self.channels.size and not np.all(np.isfinite(self.channels)):
            raise ValueError("baseband values must be finite")

    @property
    def channel_count(self) -> int:
        return self.channels.shape[0]

    def __len__(self) -> int:
        return self.channels.shape[1]


@dataclass
class PhaseStream:
    """Unwrapped propagation phase per channel, radians."""

    channels: np.ndarray  # (K, M) float64
    rate_hz: float
    unreliable: np.ndarray = field(default=None)  # type: ignore[assignment]
    warmup_samples: int = 0
    tail_samples: int = 0

    def __post_init__(self) -> None:
        self.channels = np.asarray(self.channels, dtype=np.float64)
        if self.unreliable is None:
            self.unreliable = np.zeros(self.channels.shape, dtype=bool)
        self.unreliable = np.asarray(self.unreliable, dtype=bool)
        if self.unreliable.shape != self.channels.shape:
            raise ValueError("unreliable mask must match channel shape")

    @property
    def channel_count(self) -> int:
        return self.channels.shape[0]

    def __len__(self) -> int:
        return self.channels.shape[1]


def mix(received: SampleBuffer, f_k: float) -> tuple[np.ndarray, np.ndarray]:
    """Multiply by the in-phase and quadrature copies of carrier f_k.

    Returns (x*cos(2*pi*f_k*n/fs), -x*sin(2*pi*f_k*n/fs)) at full rate.
    """
    x = received.samples
    n = np.arange(len(x), dtype=np.float64)
    w = 2.0 * np.pi * f_k * n / received.sample_rate_hz
    return x * np.cos(w), -(x * np.sin(w))


@lru_cache(maxsize=32)
def lowpass_taps(cutoff_hz: float, fs: float, stop_hz: float, atten_db: float) -> np.ndarray:
    """Design the linear-phase FIR (Kaiser window method), odd length."""
    if not 0 < cutoff_hz < stop_hz:
        raise ValueError("need 0 < cutoff_hz < stop_hz")
    if stop_hz >= fs / 2:
        raise ValueError("stop_hz must be below Nyquist")
    numtaps, beta = kaiserord(atten_db, (stop_hz - cutoff_hz) / (fs / 2.0))
    numtaps |= 1  # type I (odd) so the group delay is an integer
    taps = firwin(numtaps, (cutoff_hz + stop_hz) / 2.0, window=("kaiser", beta), fs=fs)
    taps.setflags(write=False)
    return taps


def lowpass(
    signal: np.ndarray,
    cutoff_hz: float,
    fs: float,
    *,
    stop_hz: float | None = None,
    atten_db: float = LPF_ATTEN_DB,
) -> np.ndarray:
    """Zero-phase-aligned FIR low-pass; output has the input's length.

    The group delay is compensated by same-mode convolution, so edge
    samples (lowpass_warmup of them on each side) are filter warm-up.
    """
    if stop_hz is None:
        stop_hz = cutoff_hz + 50.0
    taps = lowpass_taps(float(cutoff_hz), float(fs), float(stop_hz), float(atten_db))
    return fftconvolve(np.asarray(signal, dtype=np.float64), taps, mode="same")


def lowpass_warmup(cutoff_hz: float, fs: float, *, stop_hz: float | None = None,
                   atten_db: float = LPF_ATTEN_DB) -> int:
    """Edge samples on each side affected by zero padding, at full rate."""
    if stop_hz is None:
        stop_hz = cutoff_hz + 50.0
    taps = lowpass_taps(float(cutoff_hz), float(fs), float(stop_hz), float(atten_db))
    return len(taps) // 2


def decimate_moving_average(signal: np.ndarray, window: int = MA_WINDOW, hop: int = MA_HOP) -> np.ndarray:
    """Moving average of `window` samples hopping by `hop` (48 kHz -> 480 Hz)."""
    x = np.asarray(signal, dtype=np.float64)
    if len(x) < window:
        raise ValueError(f"input of {len(x)} samples is shorter than one window ({window})")
    return np.lib.stride_tricks.sliding_window_view(x, window)[::hop].mean(axis=1)


def _decimated_length(n: int, window: int = MA_WINDOW, hop: int = MA_HOP) -> int:
    return (n - window) // hop + 1


def demodulate(received: SampleBuffer, config: WaveformConfig) -> BasebandStream:
    """Run the coherent detector for every channel of the plan.

    Per channel: mix -> low-pass -> moving-average decimation of I and
    Q, then B = I + jQ. The numba backend fuses the filter with the
    decimation (the FIR is only evaluated at the 480 Hz grid); the numpy
    backend composes the three stages literally. Both agree to float
    round-off.
    """
    fs = received.sample_rate_hz
    if fs != config.sample_rate_hz:
        raise ValueError("received sample rate does not match the channel plan")
    if LPF_STOP_HZ > config.channel_spacing_hz / 2.0:
        raise ValueError("low-pass stopband must not pass the neighbouring channel")
    n = len(received)
    if n < MA_WINDOW:
        raise ValueError("input shorter than one moving-average window")

    freqs = channel_frequencies(config)
    n_out = _decimated_length(n)
    taps = lowpass_taps(LPF_CUTOFF_HZ, fs, LPF_STOP_HZ, LPF_ATTEN_DB)
    group_delay = len(taps) // 2

    channels = np.empty((len(freqs), n_out), dtype=np.complex128)
    if use_numba():
        combined = np.convolve(taps, np.full(MA_WINDOW, 1.0 / MA_WINDOW))
        offset = group_delay + MA_WINDOW - 1
        for k, f in enumerate(freqs):
            zi, zq = mix(received, f)
            i_dec = strided_fir(zi, combined, offset, MA_HOP, n_out)
            q_dec = strided_fir(zq, combined, offset, MA_HOP, n_out)
            channels[k] = i_dec + 1j * q_dec
    else:
        for k, f in enumerate(freqs):
            zi, zq = mix(received, f)
            i_dec = decimate_moving_average(lowpass(zi, LPF_CUTOFF_HZ, fs, stop_hz=LPF_STOP_HZ))
            q_dec = decimate_moving_average(lowpass(zq, LPF_CUTOFF_HZ, fs, stop_hz=LPF_STOP_HZ))
            channels[k] = i_dec + 1j * q_dec

    # Decimated samples whose filter span reaches past either signal edge.
    warmup = min(-(-group_delay // MA_HOP), n_out)
    last_full = (n - MA_WINDOW - group_delay) // MA_HOP
    tail = n_out - 1 - min(last_full, n_out - 1)
    return BasebandStream(channels, fs / MA_HOP, freqs, warmup_samples=warmup, tail_samples=tail)


def _forward_fill(values: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Replace values where ~keep with the latest kept value (0.0 before any)."""
    idx = np.where(keep, np.arange(len(values)), -1)
    idx = np.maximum.accumulate(idx)
    out = np.where(idx >= 0, values[np.maximum(idx, 0)], 0.0)
    return out


def extract_phase(baseband: BasebandStream, eps_mag: float = EPS_MAGNITUDE) -> PhaseStream:
    """Unwrapped propagation phase phi = -angle(B) per channel.

    Samples with |B| < eps_mag carry no usable angle; their phase is
    held at the previous reliable value and flagged in `unreliable`.
    """
    if len(baseband) == 0:
        raise ValueError("empty baseband stream")
    k, m = baseband.channels.shape
    phases = np.empty((k, m), dtype=np.float64)
    unreliable = np.abs(baseband.channels) < eps_mag
    for ch in range(k):
        raw = np.angle(baseband.channels[ch])
        raw = _forward_fill(raw, ~unreliable[ch])
        phases[ch] = -np.unwrap(raw)
    return PhaseStream(
        phases,
        baseband.rate_hz,
        unreliable=unreliable,
        warmup_samples=baseband.warmup_samples,
        tail_samples=baseband.tail_samples,
    )


@dataclass
class DopplerSpectrogram:
    """Differenced STFT magnitudes around one carrier (comparison baseline)."""

    values: np.ndarray  # (frames-1, bins) frame-to-frame magnitude differences
    magnitude: np.ndarray  # (frames, bins) raw STFT magnitude
    bin_frequencies_hz: np.ndarray
    frame_rate_hz: float


def doppler_spectrogram(
    received: SampleBuffer,
    f: float,
    *,
    window: int = 4096,
    hop: int = 512,
    band_hz: float = 600.0,
) -> DopplerSpectrogram:
    """STFT magnitude in f +- band_hz, differenced between frames.

    The frame difference removes stationary components (LOS and static
    reflections); what remains is the Doppler energy this baseline
    feeds on.
    """
    x = received.samples
    if len(x) < window:
        raise ValueError("input shorter than one STFT window")
    frames = np.lib.stride_tricks.sliding_window_view(x, window)[::hop]
    spec = np.abs(np.fft.rfft(frames * np.hanning(window), axis=1))
    freqs = np.fft.rfftfreq(window, d=1.0 / received.sample_rate_hz)
    sel = (freqs >= f - band_hz) & (freqs <= f + band_hz)
    mag = spec[:, sel]
    return DopplerSpectrogram(
        values=np.diff(mag, axis=0),
        magnitude=mag,
        bin_frequencies_hz=freqs[sel],
        frame_rate_hz=received.sample_rate_hz / hop,
    )
