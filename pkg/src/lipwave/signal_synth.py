"""Transmit-side waveform: superposition of inaudible continuous waves.

The transmitter emits A * sum_k cos(2*pi*(f + k*df)*t) with every
channel inside the 17-23 kHz band. The channel plan here is the single
source of truth shared with the receiver's coherent detector.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

INAUDIBLE_LOW_HZ = 17000.0
INAUDIBLE_HIGH_HZ = 23000.0

# Largest sample count generate_waveform will address.
MAX_SAMPLES = 2**40


@dataclass(frozen=True)
class WaveformConfig:
    """Channel plan for the transmitted superposition of continuous waves."""

    base_frequency_hz: float = 17350.0
    channel_count: int = 8
    channel_spacing_hz: float = 700.0
    sample_rate_hz: float = 48000.0
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.channel_count < 1:
            raise ValueError("channel_count must be >= 1")
        if self.channel_spacing_hz <= 0:
            raise ValueError("channel_spacing_hz must be > 0")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be > 0")
        top = self.base_frequency_hz + (self.channel_count - 1) * self.channel_spacing_hz
        if self.base_frequency_hz < INAUDIBLE_LOW_HZ or top > INAUDIBLE_HIGH_HZ:
            raise ValueError(
                f"channels [{self.base_frequency_hz}, {top}] leave the inaudible "
                f"band {INAUDIBLE_LOW_HZ}-{INAUDIBLE_HIGH_HZ} Hz"
            )
        if self.sample_rate_hz <= 2.0 * top:
            raise ValueError("sample_rate_hz must exceed twice the highest channel")


@dataclass
class SampleBuffer:
    """Mono audio samples with their sample rate."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


def channel_frequencies(config: WaveformConfig) -> np.ndarray:
    """Planned carrier frequencies f + k*df for k = 0..K-1, in Hz."""
    k = np.arange(config.channel_count, dtype=np.float64)
    return config.base_frequency_hz + k * config.channel_spacing_hz


def generate_waveform(config: WaveformConfig, duration_s: float) -> SampleBuffer:
    """Synthesize the transmitted superposition for duration_s seconds.

    Sample n is A * sum_k cos(2*pi*f_k*n/fs); all channels start at
    phase zero so repeated calls are bit-identical.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be > 0")
    n = int(round(duration_s * config.sample_rate_hz))
    if n > MAX_SAMPLES:
        raise ValueError(f"duration of {n} samples exceeds the {MAX_SAMPLES} limit")
    t = np.arange(n, dtype=np.float64) / config.sample_rate_hz
    out = np.zeros(n, dtype=np.float64)
    for f in channel_frequencies(config):
        out += np.cos(2.0 * np.pi * f * t)
    out *= config.amplitude
    return SampleBuffer(out, config.sample_rate_hz)


def write_wav(path: str | Path, buffer: SampleBuffer) -> None:
    """Write a mono 32-bit float WAV."""
    wavfile.write(str(path), int(round(buffer.sample_rate_hz)), buffer.samples.astype(np.float32))


def read_wav(path: str | Path) -> SampleBuffer:
    """Read a mono WAV written by write_wav (or any mono float/PCM file)."""
    rate, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise ValueError("expected a mono WAV file")
    if np.issubdtype(data.dtype, np.integer):
        data = data.astype(np.float64) / float(np.iinfo(data.dtype).max)
    return SampleBuffer(np.asarray(data, dtype=np.float64), float(rate))
