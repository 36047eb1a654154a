"""Recognizer inputs: phase deltas, feature assemblies, time-warp
augmentation and overlapping clip segmentation.

First differencing of the unwrapped phase removes the static multipath
floor; the second difference adds robustness against slowly varying
dynamic trends. Feature matrices are time x dimension with rows on the
480 Hz grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lipwave.demod import PhaseStream
from lipwave.signal_synth import SampleBuffer, WaveformConfig, channel_frequencies

PHASE = "phase"
PHASE_DELTA = "phase_delta"
PHASE_DELTA_DOUBLE_DELTA = "phase_delta_double_delta"
DOPPLER = "doppler"

FEATURE_CHOICES = (PHASE, PHASE_DELTA, PHASE_DELTA_DOUBLE_DELTA)

DEFAULT_CLIP_LENGTH = 24  # 50 ms at 480 Hz
DEFAULT_CLIP_HOP = 12

WARP_MIN = 0.5
WARP_MAX = 2.0


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (time, dim)
    feature_choice: str
    rate_hz: float

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature values must be (time, dim)")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class ClipSequence:
    clips: np.ndarray  # (count, clip_length, dim)
    clip_length: int
    hop: int

    @property
    def count(self) -> int:
        return self.clips.shape[0]


def phase_delta(phase: PhaseStream) -> FeatureMatrix:
    """First-order phase difference between consecutive 480 Hz samples."""
    if len(phase) < 2:
        raise ValueError("phase stream must have at least two samples")
    values = np.diff(phase.channels, axis=1).T
    return FeatureMatrix(values, PHASE_DELTA, phase.rate_hz)


def phase_double_delta(delta: FeatureMatrix) -> FeatureMatrix:
    """Second-order phase difference, computed from a phase_delta matrix."""
    if delta.feature_choice != PHASE_DELTA:
        raise ValueError("phase_double_delta expects a phase_delta input")
    if delta.rows < 2:
        raise ValueError("delta matrix must have at least two rows")
    return FeatureMatrix(np.diff(delta.values, axis=0), "phase_double_delta_only", delta.rate_hz)


def assemble_features(phase: PhaseStream, choice: str) -> FeatureMatrix:
    """Build the configured feature matrix from an unwrapped phase stream.

    phase -> K columns; phase_delta -> K columns; the combined choice
    concatenates delta and double-delta (2K columns), rows aligned by
    trimming to the shorter stream.
    """
    if choice == PHASE:
        return FeatureMatrix(phase.channels.T.copy(), PHASE, phase.rate_hz)
    if choice == PHASE_DELTA:
        return phase_delta(phase)
    if choice == PHASE_DELTA_DOUBLE_DELTA:
        delta = phase_delta(phase)
        ddelta = phase_double_delta(delta)
        values = np.concatenate([delta.values[1:], ddelta.values], axis=1)
        return FeatureMatrix(values, PHASE_DELTA_DOUBLE_DELTA, phase.rate_hz)
    raise ValueError(f"unknown feature choice {choice!r}")


def time_warp(features: FeatureMatrix, warp_factor: float) -> FeatureMatrix:
    """Resample the time axis by warp_factor (x(a*t): 2 contracts, 0.5 expands).

    Output has round(rows / warp_factor) rows; values are linearly
    interpolated per column. Labels attached to the sample are untouched.
    """
    if not WARP_MIN <= warp_factor <= WARP_MAX:
        raise ValueError(f"warp_factor must lie in [{WARP_MIN}, {WARP_MAX}]")
    rows = features.rows
    if rows < 2:
        raise ValueError("need at least two rows to warp")
    rows_out = max(int(round(rows / warp_factor)), 2)
    positions = np.linspace(0.0, rows - 1.0, rows_out)
    grid = np.arange(rows, dtype=np.float64)
    out = np.empty((rows_out, features.dim), dtype=np.float64)
    for d in range(features.dim):
        out[:, d] = np.interp(positions, grid, features.values[:, d])
    return FeatureMatrix(out, features.feature_choice, features.rate_hz * warp_factor)


def augmentation_factors(count: int = 10, low: float = WARP_MIN, high: float = WARP_MAX) -> np.ndarray:
    """Log-spaced warp factors over [low, high], always including 1.0."""
    factors = np.geomspace(low, high, count)
    mid = np.argmin(np.abs(factors - 1.0))
    factors[mid] = 1.0
    return factors


def segment_clips(features: FeatureMatrix, clip_length: int = DEFAULT_CLIP_LENGTH,
                  hop: int = DEFAULT_CLIP_HOP) -> ClipSequence:
    """Cut the feature stream into overlapping clips of clip_length rows.

    Clip n starts at row n*hop; a trailing partial window is dropped.
    """
    if clip_length < 1:
        raise ValueError("clip_length must be >= 1")
    if not 1 <= hop <= clip_length:
        raise ValueError("hop must lie in [1, clip_length]")
    if features.rows < clip_length:
        raise ValueError(
            f"stream of {features.rows} rows is shorter than one clip ({clip_length})"
        )
    windows = np.lib.stride_tricks.sliding_window_view(features.values, clip_length, axis=0)
    clips = np.ascontiguousarray(windows[::hop].transpose(0, 2, 1))
    return ClipSequence(clips, clip_length, hop)


@dataclass
class FeatureNormalizer:
    """Per-dimension z-score, statistics taken from the training split only."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, feature_list: list[FeatureMatrix]) -> "FeatureNormalizer":
        stacked = np.concatenate([f.values for f in feature_list], axis=0)
        std = stacked.std(axis=0)
        return cls(stacked.mean(axis=0), np.maximum(std, 1e-8))

    def apply(self, features: FeatureMatrix) -> FeatureMatrix:
        values = (features.values - self.mean) / self.std
        return FeatureMatrix(values, features.feature_choice, features.rate_hz)


def trim_edges(phase: PhaseStream) -> PhaseStream:
    """Drop the filter warm-up samples at both stream edges."""
    m = phase.channels.shape[1]
    start = min(phase.warmup_samples, m)
    stop = max(m - phase.tail_samples, start)
    return PhaseStream(
        phase.channels[:, start:stop],
        phase.rate_hz,
        unreliable=phase.unreliable[:, start:stop],
    )


def assemble_doppler_features(
    received: SampleBuffer,
    config: WaveformConfig,
    *,
    window: int = 4096,
    hop: int = 512,
    half_bins: int = 5,
) -> FeatureMatrix:
    """Frame-differenced STFT magnitudes around every carrier.

    The comparison baseline: per channel the 2*half_bins+1 STFT bins
    centred on the carrier, differenced between frames to remove
    stationary energy, concatenated across channels.
    """
    x = received.samples
    if len(x) < window:
        raise ValueError("input shorter than one STFT window")
    frames = np.lib.stride_tricks.sliding_window_view(x, window)[::hop]
    spec = np.abs(np.fft.rfft(frames * np.hanning(window), axis=1))
    fs = received.sample_rate_hz
    blocks = []
    for f in channel_frequencies(config):
        center = int(round(f * window / fs))
        blocks.append(spec[:, center - half_bins : center + half_bins + 1])
    mag = np.concatenate(blocks, axis=1)
    return FeatureMatrix(np.diff(mag, axis=0), DOPPLER, fs / hop)
