"""Acoustic multipath simulator with exact ground truth.

Scenes combine a line-of-sight path, slowly drifting static reflectors
and a dynamic lip path whose round-trip length follows synthetic word
kinematics. The received signal is evaluated literally as
sum_p sum_k A_p * cos(2*pi*f_k*(t - d_p(t)/c) - theta_p), so the exact
per-path phase 2*pi*f_k*d_p(t)/c + theta_p stays queryable for testing
the detector downstream. Corpus synthesis mirrors the
sentence x speaker x session x repeat collection structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from lipwave.kernels import synth_paths
from lipwave.signal_synth import (
    SampleBuffer,
    WaveformConfig,
    channel_frequencies,
    read_wav,
    write_wav,
)

SPEED_OF_SOUND_M_S = 343.0

LINE_OF_SIGHT = "line_of_sight"
STATIC_REFLECTOR = "static_reflector"
DYNAMIC_LIP = "dynamic_lip"
_PATH_KINDS = (LINE_OF_SIGHT, STATIC_REFLECTOR, DYNAMIC_LIP)

MAX_LIP_DISPLACEMENT_M = 0.05

# Sub-seed namespaces so every derived RNG stream is reproducible.
_NS_SPEAKER = 1
_NS_ENVIRONMENT = 2
_NS_SAMPLE = 3

# Word kinematics are a property of the synthetic vocabulary itself and
# deliberately do not vary with the corpus seed.
_TEMPLATE_SEED = 52

DEFAULT_SENTENCE_SEED = 5429


@dataclass
class PathModel:
    """One propagation path: total length over time, gain, hardware phase."""

    kind: str
    path_length_m: Callable[[np.ndarray], np.ndarray]
    gain: float
    hardware_phase_rad: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _PATH_KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}")
        if self.gain < 0:
            raise ValueError("gain must be >= 0")


@dataclass
class Scene:
    paths: list[PathModel]
    duration_s: float
    noise_snr_db: float | None = None

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        if sum(1 for p in self.paths if p.kind == LINE_OF_SIGHT) > 1:
            raise ValueError("at most one line-of-sight path allowed")


@dataclass
class LipTrajectory:
    """Round-trip path-length change caused by the lips, on a 48 kHz grid."""

    displacement_m: np.ndarray
    sample_rate_hz: float
    word_labels: list[tuple[int, float, float]]  # (word_id, start_s, end_s)

    def __post_init__(self) -> None:
        self.displacement_m = np.asarray(self.displacement_m, dtype=np.float64)
        if np.any(np.abs(self.displacement_m) > MAX_LIP_DISPLACEMENT_M):
            raise ValueError("lip displacement exceeds 5 cm")
        if len(self.displacement_m) > 1:
            step = np.max(np.abs(np.diff(self.displacement_m)))
            if step > 1e-3:
                raise ValueError("lip displacement jumps more than 1 mm between samples")

    @property
    def duration_s(self) -> float:
        return len(self.displacement_m) / self.sample_rate_hz

    def as_callable(self) -> Callable[[np.ndarray], np.ndarray]:
        grid = np.arange(len(self.displacement_m)) / self.sample_rate_hz
        disp = self.displacement_m

        def evaluate(t: np.ndarray) -> np.ndarray:
            return np.interp(t, grid, disp)

        return evaluate


def constant_path(kind: str, length_m: float, gain: float, theta: float = 0.0) -> PathModel:
    return PathModel(kind, lambda t: np.full_like(np.asarray(t, dtype=np.float64), length_m), gain, theta)


def drifting_path(length_m: float, gain: float, theta: float, drift_amp_m: float,
                  drift_freq_hz: float, drift_phase: float) -> PathModel:
    """Static reflector with slow sinusoidal length drift (< 2 mm, < 0.5 Hz)."""

    def length(t: np.ndarray) -> np.ndarray:
        return length_m + drift_amp_m * np.sin(2.0 * np.pi * drift_freq_hz * np.asarray(t) + drift_phase)

    return PathModel(STATIC_REFLECTOR, length, gain, theta)


def ground_truth_phase(path: PathModel, f_hz: float, times: np.ndarray,
                       speed_of_sound: float = SPEED_OF_SOUND_M_S) -> np.ndarray:
    """Exact per-path phase 2*pi*f*d(t)/c + theta at the given times."""
    d = np.asarray(path.path_length_m(np.asarray(times, dtype=np.float64)), dtype=np.float64)
    return 2.0 * np.pi * f_hz * d / speed_of_sound + path.hardware_phase_rad


def baseband_times(n_decimated: int, fs: float = 48000.0, window: int = 200, hop: int = 100) -> np.ndarray:
    """Centers of the moving-average windows, i.e. the 480 Hz time grid."""
    m = np.arange(n_decimated, dtype=np.float64)
    return (m * hop + (window - 1) / 2.0) / fs


def simulate_scene(scene: Scene, waveform: WaveformConfig,
                   rng: np.random.Generator | None = None) -> SampleBuffer:
    """Render the received mixture of all paths for every planned channel.

    White Gaussian noise is added when the scene sets noise_snr_db (an
    rng is then required); the noise level is scaled to the realized
    signal power.
    """
    fs = waveform.sample_rate_hz
    n = int(round(scene.duration_s * fs))
    t = np.arange(n, dtype=np.float64) / fs
    d = np.empty((len(scene.paths), n), dtype=np.float64)
    for i, path in enumerate(scene.paths):
        d[i] = path.path_length_m(t)
        if np.any(d[i] <= 0):
            raise ValueError(f"path {i} has non-positive length")
    if len(scene.paths) and np.max(d) / SPEED_OF_SOUND_M_S >= scene.duration_s:
        raise ValueError("maximum path delay exceeds the scene duration")
    gains = np.array([p.gain for p in scene.paths], dtype=np.float64)
    thetas = np.array([p.hardware_phase_rad for p in scene.paths], dtype=np.float64)
    out = synth_paths(d, gains, thetas, channel_frequencies(waveform), fs, SPEED_OF_SOUND_M_S)
    if scene.noise_snr_db is not None:
        if rng is None:
            raise ValueError("scene requests noise but no rng was provided")
        p_sig = float(np.mean(out**2))
        sigma = np.sqrt(p_sig / 10.0 ** (scene.noise_snr_db / 10.0))
        out = out + rng.normal(0.0, sigma, n)
    return SampleBuffer(out, fs)


# ---------------------------------------------------------------------------
# synthetic word kinematics


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: int
    amplitude_scale: float
    baseline_offset_m: float
    mouth_distance_m: float
    dynamic_gain: float


@dataclass(frozen=True)
class EnvironmentProfile:
    environment_id: int
    los_length_m: float
    los_gain: float
    los_phase: float
    reflectors: tuple  # of (length_m, gain, theta, drift_amp, drift_freq, drift_phase)


def speaker_profile(rng_seed: int, speaker_id: int) -> SpeakerProfile:
    rng = np.random.default_rng([rng_seed, _NS_SPEAKER, speaker_id])
    return SpeakerProfile(
        speaker_id=speaker_id,
        amplitude_scale=rng.uniform(0.8, 1.25),
        baseline_offset_m=rng.uniform(-0.01, 0.01),
        mouth_distance_m=rng.uniform(0.05, 0.2),
        dynamic_gain=rng.uniform(0.12, 0.3),
    )


def environment_profile(rng_seed: int, environment_id: int) -> EnvironmentProfile:
    rng = np.random.default_rng([rng_seed, _NS_ENVIRONMENT, environment_id])
    n_reflectors = int(rng.integers(2, 6))
    reflectors = tuple(
        (
            rng.uniform(0.3, 1.2),        # round-trip length
            rng.uniform(0.05, 0.15),      # gain, well below LOS
            rng.uniform(0.0, 2 * np.pi),  # hardware phase
            rng.uniform(0.0003, 0.0008),  # drift amplitude < 2 mm
            rng.uniform(0.1, 0.45),       # drift below 0.5 Hz
            rng.uniform(0.0, 2 * np.pi),
        )
        for _ in range(n_reflectors)
    )
    return EnvironmentProfile(
        environment_id=environment_id,
        los_length_m=rng.uniform(0.04, 0.1),
        los_gain=1.0,
        los_phase=rng.uniform(0.0, 2 * np.pi),
        reflectors=reflectors,
    )


def _word_template_params(word_id: int) -> tuple[list[tuple[float, float, float]], float]:
    """(center_frac, width_frac, amplitude_m) of each bump, plus duration.

    Bump count and leading sign cycle with the word id so templates stay
    structurally spread out (pairwise normalized correlation < 0.95).
    """
    rng = np.random.default_rng([_TEMPLATE_SEED, word_id])
    n_bumps = 2 + word_id % 3
    lead_sign = 1.0 if (word_id // 3) % 2 == 0 else -1.0
    centers = np.sort(rng.uniform(0.12, 0.88, n_bumps))
    widths = rng.uniform(0.07, 0.26, n_bumps)
    alternating = np.cumprod(np.full(n_bumps, -1.0))
    signs = lead_sign * np.where(rng.random(n_bumps) < 0.35, 1.0, alternating)
    amps = rng.uniform(0.0025, 0.008, n_bumps) * signs
    duration = float(rng.uniform(0.28, 0.42))
    return [(float(c), float(w), float(a)) for c, w, a in zip(centers, widths, amps)], duration


def word_template_duration_s(word_id: int) -> float:
    return _word_template_params(word_id)[1]


def _raised_cosine_bump(t: np.ndarray, center: float, width: float) -> np.ndarray:
    u = (t - center) / width
    out = np.zeros_like(t)
    inside = np.abs(u) < 1.0
    out[inside] = 0.5 * (1.0 + np.cos(np.pi * u[inside]))
    return out


def trajectory_from_template(
    word_id: int,
    speaker: SpeakerProfile,
    speed_factor: float,
    rng: np.random.Generator,
    vocabulary_size: int,
    fs: float = 48000.0,
    include_baseline: bool = True,
) -> LipTrajectory:
    """Word-specific lip kinematics, time-scaled and speaker-perturbed.

    The template is a fixed sum of 2-4 raised-cosine bumps per word;
    speed_factor 2 halves the duration. The rng adds small amplitude and
    timing jitter only, so equal seeds reproduce the trajectory.
    """
    if not 0 <= word_id < vocabulary_size:
        raise ValueError(f"word_id {word_id} outside vocabulary of {vocabulary_size}")
    if not 0.5 <= speed_factor <= 2.0:
        raise ValueError("speed_factor must lie in [0.5, 2]")
    bumps, base_duration = _word_template_params(word_id)
    duration = base_duration / speed_factor
    n = int(round(duration * fs))
    t_frac = np.arange(n, dtype=np.float64) / max(n - 1, 1)
    disp = np.zeros(n, dtype=np.float64)
    for center, width, amp in bumps:
        center = center + rng.normal(0.0, 0.01)
        amp = amp * (1.0 + rng.normal(0.0, 0.05))
        disp += amp * _raised_cosine_bump(t_frac, center, width)
    disp *= speaker.amplitude_scale
    if include_baseline:
        disp += speaker.baseline_offset_m
    return LipTrajectory(disp, fs, [(word_id, 0.0, duration)])


def sentence_trajectory(
    word_ids: list[int],
    speaker: SpeakerProfile,
    rng: np.random.Generator,
    vocabulary_size: int,
    speed_factor: float | None = None,
    fs: float = 48000.0,
) -> LipTrajectory:
    """Concatenate word trajectories with 0.1-0.3 s silent gaps.

    Adds a slow body-sway drift over the whole utterance: the kind of
    slowly changing quasi-static component first-order phase
    differencing is meant to suppress.
    """
    if speed_factor is None:
        speed_factor = float(rng.uniform(0.85, 1.2))
    lead = int(round(rng.uniform(0.12, 0.2) * fs))
    pieces = [np.zeros(lead)]
    labels: list[tuple[int, float, float]] = []
    cursor = lead
    for i, word_id in enumerate(word_ids):
        word = trajectory_from_template(
            word_id, speaker, speed_factor, rng, vocabulary_size, fs, include_baseline=False
        )
        start = cursor / fs
        pieces.append(word.displacement_m)
        cursor += len(word.displacement_m)
        labels.append((word_id, start, cursor / fs))
        if i < len(word_ids) - 1:
            gap = int(round(rng.uniform(0.1, 0.3) * fs))
            pieces.append(np.zeros(gap))
            cursor += gap
    pieces.append(np.zeros(int(round(rng.uniform(0.12, 0.2) * fs))))
    disp = np.concatenate(pieces)
    t = np.arange(len(disp)) / fs
    sway_amp = rng.uniform(0.002, 0.006)
    sway_freq = rng.uniform(0.08, 0.4)
    sway_phase = rng.uniform(0.0, 2 * np.pi)
    disp = disp + speaker.baseline_offset_m + sway_amp * np.sin(2 * np.pi * sway_freq * t + sway_phase)
    return LipTrajectory(disp, fs, labels)


def utterance_scene(
    word_ids: list[int],
    speaker: SpeakerProfile,
    environment: EnvironmentProfile,
    rng: np.random.Generator,
    vocabulary_size: int,
    noise_snr_db: float | None = None,
    fs: float = 48000.0,
) -> tuple[Scene, LipTrajectory]:
    """LOS + environment reflectors + the dynamic lip path for a sentence."""
    trajectory = sentence_trajectory(word_ids, speaker, rng, vocabulary_size, fs=fs)
    paths = [constant_path(LINE_OF_SIGHT, environment.los_length_m, environment.los_gain,
                           environment.los_phase)]
    for length, gain, theta, drift_amp, drift_freq, drift_phase in environment.reflectors:
        paths.append(drifting_path(length, gain, theta, drift_amp, drift_freq, drift_phase))
    base = 2.0 * speaker.mouth_distance_m
    lip = trajectory.as_callable()
    paths.append(
        PathModel(
            DYNAMIC_LIP,
            lambda t, base=base, lip=lip: base + lip(np.asarray(t, dtype=np.float64)),
            gain=speaker.dynamic_gain,
            hardware_phase_rad=float(rng.uniform(0.0, 2 * np.pi)),
        )
    )
    return Scene(paths, trajectory.duration_s, noise_snr_db=noise_snr_db), trajectory


# ---------------------------------------------------------------------------
# corpus synthesis


@dataclass
class CorpusSpec:
    """Synthetic stand-in for the collected sentence corpus."""

    sentences: list[list[int]]
    vocabulary_size: int = 29
    speakers: int = 10
    environments: int = 8
    sessions: int = 5
    repeats: int = 5
    rng_seed: int = 0
    noise_snr_db: float | None = None

    def __post_init__(self) -> None:
        for counts in (self.vocabulary_size, self.speakers, self.environments,
                       self.sessions, self.repeats):
            if counts < 1:
                raise ValueError("corpus counts must be >= 1")
        if not self.sentences:
            raise ValueError("at least one sentence required")
        for sentence in self.sentences:
            if not sentence:
                raise ValueError("sentences must be non-empty")
            if any(not 0 <= w < self.vocabulary_size for w in sentence):
                raise ValueError("sentence uses word ids outside the vocabulary")

    @property
    def sample_count(self) -> int:
        return len(self.sentences) * self.speakers * self.sessions * self.repeats


@dataclass
class SampleRecord:
    """Manifest entry describing one synthesized utterance."""

    index: int
    sentence_id: int
    word_ids: list[int]
    speaker_id: int
    environment_id: int
    session: int
    repeat: int
    rng_stream: list[int]
    file: str | None = None

    def to_json(self) -> str:
        payload = {
            "index": self.index,
            "sentence_id": self.sentence_id,
            "word_ids": list(self.word_ids),
            "speaker_id": self.speaker_id,
            "environment_id": self.environment_id,
            "session": self.session,
            "repeat": self.repeat,
            "rng_stream": list(self.rng_stream),
            "file": self.file,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "SampleRecord":
        data = json.loads(line)
        return cls(**data)


def corpus_manifest(spec: CorpusSpec) -> list[SampleRecord]:
    """Enumerate every sample of the corpus without synthesizing audio.

    One sample per (sentence, speaker, session, repeat); the session
    picks the environment (session index modulo environment count).
    """
    records = []
    index = 0
    for sentence_id, word_ids in enumerate(spec.sentences):
        for speaker in range(spec.speakers):
            for session in range(spec.sessions):
                for repeat in range(spec.repeats):
                    records.append(
                        SampleRecord(
                            index=index,
                            sentence_id=sentence_id,
                            word_ids=list(word_ids),
                            speaker_id=speaker,
                            environment_id=session % spec.environments,
                            session=session,
                            repeat=repeat,
                            rng_stream=[spec.rng_seed, _NS_SAMPLE, index],
                        )
                    )
                    index += 1
    return records


def synthesize_sample(spec: CorpusSpec, waveform: WaveformConfig,
                      record: SampleRecord) -> SampleBuffer:
    """Deterministically synthesize one manifest entry."""
    scene_rng = np.random.default_rng(record.rng_stream + [0])
    noise_rng = np.random.default_rng(record.rng_stream + [1])
    speaker = speaker_profile(spec.rng_seed, record.speaker_id)
    env = environment_profile(spec.rng_seed, record.environment_id)
    scene, _ = utterance_scene(
        record.word_ids, speaker, env, scene_rng, spec.vocabulary_size,
        noise_snr_db=spec.noise_snr_db, fs=waveform.sample_rate_hz,
    )
    return simulate_scene(scene, waveform, rng=noise_rng)


def iter_corpus(spec: CorpusSpec, waveform: WaveformConfig) -> Iterator[tuple[SampleRecord, SampleBuffer]]:
    """Stream (record, audio) pairs; reproducible from spec.rng_seed."""
    for record in corpus_manifest(spec):
        yield record, synthesize_sample(spec, waveform, record)


def synthesize_corpus(spec: CorpusSpec, waveform: WaveformConfig) -> list[tuple[SampleRecord, SampleBuffer]]:
    """Materialize the whole corpus in memory (use iter_corpus when large)."""
    return list(iter_corpus(spec, waveform))


def save_dataset(out_dir: str | Path, spec: CorpusSpec, waveform: WaveformConfig) -> Path:
    """Write one WAV per sample plus a line-delimited manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.jsonl"
    with open(manifest_path, "w") as fh:
        for record, buffer in iter_corpus(spec, waveform):
            record.file = f"sample_{record.index:06d}.wav"
            write_wav(out / record.file, buffer)
            fh.write(record.to_json() + "\n")
    return manifest_path


def load_manifest(path: str | Path) -> list[SampleRecord]:
    with open(path) as fh:
        return [SampleRecord.from_json(line) for line in fh if line.strip()]


def load_sample_audio(manifest_path: str | Path, record: SampleRecord) -> SampleBuffer:
    return read_wav(Path(manifest_path).parent / record.file)


def default_sentences(
    count: int = 54,
    vocabulary_size: int = 29,
    min_words: int = 3,
    max_words: int = 6,
    seed: int = DEFAULT_SENTENCE_SEED,
) -> list[list[int]]:
    """Fixed inventory of distinct word-id sentences covering the vocabulary."""
    rng = np.random.default_rng(seed)
    sentences: list[list[int]] = []
    seen = set()
    while len(sentences) < count:
        length = int(rng.integers(min_words, max_words + 1))
        candidate = tuple(int(w) for w in rng.integers(0, vocabulary_size, length))
        if candidate in seen:
            continue
        seen.add(candidate)
        sentences.append(list(candidate))
    used = {w for s in sentences for w in s}
    missing = [w for w in range(vocabulary_size) if w not in used]
    # Swap missing words into the longest sentences so every word occurs.
    for i, word in enumerate(missing):
        sentences[i % count][0] = word
    return sentences
