"""Log Mel filterbank front end, frame stacking and frame-rate decimation."""
from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LOG_FLOOR = float(np.log(1e-10))
N_FFT = 512


class FeatureError(ValueError):
    pass


class AudioTooShortError(FeatureError):
    pass


@dataclass
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate <= 0:
            raise FeatureError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise FeatureError("audio samples must be finite")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class FrameMatrix:
    """Time-major feature sequence, ``frames`` has shape (T, D)."""

    frames: np.ndarray
    frame_period: float = 0.010

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise FeatureError(f"frames must be 2-D (T, D), got shape {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise FeatureError("frames contain non-finite values")

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def __len__(self) -> int:
        return self.T


@dataclass
class FeatureConfig:
    n_filters: int = 26
    window_s: float = 0.025
    hop_s: float = 0.010
    context: int = 4
    decimation: int = 3

    @property
    def input_dim(self) -> int:
        return (2 * self.context + 1) * self.n_filters

    def to_dict(self) -> dict:
        return {
            "n_filters": self.n_filters,
            "window_s": self.window_s,
            "hop_s": self.hop_s,
            "context": self.context,
            "decimation": self.decimation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(**d)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def filter_center_frequencies(n_filters: int = 26, sample_rate: int = 16000) -> np.ndarray:
    """Center frequencies (Hz) of the triangular filters, evenly spaced on the Mel scale."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_filters + 2))
    return edges[1:-1]


def mel_filterbank_matrix(n_filters: int = 26, sample_rate: int = 16000,
                          n_fft: int = N_FFT) -> np.ndarray:
    """(n_filters, n_fft//2 + 1) triangular weights spanning 0 Hz to Nyquist.

    Weights are evaluated at the exact bin frequencies so that narrow
    low-frequency filters never come out empty.
    """
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_filters + 2))
    bins = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins - lo) / (mid - lo)
    falling = (hi - bins) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def frame_count(n_samples: int, window: int, hop: int) -> int:
    if n_samples < window:
        return 0
    return (n_samples - window) // hop + 1


def compute_mel_filterbank(audio: AudioBuffer, n_filters: int = 26, window: float = 0.025,
                           hop: float = 0.010) -> FrameMatrix:
    if window < hop:
        raise FeatureError(f"window ({window}s) must be >= hop ({hop}s)")
    rate = audio.sample_rate
    win = int(round(window * rate))
    step = int(round(hop * rate))
    n = len(audio.samples)
    if n == 0 or n < win:
        raise AudioTooShortError(
            f"audio too short: {n} samples < one {win}-sample window")
    n_fft = max(N_FFT, 1 << (win - 1).bit_length())
    T = frame_count(n, win, step)
    idx = np.arange(win)[None, :] + step * np.arange(T)[:, None]
    frames = audio.samples[idx] * np.hamming(win)
    power = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
    energies = power @ mel_filterbank_matrix(n_filters, rate, n_fft).T
    logs = np.log(np.maximum(energies, 1e-10))
    return FrameMatrix(np.maximum(logs, LOG_FLOOR), frame_period=hop)


def stack_frames(frames: FrameMatrix, context: int = 4) -> FrameMatrix:
    """Concatenate each frame with ``context`` neighbours per side, replicating the edges."""
    x = frames.frames
    T, D = x.shape
    width = 2 * context + 1
    if T == 0:
        return FrameMatrix(np.zeros((0, width * D)), frames.frame_period)
    padded = np.pad(x, ((context, context), (0, 0)), mode="edge")
    out = np.concatenate([padded[k:k + T] for k in range(width)], axis=1)
    return FrameMatrix(out, frames.frame_period)


def decimate_frames(frames: FrameMatrix, factor: int = 3) -> FrameMatrix:
    if factor < 1:
        raise FeatureError(f"decimation factor must be >= 1, got {factor}")
    return FrameMatrix(frames.frames[::factor].copy(), frames.frame_period * factor)


def model_inputs(frames: FrameMatrix, cfg: FeatureConfig) -> FrameMatrix:
    """Stack then decimate, the order used for every model input."""
    return decimate_frames(stack_frames(frames, cfg.context), cfg.decimation)


def featurize_audio(audio: AudioBuffer, cfg: FeatureConfig) -> FrameMatrix:
    return compute_mel_filterbank(audio, cfg.n_filters, cfg.window_s, cfg.hop_s)


@dataclass
class Normalizer:
    """Per-dimension mean/variance normalisation with statistics from training data."""

    mean: np.ndarray
    std: np.ndarray
    min_std: float = field(default=1e-5, repr=False)

    @classmethod
    def fit(cls, matrices) -> "Normalizer":
        stacked = np.concatenate([m.frames for m in matrices], axis=0)
        if stacked.shape[0] == 0:
            raise FeatureError("cannot fit normaliser on zero frames")
        return cls(stacked.mean(axis=0), stacked.std(axis=0))

    @classmethod
    def identity(cls, dim: int) -> "Normalizer":
        return cls(np.zeros(dim), np.ones(dim))

    def __call__(self, frames: FrameMatrix) -> FrameMatrix:
        scale = np.maximum(self.std, self.min_std)
        return FrameMatrix((frames.frames - self.mean) / scale, frames.frame_period)


def read_wav(path) -> AudioBuffer:
    """Read a 16-bit mono PCM RIFF file at 16 kHz."""
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise FeatureError(f"{path}: expected mono audio, got {wf.getnchannels()} channels")
        if wf.getsampwidth() != 2:
            raise FeatureError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    if rate != 16000:
        raise FeatureError(f"{path}: sample rate {rate} Hz unsupported (16000 Hz required)")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(samples, rate)


def write_wav(path, audio: AudioBuffer) -> None:
    pcm = np.clip(np.round(audio.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(Path(path)), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(audio.sample_rate)
        wf.writeframes(pcm.tobytes())
