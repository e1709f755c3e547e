"""Acoustic frontend: 16 kHz PCM -> stacked, downsampled log-mel features.

Pipeline defaults: 25 ms Hann window shifted every 10 ms, 512-point FFT,
80 triangular mel filters spanning 125-7600 Hz, log floor 1e-10. Frames are
then stacked with 3 left-context frames (zero-padded at utterance start) and
kept only at every third position, giving 320-dim vectors at a 30 ms shift.
"""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from deskasr.errors import DataError

SAMPLE_RATE = 16000
LOG_FLOOR = 1e-10


@dataclass
class Waveform:
    """Mono audio as floats in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise DataError("waveform must be a non-empty 1-D array")


@dataclass
class FeatureSequence:
    """A [T x D] frame matrix with its frame shift in milliseconds."""

    frames: np.ndarray
    frame_shift_ms: float

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] == 0:
            raise DataError("feature sequence must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(self.frames)):
            raise DataError("feature sequence contains non-finite values")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


def read_wav(path: str | Path) -> Waveform:
    """Read a RIFF/WAVE PCM-16 mono file."""
    try:
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != 1:
                raise DataError(f"{path}: expected mono audio, got {w.getnchannels()} channels")
            if w.getsampwidth() != 2:
                raise DataError(f"{path}: expected 16-bit PCM")
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except wave.Error as e:
        raise DataError(f"{path}: not a readable WAVE file ({e})") from e
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples=samples, sample_rate=rate)


def write_wav(path: str | Path, w: Waveform) -> None:
    pcm = np.clip(np.round(w.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(w.sample_rate)
        f.writeframes(pcm.tobytes())


def mel_scale(hz: np.ndarray | float) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel: np.ndarray | float) -> np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int = 80, n_fft: int = 512, sample_rate: int = SAMPLE_RATE,
                   fmin: float = 125.0, fmax: float = 7600.0) -> np.ndarray:
    """Triangular filters over rfft bins; rows are filters."""
    edges_hz = mel_to_hz(np.linspace(mel_scale(fmin), mel_scale(fmax), n_mels + 2))
    bin_hz = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    fb = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(n_mels):
        left, center, right = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        up = (bin_hz - left) / (center - left)
        down = (right - bin_hz) / (right - center)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def filterbank_center_frequencies(n_mels: int = 80, fmin: float = 125.0,
                                  fmax: float = 7600.0) -> np.ndarray:
    edges_hz = mel_to_hz(np.linspace(mel_scale(fmin), mel_scale(fmax), n_mels + 2))
    return edges_hz[1:-1]


def log_mel(w: Waveform, n_mels: int = 80, win_ms: float = 25.0, hop_ms: float = 10.0,
            n_fft: int = 512, fmin: float = 125.0, fmax: float = 7600.0) -> FeatureSequence:
    """Log-mel features: Hann window, power spectrum, mel filters, log clamp."""
    if w.sample_rate != SAMPLE_RATE:
        raise DataError(f"expected {SAMPLE_RATE} Hz audio, got {w.sample_rate}")
    win = int(round(win_ms * w.sample_rate / 1000.0))
    hop = int(round(hop_ms * w.sample_rate / 1000.0))
    n = w.samples.size
    if n < win:
        raise DataError(f"audio too short: {n} samples < one {win}-sample window")
    num_frames = 1 + (n - win) // hop
    window = np.hanning(win)
    fb = mel_filterbank(n_mels=n_mels, n_fft=n_fft, sample_rate=w.sample_rate,
                        fmin=fmin, fmax=fmax)
    idx = np.arange(win)[None, :] + hop * np.arange(num_frames)[:, None]
    frames = w.samples[idx] * window[None, :]
    spec = np.fft.rfft(frames, n=n_fft, axis=1)
    power = (spec.real ** 2 + spec.imag ** 2)
    mel = power @ fb.T
    feats = np.log(np.maximum(mel, LOG_FLOOR))
    return FeatureSequence(frames=feats, frame_shift_ms=hop_ms)


def stack_downsample(f: FeatureSequence, left: int = 3, rate: int = 3) -> FeatureSequence:
    """Stack each kept frame with its ``left`` predecessors, keep every ``rate``-th.

    Output frame j concatenates input frames [rate*j - left .. rate*j], oldest
    first, with zeros standing in for negative indices. Output length is
    ceil(T / rate) and the frame shift multiplies by ``rate``.
    """
    frames = f.frames
    t, d = frames.shape
    out_len = (t + rate - 1) // rate
    out = np.zeros((out_len, d * (left + 1)))
    for j in range(out_len):
        center = rate * j
        parts = []
        for k in range(center - left, center + 1):
            parts.append(frames[k] if k >= 0 else np.zeros(d))
        out[j] = np.concatenate(parts)
    return FeatureSequence(frames=out, frame_shift_ms=f.frame_shift_ms * rate)


def write_features(path: str | Path, f: FeatureSequence) -> None:
    """Binary matrix file: int32 T, int32 D (little-endian), float64 body."""
    t, d = f.frames.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<ii", t, d))
        fh.write(np.ascontiguousarray(f.frames, dtype="<f8").tobytes())


def read_features(path: str | Path, frame_shift_ms: float = 30.0) -> FeatureSequence:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise DataError(f"{path}: truncated feature file")
    t, d = struct.unpack("<ii", raw[:8])
    body = np.frombuffer(raw[8:], dtype="<f8")
    if body.size != t * d:
        raise DataError(f"{path}: header says {t}x{d} but body has {body.size} values")
    return FeatureSequence(frames=body.reshape(t, d).astype(np.float64),
                           frame_shift_ms=frame_shift_ms)
