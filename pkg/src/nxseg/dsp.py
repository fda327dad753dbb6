"""Audio ingestion and log-spectrogram extraction.

The spectrogram doubles as the factorization target, which requires every
entry to be non-negative.  A plain log of the STFT magnitude is sign
indefinite, so compression is done with log1p: bin = log(1 + |STFT|).
log1p is non-negative on magnitudes, monotone and invertible, and maps
digital silence to exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import DomainError, FormatError

DEFAULT_RATE = 16000
FRAME_LEN_S = 0.064
FRAME_STEP_S = 0.020


@dataclass
class AudioClip:
    samples: np.ndarray          # float64 in [-1, 1]
    sample_rate: int = DEFAULT_RATE

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class Spectrogram:
    bins: np.ndarray             # (F, T), every entry >= 0
    bin_hz: float
    frame_step_s: float = FRAME_STEP_S
    frame_len_s: float = FRAME_LEN_S

    @property
    def num_bins(self) -> int:
        return self.bins.shape[0]

    @property
    def num_frames(self) -> int:
        return self.bins.shape[1]


_PCM_SCALE = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


def read_wav(path, target_rate: int = DEFAULT_RATE) -> AudioClip:
    """Read a PCM WAV file (16/32-bit int or 32-bit float, mono or stereo).

    Stereo is downmixed by averaging; integer samples are scaled to
    [-1, 1]; anything not at target_rate is linearly resampled.
    """
    try:
        rate, data = wavfile.read(path)
    except ValueError as e:
        raise FormatError(f"unsupported or malformed WAV {path}: {e}") from e
    if data.dtype in _PCM_SCALE:
        samples = data.astype(np.float64) / _PCM_SCALE[data.dtype]
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"unsupported WAV sample format {data.dtype} in {path}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise FormatError(f"non-finite samples in {path}")
    samples = np.clip(samples, -1.0, 1.0)
    if rate != target_rate:
        samples = resample_linear(samples, rate, target_rate)
    return AudioClip(samples, target_rate)


def write_wav(path, clip: AudioClip) -> None:
    """Write 16-bit PCM; values are clipped to the representable range."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(path, clip.sample_rate, pcm)


def resample_linear(samples: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    if src_rate == dst_rate:
        return samples
    n_out = int(round(len(samples) * dst_rate / src_rate))
    t_src = np.arange(len(samples)) / src_rate
    t_dst = np.arange(n_out) / dst_rate
    return np.interp(t_dst, t_src, samples)


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def log_spectrogram(clip: AudioClip, frame_len_s: float = FRAME_LEN_S,
                    frame_step_s: float = FRAME_STEP_S) -> Spectrogram:
    """Hann-windowed magnitude STFT with log1p compression.

    Frames are zero-padded to the next power of two (1024 samples at
    16 kHz).  T = 1 + floor((N - frame_len) / step).
    """
    frame_len = int(round(frame_len_s * clip.sample_rate))
    step = int(round(frame_step_s * clip.sample_rate))
    n = len(clip.samples)
    if n < frame_len:
        raise DomainError(
            f"clip too short: {n} samples < one frame of {frame_len}")
    fft_size = _next_pow2(frame_len)
    num_frames = 1 + (n - frame_len) // step
    window = np.hanning(frame_len)
    idx = np.arange(frame_len)[None, :] + step * np.arange(num_frames)[:, None]
    frames = clip.samples[idx] * window
    mag = np.abs(np.fft.rfft(frames, n=fft_size, axis=1))
    return Spectrogram(bins=np.log1p(mag).T,
                       bin_hz=clip.sample_rate / fft_size,
                       frame_step_s=frame_step_s,
                       frame_len_s=frame_len_s)


def spectrogram_to_csv(spec: Spectrogram, path) -> None:
    """CSV export with frames as columns (row i = frequency bin i)."""
    np.savetxt(path, spec.bins, delimiter=",", fmt="%.8g")
