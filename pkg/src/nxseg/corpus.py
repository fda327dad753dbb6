"""Deterministic synthetic multilabel corpus.

Stands in for licensed broadcast/meeting corpora with three spectrally
separable sources:

* speech — harmonic pulse train, pitch drifting inside 100-300 Hz, a
  formant-like resonance bump, syllabic (~4 Hz) amplitude modulation;
* music — a sustained A4 note: 440 Hz fundamental with two faint upper
  partials and a slow attack/release envelope (the partials are kept
  faint because log compression flattens level differences, and the
  fundamental must dominate log-spectral mass for explanations to have
  a clean ground-truth bin);
* noise — 1/f-shaped noise (pink or brown).

Scene events are snapped to the 20 ms frame grid, so frame labels are
exact: SAD marks any active speech source, OSD marks frames where at
least two speech sources are active (hence OSD is a subset of SAD),
MD/ND mark music/noise events.  Everything is seeded; regenerating a
corpus from the same master seed is byte-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import (DEFAULT_RATE, FRAME_STEP_S, AudioClip, log_spectrogram,
                  write_wav)
from .distill import LabeledSegments, SegmentExample
from .errors import ConfigError, SamplingError
from .evalseg import SegmentList, read_segments, segments_to_frames, write_segments
from .segnet import CLASSES

DEFAULT_SCENE_S = 4.0
DEFAULT_PRIORS = {"SAD": 0.5, "MD": 0.4, "ND": 0.3, "OSD": 0.15}

# splits draw scene seeds from disjoint ranges below the master offset
_SPLIT_OFFSETS = {"train": 0, "val": 200_000, "test": 400_000}


@dataclass
class SceneSpec:
    duration_s: float
    # (kind, onset_s, offset_s, synth params) with kind in
    # {speech, overlap, music, noise}; overlap is a second speech source
    events: list
    seed: int


# ----------------------------------------------------------- generators ----

def _peak_normalize(x: np.ndarray, peak: float) -> np.ndarray:
    m = np.max(np.abs(x))
    return x * (peak / m) if m > 0 else x


def synth_speech(dur_s: float, seed: int, rate: int = DEFAULT_RATE,
                 f0_lo: float = 100.0, f0_hi: float = 300.0) -> AudioClip:
    if dur_s <= 0:
        raise ConfigError(f"duration must be positive, got {dur_s}")
    rng = np.random.default_rng(seed)
    n = int(round(dur_s * rate))
    t = np.arange(n) / rate
    base = rng.uniform(f0_lo + 30, f0_hi - 30)
    depth = rng.uniform(10, 30)
    drift_hz = rng.uniform(0.3, 1.2)
    f0 = base + depth * np.sin(2 * np.pi * drift_hz * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0) / rate
    formant = rng.uniform(400, 700)
    x = np.zeros(n)
    for h in range(1, 11):
        freq = h * base
        if freq > 3500:
            break
        # resonance bump plus gentle high-frequency rolloff
        gain = (np.exp(-0.5 * ((freq - formant) / 250.0) ** 2) + 0.25) / h ** 0.5
        x += gain * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
    syllable_hz = rng.uniform(3.0, 5.0)
    am = 0.55 + 0.45 * np.sin(2 * np.pi * syllable_hz * t + rng.uniform(0, 2 * np.pi))
    return AudioClip(_peak_normalize(x * am, rng.uniform(0.6, 0.9)), rate)


def synth_music(dur_s: float, seed: int, rate: int = DEFAULT_RATE,
                fundamental: float = 440.0) -> AudioClip:
    if dur_s <= 0:
        raise ConfigError(f"duration must be positive, got {dur_s}")
    rng = np.random.default_rng(seed)
    n = int(round(dur_s * rate))
    t = np.arange(n) / rate
    x = np.zeros(n)
    for mult, amp in ((1, 1.0), (2, 0.3), (3, 0.15)):
        x += amp * np.sin(2 * np.pi * mult * fundamental * t
                          + rng.uniform(0, 2 * np.pi))
    attack = rng.uniform(0.1, 0.4)
    release = rng.uniform(0.1, 0.4)
    env = np.minimum(1.0, np.minimum(t / attack, (dur_s - t) / release))
    env = np.clip(env, 0.0, 1.0)
    return AudioClip(_peak_normalize(x * env, rng.uniform(0.6, 0.9)), rate)


def synth_noise(dur_s: float, seed: int, rate: int = DEFAULT_RATE,
                color: str = "pink") -> AudioClip:
    if dur_s <= 0:
        raise ConfigError(f"duration must be positive, got {dur_s}")
    if color not in ("pink", "brown"):
        raise ConfigError(f"noise color must be pink or brown, got {color!r}")
    rng = np.random.default_rng(seed)
    n = int(round(dur_s * rate))
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, 1 / rate)
    shaping = np.zeros_like(freqs)
    power = 0.5 if color == "pink" else 1.0
    shaping[1:] = 1.0 / freqs[1:] ** power
    x = np.fft.irfft(spectrum * shaping, n=n)
    return AudioClip(_peak_normalize(x, rng.uniform(0.4, 0.7)), rate)


_SYNTH = {"speech": synth_speech, "overlap": synth_speech,
          "music": synth_music, "noise": synth_noise}


# ---------------------------------------------------------------- scenes ----

def _snap(t: float, step: float = FRAME_STEP_S) -> float:
    return round(t / step) * step


def make_scene_spec(seed: int, duration_s: float = DEFAULT_SCENE_S,
                    priors: dict = None) -> SceneSpec:
    """Draw event placements whose expected frame coverage matches the
    target per-class priors."""
    priors = dict(DEFAULT_PRIORS if priors is None else priors)
    rng = np.random.default_rng(seed)
    events = []

    def place(kind, frac, lo_bound=0.0, hi_bound=None):
        hi_bound = duration_s if hi_bound is None else hi_bound
        span = hi_bound - lo_bound
        dur = min(frac * duration_s, span)
        onset = lo_bound + rng.uniform(0, span - dur)
        onset = _snap(onset)
        offset = min(_snap(onset + dur), hi_bound)
        if offset - onset >= 2 * FRAME_STEP_S:
            events.append((kind, onset, offset,
                           {"seed": int(rng.integers(0, 2 ** 31))}))
            return onset, offset
        return None

    sad_frac = rng.uniform(priors["SAD"] - 0.2, priors["SAD"] + 0.2)
    speech_span = place("speech", sad_frac)
    if speech_span and rng.uniform() < 0.5:
        # second talker strictly inside the first, twice the OSD prior so
        # the conditional 0.5 presence lands on the target on average
        ov_frac = rng.uniform(2 * priors["OSD"] - 0.1, 2 * priors["OSD"] + 0.1)
        place("overlap", ov_frac, speech_span[0], speech_span[1])
    place("music", rng.uniform(priors["MD"] - 0.15, priors["MD"] + 0.15))
    place("noise", rng.uniform(priors["ND"] - 0.15, priors["ND"] + 0.15))
    return SceneSpec(duration_s, events, seed)


def render_scene(spec: SceneSpec, rate: int = DEFAULT_RATE) -> AudioClip:
    n = int(round(spec.duration_s * rate))
    timeline = np.zeros(n)
    for kind, onset, offset, params in spec.events:
        clip = _SYNTH[kind](offset - onset, params["seed"], rate)
        i0 = int(round(onset * rate))
        timeline[i0:i0 + len(clip.samples)] += clip.samples
    peak = np.max(np.abs(timeline))
    if peak > 0.99:
        timeline *= 0.99 / peak
    return AudioClip(timeline, rate)


def scene_segments(spec: SceneSpec) -> SegmentList:
    """Exact per-class intervals implied by the event list."""
    edges = sorted({0.0, spec.duration_s}
                   | {e[1] for e in spec.events} | {e[2] for e in spec.events})
    by_class = {name: [] for name in CLASSES}

    def add(name, a, b):
        segs = by_class[name]
        if segs and abs(segs[-1][1] - a) < 1e-9:
            segs[-1] = (segs[-1][0], b)
        else:
            segs.append((a, b))

    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        talkers = sum(1 for kind, on, off, _ in spec.events
                      if kind in ("speech", "overlap") and on <= mid < off)
        if talkers >= 1:
            add("SAD", a, b)
        if talkers >= 2:
            add("OSD", a, b)
        for kind, label in (("music", "MD"), ("noise", "ND")):
            if any(k == kind and on <= mid < off
                   for k, on, off, _ in spec.events):
                add(label, a, b)
    return SegmentList({k: v for k, v in by_class.items()})


def scene_labels(spec: SceneSpec, num_frames: int,
                 frame_step_s: float = FRAME_STEP_S) -> LabeledSegments:
    binary = segments_to_frames(scene_segments(spec), num_frames, frame_step_s)
    return LabeledSegments(binary)


# ---------------------------------------------------------------- corpus ----

def generate_corpus(out_dir, n_train: int, n_val: int, n_test: int,
                    seed: int = 0, duration_s: float = DEFAULT_SCENE_S,
                    priors: dict = None) -> Path:
    """Write corpus/{train,val,test}/{wav,labels}/scene_%05d.{wav,seg}
    plus a manifest.csv of per-scene class proportions."""
    counts = {"train": n_train, "val": n_val, "test": n_test}
    if min(counts.values()) < 1:
        raise ConfigError("every split needs at least one scene")
    out_dir = Path(out_dir)
    manifest_rows = []
    for split in ("train", "val", "test"):
        wav_dir = out_dir / split / "wav"
        lab_dir = out_dir / split / "labels"
        wav_dir.mkdir(parents=True, exist_ok=True)
        lab_dir.mkdir(parents=True, exist_ok=True)
        for i in range(counts[split]):
            scene_seed = seed * 1_000_000 + _SPLIT_OFFSETS[split] + i
            spec = make_scene_spec(scene_seed, duration_s, priors)
            clip = render_scene(spec)
            name = f"scene_{i:05d}"
            write_wav(wav_dir / f"{name}.wav", clip)
            segs = scene_segments(spec)
            write_segments(lab_dir / f"{name}.seg", segs, name)
            num_frames = count_frames(len(clip.samples), clip.sample_rate)
            labels = scene_labels(spec, num_frames)
            row = {"split": split, "file": name, "seed": scene_seed}
            for c, cls in enumerate(CLASSES):
                row[cls] = f"{labels.labels[c].mean():.4f}"
            manifest_rows.append(row)
    with open(out_dir / "manifest.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["split", "file", "seed", *CLASSES])
        writer.writeheader()
        writer.writerows(manifest_rows)
    return out_dir


def count_frames(n_samples: int, rate: int = DEFAULT_RATE,
                 frame_len_s: float = 0.064,
                 frame_step_s: float = FRAME_STEP_S) -> int:
    frame_len = int(round(frame_len_s * rate))
    step = int(round(frame_step_s * rate))
    return 1 + (n_samples - frame_len) // step


def load_split(corpus_dir, split: str) -> list:
    """Read one split back as SegmentExamples (spectrogram + labels)."""
    from .dsp import read_wav
    wav_dir = Path(corpus_dir) / split / "wav"
    lab_dir = Path(corpus_dir) / split / "labels"
    if not wav_dir.is_dir():
        raise ConfigError(f"missing corpus split directory {wav_dir}")
    examples = []
    for wav_path in sorted(wav_dir.glob("*.wav")):
        clip = read_wav(wav_path)
        spec = log_spectrogram(clip)
        seg_path = lab_dir / (wav_path.stem + ".seg")
        seglists = read_segments(seg_path)
        seglist = seglists.get(wav_path.stem, SegmentList())
        binary = segments_to_frames(seglist, spec.num_frames, spec.frame_step_s)
        examples.append(SegmentExample(spec.bins, LabeledSegments(binary)))
    if not examples:
        raise ConfigError(f"no scenes found under {wav_dir}")
    return examples


# ------------------------------------------------- explanation data sets ----

def make_pure_segments(kind: str, count: int, dur_s: float, seed: int) -> list:
    """Single-source clips for building per-class prototype sets."""
    if kind not in ("speech", "music", "noise"):
        raise ConfigError(f"unknown segment kind {kind!r}")
    return [_SYNTH[kind](dur_s, seed * 10_000 + i) for i in range(count)]


def make_overlap_mixtures(speech_segments: list, count: int,
                          seed: int) -> list:
    """Two-talker mixtures built by summing randomly chosen speech clips;
    each is labeled SAD=1 and OSD=1 over its whole span."""
    if len(speech_segments) < 2:
        raise SamplingError("need at least 2 speech segments to build mixtures")
    rng = np.random.default_rng(seed)
    mixtures = []
    for _ in range(count):
        i, j = rng.choice(len(speech_segments), size=2, replace=False)
        a, b = speech_segments[i].samples, speech_segments[j].samples
        n = min(len(a), len(b))
        mix = a[:n] + b[:n]
        peak = np.max(np.abs(mix))
        if peak > 0.99:
            mix = mix * (0.99 / peak)
        mixtures.append(AudioClip(mix, speech_segments[i].sample_rate))
    return mixtures


def dictionary_pool(seed: int = 0, per_class: int = 24,
                    dur_range=(1.0, 4.0)) -> dict:
    """Segment pool for dictionary pretraining: seeded clips of 1-4 s."""
    rng = np.random.default_rng(seed)
    pool = {}
    for k, kind in enumerate(("speech", "music", "noise")):
        clips = []
        for i in range(per_class):
            dur = rng.uniform(*dur_range)
            clips.append(_SYNTH[kind](dur, seed * 999_983 + k * 104_729 + i))
        pool[kind] = clips
    return pool
