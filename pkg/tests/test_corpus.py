import hashlib

import numpy as np
import pytest

from nxseg.corpus import (DEFAULT_PRIORS, count_frames, dictionary_pool,
                          generate_corpus, load_split, make_overlap_mixtures,
                          make_pure_segments, make_scene_spec, render_scene,
                          scene_labels, synth_music, synth_noise, synth_speech)
from nxseg.dsp import log_spectrogram
from nxseg.errors import ConfigError, SamplingError


class TestGenerators:
    def test_speech_energy_below_1khz(self):
        hz = []
        for seed in range(8):
            spec = log_spectrogram(synth_speech(2.0, seed))
            hz.append(spec.bins.argmax(axis=0).mean() * spec.bin_hz)
        assert np.mean(hz) < 1000.0

    def test_music_dominant_bin_is_440(self):
        for seed in range(5):
            spec = log_spectrogram(synth_music(2.0, seed))
            dominant = np.bincount(spec.bins.argmax(axis=0)).argmax()
            assert abs(dominant - 440.0 / spec.bin_hz) <= 1.0

    def test_seeded_determinism(self):
        for synth in (synth_speech, synth_music, synth_noise):
            a, b = synth(1.0, 17), synth(1.0, 17)
            np.testing.assert_array_equal(a.samples, b.samples)

    def test_peaks_bounded(self):
        for synth in (synth_speech, synth_music, synth_noise):
            for seed in range(4):
                assert np.abs(synth(1.5, seed).samples).max() <= 1.0

    def test_nonpositive_duration_rejected(self):
        for synth in (synth_speech, synth_music, synth_noise):
            with pytest.raises(ConfigError):
                synth(0.0, 0)

    def test_noise_colors(self):
        pink = synth_noise(1.0, 0, color="pink")
        brown = synth_noise(1.0, 0, color="brown")
        # brown noise rolls off faster: lower spectral centroid
        def centroid(clip):
            spec = np.abs(np.fft.rfft(clip.samples))
            freqs = np.fft.rfftfreq(len(clip.samples), 1 / 16000)
            return (spec * freqs).sum() / spec.sum()
        assert centroid(brown) < centroid(pink)
        with pytest.raises(ConfigError):
            synth_noise(1.0, 0, color="plaid")


class TestScenes:
    def test_osd_subset_of_sad(self):
        for i in range(60):
            labels = scene_labels(make_scene_spec(3000 + i),
                                  count_frames(64000)).labels
            assert not np.any(labels[3] > labels[0])

    def test_priors_match_targets(self):
        rows = [scene_labels(make_scene_spec(4000 + i),
                             count_frames(64000)).labels.mean(axis=1)
                for i in range(120)]
        measured = np.mean(rows, axis=0)
        for c, name in enumerate(("SAD", "MD", "ND", "OSD")):
            assert abs(measured[c] - DEFAULT_PRIORS[name]) < 0.05, name

    def test_scene_rendering_deterministic(self):
        a = render_scene(make_scene_spec(99))
        b = render_scene(make_scene_spec(99))
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_silent_scene_labels_empty(self):
        spec = make_scene_spec(0)
        spec.events.clear()
        labels = scene_labels(spec, count_frames(64000)).labels
        assert labels.sum() == 0
        clip = render_scene(spec)
        assert np.abs(clip.samples).max() == 0.0


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    generate_corpus(out, n_train=4, n_val=2, n_test=2, seed=5)
    return out


class TestCorpusGeneration:
    def test_layout(self, corpus_dir):
        for split, n in (("train", 4), ("val", 2), ("test", 2)):
            wavs = sorted((corpus_dir / split / "wav").glob("scene_*.wav"))
            segs = sorted((corpus_dir / split / "labels").glob("scene_*.seg"))
            assert len(wavs) == n and len(segs) == n
        assert (corpus_dir / "manifest.csv").exists()
        header = (corpus_dir / "manifest.csv").read_text().splitlines()[0]
        assert header == "split,file,seed,SAD,MD,ND,OSD"

    def test_load_split_alignment(self, corpus_dir):
        examples = load_split(corpus_dir, "train")
        assert len(examples) == 4
        for ex in examples:
            assert ex.bins.shape[0] == 513
            assert ex.labels.labels.shape == (4, ex.bins.shape[1])
            assert not np.any(ex.labels.labels[3] > ex.labels.labels[0])

    def test_regeneration_is_byte_identical(self, corpus_dir, tmp_path):
        generate_corpus(tmp_path / "again", n_train=4, n_val=2, n_test=2,
                        seed=5)
        for split in ("train", "val", "test"):
            for wav in sorted((corpus_dir / split / "wav").glob("*.wav")):
                twin = tmp_path / "again" / split / "wav" / wav.name
                assert (hashlib.sha256(wav.read_bytes()).hexdigest()
                        == hashlib.sha256(twin.read_bytes()).hexdigest())

    def test_splits_have_no_identical_clips(self, corpus_dir):
        digests = set()
        count = 0
        for split in ("train", "val", "test"):
            for wav in sorted((corpus_dir / split / "wav").glob("*.wav")):
                digests.add(hashlib.sha256(wav.read_bytes()).hexdigest())
                count += 1
        assert len(digests) == count

    def test_counts_validated(self, tmp_path):
        with pytest.raises(ConfigError):
            generate_corpus(tmp_path / "bad", 0, 1, 1)


class TestExplanationSets:
    def test_pure_segments(self):
        clips = make_pure_segments("music", 3, 1.0, seed=1)
        assert len(clips) == 3
        with pytest.raises(ConfigError):
            make_pure_segments("frogs", 1, 1.0, 0)

    def test_overlap_mixtures(self):
        speech = make_pure_segments("speech", 4, 1.0, seed=2)
        mixes = make_overlap_mixtures(speech, count=5, seed=3)
        assert len(mixes) == 5
        for m in mixes:
            assert np.abs(m.samples).max() <= 0.99 + 1e-12

    def test_mixture_energy_bounded_by_sources(self):
        # interference can cancel, never amplify beyond the sum
        speech = make_pure_segments("speech", 2, 1.0, seed=4)
        n = min(len(c.samples) for c in speech)
        mix = speech[0].samples[:n] + speech[1].samples[:n]
        e_mix = np.sum(mix ** 2)
        e_sum = sum(np.sum(c.samples[:n] ** 2) for c in speech)
        cross = 2 * abs(np.dot(speech[0].samples[:n], speech[1].samples[:n]))
        assert e_mix <= e_sum + cross + 1e-9

    def test_too_few_sources(self):
        with pytest.raises(SamplingError):
            make_overlap_mixtures(make_pure_segments("speech", 1, 1.0, 0),
                                  count=1, seed=0)

    def test_dictionary_pool_shape(self):
        pool = dictionary_pool(seed=1, per_class=3, dur_range=(1.0, 1.5))
        assert sorted(pool) == ["music", "noise", "speech"]
        for clips in pool.values():
            assert len(clips) == 3
            for c in clips:
                assert 1.0 <= c.duration_s <= 1.5
