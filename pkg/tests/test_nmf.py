import numpy as np
import pytest

from nxseg.dsp import AudioClip, log_spectrogram
from nxseg.errors import ConfigError, DomainError, SamplingError, ShapeError
from nxseg.nmf import (Dictionary, dictionary_to_csv, infer_activations,
                       load_dictionary, normalize_columns, pretrain_dictionary,
                       save_dictionary, sparse_nmf, DEFAULT_CLASS_MIX,
                       DEFAULT_POOL_SIZE, DEFAULT_RANK)


def rel_err(x, fit):
    return (np.linalg.norm(x - fit.dictionary.atoms @ fit.activations)
            / np.linalg.norm(x))


class TestSparseNmf:
    def test_zero_target(self):
        fit = sparse_nmf(np.zeros((6, 9)), rank=2, sparsity=0.1, iters=50,
                         seed=0)
        np.testing.assert_allclose(fit.activations, 0.0, atol=1e-30)
        assert fit.objective_trace[-1] == pytest.approx(0.0, abs=1e-20)

    def test_planted_rank2_recovery(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(0, 1, (8, 2)) @ rng.uniform(0, 1, (2, 20))
        fit = sparse_nmf(x, rank=2, sparsity=0.0, iters=500, seed=3)
        assert rel_err(x, fit) < 0.05

    def test_objective_trace_nonincreasing(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, (16, 40))
        fit = sparse_nmf(x, rank=5, sparsity=0.1, iters=200, seed=1)
        trace = np.array(fit.objective_trace)
        assert len(trace) == 200
        assert np.all(np.diff(trace) <= 1e-10)

    def test_factors_nonnegative_and_unit_norm(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 1, (12, 30))
        fit = sparse_nmf(x, rank=4, sparsity=0.5, iters=100, seed=2)
        assert np.all(fit.dictionary.atoms >= 0)
        assert np.all(fit.activations >= 0)
        np.testing.assert_allclose(
            np.linalg.norm(fit.dictionary.atoms, axis=0), 1.0, atol=1e-9)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 1, (10, 15))
        a = sparse_nmf(x, 3, iters=60, seed=9)
        b = sparse_nmf(x, 3, iters=60, seed=9)
        np.testing.assert_array_equal(a.dictionary.atoms, b.dictionary.atoms)
        np.testing.assert_array_equal(a.activations, b.activations)

    def test_negative_input_rejected(self):
        x = np.ones((4, 4))
        x[1, 2] = -0.5
        with pytest.raises(DomainError):
            sparse_nmf(x, 2, iters=10)

    def test_rank_validation(self):
        x = np.ones((4, 6))
        with pytest.raises(ConfigError):
            sparse_nmf(x, 5, iters=10)
        with pytest.raises(ConfigError):
            sparse_nmf(x, 0, iters=10)

    def test_full_rank_recovery_lambda_zero(self):
        # at rank=min(F,T) the factorization is exact in principle; the
        # multiplicative updates reach 1% on compact square problems
        # within the iteration budget
        for s in range(6):
            rng = np.random.default_rng(500 + s)
            n = int(rng.integers(4, 9))
            x = rng.uniform(0, 1, (n, n))
            fit = sparse_nmf(x, rank=n, sparsity=0.0, iters=1000, seed=s)
            assert rel_err(x, fit) < 0.01

    def test_monotone_over_many_random_problems(self):
        for s in range(12):
            rng = np.random.default_rng(1000 + s)
            f, t = int(rng.integers(5, 20)), int(rng.integers(8, 40))
            x = rng.uniform(0, 1, (f, t))
            lam = [0.0, 0.1, 1.0][s % 3]
            k = int(rng.integers(2, min(f, t)))
            fit = sparse_nmf(x, k, sparsity=lam, iters=120, seed=s)
            assert np.all(np.diff(fit.objective_trace) <= 1e-10)


class TestNormalization:
    def test_renormalization_preserves_product(self):
        rng = np.random.default_rng(4)
        w = rng.uniform(0.1, 3.0, (9, 5))
        h = rng.uniform(0.0, 2.0, (5, 12))
        product = w @ h
        w2, h2 = normalize_columns(w, h)
        np.testing.assert_allclose(np.linalg.norm(w2, axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(w2 @ h2, product, atol=1e-12)

    def test_zero_column_untouched(self):
        w = np.zeros((4, 2))
        w[:, 0] = [1, 1, 1, 1]
        h = np.ones((2, 3))
        w2, h2 = normalize_columns(w, h)
        np.testing.assert_array_equal(w2[:, 1], 0.0)
        np.testing.assert_allclose(np.linalg.norm(w2[:, 0]), 1.0)


class TestInferActivations:
    def _dictionary(self, seed=11, f=16, k=6):
        rng = np.random.default_rng(seed)
        w = rng.uniform(0.05, 1.0, (f, k))
        return Dictionary(w / np.linalg.norm(w, axis=0))

    def test_exact_atom_concentrates(self):
        w = self._dictionary()
        for j in range(w.rank):
            h = infer_activations(w.atoms[:, [j]], w, sparsity=0.1, iters=200)
            assert int(np.argmax(h[:, 0])) == j

    def test_zero_input(self):
        w = self._dictionary()
        h = infer_activations(np.zeros((16, 5)), w, iters=30)
        np.testing.assert_allclose(h, 0.0, atol=1e-30)

    def test_frozen_dictionary_reconstruction(self):
        rng = np.random.default_rng(5)
        w0 = rng.uniform(0, 1, (8, 2))
        w0 /= np.linalg.norm(w0, axis=0)
        h0 = rng.uniform(0, 1, (2, 20))
        x = w0 @ h0
        h = infer_activations(x, Dictionary(w0), sparsity=0.0, iters=500)
        assert np.linalg.norm(x - w0 @ h) / np.linalg.norm(x) < 0.05

    def test_bin_mismatch(self):
        with pytest.raises(ShapeError):
            infer_activations(np.zeros((7, 3)), self._dictionary(), iters=5)

    def test_nonnegative_output(self):
        rng = np.random.default_rng(6)
        w = self._dictionary()
        h = infer_activations(rng.uniform(0, 2, (16, 9)), w, iters=50)
        assert np.all(h >= 0)


class TestPretrainDictionary:
    def _pool(self, per_class=8, seed=0):
        rng = np.random.default_rng(seed)
        pool = {}
        for i, name in enumerate(("speech", "music", "noise")):
            clips = []
            for j in range(per_class):
                dur = rng.uniform(1.0, 2.0)
                t = np.arange(int(dur * 16000)) / 16000
                freq = 200 * (i + 1) + 20 * j
                clips.append(AudioClip(0.5 * np.sin(2 * np.pi * freq * t)))
            pool[name] = clips
        return pool

    def test_paper_scale_defaults(self):
        assert DEFAULT_RANK == 256
        assert DEFAULT_POOL_SIZE == 1200
        assert DEFAULT_CLASS_MIX == {"speech": 0.16, "music": 0.42,
                                     "noise": 0.42}

    def test_desk_scale_run(self):
        w = pretrain_dictionary(self._pool(), rank=8,
                                class_mix={"speech": 0.34, "music": 0.33,
                                           "noise": 0.33},
                                pool_size=18, iters=40, seed=1)
        assert w.rank == 8
        assert np.all(w.atoms >= 0)
        np.testing.assert_allclose(np.linalg.norm(w.atoms, axis=0), 1.0,
                                   atol=1e-9)

    def test_pool_deficit_reported(self):
        with pytest.raises(SamplingError, match="speech"):
            pretrain_dictionary(self._pool(per_class=2), rank=4,
                                class_mix={"speech": 0.5, "music": 0.25,
                                           "noise": 0.25},
                                pool_size=12, iters=5)

    def test_accepts_spectrogram_pool(self):
        pool = {name: [log_spectrogram(c) for c in clips]
                for name, clips in self._pool(per_class=3).items()}
        w = pretrain_dictionary(pool, rank=4,
                                class_mix={"speech": 0.34, "music": 0.33,
                                           "noise": 0.33},
                                pool_size=6, iters=20, seed=2)
        assert w.num_bins == 513


def test_dictionary_serialization(tmp_path):
    rng = np.random.default_rng(8)
    w = rng.uniform(0, 1, (10, 4))
    w /= np.linalg.norm(w, axis=0)
    d = Dictionary(w)
    path = tmp_path / "dict.nxsg"
    save_dictionary(path, d)
    loaded = load_dictionary(path)
    assert loaded.atoms.tobytes() == w.tobytes()
    csv_path = tmp_path / "dict.csv"
    dictionary_to_csv(csv_path, d)
    rows = csv_path.read_text().strip().splitlines()
    assert len(rows) == 10 and len(rows[0].split(",")) == 4
