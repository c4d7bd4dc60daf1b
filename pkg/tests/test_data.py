"""Synthetic generators, stratified splits, balanced sampling, file formats."""

import numpy as np
import pytest

import kdfm.data as data_mod
from kdfm.data import (
    UNLABELED,
    Dataset,
    gen_blobs,
    gen_two_moons,
    load_csv,
    load_kdf1,
    sample_balanced_labels,
    save_csv,
    save_kdf1,
    split_80_20,
)
from kdfm.errors import DataError, DataFormatError


class TestTwoMoons:
    def test_balanced_counts(self):
        ds = gen_two_moons(1000, 0.1, seed=0)
        assert (ds.labels == 0).sum() == 500
        assert (ds.labels == 1).sum() == 500

    def test_noiseless_geometry(self):
        ds = gen_two_moons(400, 0.0, seed=1)
        upper = ds.features[ds.labels == 0]
        lower = ds.features[ds.labels == 1]
        r_upper = np.linalg.norm(upper, axis=1)
        r_lower = np.linalg.norm(lower - np.array([1.0, 0.5]), axis=1)
        np.testing.assert_allclose(r_upper, 1.0, atol=1e-12)
        np.testing.assert_allclose(r_lower, 1.0, atol=1e-12)
        assert np.all(upper[:, 1] >= -1e-12)
        assert np.all(lower[:, 1] <= 0.5 + 1e-12)

    def test_deterministic(self):
        a = gen_two_moons(100, 0.2, seed=5)
        b = gen_two_moons(100, 0.2, seed=5)
        np.testing.assert_array_equal(a.features, b.features)

    def test_too_small(self):
        with pytest.raises(DataError):
            gen_two_moons(1)


class TestBlobs:
    def test_nearest_centroid_separates(self):
        ds = gen_blobs(3, 50, 2, separation=10.0, noise_sigma=1.0, seed=2)
        centers = np.stack([ds.features[ds.labels == c].mean(axis=0) for c in range(3)])
        d2 = ((ds.features[:, None, :] - centers[None]) ** 2).sum(axis=2)
        predicted = d2.argmin(axis=1)
        assert (predicted == ds.labels).mean() >= 0.99

    def test_one_dimensional(self):
        ds = gen_blobs(2, 10, 1, separation=5.0, noise_sigma=0.1, seed=0)
        assert ds.features.shape == (20, 1)
        assert (ds.labels == 0).sum() == (ds.labels == 1).sum() == 10

    def test_deterministic(self):
        a = gen_blobs(4, 5, 3, separation=4.0, noise_sigma=0.5, seed=9)
        b = gen_blobs(4, 5, 3, separation=4.0, noise_sigma=0.5, seed=9)
        np.testing.assert_array_equal(a.features, b.features)

    def test_placement_failure(self, monkeypatch):
        monkeypatch.setattr(data_mod, "_CENTER_RETRIES", 0)
        with pytest.raises(DataError):
            gen_blobs(2, 5, 2, separation=1.0, noise_sigma=0.1, seed=0)


class TestSplit:
    def test_counts_per_class(self):
        ds = gen_blobs(2, 50, 2, separation=5.0, noise_sigma=0.5, seed=0)
        train, val = split_80_20(ds, seed=1)
        for cls in range(2):
            assert (train.labels == cls).sum() == 40
            assert (val.labels == cls).sum() == 10

    def test_partition(self):
        ds = gen_two_moons(101, 0.1, seed=0)
        train, val = split_80_20(ds, seed=2)
        assert len(train) + len(val) == len(ds)
        combined = np.sort(np.vstack([train.features, val.features]), axis=0)
        np.testing.assert_array_equal(combined, np.sort(ds.features, axis=0))

    def test_proportions_within_one(self):
        ds = gen_blobs(3, 33, 2, separation=5.0, noise_sigma=0.5, seed=3)
        train, val = split_80_20(ds, seed=0)
        for cls in range(3):
            n_val = (val.labels == cls).sum()
            assert abs(n_val - 33 * 0.2) <= 1

    def test_small_class_rejected(self):
        features = np.random.default_rng(0).normal(size=(10, 2))
        labels = np.array([0] * 7 + [1] * 3)
        ds = Dataset(features, labels, num_classes=2)
        with pytest.raises(DataError):
            split_80_20(ds, seed=0)

    def test_deterministic(self):
        ds = gen_two_moons(100, 0.1, seed=0)
        a_train, _ = split_80_20(ds, seed=4)
        b_train, _ = split_80_20(ds, seed=4)
        np.testing.assert_array_equal(a_train.features, b_train.features)


class TestBalancedSampling:
    def test_exact_budget(self):
        ds = gen_two_moons(100, 0.1, seed=0)
        labeled, unlabeled = sample_balanced_labels(ds, 4, seed=1)
        assert len(labeled) == 8
        hist = np.bincount(ds.labels[labeled])
        np.testing.assert_array_equal(hist, [4, 4])

    def test_unlabeled_pool_is_everything(self):
        ds = gen_two_moons(100, 0.1, seed=0)
        for budget in (1, 4, 25):
            _, unlabeled = sample_balanced_labels(ds, budget, seed=1)
            np.testing.assert_array_equal(unlabeled, np.arange(100))

    def test_insufficient_class(self):
        ds = gen_two_moons(10, 0.1, seed=0)
        with pytest.raises(DataError):
            sample_balanced_labels(ds, 6, seed=0)

    def test_uniform_histogram_random_configs(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            k = int(rng.integers(2, 6))
            budget = int(rng.integers(1, 8))
            ds = gen_blobs(k, 20, 2, separation=5.0, noise_sigma=0.5,
                           seed=int(rng.integers(1000)))
            labeled, _ = sample_balanced_labels(ds, budget, int(rng.integers(1000)))
            assert len(labeled) == k * budget
            hist = np.bincount(ds.labels[labeled], minlength=k)
            assert np.all(hist == budget)


class TestCsvFormat:
    def test_round_trip_bit_identical(self, tmp_path):
        ds = gen_two_moons(50, 0.1, seed=0)
        ds.labels[3] = UNLABELED
        path = tmp_path / "data.csv"
        save_csv(ds, path)
        loaded = load_csv(path, num_classes=2)
        np.testing.assert_array_equal(loaded.features, ds.features)
        np.testing.assert_array_equal(loaded.labels, ds.labels)

    def test_empty_label_is_sentinel(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("label,f0,f1\n0,1.0,2.0\n,3.0,4.0\n1,5.0,6.0\n")
        ds = load_csv(path)
        np.testing.assert_array_equal(ds.labels, [0, UNLABELED, 1])
        assert ds.num_classes == 2

    def test_bad_column_count(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("label,f0,f1\n0,1.0\n")
        with pytest.raises(DataFormatError, match="expected 3 columns"):
            load_csv(path)

    def test_bad_feature_value(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("label,f0\n0,abc\n")
        with pytest.raises(DataFormatError, match=":2"):
            load_csv(path)

    def test_all_unlabeled_needs_explicit_classes(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("label,f0\n,1.0\n,2.0\n")
        with pytest.raises(DataFormatError):
            load_csv(path)
        ds = load_csv(path, num_classes=3)
        assert ds.num_classes == 3


class TestKdf1Format:
    def test_round_trip_single_precision(self, tmp_path):
        ds = gen_two_moons(30, 0.1, seed=0)
        ds.labels[5] = UNLABELED
        path = tmp_path / "data.kdf1"
        save_kdf1(ds, path)
        loaded = load_kdf1(path)
        np.testing.assert_array_equal(
            loaded.features, ds.features.astype("<f4").astype(np.float64)
        )
        np.testing.assert_array_equal(loaded.labels, ds.labels)
        # a second save of the loaded dataset reproduces the file exactly
        path2 = tmp_path / "again.kdf1"
        save_kdf1(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.kdf1"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(DataFormatError, match="byte 0"):
            load_kdf1(path)

    def test_truncated_features(self, tmp_path):
        ds = gen_two_moons(10, 0.1, seed=0)
        path = tmp_path / "data.kdf1"
        save_kdf1(ds, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: 16 + 10])  # cut inside the feature block
        with pytest.raises(DataFormatError, match="feature section"):
            load_kdf1(path)

    def test_truncated_labels(self, tmp_path):
        ds = gen_two_moons(10, 0.1, seed=0)
        path = tmp_path / "data.kdf1"
        save_kdf1(ds, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-3])
        with pytest.raises(DataFormatError, match="label section"):
            load_kdf1(path)

    def test_label_out_of_range(self, tmp_path):
        ds = gen_two_moons(10, 0.1, seed=0)
        path = tmp_path / "data.kdf1"
        save_kdf1(ds, path)
        blob = bytearray(path.read_bytes())
        label_start = 16 + 10 * 2 * 4
        blob[label_start : label_start + 2] = (7).to_bytes(2, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(DataFormatError, match="out of range"):
            load_kdf1(path)

    def test_trailing_bytes(self, tmp_path):
        ds = gen_two_moons(10, 0.1, seed=0)
        path = tmp_path / "data.kdf1"
        save_kdf1(ds, path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(DataFormatError, match="trailing"):
            load_kdf1(path)


class TestDatasetValidation:
    def test_label_range_checked(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((3, 2)), np.array([0, 1, 5]), num_classes=2)

    def test_sentinel_allowed(self):
        ds = Dataset(np.zeros((2, 2)), np.array([0, UNLABELED]), num_classes=1)
        assert len(ds) == 2
