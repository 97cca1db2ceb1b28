import json

import numpy as np
import pytest

from morphkit.datasets import (
    AugmentationPipeline,
    DatasetManifest,
    ManifestRecord,
    apply_augmentation,
    derive_labels,
    kfold_split,
    load_manifest,
    save_manifest,
)
from morphkit.errors import DimensionMismatch, EmptyDataset
from morphkit.imaging import BinaryMask, RasterImage

SCIAN_PA_COUNTS = [100, 228, 76, 72, 656]  # N, T, P, S, A


def manifest_with_counts(counts):
    recs = []
    for label, count in enumerate(counts):
        for i in range(count):
            recs.append(ManifestRecord(path=f"c{label}_{i}.png", expert_labels=[label]))
    return DatasetManifest(records=recs)


class TestDeriveLabels:
    def test_unanimous(self):
        assert derive_labels([4, 4, 4]) == (4, 4, "TA")

    def test_single_label(self):
        assert derive_labels([2]) == (2, 2, "TA")

    def test_two_of_three(self):
        assert derive_labels([4, 4, 1]) == (4, 1, "PA")
        assert derive_labels([4, 1, 4]) == (4, 1, "PA")
        assert derive_labels([1, 4, 4]) == (4, 1, "PA")

    def test_all_disagree_excluded(self):
        assert derive_labels([0, 1, 2]) == (None, None, "none")

    def test_two_experts_disagreeing(self):
        assert derive_labels([0, 1]) == (None, None, "none")
        assert derive_labels([3, 3]) == (3, 3, "TA")

    def test_partition_is_total(self):
        rng = np.random.default_rng(0)
        counts = {"TA": 0, "PA": 0, "none": 0}
        for _ in range(300):
            labels = rng.integers(0, 4, size=3).tolist()
            counts[derive_labels(labels)[2]] += 1
        assert sum(counts.values()) == 300
        assert all(v > 0 for v in counts.values())


class TestKfoldSplit:
    def test_exact_stratification(self):
        manifest = manifest_with_counts([5, 5])
        folds = kfold_split(manifest, k=5, seed=0)
        for f in range(5):
            labels = [manifest.records[i].expert_labels[0]
                      for i in np.nonzero(folds == f)[0]]
            assert sorted(labels) == [0, 1]

    def test_deterministic(self):
        manifest = manifest_with_counts([7, 9, 4])
        with pytest.warns(UserWarning):
            a = kfold_split(manifest, k=5, seed=3)
        with pytest.warns(UserWarning):
            b = kfold_split(manifest, k=5, seed=3)
        assert np.array_equal(a, b)

    def test_scian_pa_fold_sizes(self):
        manifest = manifest_with_counts(SCIAN_PA_COUNTS)
        folds = kfold_split(manifest, k=5, seed=0)
        sizes = sorted(np.bincount(folds, minlength=5).tolist(), reverse=True)
        assert sizes == [227, 227, 226, 226, 226]
        # per-class spread at most 1
        for label, count in enumerate(SCIAN_PA_COUNTS):
            per_fold = np.bincount(
                [folds[i] for i, r in enumerate(manifest.records)
                 if r.expert_labels[0] == label], minlength=5)
            assert per_fold.max() - per_fold.min() <= 1

    def test_every_record_exactly_one_fold(self):
        manifest = manifest_with_counts([11, 8, 13])
        folds = kfold_split(manifest, k=4, seed=1)
        assert len(folds) == 32
        assert folds.min() >= 0 and folds.max() < 4

    def test_small_class_warns(self):
        manifest = manifest_with_counts([10, 2])
        with pytest.warns(UserWarning, match="some folds will lack it"):
            kfold_split(manifest, k=5, seed=0)

    def test_empty(self):
        with pytest.raises(EmptyDataset):
            kfold_split(DatasetManifest(records=[]), k=5, seed=0)


class _FixedRng:
    """Duck-typed RNG stub delivering scripted draws."""

    def __init__(self, ints, floats, coins):
        self.ints = list(ints)
        self.floats = list(floats)
        self.coins = list(coins)

    def integers(self, lo, hi):
        return self.ints.pop(0)

    def uniform(self, lo, hi):
        return self.floats.pop(0)

    def random(self):
        return self.coins.pop(0)


class TestApplyAugmentation:
    def make_pair(self, size=64):
        rng = np.random.default_rng(7)
        img = RasterImage(rng.random((size, size)))
        mask = BinaryMask(np.zeros((size, size), bool))
        mask.data[20:40, 24:44] = True
        return img, mask

    def test_identity_parameters_are_resize_only(self):
        img, mask = self.make_pair(64)
        rng = _FixedRng(ints=[64, 0, 0], floats=[0.0, 0.0, 0.0], coins=[0.9])
        out_img, out_mask = apply_augmentation(AugmentationPipeline(), img, mask, rng)
        # 64x64 input with crop 64, rot 0, no flip, no shift -> unchanged
        assert np.allclose(out_img.data, img.data)
        assert np.array_equal(out_mask.data, mask.data)

    def test_flip_applies_to_both(self):
        img, mask = self.make_pair(64)
        rng = _FixedRng(ints=[64, 0, 0], floats=[0.0, 0.0, 0.0], coins=[0.1])
        out_img, out_mask = apply_augmentation(AugmentationPipeline(), img, mask, rng)
        assert np.allclose(out_img.data, img.data[::-1])
        assert np.array_equal(out_mask.data, mask.data[::-1])

    def test_output_size_and_mask_binary(self):
        img, mask = self.make_pair(35)
        rng = np.random.default_rng(11)
        out_img, out_mask = apply_augmentation(AugmentationPipeline(), img, mask, rng)
        assert out_img.data.shape == (64, 64)
        assert out_mask.data.dtype == bool

    def test_crop_sizes_uniform(self):
        rng = np.random.default_rng(5)
        draws = rng.integers(45, 65, size=1000)
        counts = np.bincount(draws, minlength=65)[45:65]
        p = 1 / 20
        sd = np.sqrt(1000 * p * (1 - p))
        assert np.all(np.abs(counts - 1000 * p) <= 3 * sd)

    def test_dimension_mismatch(self):
        img, _ = self.make_pair(64)
        mask = BinaryMask(np.zeros((32, 32), bool))
        with pytest.raises(DimensionMismatch):
            apply_augmentation(AugmentationPipeline(), img, mask, np.random.default_rng(0))

    def test_mask_optional(self):
        img, _ = self.make_pair(40)
        out_img, out_mask = apply_augmentation(
            AugmentationPipeline(), img, None, np.random.default_rng(0))
        assert out_mask is None
        assert out_img.data.shape == (64, 64)

    def test_pipeline_validation(self):
        with pytest.raises(ValueError):
            AugmentationPipeline(crop_range=(45, 80))


class TestManifestIO:
    def test_round_trip(self, tmp_path):
        manifest = DatasetManifest(
            records=[
                ManifestRecord(path="a.png", expert_labels=[0, 0, 1], fold=2),
                ManifestRecord(path="b.png", expert_labels=[3]),
            ],
            class_names=["N", "T", "P", "S", "A"],
        )
        path = tmp_path / "m.jsonl"
        save_manifest(manifest, path)
        back = load_manifest(path, class_names=manifest.class_names)
        assert [r.path for r in back.records] == ["a.png", "b.png"]
        assert back.records[0].fold == 2
        assert back.records[1].fold is None
        assert back.num_classes == 5

    def test_schema_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"path": "a.png", "expert_labels": [0]}\n{"path": "b.png"}\n')
        with pytest.raises(ValueError, match=":2:"):
            load_manifest(path)

    def test_duplicate_paths_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            DatasetManifest(records=[
                ManifestRecord(path="a.png", expert_labels=[0]),
                ManifestRecord(path="a.png", expert_labels=[1]),
            ])

    def test_record_validation(self):
        with pytest.raises(ValueError):
            ManifestRecord(path="x.png", expert_labels=[])
        with pytest.raises(ValueError):
            ManifestRecord(path="x.png", expert_labels=[0, 1, 2, 3])
