import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morphkit.errors import BadGamma, BadParams, EmptyDataset, LabelMismatch
from morphkit.imaging import BinaryMask, RasterImage
from morphkit.mixup import (
    LabeledSample,
    MixParams,
    MixedSample,
    PredictionVector,
    make_mixed_batch,
    mix,
    oversample,
    pair_intra_class,
    soft_loss,
    soft_mixup_loss,
)

# SCIAN-PA per-class counts: 100 N, 228 T, 76 P, 72 S, 656 A
SCIAN_PA_COUNTS = [100, 228, 76, 72, 656]


def soft_loss_oracle(probs, y_a, y_b, gamma):
    """Direct evaluation of the weighted cross-entropy, independent path."""
    return gamma * -math.log(probs[y_a]) + (1 - gamma) * -math.log(probs[y_b])


def sample(label_a, label_b=None, value=0.5, sid="s", size=4):
    return LabeledSample(
        crop=RasterImage(np.full((size, size), value)),
        majority_label=label_a,
        minority_label=label_a if label_b is None else label_b,
        sample_id=sid,
    )


class TestOversample:
    def test_forced_duplication(self):
        samples = [sample(0, sid="a1"), sample(0, sid="a2"), sample(0, sid="a3"), sample(1, sid="b1")]
        out = oversample(samples, seed=0)
        counts = {}
        for s in out:
            counts[s.majority_label] = counts.get(s.majority_label, 0) + 1
        assert counts == {0: 3, 1: 3}
        added = [s for s in out[4:]]
        assert all(s.sample_id == "b1" for s in added)
        assert out[:4] == samples  # originals retained in order

    def test_balanced_noop(self):
        samples = [sample(0, sid="a1"), sample(0, sid="a2"), sample(1, sid="b1"), sample(1, sid="b2")]
        assert oversample(samples, seed=5) == samples

    def test_scian_pa_counts(self):
        samples = []
        for label, count in enumerate(SCIAN_PA_COUNTS):
            samples.extend(sample(label, sid=f"{label}_{i}") for i in range(count))
        assert len(samples) == 1132
        out = oversample(samples, seed=1)
        assert len(out) == 5 * 656 == 3280
        counts = {}
        for s in out:
            counts[s.majority_label] = counts.get(s.majority_label, 0) + 1
        assert all(v == 656 for v in counts.values())

    def test_deterministic(self):
        samples = [sample(0, sid=f"a{i}") for i in range(3)] + [sample(1, sid="b")]
        ids1 = [s.sample_id for s in oversample(samples, seed=9)]
        ids2 = [s.sample_id for s in oversample(samples, seed=9)]
        assert ids1 == ids2

    def test_empty(self):
        with pytest.raises(EmptyDataset):
            oversample([], seed=0)


class TestPairing:
    def test_singleton_self_pairs(self):
        pairs = pair_intra_class([sample(0, sid="only")], seed=0)
        assert pairs == [(0, 0)]

    def test_partners_share_majority_class(self):
        samples = [sample(0, sid="a1"), sample(0, sid="a2"), sample(1, sid="b1"), sample(1, sid="b2")]
        for seed in range(20):
            for i, j in pair_intra_class(samples, seed=seed):
                assert samples[i].majority_label == samples[j].majority_label
                assert i != j  # both classes have two members

    def test_partner_frequencies_uniform(self):
        samples = [sample(0, sid=f"m{i}") for i in range(4)]
        hits = np.zeros(4)
        for seed in range(1000):
            pairs = pair_intra_class(samples, seed=seed)
            hits[pairs[0][1]] += 1
        # member 0 picks uniformly among the other 3: p = 1/3 over 1000 draws
        exp, sd = 1000 / 3, math.sqrt(1000 * (1 / 3) * (2 / 3))
        assert hits[0] == 0
        assert np.all(np.abs(hits[1:] - exp) <= 3 * sd)


class TestMix:
    def test_lambda_one_endpoint(self):
        a, b = sample(2, value=0.3, sid="a"), sample(2, value=0.9, sid="b")
        mixed = mix(a, b, lam=1.0)
        assert np.array_equal(mixed.crop, a.crop.data)
        assert mixed.target == 2
        assert mixed.parents == ("a", "b")

    def test_midpoint_blend(self):
        a, b = sample(1, value=0.2, sid="a"), sample(1, value=0.6, sid="b")
        mixed = mix(a, b, lam=0.5)
        assert np.allclose(mixed.crop, 0.4)

    def test_masks_blend(self):
        m1 = BinaryMask(np.eye(4, dtype=bool))
        m2 = BinaryMask(~np.eye(4, dtype=bool))
        a = LabeledSample(crop=RasterImage(np.zeros((4, 4))), mask=m1,
                          majority_label=0, minority_label=0, sample_id="a")
        b = LabeledSample(crop=RasterImage(np.ones((4, 4))), mask=m2,
                          majority_label=0, minority_label=1, sample_id="b")
        mixed = mix(a, b, lam=0.25)
        assert np.allclose(mixed.mask, 0.25 * m1.data + 0.75 * m2.data)
        assert mixed.parent_labels == (0, 0, 0, 1)

    def test_label_mismatch(self):
        with pytest.raises(LabelMismatch):
            mix(sample(0, sid="a"), sample(1, sid="b"), lam=0.5)

    def test_beta_lambda_mean(self):
        rng = np.random.default_rng(123)
        draws = rng.beta(0.5, 0.5, size=10000)
        assert abs(draws.mean() - 0.5) < 0.02

    @settings(max_examples=40, deadline=None)
    @given(lam=st.floats(0.0, 1.0), va=st.floats(0.0, 1.0), vb=st.floats(0.0, 1.0))
    def test_blend_stays_in_unit_range(self, lam, va, vb):
        mixed = mix(sample(0, value=va, sid="a"), sample(0, value=vb, sid="b"), lam=lam)
        assert mixed.crop.min() >= -1e-12
        assert mixed.crop.max() <= 1 + 1e-12

    def test_batch_assembly_balances_and_is_deterministic(self):
        samples = [sample(0, sid=f"a{i}", value=0.1 * i) for i in range(3)]
        samples += [sample(1, sid="b0", value=0.7)]
        params = MixParams(alpha=0.5, gamma=0.85, seed=42)
        batch1 = make_mixed_batch(samples, params)
        batch2 = make_mixed_batch(samples, params)
        assert len(batch1) == 6  # oversampled to 3 + 3
        assert [m.lam for m in batch1] == [m.lam for m in batch2]
        assert [m.parents for m in batch1] == [m.parents for m in batch2]
        forced = make_mixed_batch(samples, params, lam_override=1.0)
        assert all(m.lam == 1.0 for m in forced)


class TestSoftLoss:
    PRED = [0.7, 0.2, 0.1]

    def test_golden_value_from_oracle(self):
        oracle = soft_loss_oracle(self.PRED, 0, 1, 0.85)
        assert oracle == pytest.approx(0.544589, abs=1e-6)  # frozen from the oracle
        assert soft_loss(self.PRED, 0, 1, 0.85) == pytest.approx(oracle, abs=1e-12)

    def test_equal_labels_collapse_to_cross_entropy(self):
        for gamma in [0.0, 0.3, 0.85, 1.0]:
            assert soft_loss(self.PRED, 1, 1, gamma) == pytest.approx(-math.log(0.2), abs=1e-12)

    def test_gamma_one_endpoint(self):
        assert soft_loss(self.PRED, 0, 2, 1.0) == pytest.approx(-math.log(0.7), abs=1e-12)

    def test_bad_gamma(self):
        with pytest.raises(BadGamma):
            soft_loss(self.PRED, 0, 1, 1.2)

    def test_strictly_positive_when_labels_differ(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = rng.dirichlet(np.ones(4))
            assert soft_loss(p, 0, 1, 0.85) > 0.0

    def test_log_clamp(self):
        # vanishing probability stays finite thanks to the 1e-12 clamp
        val = soft_loss([1.0, 0.0], 0, 1, 0.5)
        assert np.isfinite(val)
        assert val == pytest.approx(0.5 * -math.log(1e-12), abs=1e-9)


class TestSoftMixupLoss:
    PRED = [0.7, 0.2, 0.1]

    def test_lambda_one_equals_soft_loss(self):
        a = soft_mixup_loss(self.PRED, (0, 1), (0, 2), lam=1.0, gamma=0.85)
        assert a == pytest.approx(soft_loss(self.PRED, 0, 1, 0.85), abs=1e-12)

    def test_collapses_to_plain_mixup(self):
        lam, gamma = 0.3, 0.85
        got = soft_mixup_loss(self.PRED, (0, 0), (2, 2), lam=lam, gamma=gamma)
        plain = lam * -math.log(0.7) + (1 - lam) * -math.log(0.1)
        assert got == pytest.approx(plain, abs=1e-12)

    def test_chained_golden_from_oracle(self):
        # oracle-recomputed value of the lam=0.4, gamma=0.85 chained example
        oracle = 0.4 * soft_loss_oracle(self.PRED, 0, 1, 0.85) + 0.6 * soft_loss_oracle(
            self.PRED, 0, 2, 0.85
        )
        assert oracle == pytest.approx(0.606973, abs=1e-6)  # frozen from the oracle
        got = soft_mixup_loss(self.PRED, (0, 1), (0, 2), lam=0.4, gamma=0.85)
        assert got == pytest.approx(oracle, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(lam=st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), gamma=st.floats(0.0, 1.0))
    def test_affine_in_lambda(self, lam, gamma):
        left = soft_mixup_loss(self.PRED, (0, 1), (1, 2), lam=0.0, gamma=gamma)
        right = soft_mixup_loss(self.PRED, (0, 1), (1, 2), lam=1.0, gamma=gamma)
        mid = soft_mixup_loss(self.PRED, (0, 1), (1, 2), lam=lam, gamma=gamma)
        assert mid == pytest.approx(lam * right + (1 - lam) * left, abs=1e-12)

    def test_bad_lambda(self):
        with pytest.raises(BadParams):
            soft_mixup_loss(self.PRED, (0, 1), (0, 2), lam=1.5, gamma=0.85)


class TestPredictionVector:
    def test_simplex_validation(self):
        PredictionVector(np.array([0.25, 0.25, 0.5]))
        with pytest.raises(ValueError):
            PredictionVector(np.array([0.6, 0.6]))
        with pytest.raises(ValueError):
            PredictionVector(np.array([-0.1, 1.1]))

    def test_mixed_sample_validation(self):
        with pytest.raises(LabelMismatch):
            MixedSample(crop=np.zeros((2, 2)), mask=None, target=0, lam=0.5,
                        parents=("a", "b"), parent_labels=(0, 0, 1, 1))
