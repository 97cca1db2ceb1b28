"""Intra-class soft mixup: oversampling, pairing, blending, and the
noise-aware losses.

Samples carry two labels: a majority label ``y_a`` (the class at least two
of three annotators agreed on) and a minority label ``y_b`` (the dissenting
vote; equal to ``y_a`` under full agreement). Mixing only pairs samples that
share the majority label, so the blend never crosses class identity:

    mixed_crop = lam * aug_i(crop_i) + (1 - lam) * aug_j(crop_j)
    mixed_mask = lam * aug_i(mask_i) + (1 - lam) * aug_j(mask_j)
    target     = y_a  (shared)

The soft loss weighs cross-entropy gamma toward the majority label and
1 - gamma toward the minority one; the soft mixup loss combines the two
parents' soft losses with the same lam used for the blend. Both collapse to
plain mixup / plain cross-entropy when the labels agree.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadGamma, BadParams, EmptyDataset, LabelMismatch
from .imaging import BinaryMask, RasterImage

__all__ = [
    "LabeledSample",
    "MixParams",
    "MixedSample",
    "PredictionVector",
    "oversample",
    "pair_intra_class",
    "mix",
    "soft_loss",
    "soft_mixup_loss",
    "make_mixed_batch",
]

#: probabilities are clamped here before the log for numerical safety
LOG_CLAMP = 1e-12


@dataclass
class LabeledSample:
    """An image crop with optional mask and its majority/minority labels."""

    crop: RasterImage
    majority_label: int
    minority_label: int
    sample_id: str
    mask: BinaryMask | None = None

    def __post_init__(self):
        if self.majority_label < 0 or self.minority_label < 0:
            raise ValueError("labels must be non-negative class ids")
        if self.mask is not None and (
            (self.mask.height, self.mask.width) != (self.crop.height, self.crop.width)
        ):
            raise ValueError("crop and mask dimensions differ")


@dataclass
class MixParams:
    """Blend-strength distribution Beta(alpha, alpha), majority weight gamma,
    and the RNG seed that makes a batch reproducible."""

    alpha: float = 0.5
    gamma: float = 0.85
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise BadParams(f"need alpha > 0, got {self.alpha}")
        if not (0.0 <= self.gamma <= 1.0):
            raise BadGamma(f"need 0 <= gamma <= 1, got {self.gamma}")


@dataclass
class MixedSample:
    """A lam-blended pair: real-valued crop and (soft) mask, shared target."""

    crop: np.ndarray
    mask: np.ndarray | None
    target: int
    lam: float
    parents: tuple  # (sample_id_i, sample_id_j)
    parent_labels: tuple  # (y_i_a, y_i_b, y_j_a, y_j_b)

    def __post_init__(self):
        y_i_a, _, y_j_a, _ = self.parent_labels
        if not (self.target == y_i_a == y_j_a):
            raise LabelMismatch(
                f"parents must share the majority label, got {self.parent_labels}"
            )
        if not (0.0 <= self.lam <= 1.0):
            raise BadParams(f"lam outside [0, 1]: {self.lam}")
        if self.crop.min() < -1e-9 or self.crop.max() > 1 + 1e-9:
            raise ValueError("mixed crop values left [0, 1]")
        if self.mask is not None and (self.mask.min() < -1e-9 or self.mask.max() > 1 + 1e-9):
            raise ValueError("mixed mask values left [0, 1]")


@dataclass
class PredictionVector:
    """A class-probability simplex vector."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 1:
            raise ValueError(f"expected 1D probabilities, got {self.probs.shape}")
        if self.probs.min() < 0:
            raise ValueError("probabilities must be non-negative")
        if abs(float(self.probs.sum()) - 1.0) > 1e-6:
            raise ValueError(f"probabilities must sum to 1, got {self.probs.sum()}")


def oversample(samples: list[LabeledSample], seed: int) -> list[LabeledSample]:
    """Duplicate under-represented classes until every majority class matches
    the largest one. Originals are all retained (in order); duplicates are
    drawn uniformly with replacement and appended, grouped by class id.
    """
    if not samples:
        raise EmptyDataset("no samples to oversample")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        by_class.setdefault(s.majority_label, []).append(i)
    target = max(len(v) for v in by_class.values())
    out = list(samples)
    for label in sorted(by_class):
        members = by_class[label]
        deficit = target - len(members)
        if deficit > 0:
            picks = rng.choice(members, size=deficit, replace=True)
            out.extend(samples[int(p)] for p in picks)
    return out


def pair_intra_class(samples: list[LabeledSample], seed: int) -> list[tuple[int, int]]:
    """One partner per sample, uniform over the same majority class.

    Self-pairing happens only when a class has a single member (mixing then
    degenerates to plain augmentation).
    """
    if not samples:
        raise EmptyDataset("no samples to pair")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        by_class.setdefault(s.majority_label, []).append(i)
    pairs = []
    for i, s in enumerate(samples):
        members = by_class[s.majority_label]
        if len(members) == 1:
            pairs.append((i, i))
            continue
        j = i
        while j == i:
            j = int(members[rng.integers(0, len(members))])
        pairs.append((i, j))
    return pairs


def _identity(crop, mask):
    return crop, mask


def mix(sample_i: LabeledSample, sample_j: LabeledSample, lam: float, aug_i=None, aug_j=None) -> MixedSample:
    """Blend two same-majority-class samples after augmenting each one.

    ``aug_i``/``aug_j`` are callables ``(crop_array, mask_array_or_None) ->
    (crop_array, mask_array_or_None)`` applying one geometric transform to a
    sample's crop and mask together; identity when omitted.
    """
    if sample_i.majority_label != sample_j.majority_label:
        raise LabelMismatch(
            f"majority labels differ: {sample_i.majority_label} vs {sample_j.majority_label}"
        )
    if not (0.0 <= lam <= 1.0):
        raise BadParams(f"lam outside [0, 1]: {lam}")
    aug_i = aug_i or _identity
    aug_j = aug_j or _identity

    def prep(sample, aug):
        mask = None if sample.mask is None else sample.mask.data.astype(np.float64)
        return aug(sample.crop.data, mask)

    crop_i, mask_i = prep(sample_i, aug_i)
    crop_j, mask_j = prep(sample_j, aug_j)
    mixed_crop = lam * crop_i + (1.0 - lam) * crop_j
    if mask_i is None and mask_j is None:
        mixed_mask = None
    elif mask_i is None or mask_j is None:
        raise ValueError("both parents need masks (or neither)")
    else:
        mixed_mask = lam * mask_i + (1.0 - lam) * mask_j
    return MixedSample(
        crop=mixed_crop,
        mask=mixed_mask,
        target=sample_i.majority_label,
        lam=float(lam),
        parents=(sample_i.sample_id, sample_j.sample_id),
        parent_labels=(
            sample_i.majority_label,
            sample_i.minority_label,
            sample_j.majority_label,
            sample_j.minority_label,
        ),
    )


def _probs(pred) -> np.ndarray:
    if isinstance(pred, PredictionVector):
        return pred.probs
    return PredictionVector(np.asarray(pred, dtype=np.float64)).probs


def soft_loss(pred, y_a: int, y_b: int, gamma: float) -> float:
    """Cross-entropy weighted gamma toward the majority label:

        gamma * (-ln p[y_a]) + (1 - gamma) * (-ln p[y_b])

    Collapses to plain cross-entropy when y_a == y_b.
    """
    if not (0.0 <= gamma <= 1.0):
        raise BadGamma(f"need 0 <= gamma <= 1, got {gamma}")
    p = np.clip(_probs(pred), LOG_CLAMP, None)
    if not (0 <= y_a < len(p) and 0 <= y_b < len(p)):
        raise ValueError(f"labels ({y_a}, {y_b}) outside [0, {len(p)})")
    return float(gamma * -np.log(p[y_a]) + (1.0 - gamma) * -np.log(p[y_b]))


def soft_mixup_loss(pred, labels_i: tuple[int, int], labels_j: tuple[int, int], lam: float, gamma: float) -> float:
    """lam-weighted combination of the two parents' soft losses; ``lam`` is
    the same blend strength used to build the mixed sample."""
    if not (0.0 <= lam <= 1.0):
        raise BadParams(f"lam outside [0, 1]: {lam}")
    return lam * soft_loss(pred, *labels_i, gamma) + (1.0 - lam) * soft_loss(pred, *labels_j, gamma)


def make_mixed_batch(
    samples: list[LabeledSample],
    params: MixParams,
    make_aug=None,
    lam_override: float | None = None,
) -> list[MixedSample]:
    """Oversample, pair within classes, and blend one mixed sample per item.

    ``make_aug(rng)``, when given, must return a fresh augmentation callable
    for :func:`mix`; every parent gets its own seeded stream so the batch is
    reproducible regardless of evaluation order. ``lam_override`` pins every
    blend strength (endpoint debugging) instead of drawing Beta(alpha, alpha).
    """
    balanced = oversample(samples, params.seed)
    pairs = pair_intra_class(balanced, params.seed + 1)
    out = []
    for k, (i, j) in enumerate(pairs):
        rng = np.random.default_rng([params.seed, k])
        lam = float(rng.beta(params.alpha, params.alpha))
        if lam_override is not None:
            lam = float(lam_override)
        aug_i = make_aug(np.random.default_rng([params.seed, k, 0])) if make_aug else None
        aug_j = make_aug(np.random.default_rng([params.seed, k, 1])) if make_aug else None
        out.append(mix(balanced[i], balanced[j], lam, aug_i, aug_j))
    return out
