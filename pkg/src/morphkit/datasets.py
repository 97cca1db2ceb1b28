"""Dataset manifests, expert-label consensus, stratified folds, and the
geometric augmentation recipe.

Manifests are JSON lines, one record per image:

    {"path": "img_0001.png", "expert_labels": [4, 4, 1], "fold": 2}

``fold`` is optional. Masks follow the ``<stem>_mask.png`` path convention
next to each crop.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyDataset
from .imaging import BinaryMask, RasterImage, resize, rotate_about

__all__ = [
    "ManifestRecord",
    "DatasetManifest",
    "AugmentationPipeline",
    "derive_labels",
    "kfold_split",
    "apply_augmentation",
    "load_manifest",
    "save_manifest",
]


@dataclass
class ManifestRecord:
    path: str
    expert_labels: list[int]
    fold: int | None = None

    def __post_init__(self):
        if not self.expert_labels:
            raise ValueError(f"{self.path}: expert_labels must be non-empty")
        if len(self.expert_labels) > 3:
            raise ValueError(f"{self.path}: at most 3 expert labels supported")
        if any(l < 0 for l in self.expert_labels):
            raise ValueError(f"{self.path}: negative class id")


@dataclass
class DatasetManifest:
    records: list[ManifestRecord]
    class_names: list[str] = field(default_factory=list)
    color: str = "grayscale"  # grayscale | rgb
    native_size: tuple = (35, 35)

    def __post_init__(self):
        paths = [r.path for r in self.records]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest paths must be unique")
        if self.color not in ("grayscale", "rgb"):
            raise ValueError(f"color must be grayscale or rgb, got {self.color}")

    @property
    def num_classes(self) -> int:
        if self.class_names:
            return len(self.class_names)
        return max(max(r.expert_labels) for r in self.records) + 1 if self.records else 0


def derive_labels(expert_labels: list[int]):
    """Consensus labels: (majority, minority, agreement).

    Full agreement (or a single annotator) is total agreement 'TA' with
    majority == minority; exactly two of three agreeing is partial agreement
    'PA' (majority = the pair, minority = the dissenter). With no 2-of-3
    consensus the record is tagged 'none' and both labels are None; such
    records belong to neither the TA nor the PA subset.
    """
    labels = list(expert_labels)
    if len(labels) == 1 or len(set(labels)) == 1:
        return labels[0], labels[0], "TA"
    if len(labels) == 2:
        return None, None, "none"
    a, b, c = labels
    if a == b:
        return a, c, "PA"
    if a == c:
        return a, b, "PA"
    if b == c:
        return b, a, "PA"
    return None, None, "none"


def kfold_split(manifest: DatasetManifest, k: int = 5, seed: int = 0) -> np.ndarray:
    """Stratified fold assignment, one fold id per manifest record.

    Stratification is by majority label (records without consensus form
    their own stratum keyed by the first expert label). Per stratum the
    members are shuffled and split as evenly as possible; remainder items go
    to whichever folds currently hold the fewest records, so overall fold
    sizes stay within the per-stratum rounding. Deterministic for a given
    seed. Classes with fewer than ``k`` members trigger a warning since some
    folds will lack them.
    """
    if not manifest.records:
        raise EmptyDataset("manifest has no records")
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    rng = np.random.default_rng(seed)

    strata: dict = {}
    for idx, rec in enumerate(manifest.records):
        y_a, _, agreement = derive_labels(rec.expert_labels)
        key = ("label", y_a) if agreement != "none" else ("noconsensus", rec.expert_labels[0])
        strata.setdefault(key, []).append(idx)

    folds = np.full(len(manifest.records), -1, dtype=int)
    fold_totals = np.zeros(k, dtype=int)
    for key in sorted(strata):
        members = np.array(strata[key])
        if len(members) < k:
            warnings.warn(
                f"stratum {key} has {len(members)} < {k} members; some folds will lack it",
                stacklevel=2,
            )
        rng.shuffle(members)
        base, rem = divmod(len(members), k)
        quotas = np.full(k, base, dtype=int)
        if rem:
            # remainders go to the currently smallest folds (ties -> lowest id)
            order = np.lexsort((np.arange(k), fold_totals))
            quotas[order[:rem]] += 1
        pos = 0
        for f in range(k):
            folds[members[pos : pos + quotas[f]]] = f
            pos += quotas[f]
        fold_totals += quotas
    return folds


@dataclass
class AugmentationPipeline:
    """The geometric recipe applied identically to a crop and its mask:
    resize to 64, random square crop in [45, 64] resized back to 64, rotation
    within +-10 degrees, random vertical flip, and x/y shift up to 10%."""

    resize_to: int = 64
    crop_range: tuple = (45, 64)
    rotation_max_deg: float = 10.0
    vflip: bool = True
    shift_max_frac: float = 0.10
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.crop_range
        if not (1 <= lo <= hi <= self.resize_to):
            raise ValueError(f"crop_range {self.crop_range} outside [1, {self.resize_to}]")


def apply_augmentation(pipeline: AugmentationPipeline, crop: RasterImage, mask: BinaryMask | None, rng):
    """One random geometric transform over (crop, mask); same draws for both.

    The crop interpolates bilinearly, the mask by nearest neighbor; output is
    resize_to x resize_to. Draw order is fixed: crop size, crop x, crop y,
    rotation angle, flip coin, shift x, shift y.
    """
    if mask is not None and (mask.height, mask.width) != (crop.height, crop.width):
        raise DimensionMismatch(
            f"crop {crop.width}x{crop.height} vs mask {mask.width}x{mask.height}"
        )
    size = pipeline.resize_to
    img = resize(crop.data, (size, size), order=1)
    msk = None if mask is None else resize(mask.data.astype(np.float64), (size, size), order=0)

    lo, hi = pipeline.crop_range
    cs = int(rng.integers(lo, hi + 1))
    max_off = size - cs
    x0 = int(rng.integers(0, max_off + 1)) if max_off > 0 else 0
    y0 = int(rng.integers(0, max_off + 1)) if max_off > 0 else 0
    img = resize(img[y0 : y0 + cs, x0 : x0 + cs], (size, size), order=1)
    if msk is not None:
        msk = resize(msk[y0 : y0 + cs, x0 : x0 + cs], (size, size), order=0)

    angle = float(rng.uniform(-pipeline.rotation_max_deg, pipeline.rotation_max_deg))
    center = ((size - 1) / 2.0, (size - 1) / 2.0)
    if angle != 0.0:
        img = rotate_about(img, angle, center, order=1, mode="nearest")
        if msk is not None:
            msk = rotate_about(msk, angle, center, order=0, mode="constant")

    if pipeline.vflip and rng.random() < 0.5:
        img = img[::-1].copy()
        if msk is not None:
            msk = msk[::-1].copy()

    dx = float(rng.uniform(-pipeline.shift_max_frac, pipeline.shift_max_frac)) * size
    dy = float(rng.uniform(-pipeline.shift_max_frac, pipeline.shift_max_frac)) * size
    if dx != 0.0 or dy != 0.0:
        from scipy import ndimage

        shift = (dy, dx) if img.ndim == 2 else (dy, dx, 0)
        img = ndimage.shift(img, shift, order=1, mode="nearest")
        if msk is not None:
            msk = ndimage.shift(msk, (dy, dx), order=0, mode="constant")

    out_img = RasterImage(np.clip(img, 0.0, 1.0))
    out_msk = None if msk is None else BinaryMask(msk > 0.5)
    return out_img, out_msk


def load_manifest(path, class_names=None, color="grayscale", native_size=(35, 35)) -> DatasetManifest:
    """Read a JSON-lines manifest; schema errors carry 1-based line numbers."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                records.append(
                    ManifestRecord(
                        path=obj["path"],
                        expert_labels=list(obj["expert_labels"]),
                        fold=obj.get("fold"),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad manifest record: {exc}") from exc
    return DatasetManifest(
        records=records,
        class_names=list(class_names or []),
        color=color,
        native_size=tuple(native_size),
    )


def save_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in manifest.records:
            obj = {"path": rec.path, "expert_labels": rec.expert_labels}
            if rec.fold is not None:
                obj["fold"] = rec.fold
            fh.write(json.dumps(obj) + "\n")
