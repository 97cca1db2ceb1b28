"""Estimator-style wrappers so the pipeline composes with scikit-learn.

All three are stateless (fit records nothing but marks the estimator
fitted); parameters follow the usual get_params/set_params contract, so the
stages drop into ``sklearn.pipeline.Pipeline`` and grid searches:

    Pipeline([
        ("masks", PseudoMaskGenerator()),
        ("refine", BoundaryRefiner(n=100, m=15, s=2)),
    ]).fit_transform(images)
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .datasets import AugmentationPipeline, apply_augmentation
from .imaging import BinaryMask, RasterImage
from .mixup import MixParams, make_mixed_batch
from .pseudomask import HeadCrop, PriorConfig, generate_pseudo_mask, right_align
from .refinement import RefinementParams, refine_mask

__all__ = ["PseudoMaskGenerator", "BoundaryRefiner", "SoftMixupSampler", "as_image"]


def as_image(obj) -> RasterImage:
    """Accept a RasterImage or any array-like of intensities in [0, 1]."""
    if isinstance(obj, RasterImage):
        return obj
    return RasterImage(np.asarray(obj, dtype=np.float64))


def _as_crop_list(X) -> list[HeadCrop]:
    crops = list(X)
    for c in crops:
        if not isinstance(c, HeadCrop):
            raise TypeError(f"expected HeadCrop inputs, got {type(c).__name__}")
    return crops


class PseudoMaskGenerator(TransformerMixin, BaseEstimator):
    """Transform raw micrographs into aligned head crops with pseudo-masks.

    Parameters mirror :class:`morphkit.pseudomask.PriorConfig`; ``align``
    additionally runs :func:`right_align` on every crop.
    """

    def __init__(
        self,
        min_area_frac: float = 0.02,
        max_area_frac: float = 0.40,
        max_ellipse_residual: float = 1.0,
        area_weight: float = 0.3,
        shape_weight: float = 0.4,
        centrality_weight: float = 0.3,
        blur_sigma: float = 1.0,
        crop_margin_frac: float = 0.2,
        align: bool = True,
    ):
        self.min_area_frac = min_area_frac
        self.max_area_frac = max_area_frac
        self.max_ellipse_residual = max_ellipse_residual
        self.area_weight = area_weight
        self.shape_weight = shape_weight
        self.centrality_weight = centrality_weight
        self.blur_sigma = blur_sigma
        self.crop_margin_frac = crop_margin_frac
        self.align = align

    def _config(self) -> PriorConfig:
        return PriorConfig(
            min_area_frac=self.min_area_frac,
            max_area_frac=self.max_area_frac,
            max_ellipse_residual=self.max_ellipse_residual,
            area_weight=self.area_weight,
            shape_weight=self.shape_weight,
            centrality_weight=self.centrality_weight,
            blur_sigma=self.blur_sigma,
            crop_margin_frac=self.crop_margin_frac,
        )

    def fit(self, X, y=None):
        self._config()  # validate parameters
        self.n_images_ = len(list(X))
        return self

    def transform(self, X) -> list[HeadCrop]:
        check_is_fitted(self, "n_images_")
        cfg = self._config()
        out = []
        for item in X:
            crop = generate_pseudo_mask(as_image(item), cfg)
            out.append(right_align(crop) if self.align else crop)
        return out


class BoundaryRefiner(TransformerMixin, BaseEstimator):
    """Replace each crop's pseudo-mask with its boundary-refined mask.

    Parameters mirror :class:`morphkit.refinement.RefinementParams`.
    """

    def __init__(
        self,
        n: int = 100,
        m: int = 15,
        s: int = 2,
        c: float = 1.0,
        half_len: float = 5.0,
        exact_closure: bool = False,
    ):
        self.n = n
        self.m = m
        self.s = s
        self.c = c
        self.half_len = half_len
        self.exact_closure = exact_closure

    def _params(self) -> RefinementParams:
        return RefinementParams(
            n=self.n, m=self.m, s=self.s, c=self.c,
            half_len=self.half_len, exact_closure=self.exact_closure,
        )

    def fit(self, X, y=None):
        self._params()
        self.n_crops_ = len(list(X))
        return self

    def transform(self, X) -> list[HeadCrop]:
        check_is_fitted(self, "n_crops_")
        params = self._params()
        out = []
        for crop in _as_crop_list(X):
            refined: BinaryMask = refine_mask(crop, params)
            out.append(
                HeadCrop(
                    image=crop.image,
                    pseudo_mask=refined,
                    source_bbox=crop.source_bbox,
                    rotation_deg=crop.rotation_deg,
                    flipped=crop.flipped,
                    score=crop.score,
                )
            )
        return out


class SoftMixupSampler(BaseEstimator):
    """Oversample to class balance and emit one intra-class mixed sample per
    item, imblearn-style (``fit_resample``).

    ``augment=True`` applies the standard geometric recipe to each parent
    before blending.
    """

    def __init__(self, alpha: float = 0.5, gamma: float = 0.85, random_state: int = 0, augment: bool = False):
        self.alpha = alpha
        self.gamma = gamma
        self.random_state = random_state
        self.augment = augment

    def fit(self, X, y=None):
        MixParams(alpha=self.alpha, gamma=self.gamma, seed=self.random_state)
        self.n_samples_ = len(list(X))
        return self

    def fit_resample(self, X):
        self.fit(X)
        params = MixParams(alpha=self.alpha, gamma=self.gamma, seed=self.random_state)
        make_aug = None
        if self.augment:
            pipeline = AugmentationPipeline(seed=self.random_state)

            def make_aug(rng):
                def aug(crop_arr, mask_arr):
                    img, msk = apply_augmentation(
                        pipeline,
                        RasterImage(crop_arr),
                        None if mask_arr is None else BinaryMask(mask_arr > 0.5),
                        rng,
                    )
                    return img.data, None if msk is None else msk.data.astype(np.float64)

                return aug

        return make_mixed_batch(list(X), params, make_aug)
