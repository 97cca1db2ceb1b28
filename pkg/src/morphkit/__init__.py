"""morphkit: pseudo-mask generation, graph-based boundary refinement, and
soft-mixup augmentation for small micrograph classification datasets."""

from .contour import NormalFan, SampledContour, build_normal_fan, extract_contour, resample_uniform
from .datasets import (
    AugmentationPipeline,
    DatasetManifest,
    ManifestRecord,
    apply_augmentation,
    derive_labels,
    kfold_split,
    load_manifest,
    save_manifest,
)
from .errors import MorphkitError
from .estimators import BoundaryRefiner, PseudoMaskGenerator, SoftMixupSampler
from .imaging import (
    BinaryMask,
    GradientField,
    RasterImage,
    gradient_magnitude,
    load_image,
    load_mask,
    mask_iou,
    rasterize_polygon,
    sample_bilinear,
    save_image,
    save_mask,
)
from .metrics import MetricsReport, compute_metrics
from .mixup import (
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
from .pseudomask import HeadCrop, PriorConfig, generate_pseudo_mask, right_align
from .refinement import (
    RefinedContour,
    RefinementGraph,
    RefinementParams,
    build_graph,
    enumerate_optimal,
    refine_contour,
    refine_mask,
    score_closed_path,
    shortest_closed_path,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentationPipeline",
    "BinaryMask",
    "BoundaryRefiner",
    "DatasetManifest",
    "GradientField",
    "HeadCrop",
    "LabeledSample",
    "ManifestRecord",
    "MetricsReport",
    "MixParams",
    "MixedSample",
    "MorphkitError",
    "NormalFan",
    "PredictionVector",
    "PriorConfig",
    "PseudoMaskGenerator",
    "RasterImage",
    "RefinedContour",
    "RefinementGraph",
    "RefinementParams",
    "SampledContour",
    "SoftMixupSampler",
    "apply_augmentation",
    "build_graph",
    "build_normal_fan",
    "compute_metrics",
    "derive_labels",
    "enumerate_optimal",
    "extract_contour",
    "generate_pseudo_mask",
    "gradient_magnitude",
    "kfold_split",
    "load_image",
    "load_manifest",
    "load_mask",
    "make_mixed_batch",
    "mask_iou",
    "mix",
    "oversample",
    "pair_intra_class",
    "rasterize_polygon",
    "refine_contour",
    "refine_mask",
    "resample_uniform",
    "right_align",
    "sample_bilinear",
    "save_image",
    "save_manifest",
    "save_mask",
    "score_closed_path",
    "shortest_closed_path",
    "soft_loss",
    "soft_mixup_loss",
]
