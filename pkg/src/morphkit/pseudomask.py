"""Unsupervised pseudo-mask generation.

The target object (a cell head in a small micrograph) is located with simple
priors: blur + Otsu thresholding with automatic polarity, 8-connected
components filtered by area fraction, and a weighted score combining an area
prior, an ellipse-fit shape prior, and a centrality prior. The winning
component is cropped with a margin and can be axis-aligned (principal axis
horizontal, mass to the right) for downstream processing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.measure import EllipseModel

from .errors import EmptyMask, NoComponentFound
from .imaging import BinaryMask, RasterImage, rotate_about

__all__ = ["PriorConfig", "HeadCrop", "generate_pseudo_mask", "right_align"]

EIGHT = np.ones((3, 3), dtype=int)


@dataclass
class PriorConfig:
    """Prior weights and filters for component selection.

    Defaults suit head/background proportions of 35x35 to 131x131 crops:
    the object occupies a few percent up to ~40% of the frame.
    """

    min_area_frac: float = 0.02
    max_area_frac: float = 0.40
    max_ellipse_residual: float = 1.0
    area_weight: float = 0.3
    shape_weight: float = 0.4
    centrality_weight: float = 0.3
    blur_sigma: float = 1.0
    crop_margin_frac: float = 0.2

    def __post_init__(self):
        if not (0 < self.min_area_frac < self.max_area_frac < 1):
            raise ValueError(
                f"need 0 < min_area_frac < max_area_frac < 1, got "
                f"{self.min_area_frac}, {self.max_area_frac}"
            )
        total = self.area_weight + self.shape_weight + self.centrality_weight
        if any(w < 0 for w in (self.area_weight, self.shape_weight, self.centrality_weight)):
            raise ValueError("prior weights must be non-negative")
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"prior weights must sum to 1, got {total}")


@dataclass
class HeadCrop:
    """A cropped object with its pseudo-mask and alignment bookkeeping."""

    image: RasterImage
    pseudo_mask: BinaryMask
    source_bbox: tuple  # (x, y, w, h) in the original image
    rotation_deg: float = 0.0
    flipped: bool = False
    score: float = 0.0

    def __post_init__(self):
        if (self.image.height, self.image.width) != (self.pseudo_mask.height, self.pseudo_mask.width):
            raise ValueError(
                f"image {self.image.width}x{self.image.height} vs mask "
                f"{self.pseudo_mask.width}x{self.pseudo_mask.height}"
            )
        if self.pseudo_mask.area == 0:
            raise EmptyMask("pseudo-mask has no foreground")
        _, ncomp = ndimage.label(self.pseudo_mask.data, structure=EIGHT)
        if ncomp != 1:
            raise ValueError(f"pseudo-mask must be a single component, found {ncomp}")


def _otsu_threshold(values: np.ndarray) -> float:
    hist, edges = np.histogram(values, bins=256, range=(0.0, 1.0))
    centers = (edges[:-1] + edges[1:]) / 2.0
    p = hist.astype(np.float64) / hist.sum()
    omega = np.cumsum(p)
    mu = np.cumsum(p * centers)
    mu_t = mu[-1]
    denom = omega * (1.0 - omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = np.where(denom > 0, (mu_t * omega - mu) ** 2 / denom, 0.0)
    return float(centers[int(np.argmax(sigma_b))])


def _ellipse_residual(component: np.ndarray) -> float:
    """Mean boundary-point distance to the least-squares ellipse, normalized
    by the semi-major axis and clipped to [0, 1]; 1.0 when no fit exists."""
    boundary = component & ~ndimage.binary_erosion(component)
    ys, xs = np.nonzero(boundary)
    if len(xs) < 5:
        return 1.0
    pts = np.column_stack([xs, ys]).astype(np.float64)
    model = EllipseModel()
    try:
        if not model.estimate(pts):
            return 1.0
        _, _, a, b, _ = model.params
        major = max(abs(a), abs(b))
        if not np.isfinite(major) or major <= 0:
            return 1.0
        res = float(np.mean(np.abs(model.residuals(pts)))) / major
    except Exception:
        return 1.0
    if not np.isfinite(res):
        return 1.0
    return float(np.clip(res, 0.0, 1.0))


def _score_components(fg: np.ndarray, cfg: PriorConfig):
    """Score every area-passing component; returns (score, area, cy, cx,
    labeled, component id) tuples."""
    h, w = fg.shape
    total = h * w
    labeled, ncomp = ndimage.label(fg, structure=EIGHT)
    out = []
    if ncomp == 0:
        return out, labeled
    center = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    half_diag = float(np.linalg.norm(center)) or 1.0
    areas = ndimage.sum_labels(fg, labeled, index=np.arange(1, ncomp + 1))
    for comp_id in range(1, ncomp + 1):
        area = float(areas[comp_id - 1])
        frac = area / total
        if not (cfg.min_area_frac <= frac <= cfg.max_area_frac):
            continue
        comp = labeled == comp_id
        residual = _ellipse_residual(comp)
        if residual > cfg.max_ellipse_residual:
            continue
        ys, xs = np.nonzero(comp)
        cx, cy = float(xs.mean()), float(ys.mean())
        centrality = 1.0 - min(1.0, float(np.hypot(cx - center[0], cy - center[1])) / half_diag)
        area_prior = min(1.0, frac / cfg.max_area_frac)
        score = (
            cfg.area_weight * area_prior
            + cfg.shape_weight * (1.0 - residual)
            + cfg.centrality_weight * centrality
        )
        out.append((score, area, cy, cx, comp_id))
    return out, labeled


def generate_pseudo_mask(image: RasterImage, cfg: PriorConfig | None = None) -> HeadCrop:
    """Locate the most head-like component and crop it with its pseudo-mask.

    Pipeline: Gaussian blur (cfg.blur_sigma) -> Otsu threshold -> polarity
    chosen so the foreground fraction lands inside
    [min_area_frac, max_area_frac] (bright-first when both qualify) ->
    8-connected components filtered by area fraction and ellipse residual ->
    weighted prior score -> argmax component, ties broken by larger area,
    then topmost-leftmost centroid -> bounding box expanded by
    crop_margin_frac per side.

    Raises :class:`NoComponentFound` when nothing passes the filters.
    """
    cfg = cfg or PriorConfig()
    gray = image.to_gray()
    if float(gray.max()) - float(gray.min()) < 1e-12:
        raise NoComponentFound("image has no contrast")
    blur = ndimage.gaussian_filter(gray, sigma=cfg.blur_sigma)
    t = _otsu_threshold(blur)
    bright = blur > t
    dark = ~bright

    def in_range(frac):
        return cfg.min_area_frac <= frac <= cfg.max_area_frac

    fb, fd = float(bright.mean()), float(dark.mean())
    if in_range(fb):
        order = [bright, dark]
    elif in_range(fd):
        order = [dark, bright]
    else:
        order = [bright, dark] if fb <= fd else [dark, bright]

    for fg in order:
        scored, labeled = _score_components(fg, cfg)
        if scored:
            break
    else:
        raise NoComponentFound("no component passed the area/shape priors")

    scored.sort(key=lambda s: (-s[0], -s[1], s[2], s[3]))
    score, _, _, _, comp_id = scored[0]
    comp = labeled == comp_id

    ys, xs = np.nonzero(comp)
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    bw, bh = x1 - x0 + 1, y1 - y0 + 1
    mx = int(round(cfg.crop_margin_frac * bw))
    my = int(round(cfg.crop_margin_frac * bh))
    x0, x1 = max(0, x0 - mx), min(image.width - 1, x1 + mx)
    y0, y1 = max(0, y0 - my), min(image.height - 1, y1 + my)

    crop_data = image.data[y0 : y1 + 1, x0 : x1 + 1]
    mask_data = comp[y0 : y1 + 1, x0 : x1 + 1]
    return HeadCrop(
        image=RasterImage(crop_data.copy()),
        pseudo_mask=BinaryMask(mask_data.copy()),
        source_bbox=(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
        score=float(score),
    )


def _principal_angle(mask: np.ndarray) -> float:
    """Angle (radians) of the largest-eigenvalue axis of the foreground
    covariance, in (-pi/2, pi/2]."""
    ys, xs = np.nonzero(mask)
    cx, cy = xs.mean(), ys.mean()
    u, v = xs - cx, ys - cy
    mu20 = float(np.mean(u * u))
    mu02 = float(np.mean(v * v))
    mu11 = float(np.mean(u * v))
    return 0.5 * np.arctan2(2.0 * mu11, mu20 - mu02)


def right_align(crop: HeadCrop) -> HeadCrop:
    """Rotate the crop so the mask's principal axis is horizontal, then flip
    horizontally if the foreground centroid sits left of the crop center.

    The rotation is applied about the mask centroid; the image interpolates
    bilinearly (edge-extended), the mask by nearest neighbor.
    Raises :class:`EmptyMask` on an empty pseudo-mask.
    """
    mask = crop.pseudo_mask.data
    if not mask.any():
        raise EmptyMask("cannot align an empty mask")
    ys, xs = np.nonzero(mask)
    centroid = (float(xs.mean()), float(ys.mean()))
    angle = -np.degrees(_principal_angle(mask))

    img = rotate_about(crop.image.data, angle, centroid, order=1, mode="nearest")
    msk = rotate_about(mask.astype(np.float64), angle, centroid, order=0, mode="constant") > 0.5

    ys2, xs2 = np.nonzero(msk)
    if len(xs2) == 0:
        raise EmptyMask("mask vanished during rotation")
    flip = float(xs2.mean()) < (msk.shape[1] - 1) / 2.0
    if flip:
        img = img[:, ::-1].copy()
        msk = msk[:, ::-1].copy()

    return HeadCrop(
        image=RasterImage(np.clip(img, 0.0, 1.0)),
        pseudo_mask=BinaryMask(msk),
        source_bbox=crop.source_bbox,
        rotation_deg=crop.rotation_deg + angle,
        flipped=crop.flipped ^ flip,
        score=crop.score,
    )
