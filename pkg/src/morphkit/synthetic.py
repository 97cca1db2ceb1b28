"""Synthetic scenes with known ground truth.

These generators back the test and acceptance suites: elliptic objects whose
true mask is computed analytically, images whose gradient ring has a known
width and peaks exactly on the true boundary, controlled perturbations of
masks, and a radially dented cost field for exercising the concavity
penalty.

Geometry uses the lattice convention throughout: mask pixel ``(x, y)`` is
foreground when the lattice point ``(x, y)`` satisfies the analytic
inequality, matching the convention of refined-mask rasterization.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .imaging import BinaryMask, GradientField, RasterImage

__all__ = [
    "make_ellipse_mask",
    "make_ring_image",
    "perturb_mask",
    "make_blob_scene",
    "make_dented_ring_field",
    "ellipse_distance",
]


def _rotated_coords(shape_hw, center, angle_deg):
    h, w = shape_hw
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    dx = xs - center[0]
    dy = ys - center[1]
    a = np.deg2rad(angle_deg)
    u = dx * np.cos(a) + dy * np.sin(a)
    v = -dx * np.sin(a) + dy * np.cos(a)
    return u, v


def ellipse_distance(shape_hw, center, axes, angle_deg=0.0) -> np.ndarray:
    """Approximate signed Euclidean distance to an ellipse boundary per pixel
    (negative inside). First-order accurate near the boundary, which is where
    it is used."""
    u, v = _rotated_coords(shape_hw, center, angle_deg)
    a, b = axes
    rho = np.sqrt((u / a) ** 2 + (v / b) ** 2)
    grad = np.sqrt((u / a**2) ** 2 + (v / b**2) ** 2)
    grad = np.where(grad > 1e-12, grad, 1e-12)
    return (rho - 1.0) * rho / grad


def make_ellipse_mask(shape_hw, center, axes, angle_deg=0.0) -> BinaryMask:
    """Analytic foreground test of the (possibly rotated) ellipse."""
    u, v = _rotated_coords(shape_hw, center, angle_deg)
    a, b = axes
    return BinaryMask((u / a) ** 2 + (v / b) ** 2 <= 1.0)


def make_ring_image(
    shape_hw,
    center,
    axes,
    angle_deg=0.0,
    ramp=1.0,
    inside=1.0,
    outside=0.0,
    noise=0.0,
    rng=None,
) -> RasterImage:
    """An ellipse rendered with a cosine intensity ramp of half-width ``ramp``
    pixels across its boundary, so the gradient forms a ``2 * ramp`` wide
    ring whose magnitude peaks exactly on the true ellipse."""
    d = ellipse_distance(shape_hw, center, axes, angle_deg)
    t = np.clip(d / ramp, -1.0, 1.0)
    img = 0.5 * (inside + outside) - 0.5 * (inside - outside) * np.sin(0.5 * np.pi * t)
    if noise > 0:
        rng = rng or np.random.default_rng(0)
        img = img + rng.uniform(-noise, noise, size=img.shape)
    return RasterImage(np.clip(img, 0.0, 1.0))


def perturb_mask(mask: BinaryMask, px: int) -> BinaryMask:
    """Dilate (px > 0) or erode (px < 0) by a Euclidean radius of |px|."""
    if px == 0:
        return BinaryMask(mask.data.copy())
    if px > 0:
        dist = ndimage.distance_transform_edt(~mask.data)
        return BinaryMask(mask.data | (dist <= px))
    dist = ndimage.distance_transform_edt(mask.data)
    return BinaryMask(dist > -px)


def make_blob_scene(
    shape_hw,
    blobs,
    background=0.05,
    intensity=0.9,
    noise=0.02,
    rng=None,
):
    """Bright elliptic blobs on a dark noisy floor.

    ``blobs`` is a list of (center, axes, angle_deg). Returns (image, list of
    per-blob truth masks).
    """
    rng = rng or np.random.default_rng(0)
    h, w = shape_hw
    img = np.full((h, w), background, dtype=np.float64)
    if noise > 0:
        img += rng.uniform(0.0, noise, size=(h, w))
    masks = []
    for center, axes, angle in blobs:
        m = make_ellipse_mask(shape_hw, center, axes, angle)
        img[m.data] = intensity
        masks.append(m)
    return RasterImage(np.clip(img, 0.0, 1.0)), masks


def make_dented_ring_field(
    shape_hw=(64, 64),
    center=(32.0, 32.0),
    radius=18.0,
    dent_depth=5.0,
    dent_angle=0.0,
    dent_width=0.5,
    sigma=1.5,
) -> GradientField:
    """A gradient field whose ridge follows a circle with one inward dent.

    The ridge radius is ``radius - dent_depth * exp(-(psi - dent_angle)^2 /
    (2 * dent_width^2))`` as a function of polar angle psi, so an unpenalized
    refinement path follows the dent while a convexity-penalized one bridges
    it: ideal for checking that the concave-turn total shrinks as the penalty
    coefficient grows.
    """
    h, w = shape_hw
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    dx = xs - center[0]
    dy = ys - center[1]
    r = np.hypot(dx, dy)
    psi = np.arctan2(dy, dx)
    dpsi = np.angle(np.exp(1j * (psi - dent_angle)))
    ridge = radius - dent_depth * np.exp(-(dpsi**2) / (2.0 * dent_width**2))
    return GradientField(np.exp(-((r - ridge) ** 2) / (2.0 * sigma**2)))
