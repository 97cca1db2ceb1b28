"""Boundary extraction and sampling: trace a mask outline, resample it to n
equally spaced points, and erect the per-point orthogonal sample lines used
by the refinement graph.

Orientation convention: contours are *clockwise*, meaning the shoelace signed
area of the point sequence (computed directly on image coordinates, y down)
is <= 0. The outward normal of such a contour is the tangent rotated so that
``normal = (-t_y, t_x)``; both facts are relied on by the concavity penalty in
:mod:`morphkit.refinement`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BadM, BadN, BadParams, EmptyMask, MultipleComponents, TooSmall
from .imaging import BinaryMask

__all__ = [
    "SampledContour",
    "NormalFan",
    "extract_contour",
    "resample_uniform",
    "build_normal_fan",
    "signed_area",
]

EIGHT = np.ones((3, 3), dtype=int)

# Moore neighborhood in visual clockwise order (y down), starting west.
_MOORE = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)]


def signed_area(points: np.ndarray) -> float:
    """Shoelace signed area of a closed point sequence (not repeated)."""
    pts = np.asarray(points, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def _enforce_clockwise(points: np.ndarray) -> np.ndarray:
    """Reverse the cycle (keeping the first vertex first) if area > 0."""
    if signed_area(points) > 0:
        return np.concatenate([points[:1], points[1:][::-1]], axis=0)
    return points


@dataclass
class SampledContour:
    """n sub-pixel points sampled clockwise at uniform arc-length spacing."""

    points: np.ndarray
    n: int

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.shape != (self.n, 2):
            raise ValueError(f"expected ({self.n}, 2) points, got {self.points.shape}")
        if self.n < 4:
            raise BadN(f"need n >= 4, got {self.n}")
        scale = max(1.0, float(np.abs(self.points).max()))
        if signed_area(self.points) > 1e-9 * scale * scale:
            raise ValueError("contour must be clockwise (signed area <= 0)")


@dataclass
class NormalFan:
    """Per-contour-point sample lines orthogonal to the local tangent.

    ``points[j, i]`` is the i-th of m samples on the line through contour
    point j; sample index (m-1)//2 is the contour point itself, index 0 the
    innermost sample, index m-1 the outermost. ``clamped[j, i]`` flags points
    that were moved to stay inside the sampling domain.
    """

    points: np.ndarray  # (n, m, 2)
    clamped: np.ndarray  # (n, m) bool
    half_len: float
    m: int

    @property
    def n(self) -> int:
        return self.points.shape[0]


def extract_contour(mask: BinaryMask) -> np.ndarray:
    """Moore boundary trace of the single foreground component, clockwise.

    Returns a (k, 2) array of pixel lattice coordinates; the polyline is
    closed implicitly (last point connects back to the first).

    Raises
    ------
    EmptyMask
        No foreground pixels.
    MultipleComponents
        More than one 8-connected component.
    TooSmall
        Component area below 4 pixels.
    """
    data = mask.data
    area = int(data.sum())
    if area == 0:
        raise EmptyMask("mask has no foreground")
    if area < 4:
        raise TooSmall(f"component area {area} < 4")
    _, ncomp = ndimage.label(data, structure=EIGHT)
    if ncomp > 1:
        raise MultipleComponents(f"expected 1 component, found {ncomp}")

    # row-major scan: first hit is the topmost-then-leftmost pixel, so the
    # pixel above it is guaranteed background
    ys, xs = np.nonzero(data)
    start = (int(xs[0]), int(ys[0]))
    fgset = set(zip(xs.tolist(), ys.tolist()))

    def fg(x: int, y: int) -> bool:
        return (x, y) in fgset

    # Moore trace: scan the 8 neighbors clockwise starting just after the
    # backtrack (the last background neighbor examined). The walk over
    # (pixel, backtrack) states is deterministic and finite, so it must
    # revisit a state; the stretch between the two visits is one full lap of
    # the boundary (any seed transient before the cycle is dropped).
    state = (start, _MOORE.index((0, -1)))
    visited: dict = {}
    boundary = []
    while state not in visited:
        visited[state] = len(boundary)
        cur, back_dir = state
        boundary.append(cur)
        found = None
        for k in range(1, 9):
            d = (back_dir + k) % 8
            dx, dy = _MOORE[d]
            if fg(cur[0] + dx, cur[1] + dy):
                found = d
                break
        if found is None:  # isolated pixel; excluded by the area guard
            break
        nxt = (cur[0] + _MOORE[found][0], cur[1] + _MOORE[found][1])
        bx, by = _MOORE[(found - 1) % 8]  # last background neighbor examined
        back_px = (cur[0] + bx, cur[1] + by)
        new_back = _MOORE.index((back_px[0] - nxt[0], back_px[1] - nxt[1]))
        state = (nxt, new_back)
    cycle = boundary[visited.get(state, 0):]

    pts = np.array(cycle, dtype=np.float64)
    # deterministic start: rotate the cycle to its topmost-then-leftmost pixel
    anchor = np.lexsort((pts[:, 0], pts[:, 1]))[0]
    pts = np.roll(pts, -anchor, axis=0)
    return _enforce_clockwise(pts)


def resample_uniform(polyline: np.ndarray, n: int) -> SampledContour:
    """Resample a closed polyline to n points at uniform arc-length spacing.

    Samples sit at arc positions ``k * L / n`` measured from the
    topmost-then-leftmost vertex, preserving clockwise order (the input is
    reoriented first if needed).

    Raises
    ------
    BadN
        n < 4.
    BadParams
        Zero-length polyline.
    """
    if n < 4:
        raise BadN(f"need n >= 4, got {n}")
    pts = np.asarray(polyline, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise BadParams(f"expected (k >= 2, 2) polyline, got {pts.shape}")
    pts = _enforce_clockwise(pts)

    start = np.lexsort((pts[:, 0], pts[:, 1]))[0]  # min y, then min x
    pts = np.roll(pts, -start, axis=0)

    closed = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0:
        raise BadParams("polyline has zero length")

    targets = np.arange(n) * (total / n)
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(seg) - 1)
    t = (targets - cum[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0)
    samples = closed[idx] + t[:, None] * (closed[idx + 1] - closed[idx])
    return SampledContour(points=samples, n=n)


def build_normal_fan(contour: SampledContour, m: int, half_len: float, bounds) -> NormalFan:
    """Place m samples on each outward-normal line segment of the contour.

    Tangents use the cyclic central difference ``a[j+1] - a[j-1]``; the
    outward normal for a clockwise contour is the tangent rotated to
    ``(-t_y, t_x)``. Sample i (1-based) sits at offset
    ``(i - (m+1)/2) / ((m-1)/2) * half_len`` along the normal, so the middle
    sample coincides with the contour point. Points leaving the sampling
    domain ``[0, w-1] x [0, h-1]`` are clamped to it and flagged.

    Raises
    ------
    BadM
        m even or below 3.
    BadParams
        half_len <= 0.
    """
    if m < 3 or m % 2 == 0:
        raise BadM(f"need odd m >= 3, got {m}")
    if half_len <= 0:
        raise BadParams(f"need half_len > 0, got {half_len}")
    w, h = int(bounds[0]), int(bounds[1])

    a = contour.points
    tangent = np.roll(a, -1, axis=0) - np.roll(a, 1, axis=0)
    norms = np.linalg.norm(tangent, axis=1)
    degenerate = norms < 1e-12
    if degenerate.any():
        # coincident neighbors: fall back to the forward difference
        fwd = np.roll(a, -1, axis=0) - a
        tangent[degenerate] = fwd[degenerate]
        norms = np.linalg.norm(tangent, axis=1)
        norms[norms < 1e-12] = 1.0
    unit = tangent / norms[:, None]
    normal = np.stack([-unit[:, 1], unit[:, 0]], axis=1)

    offsets = (np.arange(1, m + 1) - (m + 1) / 2.0) / ((m - 1) / 2.0) * half_len
    raw = a[:, None, :] + offsets[None, :, None] * normal[:, None, :]
    lo = np.array([0.0, 0.0])
    hi = np.array([w - 1.0, h - 1.0])
    pts = np.clip(raw, lo, hi)
    clamped = np.any(pts != raw, axis=2)
    return NormalFan(points=pts, clamped=clamped, half_len=float(half_len), m=m)
