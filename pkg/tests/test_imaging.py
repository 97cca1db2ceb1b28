import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morphkit.errors import DegeneratePolygon, ImageTooSmall, OutOfBounds
from morphkit.imaging import (
    BinaryMask,
    GradientField,
    RasterImage,
    gradient_magnitude,
    load_image,
    load_mask,
    mask_iou,
    rasterize_polygon,
    resize,
    rotate_about,
    sample_bilinear,
    save_image,
    save_mask,
)

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=float)
SOBEL_Y = SOBEL_X.T


def sobel_at_oracle(img: np.ndarray, y: int, x: int) -> float:
    """Hand-applied 3x3 Sobel magnitude at an interior pixel."""
    patch = img[y - 1 : y + 2, x - 1 : x + 2]
    gx = float((patch * SOBEL_X).sum())
    gy = float((patch * SOBEL_Y).sum())
    return float(np.hypot(gx, gy))


def point_in_polygon_oracle(px: float, py: float, verts) -> bool:
    """Brute-force even-odd test counting edge crossings at or left of the
    point (the same tie rule the scanline fill uses)."""
    inside = False
    n = len(verts)
    for k in range(n):
        x1, y1 = verts[k]
        x2, y2 = verts[(k + 1) % n]
        if (y1 <= py < y2) or (y2 <= py < y1):
            t = (py - y1) / (y2 - y1)
            if x1 + t * (x2 - x1) <= px:
                inside = not inside
    return inside


class TestGradientMagnitude:
    def test_constant_image_zero_field(self):
        field = gradient_magnitude(RasterImage(np.full((9, 9), 0.5)))
        assert field.magnitude.shape == (9, 9)
        assert np.all(field.magnitude == 0.0)

    def test_vertical_step_magnitude_four(self):
        img = np.zeros((8, 8))
        img[:, 4:] = 1.0
        field = gradient_magnitude(RasterImage(img))
        # hand-applied kernels on the unit step give 4.0 on both step columns
        assert sobel_at_oracle(img, 4, 3) == pytest.approx(4.0)
        assert field.magnitude[4, 3] == pytest.approx(4.0)
        assert field.magnitude[4, 4] == pytest.approx(4.0)
        assert field.magnitude[4, 1] == pytest.approx(0.0)

    def test_matches_oracle_on_random_interior(self):
        rng = np.random.default_rng(0)
        img = rng.random((12, 12))
        field = gradient_magnitude(RasterImage(img))
        for y, x in [(3, 4), (6, 6), (10, 2)]:
            assert field.magnitude[y, x] == pytest.approx(sobel_at_oracle(img, y, x))

    def test_checkerboard_rotation_symmetry(self):
        tile = np.array([[0.0, 1.0], [1.0, 0.0]])
        img = np.tile(tile, (4, 4))
        field = gradient_magnitude(RasterImage(img)).magnitude
        assert np.allclose(field, np.rot90(field, 2))

    def test_rgb_uses_luma(self):
        rgb = np.zeros((4, 6, 3))
        rgb[:, 3:, 0] = 1.0  # red step
        gray = np.zeros((4, 6))
        gray[:, 3:] = 0.299
        expected = gradient_magnitude(RasterImage(gray)).magnitude
        assert np.allclose(gradient_magnitude(RasterImage(rgb)).magnitude, expected)

    def test_too_small_raises(self):
        with pytest.raises(ImageTooSmall):
            gradient_magnitude(RasterImage(np.zeros((1, 5))))


class TestSampleBilinear:
    def field(self):
        return GradientField(np.array([[0.0, 1.0], [0.0, 1.0]]))

    def test_integer_coordinates_return_stored(self):
        f = GradientField(np.arange(12, dtype=float).reshape(3, 4))
        for y in range(3):
            for x in range(4):
                assert sample_bilinear(f, x, y) == f.magnitude[y, x]

    def test_midpoint_of_two_pixels(self):
        assert sample_bilinear(self.field(), 0.5, 0.0) == pytest.approx(0.5)

    def test_hand_expansion(self):
        # f(x, y) = x for this field, so f(0.25, 0.75) = 0.25
        assert sample_bilinear(self.field(), 0.25, 0.75) == pytest.approx(0.25)

    def test_out_of_bounds(self):
        with pytest.raises(OutOfBounds):
            sample_bilinear(self.field(), 1.01, 0.0)
        with pytest.raises(OutOfBounds):
            sample_bilinear(self.field(), 0.0, -0.01)

    @settings(max_examples=50, deadline=None)
    @given(
        x=st.floats(0.0, 6.999),
        y=st.floats(0.0, 4.0),
        eps=st.floats(1e-6, 1e-3),
    )
    def test_continuity_in_x(self, x, y, eps):
        rng = np.random.default_rng(99)
        f = GradientField(rng.random((5, 8)))
        lip = np.abs(np.diff(f.magnitude, axis=1)).max()
        x2 = min(x + eps, 7.0)
        d = abs(sample_bilinear(f, x2, y) - sample_bilinear(f, x, y))
        assert d <= (x2 - x) * lip + 1e-12


class TestRasterizePolygon:
    def oracle_mask(self, verts, w, h):
        out = np.zeros((h, w), dtype=bool)
        for y in range(h):
            for x in range(w):
                out[y, x] = point_in_polygon_oracle(x + 0.5, y + 0.5, verts)
        return out

    def test_axis_aligned_square(self):
        verts = [(1, 1), (4, 1), (4, 4), (1, 4)]
        mask = rasterize_polygon(verts, 6, 6)
        oracle = self.oracle_mask(verts, 6, 6)
        assert np.array_equal(mask.data, oracle)
        assert mask.area == 9  # centers 1.5, 2.5, 3.5 in both axes

    def test_zero_area_triangle(self):
        with pytest.raises(DegeneratePolygon):
            rasterize_polygon([(0, 0), (2, 2), (4, 4)], 8, 8)

    def test_too_few_vertices(self):
        with pytest.raises(DegeneratePolygon):
            rasterize_polygon([(0, 0), (3, 1)], 8, 8)

    def test_reversed_orientation_identical(self):
        verts = [(1.2, 0.7), (6.3, 1.9), (5.1, 6.2), (0.8, 4.4)]
        a = rasterize_polygon(verts, 8, 8)
        b = rasterize_polygon(verts[::-1], 8, 8)
        assert np.array_equal(a.data, b.data)

    @pytest.mark.parametrize("seed", range(12))
    def test_random_polygons_match_oracle(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(3, 9))
        # star-shaped (angle-sorted) polygon: simple by construction
        ang = np.sort(rng.uniform(0, 2 * np.pi, k))
        rad = rng.uniform(2, 14, k)
        cx, cy = rng.uniform(8, 24, 2)
        verts = np.c_[cx + rad * np.cos(ang), cy + rad * np.sin(ang)]
        mask = rasterize_polygon(verts, 32, 32)
        assert np.array_equal(mask.data, self.oracle_mask(verts, 32, 32))


class TestRasterHelpers:
    def test_rotate_bar_quarter_turn(self):
        img = np.zeros((9, 9))
        img[4, 1:8] = 1.0  # horizontal bar
        rot = rotate_about(img, 90.0, (4.0, 4.0), order=0)
        assert rot[1:8, 4].sum() == 7  # now vertical
        assert rot[4, 1] == 0.0

    def test_resize_identity_and_shape(self):
        rng = np.random.default_rng(1)
        img = rng.random((10, 10))
        assert np.array_equal(resize(img, (10, 10), order=1), img)
        up = resize(img, (20, 15), order=1)
        assert up.shape == (20, 15)
        assert up.min() >= img.min() - 1e-12 and up.max() <= img.max() + 1e-12

    def test_mask_iou(self):
        a = BinaryMask(np.eye(4, dtype=bool))
        b = BinaryMask(np.eye(4, dtype=bool))
        assert mask_iou(a, b) == 1.0
        assert mask_iou(a, BinaryMask(np.zeros((4, 4), bool))) == 0.0

    def test_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        img = RasterImage(np.round(rng.random((16, 12)) * 255) / 255)
        save_image(img, tmp_path / "g.png")
        back = load_image(tmp_path / "g.png")
        assert back.channels == 1
        assert np.allclose(back.data, img.data, atol=1 / 510)

        rgb = RasterImage(np.round(rng.random((8, 8, 3)) * 255) / 255)
        save_image(rgb, tmp_path / "c.png")
        assert load_image(tmp_path / "c.png").channels == 3

        mask = BinaryMask(rng.random((16, 12)) > 0.5)
        save_mask(mask, tmp_path / "m.png")
        assert np.array_equal(load_mask(tmp_path / "m.png").data, mask.data)

    def test_raster_image_validation(self):
        with pytest.raises(ValueError):
            RasterImage(np.full((4, 4), 1.5))
        with pytest.raises(ValueError):
            RasterImage(np.zeros((4, 4, 2)))
