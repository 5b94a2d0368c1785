import numpy as np
import pytest
from hypothesis import given, strategies as st

from tacsense.core import (
    DepthMap,
    GeometryError,
    GrayImage,
    RgbImage,
    SensorGeometry,
    gray_from_rgb,
    image_mean_std,
    pixel_to_surface,
    surface_grid,
)


def rgb1(r, g, b):
    return RgbImage(np.array([[[r, g, b]]], dtype=np.uint8))


class TestPixelToSurface:
    def test_center_maps_to_origin(self, geom):
        assert pixel_to_surface(geom, 290, 290) == (0.0, 0.0)

    def test_right_edge_is_half_field(self, geom):
        x, y = pixel_to_surface(geom, 580, 290)
        assert x == pytest.approx(12.0)
        assert y == pytest.approx(0.0)

    def test_top_left_corner(self, geom):
        assert pixel_to_surface(geom, 0, 0) == pytest.approx((-12.0, -12.0))

    def test_out_of_range_raises(self, geom):
        with pytest.raises(GeometryError):
            pixel_to_surface(geom, 581, 0)
        with pytest.raises(GeometryError):
            pixel_to_surface(geom, 0, -1)

    @given(u=st.integers(0, 579), v=st.integers(0, 580))
    def test_affine_in_u(self, u, v):
        g = SensorGeometry()
        x0, _ = pixel_to_surface(g, u, v)
        x1, _ = pixel_to_surface(g, u + 1, v)
        assert x1 - x0 == pytest.approx(g.pixel_pitch)

    def test_surface_grid_matches_pointwise(self, geom):
        xx, yy = surface_grid(geom)
        for u, v in [(0, 0), (290, 290), (579, 100)]:
            x, y = pixel_to_surface(geom, u, v)
            assert xx[v, u] == pytest.approx(x)
            assert yy[v, u] == pytest.approx(y)


class TestGeometry:
    def test_pixel_pitch(self, geom):
        assert geom.pixel_pitch == pytest.approx(24.0 / 580)

    def test_crop_origin(self, geom):
        assert geom.crop_origin == (110, 10)

    def test_crop_must_fit(self):
        with pytest.raises(ValueError):
            SensorGeometry(raw_width=500, raw_height=600, crop_size=580)


class TestGrayFromRgb:
    def test_white(self):
        assert gray_from_rgb(rgb1(255, 255, 255)).pixels[0, 0] == 255

    def test_black(self):
        assert gray_from_rgb(rgb1(0, 0, 0)).pixels[0, 0] == 0

    def test_pure_red(self):
        # round(0.299 * 255) = 76
        assert gray_from_rgb(rgb1(255, 0, 0)).pixels[0, 0] == 76

    @given(st.tuples(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255)),
           st.integers(0, 2))
    def test_monotone_in_each_channel(self, rgb, channel):
        r, g, b = rgb
        lo = gray_from_rgb(rgb1(r, g, b)).pixels[0, 0]
        bumped = list(rgb)
        bumped[channel] = min(255, bumped[channel] + 1)
        hi = gray_from_rgb(rgb1(*bumped)).pixels[0, 0]
        assert hi >= lo


class TestImageMeanStd:
    def test_constant_image(self):
        img = GrayImage(np.full((10, 10), 128, dtype=np.uint8))
        assert image_mean_std(img) == (128.0, 0.0)

    def test_two_pixel_image(self):
        img = GrayImage(np.array([[0, 2]], dtype=np.uint8))
        assert image_mean_std(img) == (1.0, 1.0)

    def test_standard_reference_std_bracket(self, standard_reference):
        _, std = image_mean_std(standard_reference)
        assert 3.0 <= std <= 6.0

    @given(st.integers(0, 255))
    def test_constant_std_is_exactly_zero(self, value):
        img = GrayImage(np.full((7, 3), value, dtype=np.uint8))
        assert image_mean_std(img)[1] == 0.0


class TestTypeInvariants:
    def test_depth_map_rejects_negative(self):
        with pytest.raises(ValueError):
            DepthMap(np.array([[-0.1]]))

    def test_depth_map_rejects_nan(self):
        with pytest.raises(ValueError):
            DepthMap(np.array([[np.nan]]))

    def test_gray_rejects_wrong_dtype(self):
        with pytest.raises(ValueError):
            GrayImage(np.zeros((4, 4), dtype=np.float64))

    def test_images_are_immutable(self):
        img = GrayImage(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 1
