import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfgpatch.errors import ShapeError
from cfgpatch.fraser import (
    FraserFieldParams,
    IrAppearance,
    VisAppearance,
    composite,
    fraser_field,
    fraser_field_grid,
    ir_texture_from_field,
    render_ir,
    render_vis,
    vis_texture_from_field,
)
from cfgpatch.geometry import GeometryParams, rasterize_mask


GEOM = GeometryParams(center_row=0.5, center_col=0.5, scale=0.25)


def field_strategy():
    return st.builds(
        FraserFieldParams,
        field_rotation=st.floats(-math.pi, math.pi),
        phase=st.floats(-math.pi, math.pi),
        ring_frequency=st.floats(1.0, 8.0),
        twist=st.floats(-4.0, 4.0),
        zigzag_amplitude=st.floats(0.0, 1.5),
        spoke_count=st.integers(3, 12),
        sharpness=st.floats(0.1, 6.0),
    )


class TestField:
    def test_unit_radius_zero_everything_gives_zero(self):
        # ln(rho)=0 with all angular terms off -> sin(0) -> 0.
        fieldp = FraserFieldParams(ring_frequency=1.0, twist=0.0,
                                   zigzag_amplitude=0.0, phase=0.0,
                                   sharpness=1.0, field_rotation=0.0)
        h = w = 64
        radius = GEOM.scale * min(h, w)
        v = fraser_field(0.5 * h, 0.5 * w + radius, GEOM, fieldp, h, w)
        assert v == pytest.approx(0.0, abs=1e-12)

    def test_large_sharpness_keeps_zero_at_zero(self):
        fieldp = FraserFieldParams(ring_frequency=1.0, twist=0.0,
                                   zigzag_amplitude=0.0, phase=0.0,
                                   sharpness=6.0)
        h = w = 64
        radius = GEOM.scale * min(h, w)
        v = fraser_field(0.5 * h, 0.5 * w + radius, GEOM, fieldp, h, w)
        assert v == pytest.approx(0.0, abs=1e-12)

    def test_rotational_symmetry_without_angular_terms(self):
        fieldp = FraserFieldParams(twist=0.0, zigzag_amplitude=0.0,
                                   ring_frequency=3.0, phase=0.7,
                                   sharpness=2.0)
        h = w = 64
        cr, cc = 0.5 * h, 0.5 * w
        base_r, base_c = cr + 7.3, cc + 2.1
        radius = math.hypot(base_r - cr, base_c - cc)
        v0 = fraser_field(base_r, base_c, GEOM, fieldp, h, w)
        for theta in (0.3, 1.2, 2.9, -1.1):
            r = cr + radius * math.sin(theta)
            c = cc + radius * math.cos(theta)
            assert fraser_field(r, c, GEOM, fieldp, h, w) == pytest.approx(
                v0, abs=1e-9)

    def test_grid_matches_pointwise(self):
        fieldp = FraserFieldParams(field_rotation=0.9, phase=0.3,
                                   ring_frequency=5.0, twist=-2.0,
                                   zigzag_amplitude=0.8, spoke_count=7,
                                   sharpness=3.0)
        grid = fraser_field_grid(GEOM, fieldp, 32, 32)
        for (r, c) in [(0, 0), (5, 20), (16, 16), (31, 3)]:
            assert grid[r, c] == pytest.approx(
                fraser_field(r + 0.5, c + 0.5, GEOM, fieldp, 32, 32),
                abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(fieldp=field_strategy())
    def test_range(self, fieldp):
        grid = fraser_field_grid(GEOM, fieldp, 24, 24)
        assert grid.min() >= -1.0 and grid.max() <= 1.0

    def test_deterministic(self):
        fieldp = FraserFieldParams()
        a = fraser_field_grid(GEOM, fieldp, 40, 40)
        b = fraser_field_grid(GEOM, fieldp, 40, 40)
        assert np.array_equal(a, b)


class TestTextureMaps:
    def test_palette_endpoints(self):
        app = VisAppearance(palette=((0.1, 0.2, 0.3), (0.4, 0.4, 0.4),
                                     (0.5, 0.6, 0.7), (0.8, 0.9, 1.0)))
        v = np.array([-1.0, 1.0])
        tex = vis_texture_from_field(v, app)
        assert np.array_equal(tex[0], [0.1, 0.2, 0.3])
        assert np.array_equal(tex[1], [0.8, 0.9, 1.0])

    def test_identical_palette_gives_constant_texture(self):
        app = VisAppearance(palette=((0.3, 0.5, 0.7),) * 4)
        tex = render_vis(GEOM, FraserFieldParams(), app, 32, 32)
        assert np.all(tex == np.array([0.3, 0.5, 0.7]))

    def test_gray_endpoints_and_midpoint(self):
        app = IrAppearance(gray_lo=0.2, gray_hi=0.8)
        v = np.array([-1.0, 0.0, 1.0])
        tex = ir_texture_from_field(v, app)
        assert np.allclose(tex, [0.2, 0.5, 0.8], atol=1e-12)

    def test_zero_width_gray_range(self):
        app = IrAppearance(gray_lo=0.5, gray_hi=0.5)
        tex = render_ir(GEOM, FraserFieldParams(), app, 32, 32)
        assert np.all(tex == 0.5)

    def test_render_purity(self):
        app = VisAppearance()
        a = render_vis(GEOM, FraserFieldParams(), app, 32, 32)
        b = render_vis(GEOM, FraserFieldParams(), app, 32, 32)
        assert np.array_equal(a, b)

    def test_flat_switch_constant(self):
        vis = render_vis(GEOM, FraserFieldParams(), VisAppearance(), 32, 32,
                         flat=True)
        assert np.all(vis == vis[0, 0])
        ir = render_ir(GEOM, FraserFieldParams(),
                       IrAppearance(gray_lo=0.2, gray_hi=0.6), 32, 32,
                       flat=True)
        assert np.all(ir == 0.4)


class TestComposite:
    def setup_method(self):
        rng = np.random.default_rng(3)
        self.image = rng.uniform(size=(32, 32, 3))
        self.patch = rng.uniform(size=(32, 32, 3))
        self.mask = rasterize_mask(GEOM, 32, 32)

    def test_zero_opacity_is_identity(self):
        out = composite(self.image, self.patch, self.mask, 0.0)
        assert np.array_equal(out, self.image)

    def test_full_mask_full_opacity_gives_patch(self):
        from cfgpatch.geometry import PatchMask
        ones = PatchMask(values=np.ones((32, 32)))
        out = composite(self.image, self.patch, ones, 1.0)
        assert np.allclose(out, self.patch, atol=1e-12)

    def test_arithmetic_midpoint(self):
        from cfgpatch.geometry import PatchMask
        ones = PatchMask(values=np.ones((4, 4)))
        img = np.full((4, 4, 1), 0.2)
        pat = np.full((4, 4, 1), 0.8)
        # Minimum raster size does not apply here; composite only checks shape.
        out = composite(img, pat, ones, 0.5)
        assert np.allclose(out, 0.5, atol=1e-12)

    def test_untouched_outside_support(self):
        out = composite(self.image, self.patch, self.mask, 0.85)
        outside = self.mask.values == 0.0
        assert np.array_equal(out[outside], self.image[outside])

    @given(alpha=st.floats(0.0, 1.0))
    @settings(max_examples=25, deadline=None)
    def test_convexity(self, alpha):
        out = composite(self.image, self.patch, self.mask, alpha)
        lo = np.minimum(self.image, self.patch)
        hi = np.maximum(self.image, self.patch)
        assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            composite(self.image, self.patch[:16], self.mask, 0.5)
        with pytest.raises(ShapeError):
            composite(self.image[:16], self.patch[:16], self.mask, 0.5)
