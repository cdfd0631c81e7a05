import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfgpatch.errors import ParameterError
from cfgpatch.geometry import (
    CurvedEdge,
    GeometryParams,
    GuideTriangle,
    ShapeParams,
    bezier_point,
    build_fractal_layout,
    curve_edges,
    rasterize_mask,
)

from helpers import brute_force_mask, mask_agreement


def geom_strategy(curvature=st.floats(0.0, 0.4)):
    return st.builds(
        GeometryParams,
        center_row=st.floats(0.3, 0.7),
        center_col=st.floats(0.3, 0.7),
        scale=st.floats(0.08, 0.35),
        rotation=st.floats(-math.pi, math.pi),
        curvature=curvature,
        shape=st.builds(
            ShapeParams,
            level_curvature=st.tuples(*[st.floats(0.2, 1.5)] * 3),
            shape_phase=st.floats(0.0, 2.0 * math.pi),
        ),
    )


class TestLayout:
    def test_depth_one_has_three_triangles(self):
        assert len(build_fractal_layout(1)) == 3

    def test_depth_three_has_39_triangles(self):
        layout = build_fractal_layout(3)
        assert len(layout) == 39
        counts = {}
        for tri in layout:
            counts[tri.level] = counts.get(tri.level, 0) + 1
        assert counts == {1: 3, 2: 9, 3: 27}

    def test_depth_zero_rejected(self):
        with pytest.raises(ParameterError):
            build_fractal_layout(0)
        with pytest.raises(ParameterError):
            build_fractal_layout(6)

    def test_level_major_order_with_stable_indices(self):
        layout = build_fractal_layout(3)
        assert [t.index for t in layout] == list(range(39))
        assert [t.level for t in layout] == [1] * 3 + [2] * 9 + [3] * 27
        # A shallower layout is a prefix of a deeper one.
        shallow = build_fractal_layout(2)
        for a, b in zip(shallow, layout):
            assert np.array_equal(a.vertices, b.vertices)

    def test_triangles_nondegenerate(self):
        for tri in build_fractal_layout(4):
            a, b, c = tri.vertices
            area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1])
                             - (c[0] - a[0]) * (b[1] - a[1]))
            assert area > 0


class TestBezier:
    def test_endpoints(self):
        edge = CurvedEdge(p0=np.array([0.0, 0.0]), p1=np.array([0.2, 0.7]),
                          p2=np.array([0.9, 0.4]), p3=np.array([1.0, 1.0]))
        assert np.array_equal(bezier_point(edge, 0.0), edge.p0)
        assert np.array_equal(bezier_point(edge, 1.0), edge.p3)

    def test_collinear_midpoint(self):
        edge = CurvedEdge(p0=np.array([0.0, 0.0]), p1=np.array([1.0, 0.0]),
                          p2=np.array([2.0, 0.0]), p3=np.array([3.0, 0.0]))
        assert np.allclose(bezier_point(edge, 0.5), [1.5, 0.0], atol=1e-12)

    def test_half_parameter_value(self):
        # (p0 + 3 p1 + 3 p2 + p3) / 8 at t = 1/2
        edge = CurvedEdge(p0=np.array([0.0, 0.0]), p1=np.array([0.0, 1.0]),
                          p2=np.array([1.0, 1.0]), p3=np.array([1.0, 0.0]))
        assert np.allclose(bezier_point(edge, 0.5), [0.5, 0.75], atol=1e-12)

    def test_parameter_domain(self):
        edge = CurvedEdge(*(np.zeros(2) for _ in range(4)))
        with pytest.raises(ParameterError):
            bezier_point(edge, -0.01)
        with pytest.raises(ParameterError):
            bezier_point(edge, 1.01)

    @given(t=st.floats(0.0, 1.0))
    def test_endpoint_interpolation_every_layout_edge(self, t):
        params = GeometryParams(curvature=0.3)
        tri = build_fractal_layout(2)[5]
        for edge in curve_edges(tri, params):
            assert np.array_equal(bezier_point(edge, 0.0), edge.p0)
            assert np.array_equal(bezier_point(edge, 1.0), edge.p3)
            mid = bezier_point(edge, t)
            assert np.all(np.isfinite(mid))


class TestCurveEdges:
    def test_zero_curvature_keeps_controls_on_chord(self):
        params = GeometryParams(curvature=0.0)
        for tri in build_fractal_layout(2):
            for edge in curve_edges(tri, params):
                chord = edge.p3 - edge.p0
                assert np.allclose(edge.p1, edge.p0 + chord / 3.0, atol=1e-12)
                assert np.allclose(edge.p2, edge.p0 + 2 * chord / 3.0, atol=1e-12)

    def test_deterministic(self):
        params = GeometryParams(curvature=0.25,
                                shape=ShapeParams(shape_phase=2.2))
        tri = build_fractal_layout(3)[17]
        first = curve_edges(tri, params)
        second = curve_edges(tri, params)
        for a, b in zip(first, second):
            for pa, pb in zip((a.p0, a.p1, a.p2, a.p3), (b.p0, b.p1, b.p2, b.p3)):
                assert np.array_equal(pa, pb)

    def test_displacement_magnitude(self):
        # Unit-length edge, curvature 0.4, level multiplier 1.5 -> 0.3 offset.
        tri = GuideTriangle(
            vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.9]]),
            level=1, index=0)
        params = GeometryParams(
            curvature=0.4, shape=ShapeParams(level_curvature=(1.5, 1.0, 1.0)))
        edge = curve_edges(tri, params)[0]
        chord = edge.p3 - edge.p0
        on_chord = edge.p0 + chord / 3.0
        dist = np.linalg.norm(edge.p1 - on_chord)
        assert dist == pytest.approx(0.3, abs=1e-12)


class TestRasterize:
    def test_rejects_small_rasters(self):
        with pytest.raises(ParameterError):
            rasterize_mask(GeometryParams(), 8, 64)

    def test_support_inside_at_minimum_scale(self):
        params = GeometryParams(center_row=0.5, center_col=0.5, scale=0.08,
                                curvature=0.4)
        mask = rasterize_mask(params, 64, 64).values
        assert mask[0, :].sum() == 0 and mask[-1, :].sum() == 0
        assert mask[:, 0].sum() == 0 and mask[:, -1].sum() == 0
        assert mask.sum() > 0

    def test_deterministic(self):
        params = GeometryParams(scale=0.3, curvature=0.2, rotation=1.0)
        a = rasterize_mask(params, 48, 56).values
        b = rasterize_mask(params, 48, 56).values
        assert np.array_equal(a, b)

    def test_straight_edge_oracle_agreement(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            params = GeometryParams(
                center_row=float(rng.uniform(0.35, 0.65)),
                center_col=float(rng.uniform(0.35, 0.65)),
                scale=float(rng.uniform(0.1, 0.3)),
                rotation=float(rng.uniform(-math.pi, math.pi)),
                curvature=0.0,
            )
            cov = rasterize_mask(params, 64, 64, depth=1).values
            oracle = brute_force_mask(1, params.center_row, params.center_col,
                                      params.scale, params.rotation, 64, 64)
            assert mask_agreement(cov, oracle) >= 0.995

    @settings(max_examples=15, deadline=None)
    @given(params=geom_strategy())
    def test_values_in_unit_interval(self, params):
        mask = rasterize_mask(params, 32, 32).values
        assert mask.min() >= 0.0 and mask.max() <= 1.0

    @settings(max_examples=15, deadline=None)
    @given(params=geom_strategy(), depth=st.integers(2, 3))
    def test_union_monotone_in_depth(self, params, depth):
        deep = rasterize_mask(params, 48, 48, depth=depth).values
        shallow = rasterize_mask(params, 48, 48, depth=depth - 1).values
        assert np.all(deep >= shallow)

    def test_affine_equivariance_integer_shift(self):
        h = w = 64
        base = GeometryParams(center_row=0.4, center_col=0.4, scale=0.15,
                              rotation=0.6, curvature=0.3)
        shifted = GeometryParams(center_row=0.4 + 8 / h, center_col=0.4 + 6 / w,
                                 scale=0.15, rotation=0.6, curvature=0.3)
        a = rasterize_mask(base, h, w).values
        b = rasterize_mask(shifted, h, w).values
        # Supports stay well inside the frame, so the shift is loss-free.
        assert np.array_equal(a[:-8, :-6], b[8:, 6:])

    def test_shape_phase_changes_curved_mask(self):
        a = rasterize_mask(GeometryParams(curvature=0.35, scale=0.3,
                                          shape=ShapeParams(shape_phase=0.3)),
                           64, 64).values
        b = rasterize_mask(GeometryParams(curvature=0.35, scale=0.3,
                                          shape=ShapeParams(shape_phase=1.9)),
                           64, 64).values
        assert not np.array_equal(a, b)
