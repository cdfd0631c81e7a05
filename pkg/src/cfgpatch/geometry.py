"""Curved-triangle fractal patch geometry.

The patch support is built from a midpoint subdivision of a canonical
equilateral triangle: level 1 holds the three corner triangles of the root,
level 2 the corner triangles of those, and so on.  All levels up to the
requested depth are retained jointly, so the layout is self-similar across
scales.  Each triangle edge is a cubic Bezier whose control points are
pushed off the chord by a curvature term, and the union of the rasterized
curved triangles yields the soft mask shared by both imaging modalities.

Canonical frame: unit-circumradius equilateral triangle centered at the
origin, one vertex pointing up (toward negative image rows).  Canonical
(x, y) maps to image (col, row).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ParameterError

# Bound boxes for the geometry block of the search space.
CENTER_RANGE = (0.0, 1.0)
SCALE_RANGE = (0.08, 0.35)
ROTATION_RANGE = (-math.pi, math.pi)
CURVATURE_RANGE = (0.0, 0.4)
LEVEL_MULT_RANGE = (0.2, 1.5)
SHAPE_PHASE_RANGE = (0.0, 2.0 * math.pi)

MAX_DEPTH = 5
MIN_RASTER_SIZE = 16

# Samples per Bezier edge when flattening to a polyline.
EDGE_SAMPLES = 24

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

# Root triangle: circumradius 1, top vertex up (y axis points down rows).
_ROOT_VERTICES = np.array(
    [
        [0.0, -1.0],
        [math.sqrt(3.0) / 2.0, 0.5],
        [-math.sqrt(3.0) / 2.0, 0.5],
    ]
)


@dataclass(frozen=True)
class ShapeParams:
    """Per-level curvature multipliers plus a phase seeding the edge signs."""

    level_curvature: tuple[float, ...] = (1.0, 1.0, 1.0)
    shape_phase: float = 0.0

    def multiplier(self, level: int) -> float:
        # Depths beyond the carried multipliers reuse the deepest entry.
        return self.level_curvature[min(level, len(self.level_curvature)) - 1]


@dataclass(frozen=True)
class GeometryParams:
    """Shared patch geometry: placement, scale, rotation, curvature, shape."""

    center_row: float = 0.5
    center_col: float = 0.5
    scale: float = 0.18
    rotation: float = 0.0
    curvature: float = 0.0
    shape: ShapeParams = field(default_factory=ShapeParams)

    def validate(self) -> None:
        values = (self.center_row, self.center_col, self.scale,
                  self.rotation, self.curvature, self.shape.shape_phase,
                  *self.shape.level_curvature)
        if not all(math.isfinite(v) for v in values):
            raise ParameterError("geometry parameters must be finite")
        if not SCALE_RANGE[0] <= self.scale <= SCALE_RANGE[1]:
            raise ParameterError(f"scale {self.scale} outside {SCALE_RANGE}")
        if not CURVATURE_RANGE[0] <= self.curvature <= CURVATURE_RANGE[1]:
            raise ParameterError(
                f"curvature {self.curvature} outside {CURVATURE_RANGE}")


@dataclass(frozen=True)
class GuideTriangle:
    """One triangle of the recursive layout, in canonical coordinates.

    ``index`` is the triangle's position in the level-major layout order and
    anchors the deterministic per-edge curvature signs.
    """

    vertices: np.ndarray
    level: int
    index: int

    def edge_endpoints(self):
        v = self.vertices
        return ((v[0], v[1]), (v[1], v[2]), (v[2], v[0]))


@dataclass(frozen=True)
class CurvedEdge:
    """Cubic Bezier edge: endpoints p0/p3 and interior controls p1/p2."""

    p0: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray


@dataclass(frozen=True)
class PatchMask:
    """Rasterized soft coverage mask in [0, 1], shared by both modalities."""

    values: np.ndarray

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _subdivide(vertices: np.ndarray) -> list[np.ndarray]:
    a, b, c = vertices
    mab = 0.5 * (a + b)
    mbc = 0.5 * (b + c)
    mca = 0.5 * (c + a)
    return [
        np.array([a, mab, mca]),
        np.array([mab, b, mbc]),
        np.array([mca, mbc, c]),
    ]


@lru_cache(maxsize=MAX_DEPTH)
def _cached_layout(depth: int) -> tuple[GuideTriangle, ...]:
    layout: list[GuideTriangle] = []
    current = [_ROOT_VERTICES]
    index = 0
    for level in range(1, depth + 1):
        children = []
        for tri in current:
            children.extend(_subdivide(tri))
        for verts in children:
            verts.setflags(write=False)
            layout.append(GuideTriangle(vertices=verts, level=level, index=index))
            index += 1
        current = children
    return tuple(layout)


def build_fractal_layout(depth: int) -> list[GuideTriangle]:
    """All guide triangles of levels 1..depth, level-major order.

    Level l contributes 3**l triangles (the corner children of every level
    l-1 triangle), so the total count is sum(3**l for l in 1..depth).
    """
    if not isinstance(depth, int) or not 1 <= depth <= MAX_DEPTH:
        raise ParameterError(f"depth must be an integer in [1, {MAX_DEPTH}]")
    return list(_cached_layout(depth))


def bezier_point(edge: CurvedEdge, t: float) -> np.ndarray:
    """Evaluate the cubic Bezier at parameter t in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise ParameterError(f"bezier parameter {t} outside [0, 1]")
    u = 1.0 - t
    return (u * u * u) * edge.p0 + (3.0 * u * u * t) * edge.p1 \
        + (3.0 * u * t * t) * edge.p2 + (t * t * t) * edge.p3


def _edge_sign(shape_phase: float, edge_index: int) -> float:
    s = math.sin(shape_phase + edge_index * _GOLDEN_ANGLE)
    return 1.0 if s >= 0.0 else -1.0


def curve_edges(tri: GuideTriangle, params: GeometryParams) -> list[CurvedEdge]:
    """Bend the three edges of a guide triangle into cubic Beziers.

    Control points sit at chord parameters 1/3 and 2/3, displaced
    perpendicular to the chord by sign * curvature * level_multiplier *
    chord_length / 2.  The sign alternates deterministically with the
    edge's global index so repeated calls reproduce identical edges.
    """
    mult = params.shape.multiplier(tri.level)
    edges = []
    for k, (p0, p3) in enumerate(tri.edge_endpoints()):
        chord = p3 - p0
        length = float(np.hypot(chord[0], chord[1]))
        sign = _edge_sign(params.shape.shape_phase, 3 * tri.index + k)
        offset = sign * params.curvature * mult * length * 0.5
        if length > 0.0:
            normal = np.array([-chord[1], chord[0]]) / length
        else:
            normal = np.zeros(2)
        p1 = p0 + chord / 3.0 + offset * normal
        p2 = p0 + 2.0 * chord / 3.0 + offset * normal
        edges.append(CurvedEdge(p0=p0, p1=p1, p2=p2, p3=p3))
    return edges


_FLAT_T = np.arange(EDGE_SAMPLES) / EDGE_SAMPLES
_FLAT_U = 1.0 - _FLAT_T
_FLAT_W0 = (_FLAT_U ** 3)[:, None]
_FLAT_W1 = (3.0 * _FLAT_U * _FLAT_U * _FLAT_T)[:, None]
_FLAT_W2 = (3.0 * _FLAT_U * _FLAT_T * _FLAT_T)[:, None]
_FLAT_W3 = (_FLAT_T ** 3)[:, None]


def _flatten_triangle(tri: GuideTriangle, params: GeometryParams) -> np.ndarray:
    """Closed polygon approximating the curved triangle (canonical coords)."""
    points = []
    for edge in curve_edges(tri, params):
        points.append(_FLAT_W0 * edge.p0 + _FLAT_W1 * edge.p1
                      + _FLAT_W2 * edge.p2 + _FLAT_W3 * edge.p3)
    return np.concatenate(points, axis=0)


@lru_cache(maxsize=MAX_DEPTH)
def _edge_arrays(depth: int):
    """Per-depth canonical edge data, stacked for the whole layout."""
    p0, p3, idx, level = [], [], [], []
    for tri in _cached_layout(depth):
        for k, (a, b) in enumerate(tri.edge_endpoints()):
            p0.append(a)
            p3.append(b)
            idx.append(3 * tri.index + k)
            level.append(tri.level)
    out = (np.array(p0), np.array(p3), np.array(idx, dtype=np.float64),
           np.array(level, dtype=np.intp))
    for arr in out:
        arr.setflags(write=False)
    return out


def _flatten_layout(params: GeometryParams, depth: int) -> np.ndarray:
    """All curved-triangle polygons at once, shape (n_tri, 72, 2).

    Mirrors curve_edges/_flatten_triangle elementwise so both paths agree.
    """
    p0, p3, idx, level = _edge_arrays(depth)
    mults = np.asarray(params.shape.level_curvature, dtype=np.float64)
    mult = mults[np.minimum(level, len(mults)) - 1]
    sign = np.where(np.sin(params.shape.shape_phase + idx * _GOLDEN_ANGLE) >= 0.0,
                    1.0, -1.0)
    chord = p3 - p0
    length = np.hypot(chord[:, 0], chord[:, 1])
    offset = sign * params.curvature * mult * length * 0.5
    safe = np.where(length > 0.0, length, 1.0)
    normal = np.stack([-chord[:, 1], chord[:, 0]], axis=1) / safe[:, None]
    normal[length == 0.0] = 0.0
    p1 = p0 + chord / 3.0 + offset[:, None] * normal
    p2 = p0 + 2.0 * chord / 3.0 + offset[:, None] * normal
    pts = (_FLAT_W0[None] * p0[:, None, :] + _FLAT_W1[None] * p1[:, None, :]
           + _FLAT_W2[None] * p2[:, None, :] + _FLAT_W3[None] * p3[:, None, :])
    return pts.reshape(-1, 3 * EDGE_SAMPLES, 2)


def _to_image_coords(points: np.ndarray, params: GeometryParams,
                     height: int, width: int) -> np.ndarray:
    """Map canonical (x, y) points to continuous image (row, col)."""
    cos_r = math.cos(params.rotation)
    sin_r = math.sin(params.rotation)
    x = points[..., 0]
    y = points[..., 1]
    xr = x * cos_r - y * sin_r
    yr = x * sin_r + y * cos_r
    size = params.scale * min(height, width)
    rows = params.center_row * height + size * yr
    cols = params.center_col * width + size * xr
    return np.stack([rows, cols], axis=-1)


@lru_cache(maxsize=4)
def _next_index(n: int) -> np.ndarray:
    idx = np.arange(1, n + 1)
    idx[-1] = 0
    idx.setflags(write=False)
    return idx


def _fill_polygon(mask: np.ndarray, polygon: np.ndarray) -> None:
    """Accumulate even-odd coverage of one polygon into the mask via max.

    Scanline fill with a 2x2 subsample grid per pixel, restricted to the
    polygon's bounding box.  Pixel (r, c) covers [r, r+1) x [c, c+1).
    """
    h, w = mask.shape
    rows = polygon[:, 0]
    cols = polygon[:, 1]
    r0 = max(0, int(math.floor(rows.min())))
    r1 = min(h, int(math.ceil(rows.max())))
    c0 = max(0, int(math.floor(cols.min())))
    c1 = min(w, int(math.ceil(cols.max())))
    if r0 >= r1 or c0 >= c1:
        return

    nxt = _next_index(len(rows))
    y1 = rows
    y2 = rows[nxt]
    x1 = cols
    x2 = cols[nxt]

    n_rows = 2 * (r1 - r0)
    n_cols = 2 * (c1 - c0)
    ys = r0 + 0.25 + 0.5 * np.arange(n_rows)

    below1 = y1[:, None] <= ys[None, :]
    below2 = y2[:, None] <= ys[None, :]
    crossing = below1 != below2
    dy = y2 - y1
    slope = np.divide(x2 - x1, dy, out=np.zeros_like(dy), where=dy != 0.0)
    xs = x1[:, None] + (ys[None, :] - y1[:, None]) * slope[:, None]
    # Non-crossing entries sort to the end and fall outside every span.
    xs = np.where(crossing, xs, np.inf)
    xs.sort(axis=0)

    # Even-odd fill: consecutive crossing pairs bound disjoint inside spans.
    # A span [a, b) covers subsample centers xc_i = c0 + 0.25 + 0.5 * i with
    # ceil(2 (a - c0) - 0.5) <= i < ceil(2 (b - c0) - 0.5).
    first = np.ceil(2.0 * (xs[0::2, :] - c0) - 0.5)
    last = np.ceil(2.0 * (xs[1::2, :] - c0) - 0.5)
    first = np.clip(first, 0, n_cols).astype(np.intp)
    last = np.clip(last, 0, n_cols).astype(np.intp)
    stride = n_cols + 1
    row_offset = stride * np.arange(n_rows)
    size = n_rows * stride
    delta = (np.bincount((first + row_offset).ravel(), minlength=size)
             - np.bincount((last + row_offset).ravel(), minlength=size))
    delta = delta.reshape(n_rows, stride)
    inside = np.cumsum(delta[:, :n_cols], axis=1) > 0
    coverage = inside.reshape(r1 - r0, 2, c1 - c0, 2).mean(axis=(1, 3))
    region = mask[r0:r1, c0:c1]
    np.maximum(region, coverage, out=region)


def rasterize_mask(params: GeometryParams, height: int, width: int,
                   depth: int | None = None) -> PatchMask:
    """Rasterize the union of all retained curved triangles.

    Each triangle is flattened to a 72-point polygon (24 samples per edge),
    filled even-odd with 2x2 supersampling, and the per-triangle coverages
    are combined by pixelwise max so anti-aliased boundaries survive the
    union.  Deterministic: equal inputs yield bit-identical masks.
    """
    if height < MIN_RASTER_SIZE or width < MIN_RASTER_SIZE:
        raise ParameterError(
            f"raster size {height}x{width} below minimum {MIN_RASTER_SIZE}")
    params.validate()
    if not isinstance(depth, (int, type(None))):
        raise ParameterError("depth must be an integer or None")
    if depth is None:
        depth = len(params.shape.level_curvature)
    if not 1 <= depth <= MAX_DEPTH:
        raise ParameterError(f"depth must be in [1, {MAX_DEPTH}]")
    polygons = _to_image_coords(_flatten_layout(params, depth), params,
                                height, width)
    mask = np.zeros((height, width), dtype=np.float64)
    for polygon in polygons:
        _fill_polygon(mask, polygon)
    return PatchMask(values=mask)
