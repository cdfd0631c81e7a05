"""Flat search-vector layout: encoding, bounds, decoding, rendering.

Default layout is 32 dimensions:

  geometry (9)   center_row, center_col, scale, rotation, curvature,
                 level multipliers x3, shape_phase
  field (7)      field_rotation, phase, ring_frequency, twist,
                 zigzag_amplitude, spoke_count, sharpness
  vis (13)       opacity, palette 4x3 row-major
  ir (3)         opacity, gray_lo, gray_hi

With ``tie_fraser_field=False`` a second 7-dim field block for the infrared
branch is appended (39 dims total).  The integer spoke count is relaxed to
a continuous dimension and rounded on decode; gray_lo/gray_hi are swapped
into order on decode.  Ablation switches live here because they change
what a vector means: ``disable_bezier`` pins curvature to zero via its
bounds, ``disable_fraser`` renders flat textures, ``fractal_depth`` selects
the retained subdivision levels.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import fraser, geometry
from .errors import ParameterError
from .fraser import FraserFieldParams, IrAppearance, VisAppearance
from .geometry import GeometryParams, PatchMask, ShapeParams

GEOMETRY_DIMS = 9
FIELD_DIMS = 7
VIS_DIMS = 1 + 3 * fraser.PALETTE_SIZE
IR_DIMS = 3

_GEOMETRY_NAMES = ("center_row", "center_col", "scale", "rotation",
                   "curvature", "level_curvature_1", "level_curvature_2",
                   "level_curvature_3", "shape_phase")
_FIELD_NAMES = ("field_rotation", "phase", "ring_frequency", "twist",
                "zigzag_amplitude", "spoke_count", "sharpness")
_VIS_NAMES = ("opacity_vis",) + tuple(
    f"palette_{i}_{ch}" for i in range(fraser.PALETTE_SIZE) for ch in "rgb")
_IR_NAMES = ("opacity_ir", "gray_lo", "gray_hi")

_FIELD_BOUNDS = (
    fraser.FIELD_ROTATION_RANGE,
    fraser.PHASE_RANGE,
    fraser.RING_FREQUENCY_RANGE,
    fraser.TWIST_RANGE,
    fraser.ZIGZAG_RANGE,
    (float(fraser.SPOKE_COUNT_RANGE[0]), float(fraser.SPOKE_COUNT_RANGE[1])),
    fraser.SHARPNESS_RANGE,
)


@dataclass(frozen=True)
class DecodedParams:
    """Structured view of one search vector."""

    geom: GeometryParams
    field_vis: FraserFieldParams
    field_ir: FraserFieldParams
    vis: VisAppearance
    ir: IrAppearance


@dataclass(frozen=True)
class ParamLayout:
    tie_fraser_field: bool = True
    fractal_depth: int = 3
    disable_bezier: bool = False
    disable_fraser: bool = False

    @property
    def dim(self) -> int:
        base = GEOMETRY_DIMS + FIELD_DIMS + VIS_DIMS + IR_DIMS
        return base if self.tie_fraser_field else base + FIELD_DIMS

    def names(self) -> tuple[str, ...]:
        names = _GEOMETRY_NAMES + _FIELD_NAMES + _VIS_NAMES + _IR_NAMES
        if not self.tie_fraser_field:
            names = names + tuple(f"ir_{n}" for n in _FIELD_NAMES)
        return names

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        curvature = (0.0, 0.0) if self.disable_bezier \
            else geometry.CURVATURE_RANGE
        spans = [
            geometry.CENTER_RANGE, geometry.CENTER_RANGE,
            geometry.SCALE_RANGE, geometry.ROTATION_RANGE, curvature,
            geometry.LEVEL_MULT_RANGE, geometry.LEVEL_MULT_RANGE,
            geometry.LEVEL_MULT_RANGE, geometry.SHAPE_PHASE_RANGE,
        ]
        spans.extend(_FIELD_BOUNDS)
        spans.append(fraser.OPACITY_RANGE)
        spans.extend([(0.0, 1.0)] * (3 * fraser.PALETTE_SIZE))
        spans.append(fraser.OPACITY_RANGE)
        spans.extend([(0.0, 1.0)] * 2)
        if not self.tie_fraser_field:
            spans.extend(_FIELD_BOUNDS)
        lo = np.array([s[0] for s in spans], dtype=np.float64)
        hi = np.array([s[1] for s in spans], dtype=np.float64)
        return lo, hi

    def project(self, vector: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds()
        return np.clip(vector, lo, hi)

    def _decode_field(self, chunk: np.ndarray) -> FraserFieldParams:
        spokes = int(np.clip(round(chunk[5]), *fraser.SPOKE_COUNT_RANGE))
        return FraserFieldParams(
            field_rotation=float(chunk[0]), phase=float(chunk[1]),
            ring_frequency=float(chunk[2]), twist=float(chunk[3]),
            zigzag_amplitude=float(chunk[4]), spoke_count=spokes,
            sharpness=float(chunk[6]))

    def decode(self, vector: np.ndarray) -> DecodedParams:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.dim,):
            raise ParameterError(
                f"vector has shape {vector.shape}, layout needs ({self.dim},)")
        v = self.project(vector)
        geom = GeometryParams(
            center_row=float(v[0]), center_col=float(v[1]),
            scale=float(v[2]), rotation=float(v[3]),
            curvature=0.0 if self.disable_bezier else float(v[4]),
            shape=ShapeParams(level_curvature=(float(v[5]), float(v[6]),
                                               float(v[7])),
                              shape_phase=float(v[8])))
        field_vis = self._decode_field(v[9:16])
        o = 16
        palette = tuple(
            tuple(float(c) for c in v[o + 1 + 3 * i: o + 4 + 3 * i])
            for i in range(fraser.PALETTE_SIZE))
        vis = VisAppearance(opacity=float(v[o]), palette=palette)
        o += VIS_DIMS
        gray_lo, gray_hi = sorted((float(v[o + 1]), float(v[o + 2])))
        ir = IrAppearance(opacity=float(v[o]), gray_lo=gray_lo, gray_hi=gray_hi)
        o += IR_DIMS
        field_ir = field_vis if self.tie_fraser_field \
            else self._decode_field(v[o:o + FIELD_DIMS])
        return DecodedParams(geom=geom, field_vis=field_vis, field_ir=field_ir,
                             vis=vis, ir=ir)

    def _encode_field(self, fieldp: FraserFieldParams) -> list[float]:
        return [fieldp.field_rotation, fieldp.phase, fieldp.ring_frequency,
                fieldp.twist, fieldp.zigzag_amplitude,
                float(fieldp.spoke_count), fieldp.sharpness]

    def encode(self, decoded: DecodedParams) -> np.ndarray:
        g = decoded.geom
        values = [g.center_row, g.center_col, g.scale, g.rotation, g.curvature,
                  *g.shape.level_curvature[:3], g.shape.shape_phase]
        values.extend(self._encode_field(decoded.field_vis))
        values.append(decoded.vis.opacity)
        for color in decoded.vis.palette:
            values.extend(color)
        values.extend([decoded.ir.opacity, decoded.ir.gray_lo,
                       decoded.ir.gray_hi])
        if not self.tie_fraser_field:
            values.extend(self._encode_field(decoded.field_ir))
        return np.array(values, dtype=np.float64)

    def default_decoded(self, geom: GeometryParams) -> DecodedParams:
        if self.disable_bezier and geom.curvature != 0.0:
            geom = replace(geom, curvature=0.0)
        fieldp = FraserFieldParams()
        return DecodedParams(geom=geom, field_vis=fieldp, field_ir=fieldp,
                             vis=VisAppearance(), ir=IrAppearance())


def render_patch(decoded: DecodedParams, height: int, width: int,
                 layout: ParamLayout) -> tuple[PatchMask, np.ndarray, np.ndarray]:
    """Mask plus both modality textures for one candidate."""
    mask = geometry.rasterize_mask(decoded.geom, height, width,
                                   depth=layout.fractal_depth)
    tex_vis = fraser.render_vis(decoded.geom, decoded.field_vis, decoded.vis,
                                height, width, flat=layout.disable_fraser)
    tex_ir = fraser.render_ir(decoded.geom, decoded.field_ir, decoded.ir,
                              height, width, flat=layout.disable_fraser)
    return mask, tex_vis, tex_ir


def decoded_to_json(decoded: DecodedParams) -> dict:
    """JSON-friendly nested form with the layout's field names."""
    g = decoded.geom
    out = {
        "geometry": {
            "center_row": g.center_row, "center_col": g.center_col,
            "scale": g.scale, "rotation": g.rotation,
            "curvature": g.curvature,
            "level_curvature": list(g.shape.level_curvature),
            "shape_phase": g.shape.shape_phase,
        },
        "field_vis": _field_to_json(decoded.field_vis),
        "field_ir": _field_to_json(decoded.field_ir),
        "vis": {"opacity": decoded.vis.opacity,
                "palette": [list(c) for c in decoded.vis.palette]},
        "ir": {"opacity": decoded.ir.opacity, "gray_lo": decoded.ir.gray_lo,
               "gray_hi": decoded.ir.gray_hi},
    }
    return out


def _field_to_json(fieldp: FraserFieldParams) -> dict:
    return {"field_rotation": fieldp.field_rotation, "phase": fieldp.phase,
            "ring_frequency": fieldp.ring_frequency, "twist": fieldp.twist,
            "zigzag_amplitude": fieldp.zigzag_amplitude,
            "spoke_count": fieldp.spoke_count, "sharpness": fieldp.sharpness}


def _field_from_json(data: dict) -> FraserFieldParams:
    return FraserFieldParams(
        field_rotation=float(data["field_rotation"]),
        phase=float(data["phase"]),
        ring_frequency=float(data["ring_frequency"]),
        twist=float(data["twist"]),
        zigzag_amplitude=float(data["zigzag_amplitude"]),
        spoke_count=int(data["spoke_count"]),
        sharpness=float(data["sharpness"]))


def decoded_from_json(data: dict) -> DecodedParams:
    g = data["geometry"]
    geom = GeometryParams(
        center_row=float(g["center_row"]), center_col=float(g["center_col"]),
        scale=float(g["scale"]), rotation=float(g["rotation"]),
        curvature=float(g["curvature"]),
        shape=ShapeParams(
            level_curvature=tuple(float(x) for x in g["level_curvature"]),
            shape_phase=float(g["shape_phase"])))
    vis = VisAppearance(
        opacity=float(data["vis"]["opacity"]),
        palette=tuple(tuple(float(c) for c in color)
                      for color in data["vis"]["palette"]))
    ir = IrAppearance(opacity=float(data["ir"]["opacity"]),
                      gray_lo=float(data["ir"]["gray_lo"]),
                      gray_hi=float(data["ir"]["gray_hi"]))
    return DecodedParams(geom=geom,
                         field_vis=_field_from_json(data["field_vis"]),
                         field_ir=_field_from_json(data["field_ir"]),
                         vis=vis, ir=ir)
