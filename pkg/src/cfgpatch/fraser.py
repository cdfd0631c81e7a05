"""Fraser-spiral texture fields and modality-specific rendering.

A single log-polar scalar field drives both modality textures: twisted
concentric rings with triangle-wave spokes, sharpened through a tanh.  The
visible branch quantizes the field into a four-color palette; the infrared
branch maps it affinely into a grayscale range.  Compositing is plain alpha
blending through the shared geometry mask, so pixels outside the mask
support are untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .geometry import GeometryParams, PatchMask

FIELD_ROTATION_RANGE = (-math.pi, math.pi)
PHASE_RANGE = (-math.pi, math.pi)
RING_FREQUENCY_RANGE = (1.0, 8.0)
TWIST_RANGE = (-4.0, 4.0)
ZIGZAG_RANGE = (0.0, 1.5)
SPOKE_COUNT_RANGE = (3, 12)
SHARPNESS_RANGE = (0.1, 6.0)
OPACITY_RANGE = (0.6, 1.0)

PALETTE_SIZE = 4

# Radius is normalized by the patch scale and clamped to keep the log term
# and the field's visual period well behaved near the center.
_RHO_MIN = 1e-3
_RHO_MAX = 4.0


@dataclass(frozen=True)
class FraserFieldParams:
    """Structural knobs of the spiral field, shared across modalities."""

    field_rotation: float = 0.0
    phase: float = 0.0
    ring_frequency: float = 4.0
    twist: float = 1.5
    zigzag_amplitude: float = 0.6
    spoke_count: int = 8
    sharpness: float = 2.0


@dataclass(frozen=True)
class VisAppearance:
    """Visible-branch appearance: opacity plus a 4-color palette."""

    opacity: float = 0.9
    palette: tuple[tuple[float, float, float], ...] = (
        (0.05, 0.05, 0.05),
        (0.9, 0.85, 0.1),
        (0.1, 0.3, 0.85),
        (0.95, 0.95, 0.95),
    )


@dataclass(frozen=True)
class IrAppearance:
    """Infrared-branch appearance: opacity and a grayscale range."""

    opacity: float = 0.9
    gray_lo: float = 0.1
    gray_hi: float = 0.9


def _triangle_wave(u: np.ndarray) -> np.ndarray:
    return 2.0 * np.abs(2.0 * (u - np.floor(u + 0.5))) - 1.0


def fraser_field_grid(geom: GeometryParams, fieldp: FraserFieldParams,
                      height: int, width: int) -> np.ndarray:
    """Evaluate the spiral field at every pixel center; values in [-1, 1]."""
    rows = np.arange(height, dtype=np.float64)[:, None] + 0.5
    cols = np.arange(width, dtype=np.float64)[None, :] + 0.5
    dr = rows - geom.center_row * height
    dc = cols - geom.center_col * width
    cos_r = math.cos(fieldp.field_rotation)
    sin_r = math.sin(fieldp.field_rotation)
    # Rotate the offset by -field_rotation (x ~ cols, y ~ rows).
    dx = dc * cos_r + dr * sin_r
    dy = -dc * sin_r + dr * cos_r
    radius = np.hypot(dx, dy)
    rho = np.clip(radius / (geom.scale * min(height, width)), _RHO_MIN, _RHO_MAX)
    angle = np.arctan2(dy, dx)
    raw = np.sin(
        2.0 * math.pi * fieldp.ring_frequency * np.log(rho)
        + fieldp.twist * angle
        + fieldp.phase
        + fieldp.zigzag_amplitude
        * _triangle_wave(fieldp.spoke_count * angle / (2.0 * math.pi))
    )
    out = np.tanh(fieldp.sharpness * raw) / math.tanh(fieldp.sharpness)
    return np.clip(out, -1.0, 1.0)


def fraser_field(pixel_row: float, pixel_col: float, geom: GeometryParams,
                 fieldp: FraserFieldParams, height: int, width: int) -> float:
    """Field value at a single (row, col) image position."""
    dr = pixel_row - geom.center_row * height
    dc = pixel_col - geom.center_col * width
    cos_r = math.cos(fieldp.field_rotation)
    sin_r = math.sin(fieldp.field_rotation)
    dx = dc * cos_r + dr * sin_r
    dy = -dc * sin_r + dr * cos_r
    radius = math.hypot(dx, dy)
    rho = min(max(radius / (geom.scale * min(height, width)), _RHO_MIN), _RHO_MAX)
    angle = math.atan2(dy, dx)
    u = fieldp.spoke_count * angle / (2.0 * math.pi)
    tri = 2.0 * abs(2.0 * (u - math.floor(u + 0.5))) - 1.0
    raw = math.sin(2.0 * math.pi * fieldp.ring_frequency * math.log(rho)
                   + fieldp.twist * angle + fieldp.phase
                   + fieldp.zigzag_amplitude * tri)
    out = math.tanh(fieldp.sharpness * raw) / math.tanh(fieldp.sharpness)
    return min(max(out, -1.0), 1.0)


def vis_texture_from_field(v: np.ndarray, app: VisAppearance) -> np.ndarray:
    """Quantize field values into the palette: v=-1 -> color 0, v=+1 -> color 3."""
    palette = np.asarray(app.palette, dtype=np.float64)
    idx = np.clip(np.floor((v + 1.0) / 2.0 * PALETTE_SIZE), 0,
                  PALETTE_SIZE - 1).astype(np.intp)
    return palette[idx]


def ir_texture_from_field(v: np.ndarray, app: IrAppearance) -> np.ndarray:
    """Affine map of field values into [gray_lo, gray_hi]."""
    return app.gray_lo + (np.asarray(v) + 1.0) / 2.0 * (app.gray_hi - app.gray_lo)


def render_vis(geom: GeometryParams, fieldp: FraserFieldParams,
               app: VisAppearance, height: int, width: int,
               flat: bool = False) -> np.ndarray:
    """Full-frame visible texture (H, W, 3); masking happens at composite.

    ``flat`` is the no-texture ablation switch: the frame becomes a constant
    fill of the first palette color.
    """
    if flat:
        palette = np.asarray(app.palette, dtype=np.float64)
        return np.broadcast_to(palette[0], (height, width, 3)).copy()
    v = fraser_field_grid(geom, fieldp, height, width)
    return vis_texture_from_field(v, app)


def render_ir(geom: GeometryParams, fieldp: FraserFieldParams,
              app: IrAppearance, height: int, width: int,
              flat: bool = False) -> np.ndarray:
    """Full-frame infrared texture (H, W, 1)."""
    if flat:
        level = 0.5 * (app.gray_lo + app.gray_hi)
        return np.full((height, width, 1), level, dtype=np.float64)
    v = fraser_field_grid(geom, fieldp, height, width)
    return ir_texture_from_field(v, app)[:, :, None]


def composite(image: np.ndarray, patch: np.ndarray, mask: PatchMask,
              opacity: float) -> np.ndarray:
    """Alpha-blend the patch onto the image through the shared mask."""
    if image.shape != patch.shape:
        raise ShapeError(f"image {image.shape} vs patch {patch.shape}")
    if image.shape[:2] != mask.values.shape:
        raise ShapeError(
            f"image {image.shape[:2]} vs mask {mask.values.shape}")
    alpha = opacity * mask.values[:, :, None]
    out = (1.0 - alpha) * image + alpha * patch
    return np.clip(out, 0.0, 1.0)
