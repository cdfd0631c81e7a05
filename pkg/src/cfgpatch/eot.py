"""Expectation-over-transformation sampling and application.

The transformation distribution covers mild affine perturbations, scale
changes, Gaussian blur, and photometric variation.  Stage order is fixed
and pinned by tests: geometric warp (rotation about the image center, then
scale, then translation; bilinear, edge-clamp padding), then blur, then
photometric gain/offset with clamping.  Ranges default to mild values so
an optimized patch survives them; everything is config-exposed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ParameterError

BLUR_SKIP_SIGMA = 0.05


@dataclass(frozen=True)
class EotConfig:
    rotation_max: float = 10.0          # degrees
    translate_max: float = 0.03         # fraction of min(H, W)
    scale_range: tuple[float, float] = (0.9, 1.1)
    blur_sigma_max: float = 1.2         # pixels
    brightness_max: float = 0.08
    contrast_range: tuple[float, float] = (0.9, 1.1)
    samples_per_eval: int = 2
    shared_across_modalities: bool = True

    def validate(self) -> None:
        if self.samples_per_eval < 1:
            raise ParameterError("samples_per_eval must be >= 1")
        if self.rotation_max < 0 or self.translate_max < 0 \
                or self.blur_sigma_max < 0 or self.brightness_max < 0:
            raise ParameterError("transformation magnitudes must be >= 0")
        if self.scale_range[0] > self.scale_range[1] \
                or self.contrast_range[0] > self.contrast_range[1]:
            raise ParameterError("ranges must be ordered (lo, hi)")

    @classmethod
    def identity(cls, samples_per_eval: int = 1) -> "EotConfig":
        """Degenerate distribution containing only the identity transform."""
        return cls(rotation_max=0.0, translate_max=0.0, scale_range=(1.0, 1.0),
                   blur_sigma_max=0.0, brightness_max=0.0,
                   contrast_range=(1.0, 1.0), samples_per_eval=samples_per_eval)


@dataclass(frozen=True)
class TransformSample:
    rotation: float = 0.0               # degrees
    translation: tuple[float, float] = (0.0, 0.0)  # (dr, dc) pixels
    scale: float = 1.0
    blur_sigma: float = 0.0
    brightness: float = 0.0
    contrast: float = 1.0


def sample_transform(config: EotConfig, rng: np.random.Generator,
                     height: int, width: int) -> TransformSample:
    """One uniform draw per field; deterministic given the rng state."""
    config.validate()
    max_shift = config.translate_max * min(height, width)
    return TransformSample(
        rotation=float(rng.uniform(-config.rotation_max, config.rotation_max)),
        translation=(float(rng.uniform(-max_shift, max_shift)),
                     float(rng.uniform(-max_shift, max_shift))),
        scale=float(rng.uniform(*config.scale_range)),
        blur_sigma=float(rng.uniform(0.0, config.blur_sigma_max)),
        brightness=float(rng.uniform(-config.brightness_max,
                                     config.brightness_max)),
        contrast=float(rng.uniform(*config.contrast_range)),
    )


def _warp(image: np.ndarray, t: TransformSample) -> np.ndarray:
    theta = math.radians(t.rotation)
    center = np.array([(image.shape[0] - 1) / 2.0, (image.shape[1] - 1) / 2.0])
    forward = t.scale * np.array([[math.cos(theta), -math.sin(theta)],
                                  [math.sin(theta), math.cos(theta)]])
    inverse = np.linalg.inv(forward)
    offset = center - inverse @ (center + np.asarray(t.translation))
    out = np.empty_like(image)
    for ch in range(image.shape[2]):
        ndimage.affine_transform(image[:, :, ch], inverse, offset=offset,
                                 output=out[:, :, ch], order=1, mode="nearest")
    return out


def apply_transform(image: np.ndarray, t: TransformSample) -> np.ndarray:
    """Warp, then blur, then photometric adjustment; dimensions unchanged.

    Exact-identity stages are skipped so an identity sample reproduces the
    input bitwise.
    """
    if image.shape[0] < 16 or image.shape[1] < 16:
        raise ParameterError(f"image too small to transform: {image.shape}")
    out = image
    if t.rotation != 0.0 or t.scale != 1.0 or t.translation != (0.0, 0.0):
        out = _warp(out, t)
    if t.blur_sigma >= BLUR_SKIP_SIGMA:
        blurred = np.empty_like(out)
        for ch in range(out.shape[2]):
            ndimage.gaussian_filter(out[:, :, ch], sigma=t.blur_sigma,
                                    output=blurred[:, :, ch], mode="nearest")
        out = blurred
    if t.contrast != 1.0 or t.brightness != 0.0:
        out = np.clip(t.contrast * out + t.brightness, 0.0, 1.0)
    if out is image:
        out = image.copy()
    return out
