"""PNG load/save for float images in [0, 1].

Visible images are RGB, infrared single-channel grayscale, masks 8-bit
grayscale.  Quantization is round(v * 255), matching the wire protocol.
"""

from __future__ import annotations

import numpy as np
from PIL import Image as PilImage

from .errors import ShapeError


def save_png(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[:, :, None]
    raw = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    if raw.shape[2] == 1:
        PilImage.fromarray(raw[:, :, 0], mode="L").save(path)
    elif raw.shape[2] == 3:
        PilImage.fromarray(raw, mode="RGB").save(path)
    else:
        raise ShapeError(f"cannot encode {raw.shape[2]}-channel image")


def load_png(path, channels: int) -> np.ndarray:
    with PilImage.open(path) as img:
        img = img.convert("RGB" if channels == 3 else "L")
        raw = np.asarray(img, dtype=np.uint8)
    if channels == 1:
        raw = raw[:, :, None]
    return raw.astype(np.float64) / 255.0
