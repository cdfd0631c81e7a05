"""Line-oriented JSON protocol between the engine and external scorers.

One message per line, newline-terminated, canonical encoding (sorted keys,
no whitespace).  Protocol version 1:

  client -> server   {"hello": {"protocol": 1}}
  server -> client   {"ready": {"class_count": K, "modalities": ["vis","ir"],
                                "concurrent": false}}
  client -> server   {"channels": C, "height": H, "id": N, "modality": "vis",
                      "pixels": "<base64 row-major uint8>", "width": W}
  server -> client   {"id": N, "scores": [s_0, ..., s_{K-1}]}

Per-request failures come back as {"error": "...", "id": N}; a handshake
refusal is {"error": "..."} with no id, after which the server closes the
connection.  Pixels are quantized to 8 bits (round(v * 255)); the rounding
is below attack-relevant precision and keeps payloads small.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .errors import MalformedResponseError

PROTOCOL_VERSION = 1


def encode_message(message: dict) -> bytes:
    """Canonical one-line encoding; the round-trip test pins this form."""
    return (json.dumps(message, sort_keys=True,
                       separators=(",", ":")) + "\n").encode("utf-8")


def decode_message(line) -> dict:
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    try:
        message = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedResponseError(f"unparseable message: {exc}") from exc
    if not isinstance(message, dict):
        raise MalformedResponseError("message is not a JSON object")
    return message


def quantize_image(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)


def dequantize_image(raw: np.ndarray) -> np.ndarray:
    return raw.astype(np.float64) / 255.0


def hello_message() -> dict:
    return {"hello": {"protocol": PROTOCOL_VERSION}}


def ready_message(class_count: int, modalities: list[str],
                  concurrent: bool) -> dict:
    return {"ready": {"class_count": class_count, "modalities": modalities,
                      "concurrent": concurrent}}


def score_request(request_id: int, modality: str, image: np.ndarray) -> dict:
    height, width, channels = image.shape
    pixels = base64.b64encode(quantize_image(image).tobytes()).decode("ascii")
    return {"id": request_id, "modality": modality, "width": width,
            "height": height, "channels": channels, "pixels": pixels}


def score_response(request_id: int, scores) -> dict:
    return {"id": request_id, "scores": [float(s) for s in scores]}


def error_response(message: str, request_id: int | None = None) -> dict:
    out: dict = {"error": message}
    if request_id is not None:
        out["id"] = request_id
    return out


def image_from_request(message: dict) -> tuple[np.ndarray, str, int]:
    """Decode a score request into (float image, modality, id)."""
    try:
        request_id = int(message["id"])
        modality = message["modality"]
        height = int(message["height"])
        width = int(message["width"])
        channels = int(message["channels"])
        raw = base64.b64decode(message["pixels"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedResponseError(f"bad score request: {exc}") from exc
    if modality not in ("vis", "ir"):
        raise MalformedResponseError(f"unknown modality {modality!r}")
    expected = height * width * channels
    if len(raw) != expected:
        raise MalformedResponseError(
            f"pixel payload holds {len(raw)} bytes, expected {expected}")
    flat = np.frombuffer(raw, dtype=np.uint8)
    return dequantize_image(flat.reshape(height, width, channels)), modality, \
        request_id
