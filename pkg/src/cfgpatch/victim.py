"""Black-box scorer boundary.

A scorer exposes two methods and nothing else about its internals:

  describe() -> ScorerDescriptor
  score(image, modality) -> np.ndarray of K per-class similarity scores

ToyScorer is the deterministic in-process stand-in used for desk-scale
runs: it area-averages the image down to 32x32, L2-normalizes, and takes
cosine similarity with per-class templates.  It is intentionally weak so
attacks succeed quickly.  RemoteScorer is the client side of the wire
protocol and talks to an external process over TCP or stdio.
"""

from __future__ import annotations

import select
import socket
import subprocess
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import wire
from .errors import (
    ClassCountMismatchError,
    MalformedResponseError,
    ParameterError,
    ScorerTimeoutError,
    ShapeError,
    TransportError,
)

TEMPLATE_SIZE = 32
DEFAULT_TIMEOUT = 30.0

_CHANNELS = {"vis": 3, "ir": 1}


@dataclass(frozen=True)
class ScorerDescriptor:
    kind: str
    class_count: int
    modalities: tuple[str, ...] = ("vis", "ir")
    concurrent: bool = False


@lru_cache(maxsize=64)
def _area_weights(src: int, dst: int) -> np.ndarray:
    """Row weights for area-average resampling from src to dst cells.

    Each output cell spans [i*src/dst, (i+1)*src/dst) in source pixels and
    averages the overlapped pixels weighted by overlap length.  Rows sum
    to 1 exactly enough for cosine scoring purposes.
    """
    weights = np.zeros((dst, src), dtype=np.float64)
    ratio = src / dst
    for i in range(dst):
        lo = i * ratio
        hi = (i + 1) * ratio
        j0 = int(np.floor(lo))
        j1 = min(int(np.ceil(hi)), src)
        for j in range(j0, j1):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                weights[i, j] = overlap / ratio
    weights.setflags(write=False)
    return weights


def area_resample(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Area-average resample of an (H, W, C) image to (height, width, C)."""
    wr = _area_weights(image.shape[0], height)
    wc = _area_weights(image.shape[1], width)
    stacked = np.moveaxis(image, 2, 0)          # (C, H, W)
    resampled = wr @ stacked @ wc.T             # (C, height, width)
    return np.moveaxis(resampled, 0, 2)


@dataclass(frozen=True)
class ToyVictim:
    """Per-class template images, unit-normalized after flattening."""

    templates_vis: np.ndarray  # (K, 32*32*3)
    templates_ir: np.ndarray   # (K, 32*32*1)
    seed: int = 0

    @property
    def class_count(self) -> int:
        return self.templates_vis.shape[0]

    @staticmethod
    def _normalize(flat: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(flat, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return flat / norms

    @classmethod
    def from_template_images(cls, vis_images: np.ndarray,
                             ir_images: np.ndarray, seed: int = 0) -> "ToyVictim":
        """Build from (K, H, W, C) float template stacks (any H, W)."""
        vis = np.stack([area_resample(img, TEMPLATE_SIZE, TEMPLATE_SIZE).ravel()
                        for img in vis_images])
        ir = np.stack([area_resample(img, TEMPLATE_SIZE, TEMPLATE_SIZE).ravel()
                       for img in ir_images])
        return cls(templates_vis=cls._normalize(vis),
                   templates_ir=cls._normalize(ir), seed=seed)

    @classmethod
    def random(cls, seed: int, class_count: int) -> "ToyVictim":
        rng = np.random.default_rng(seed)
        vis = rng.uniform(size=(class_count, TEMPLATE_SIZE, TEMPLATE_SIZE, 3))
        ir = rng.uniform(size=(class_count, TEMPLATE_SIZE, TEMPLATE_SIZE, 1))
        return cls.from_template_images(vis, ir, seed=seed)

    def save(self, path) -> None:
        np.savez(path, templates_vis=self.templates_vis,
                 templates_ir=self.templates_ir, seed=self.seed)

    @classmethod
    def load(cls, path) -> "ToyVictim":
        data = np.load(path)
        return cls(templates_vis=data["templates_vis"],
                   templates_ir=data["templates_ir"],
                   seed=int(data["seed"]))


def toy_score(image: np.ndarray, modality: str, victim: ToyVictim) -> np.ndarray:
    """Cosine similarity of the downsampled image with every class template.

    All-zero images score zero against every class (zero-vector guard).
    """
    if modality not in _CHANNELS:
        raise ParameterError(f"unknown modality {modality!r}")
    if image.ndim != 3 or image.shape[2] != _CHANNELS[modality]:
        raise ShapeError(
            f"{modality} image must have {_CHANNELS[modality]} channels, "
            f"got shape {image.shape}")
    flat = area_resample(image, TEMPLATE_SIZE, TEMPLATE_SIZE).ravel()
    norm = np.linalg.norm(flat)
    if norm == 0.0:
        return np.zeros(victim.class_count)
    unit = flat / norm
    templates = victim.templates_vis if modality == "vis" else victim.templates_ir
    return templates @ unit


@dataclass(frozen=True)
class ToyScorer:
    """In-process scorer; concurrent-safe because the victim is immutable."""

    victim: ToyVictim

    def describe(self) -> ScorerDescriptor:
        return ScorerDescriptor(kind="toy", class_count=self.victim.class_count,
                                concurrent=True)

    def score(self, image: np.ndarray, modality: str) -> np.ndarray:
        return toy_score(image, modality, self.victim)


class _SocketChannel:
    def __init__(self, address: str, timeout: float):
        host, _, port = address.rpartition(":")
        try:
            self._sock = socket.create_connection((host or "127.0.0.1",
                                                   int(port)), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {address}: {exc}") from exc
        self._sock.settimeout(timeout)
        self._file = self._sock.makefile("rwb")

    def send_line(self, data: bytes) -> None:
        try:
            self._file.write(data)
            self._file.flush()
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv_line(self) -> bytes:
        try:
            line = self._file.readline()
        except socket.timeout as exc:
            raise ScorerTimeoutError("scorer did not answer in time") from exc
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from exc
        if not line:
            raise TransportError("connection closed by scorer")
        return line

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass


class _ProcessChannel:
    def __init__(self, command: list[str], timeout: float):
        self._timeout = timeout
        try:
            self._proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as exc:
            raise TransportError(f"cannot spawn {command!r}: {exc}") from exc
        self._buffer = b""

    def send_line(self, data: bytes) -> None:
        if self._proc.poll() is not None:
            raise TransportError("scorer subprocess exited")
        try:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()
        except (OSError, BrokenPipeError) as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv_line(self) -> bytes:
        deadline = time.monotonic() + self._timeout
        fd = self._proc.stdout.fileno()
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ScorerTimeoutError("scorer did not answer in time")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise ScorerTimeoutError("scorer did not answer in time")
            chunk = self._proc.stdout.read1(65536)
            if not chunk:
                raise TransportError("scorer subprocess closed its stdout")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line + b"\n"

    def close(self) -> None:
        for stream in (self._proc.stdin, self._proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        self._proc.terminate()
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()


class RemoteScorer:
    """Wire-protocol client; one in-flight request per connection."""

    def __init__(self, channel, timeout: float = DEFAULT_TIMEOUT):
        self._channel = channel
        self._next_id = 0
        self._descriptor = self._handshake()

    @classmethod
    def connect(cls, address: str, timeout: float = DEFAULT_TIMEOUT):
        return cls(_SocketChannel(address, timeout), timeout)

    @classmethod
    def spawn(cls, command: list[str], timeout: float = DEFAULT_TIMEOUT):
        return cls(_ProcessChannel(command, timeout), timeout)

    def _handshake(self) -> ScorerDescriptor:
        self._channel.send_line(wire.encode_message(wire.hello_message()))
        reply = wire.decode_message(self._channel.recv_line())
        if "error" in reply:
            raise TransportError(f"scorer refused handshake: {reply['error']}")
        ready = reply.get("ready")
        if not isinstance(ready, dict) or "class_count" not in ready:
            raise MalformedResponseError(f"bad handshake reply: {reply!r}")
        return ScorerDescriptor(
            kind="remote",
            class_count=int(ready["class_count"]),
            modalities=tuple(ready.get("modalities", ("vis", "ir"))),
            concurrent=bool(ready.get("concurrent", False)),
        )

    def describe(self) -> ScorerDescriptor:
        return self._descriptor

    def score(self, image: np.ndarray, modality: str) -> np.ndarray:
        request_id = self._next_id
        self._next_id += 1
        request = wire.score_request(request_id, modality, image)
        self._channel.send_line(wire.encode_message(request))
        reply = wire.decode_message(self._channel.recv_line())
        if "error" in reply:
            raise MalformedResponseError(
                f"scorer error for request {request_id}: {reply['error']}")
        if reply.get("id") != request_id:
            raise MalformedResponseError(
                f"response id {reply.get('id')!r} does not echo {request_id}")
        scores = reply.get("scores")
        if not isinstance(scores, list) or not all(
                isinstance(s, (int, float)) for s in scores):
            raise MalformedResponseError(f"bad scores field: {scores!r}")
        if len(scores) != self._descriptor.class_count:
            raise ClassCountMismatchError(
                f"got {len(scores)} scores, handshake declared "
                f"{self._descriptor.class_count}")
        out = np.asarray(scores, dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise MalformedResponseError("scores contain non-finite values")
        return out

    def close(self) -> None:
        self._channel.close()
