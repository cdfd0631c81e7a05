"""Synthetic paired-data generation and dataset manifest I/O.

Each class is a smooth procedural scene: a few low-frequency color
gratings around a class-specific tint.  The infrared counterpart is a
contrast-stretched luma transform with a class-specific base level.
Samples are jittered noisy instances of their class template, and the
matched toy victim is built from the same templates, so generated datasets
pass the clean filter at high retention while staying attackable by
structured patches.

Manifest schema (JSON list): [{"pair_id", "vis_path", "ir_path", "label"}]
with paths relative to the manifest's directory.  The label map is a text
file with one ordered class name per line; the first 30 names default to
the shipped label asset.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .evaluation import ImagePair
from .imgio import load_png, save_png
from .seeding import derive_seed
from .victim import ToyVictim

LUMA = np.array([0.299, 0.587, 0.114])

MANIFEST_NAME = "manifest.json"
LABELS_NAME = "labels.txt"
VICTIM_NAME = "victim_templates.npz"


@dataclass(frozen=True)
class SynthSpec:
    """Knobs of the synthetic paired-data generator.

    The class-separation knobs (contrast, tints, ir_band) are calibrated so
    the margins of a 30-class template-cosine victim sit just above sample
    noise: clean pairs classify correctly, and a patch-sized perturbation
    can flip them.
    """

    class_count: int = 30
    pairs_per_class: int = 10
    height: int = 64
    width: int = 64
    seed: int = 0
    gratings: int = 3
    contrast: float = 0.05
    color_tint: float = 0.05
    ir_band: float = 0.12
    ir_level_tint: float = 0.05
    noise_sigma: float = 0.012
    brightness_jitter: float = 0.02

    def validate(self) -> None:
        if self.class_count < 2:
            raise ConfigError("class_count must be >= 2")
        if self.pairs_per_class < 0:
            raise ConfigError("pairs_per_class must be >= 0")
        if self.height < 16 or self.width < 16:
            raise ConfigError("images must be at least 16x16")


def default_label_names(count: int) -> list[str]:
    """First ``count`` names from the shipped 30-name label asset,
    padded with generic names beyond it."""
    asset = importlib.resources.files("cfgpatch").joinpath("data/labels30.txt")
    names = asset.read_text().splitlines()
    if count <= len(names):
        return names[:count]
    return names + [f"class_{i:02d}" for i in range(len(names), count)]


def class_template_vis(spec: SynthSpec, label: int) -> np.ndarray:
    rng = np.random.default_rng(derive_seed(spec.seed, "class", label))
    rows = np.arange(spec.height)[:, None] / spec.height - 0.5
    cols = np.arange(spec.width)[None, :] / spec.width - 0.5
    field = np.zeros((spec.height, spec.width, 3))
    for _ in range(spec.gratings):
        theta = rng.uniform(0.0, np.pi)
        freq = rng.uniform(0.6, 2.2)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(-1.0, 1.0, size=3)
        wave = np.cos(2.0 * np.pi * freq
                      * (np.cos(theta) * cols + np.sin(theta) * rows) + phase)
        field += wave[:, :, None] * amp[None, None, :]
    field /= np.abs(field).max()
    tint = rng.uniform(-spec.color_tint, spec.color_tint, size=3)
    return np.clip(0.5 + tint[None, None, :] + spec.contrast * field, 0.0, 1.0)


def class_template_ir(spec: SynthSpec, vis_template: np.ndarray,
                      label: int) -> np.ndarray:
    """Luma transform with a full-range contrast stretch, re-banded around a
    class-specific level."""
    rng = np.random.default_rng(derive_seed(spec.seed, "ir", label))
    luma = vis_template @ LUMA
    lo, hi = float(luma.min()), float(luma.max())
    stretched = (luma - lo) / (hi - lo) if hi > lo else np.full_like(luma, 0.5)
    level = 0.5 + rng.uniform(-spec.ir_level_tint, spec.ir_level_tint)
    return np.clip(level + spec.ir_band * (stretched - 0.5), 0.0, 1.0)[:, :, None]


def sample_pair(spec: SynthSpec, vis_template: np.ndarray,
                ir_template: np.ndarray, label: int, index: int):
    rng = np.random.default_rng(derive_seed(spec.seed, "pair", label, index))
    vis = np.clip(vis_template
                  + rng.normal(0.0, spec.noise_sigma, vis_template.shape)
                  + rng.uniform(-spec.brightness_jitter, spec.brightness_jitter),
                  0.0, 1.0)
    ir = np.clip(ir_template
                 + rng.normal(0.0, spec.noise_sigma, ir_template.shape)
                 + rng.uniform(-spec.brightness_jitter, spec.brightness_jitter),
                 0.0, 1.0)
    return vis, ir


def generate_dataset(spec: SynthSpec, out_dir) -> Path:
    """Write PNG pairs, manifest, label map, and the matched toy victim.

    Returns the manifest path.  Deterministic: a fixed spec reproduces
    byte-identical files.
    """
    spec.validate()
    out = Path(out_dir)
    (out / "pairs").mkdir(parents=True, exist_ok=True)

    templates_vis = np.stack([class_template_vis(spec, k)
                              for k in range(spec.class_count)])
    templates_ir = np.stack([class_template_ir(spec, templates_vis[k], k)
                             for k in range(spec.class_count)])
    victim = ToyVictim.from_template_images(templates_vis, templates_ir,
                                            seed=spec.seed)
    victim.save(out / VICTIM_NAME)

    names = default_label_names(spec.class_count)
    (out / LABELS_NAME).write_text("".join(n + "\n" for n in names))

    entries = []
    index = 0
    for label in range(spec.class_count):
        for j in range(spec.pairs_per_class):
            vis, ir = sample_pair(spec, templates_vis[label],
                                  templates_ir[label], label, j)
            pair_id = f"p{index:04d}"
            vis_rel = f"pairs/{pair_id}_vis.png"
            ir_rel = f"pairs/{pair_id}_ir.png"
            save_png(out / vis_rel, vis)
            save_png(out / ir_rel, ir)
            entries.append({"pair_id": pair_id, "vis_path": vis_rel,
                            "ir_path": ir_rel, "label": label})
            index += 1

    manifest_path = out / MANIFEST_NAME
    manifest_path.write_text(json.dumps(entries, indent=2) + "\n")
    return manifest_path


def load_labels(path) -> list[str]:
    names = [line for line in Path(path).read_text().splitlines() if line]
    if len(names) < 2:
        raise ConfigError(f"label map {path} needs at least 2 names")
    return names


def load_pairs(manifest_path) -> list[ImagePair]:
    manifest_path = Path(manifest_path)
    try:
        entries = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {manifest_path}: {exc}") from exc
    if not isinstance(entries, list):
        raise ConfigError("manifest must be a JSON list of pair entries")
    base = manifest_path.parent
    pairs = []
    for entry in entries:
        missing = {"pair_id", "vis_path", "ir_path", "label"} - set(entry)
        if missing:
            raise ConfigError(f"manifest entry missing {sorted(missing)}")
        pair = ImagePair(vis=load_png(base / entry["vis_path"], channels=3),
                         ir=load_png(base / entry["ir_path"], channels=1),
                         label=int(entry["label"]),
                         pair_id=str(entry["pair_id"]))
        pair.validate()
        pairs.append(pair)
    return pairs
