"""Run configuration: one JSON document, strictly validated.

Unknown keys are rejected at every level so typos never silently fall back
to defaults.  Every constant of the attack (optimizer, transformation
distribution, objective weights, ablation switches) is reachable here;
`--set dotted.key=value` overrides individual entries from the CLI.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .datasets import SynthSpec
from .eot import EotConfig
from .errors import ConfigError
from .objective import ObjectiveConfig, RegWeights
from .params import ParamLayout
from .pso import PsoConfig
from .victim import RemoteScorer, ToyScorer, ToyVictim


@dataclass(frozen=True)
class ScorerSpec:
    """Where scores come from: in-process toy victim or remote protocol."""

    kind: str = "toy"                 # "toy" | "remote"
    templates: str | None = None      # toy: path to victim_templates.npz
    seed: int | None = None           # toy: random victim fallback
    class_count: int | None = None    # toy: used with seed
    address: str | None = None        # remote: host:port
    command: list[str] | None = None  # remote: subprocess argv
    timeout: float = 30.0

    def validate(self, allow_unresolved_toy: bool = False) -> None:
        if self.kind == "toy":
            if allow_unresolved_toy:
                return
            if self.templates is None and (self.seed is None
                                           or self.class_count is None):
                raise ConfigError(
                    "toy scorer needs 'templates' or 'seed'+'class_count'")
        elif self.kind == "remote":
            if (self.address is None) == (self.command is None):
                raise ConfigError(
                    "remote scorer needs exactly one of 'address'/'command'")
        else:
            raise ConfigError(f"unknown scorer kind {self.kind!r}")

    def build(self):
        self.validate()
        if self.kind == "toy":
            if self.templates is not None:
                return ToyScorer(victim=ToyVictim.load(self.templates))
            return ToyScorer(victim=ToyVictim.random(self.seed,
                                                     self.class_count))
        if self.address is not None:
            return RemoteScorer.connect(self.address, timeout=self.timeout)
        return RemoteScorer.spawn(list(self.command), timeout=self.timeout)


@dataclass(frozen=True)
class RunConfig:
    manifest: str | None = None
    synth: SynthSpec | None = None
    labels: str | None = None
    scorer: ScorerSpec = field(default_factory=ScorerSpec)
    pso: PsoConfig = field(default_factory=PsoConfig)
    eot: EotConfig = field(default_factory=EotConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    layout: ParamLayout = field(default_factory=ParamLayout)
    search: str = "pso"
    early_stop: bool = True
    workers: int = 1
    seed: int = 0
    output_dir: str = "runs/latest"

    def validate(self) -> None:
        if (self.manifest is None) == (self.synth is None):
            raise ConfigError("config needs exactly one of 'manifest'/'synth'")
        if self.search not in ("pso", "random"):
            raise ConfigError(f"unknown search mode {self.search!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        # A synth dataset ships its own matched victim, so a bare toy scorer
        # resolves against it at run time.
        self.scorer.validate(allow_unresolved_toy=self.synth is not None)
        self.pso.validate()
        self.eot.validate()
        if not 1 <= self.layout.fractal_depth <= 5:
            raise ConfigError("fractal_depth must be in [1, 5]")


_SECTION_TYPES = {
    "synth": SynthSpec,
    "scorer": ScorerSpec,
    "pso": PsoConfig,
    "eot": EotConfig,
    "objective": ObjectiveConfig,
    "layout": ParamLayout,
}

_TUPLE_FIELDS = {"scale_range", "contrast_range"}


def _build_section(cls, data: dict, path: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in {path}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        if name == "weights" and isinstance(value, dict):
            value = _build_section(RegWeights, value, f"{path}.weights")
        elif name in _TUPLE_FIELDS and isinstance(value, list):
            value = tuple(value)
        elif name == "command" and value is not None:
            value = [str(v) for v in value]
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad section {path}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        if name in _SECTION_TYPES and value is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"section {name!r} must be an object")
            value = _build_section(_SECTION_TYPES[name], value, name)
        kwargs[name] = value
    config = RunConfig(**kwargs)
    config.validate()
    return config


def config_to_dict(config: RunConfig) -> dict:
    out = dataclasses.asdict(config)
    if out["synth"] is None:
        del out["synth"]
    else:
        del out["manifest"]
    return out


def load_config(path, overrides: list[str] = ()) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for override in overrides:
        data = apply_override(data, override)
    return config_from_dict(data)


def apply_override(data: dict, override: str) -> dict:
    """Apply one ``dotted.key=value`` override; values parse as JSON when
    possible and fall back to plain strings."""
    if "=" not in override:
        raise ConfigError(f"override {override!r} must look like key=value")
    key, raw = override.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot descend into {part!r} of {key!r}")
    node[parts[-1]] = value
    return data
