"""Cross-modal adversarial patch synthesis engine.

Builds curved-edge fractal patch geometry shared between visible and
infrared imagery, renders modality-specific spiral textures onto it, and
optimizes the whole parameter set with particle swarm search under
expectation over transformation against a pluggable black-box scorer.
"""

from .config import RunConfig, ScorerSpec, config_from_dict, load_config
from .datasets import SynthSpec, generate_dataset, load_labels, load_pairs
from .eot import EotConfig, TransformSample, apply_transform, sample_transform
from .evaluation import (
    AttackOutcome,
    ImagePair,
    clean_filter,
    compute_asr,
    paired_success,
    run_attacks,
)
from .fraser import FraserFieldParams, IrAppearance, VisAppearance, composite
from .geometry import (
    GeometryParams,
    PatchMask,
    ShapeParams,
    build_fractal_layout,
    rasterize_mask,
)
from .objective import (
    LossBreakdown,
    ObjectiveConfig,
    RegWeights,
    attack_reward,
    evaluate_candidate,
    joint_loss,
    modality_loss,
    predict,
    strongest_competitor,
)
from .params import DecodedParams, ParamLayout, render_patch
from .pso import OptimizationResult, PsoConfig, SwarmState, optimize, scene_init
from .victim import RemoteScorer, ToyScorer, ToyVictim, toy_score

__version__ = "0.1.0"

__all__ = [
    "AttackOutcome", "DecodedParams", "EotConfig", "FraserFieldParams",
    "GeometryParams", "ImagePair", "IrAppearance", "LossBreakdown",
    "ObjectiveConfig", "OptimizationResult", "ParamLayout", "PatchMask",
    "PsoConfig", "RegWeights", "RemoteScorer", "RunConfig", "ScorerSpec",
    "ShapeParams", "SwarmState", "SynthSpec", "ToyScorer", "ToyVictim",
    "TransformSample", "VisAppearance", "apply_transform", "attack_reward",
    "build_fractal_layout", "clean_filter", "composite", "compute_asr",
    "config_from_dict", "evaluate_candidate", "generate_dataset",
    "joint_loss", "load_config", "load_labels", "load_pairs",
    "modality_loss", "optimize", "paired_success", "predict",
    "rasterize_mask", "render_patch", "run_attacks", "sample_transform",
    "scene_init", "strongest_competitor", "toy_score",
]
