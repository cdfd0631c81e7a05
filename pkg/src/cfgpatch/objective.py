"""Attack objective: margin losses, rewards, joint coupling, regularizers.

The joint loss leans on the harder modality (max term) while keeping
pressure on the easier one (min term) and penalizing one-sided progress
(reward-balance term).  Candidate evaluation estimates the expected joint
loss under sampled transformations by plain Monte-Carlo averaging and adds
weighted regularization computed on the untransformed patch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eot import EotConfig, apply_transform, sample_transform
from .errors import EvaluationError, ParameterError, ScorerError, ShapeError
from .fraser import composite
from .geometry import GeometryParams, PatchMask
from .params import DecodedParams, ParamLayout, render_patch


@dataclass(frozen=True)
class RegWeights:
    area: float = 1.0
    tv_mask: float = 0.1
    geometry: float = 0.5
    tv_texture: float = 0.05


@dataclass(frozen=True)
class ObjectiveConfig:
    margin: float = 0.02          # safety margin added inside the softplus
    lam_min: float = 0.55         # weight of the easier modality's loss
    lam_bal: float = 0.25         # weight of the reward-imbalance penalty
    lam_reg: float = 0.01         # weight of the regularization term
    weights: RegWeights = field(default_factory=RegWeights)


@dataclass(frozen=True)
class LossBreakdown:
    loss_vis: float
    loss_ir: float
    reward_vis: float
    reward_ir: float
    joint: float
    regularization: float
    total: float


def predict(scores: np.ndarray) -> int:
    """Argmax class; ties break to the lowest index."""
    scores = np.asarray(scores)
    if scores.size == 0:
        raise ShapeError("empty score vector")
    return int(np.argmax(scores))


def strongest_competitor(scores: np.ndarray, y: int) -> tuple[float, int]:
    """Best non-true class: (score, index), ties to the lowest index."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= y < scores.size:
        raise ParameterError(f"label {y} outside [0, {scores.size})")
    masked = scores.copy()
    masked[y] = -np.inf
    idx = int(np.argmax(masked))
    return float(scores[idx]), idx


def _softplus(x: float) -> float:
    return max(x, 0.0) + np.log1p(np.exp(-abs(x)))


def modality_loss(scores: np.ndarray, y: int, margin: float) -> float:
    """softplus(s_y - s_strongest_competitor + margin); small once fooled."""
    if margin <= 0:
        raise ParameterError("margin must be > 0")
    comp, _ = strongest_competitor(scores, y)
    return float(_softplus(float(scores[y]) - comp + margin))


def attack_reward(scores: np.ndarray, y: int) -> float:
    """How far the best wrong class leads the true class; > 0 means fooled."""
    comp, _ = strongest_competitor(scores, y)
    return comp - float(scores[y])


def joint_loss(loss_vis: float, loss_ir: float, reward_vis: float,
               reward_ir: float, lam_min: float, lam_bal: float) -> float:
    if lam_min < 0 or lam_bal < 0:
        raise ParameterError("loss weights must be >= 0")
    return (max(loss_vis, loss_ir) + lam_min * min(loss_vis, loss_ir)
            + lam_bal * abs(reward_vis - reward_ir))


def _total_variation(values: np.ndarray) -> float:
    return float(np.abs(np.diff(values, axis=0)).sum()
                 + np.abs(np.diff(values, axis=1)).sum())


def _masked_tv(texture: np.ndarray, support: np.ndarray) -> float:
    """Anisotropic TV over neighbor pairs that both lie in the support."""
    total = 0.0
    pair_rows = support[1:, :] & support[:-1, :]
    pair_cols = support[:, 1:] & support[:, :-1]
    for ch in range(texture.shape[2]):
        plane = texture[:, :, ch]
        total += float(np.abs(np.diff(plane, axis=0))[pair_rows].sum())
        total += float(np.abs(np.diff(plane, axis=1))[pair_cols].sum())
    return total


def regularization(mask: PatchMask, tex_vis: np.ndarray, tex_ir: np.ndarray,
                   geom: GeometryParams, geom_init: GeometryParams,
                   weights: RegWeights) -> float:
    """Area, mask smoothness, geometric drift, and texture smoothness."""
    values = mask.values
    pixels = values.size
    support = values > 0.0
    drift = ((geom.center_row - geom_init.center_row) ** 2
             + (geom.center_col - geom_init.center_col) ** 2
             + (geom.scale - geom_init.scale) ** 2)
    return (weights.area * float(values.mean())
            + weights.tv_mask * _total_variation(values) / pixels
            + weights.geometry * drift
            + weights.tv_texture * (_masked_tv(tex_vis, support)
                                    + _masked_tv(tex_ir, support)) / pixels)


def evaluate_candidate(vector: np.ndarray, pair, scorer, eot: EotConfig,
                       objective: ObjectiveConfig, layout: ParamLayout,
                       seed: int, geom_init: GeometryParams | None = None,
                       tag: int | None = None) -> LossBreakdown:
    """Render once, average the joint loss over sampled transformations.

    The rng stream is derived from ``seed`` alone, so candidates evaluated
    with the same seed see the same transformations (common random numbers
    across a swarm iteration).  Scorer failures surface as EvaluationError
    tagged with the particle id.
    """
    decoded = layout.decode(vector)
    height, width = pair.vis.shape[:2]
    mask, tex_vis, tex_ir = render_patch(decoded, height, width, layout)
    adv_vis = composite(pair.vis, tex_vis, mask, decoded.vis.opacity)
    adv_ir = composite(pair.ir, tex_ir, mask, decoded.ir.opacity)
    if geom_init is None:
        geom_init = decoded.geom

    rng = np.random.default_rng(seed)
    losses_vis, losses_ir, rewards_vis, rewards_ir, joints = [], [], [], [], []
    try:
        for _ in range(eot.samples_per_eval):
            t_vis = sample_transform(eot, rng, height, width)
            t_ir = t_vis if eot.shared_across_modalities \
                else sample_transform(eot, rng, height, width)
            s_vis = scorer.score(apply_transform(adv_vis, t_vis), "vis")
            s_ir = scorer.score(apply_transform(adv_ir, t_ir), "ir")
            l_vis = modality_loss(s_vis, pair.label, objective.margin)
            l_ir = modality_loss(s_ir, pair.label, objective.margin)
            r_vis = attack_reward(s_vis, pair.label)
            r_ir = attack_reward(s_ir, pair.label)
            losses_vis.append(l_vis)
            losses_ir.append(l_ir)
            rewards_vis.append(r_vis)
            rewards_ir.append(r_ir)
            joints.append(joint_loss(l_vis, l_ir, r_vis, r_ir,
                                     objective.lam_min, objective.lam_bal))
    except ScorerError as exc:
        label = "candidate" if tag is None else f"particle {tag}"
        raise EvaluationError(f"{label}: scorer failed: {exc}",
                              particle=tag) from exc

    reg = regularization(mask, tex_vis, tex_ir, decoded.geom, geom_init,
                         objective.weights)
    joint = float(np.mean(joints))
    return LossBreakdown(
        loss_vis=float(np.mean(losses_vis)),
        loss_ir=float(np.mean(losses_ir)),
        reward_vis=float(np.mean(rewards_vis)),
        reward_ir=float(np.mean(rewards_ir)),
        joint=joint,
        regularization=reg,
        total=joint + objective.lam_reg * reg,
    )
