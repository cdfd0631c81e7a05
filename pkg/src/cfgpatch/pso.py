"""Particle swarm search over the patch parameter space.

Particles move through the bounded parameter box with the classic
inertia/cognitive/social update, element-wise random vectors, per-dimension
velocity clamping, and projection back into bounds.  Initialization is
scene-conditioned: cross-modal edge saliency proposes patch centers, a
small coarse search picks the starting pose, and the remaining particles
jitter around it.  A run stops early once the current global best fools
both modality branches on the untransformed composite.

A pure random-search mode shares the same initialization, evaluation
budget, and bookkeeping; it serves as the optimizer baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .eot import EotConfig
from .errors import ParameterError, ShapeError
from .fraser import composite
from .geometry import GeometryParams
from .objective import (
    LossBreakdown,
    ObjectiveConfig,
    evaluate_candidate,
    predict,
)
from .params import GEOMETRY_DIMS, ParamLayout, render_patch
from .seeding import derive_seed

INIT_SCALES = (0.12, 0.18, 0.25)
INIT_ROTATIONS = (0.0, math.pi / 6.0, math.pi / 3.0)
INIT_CANDIDATE_CENTERS = 5
INIT_CURVATURE = 0.2
FALLBACK_SCALE = 0.18
SALIENCY_WINDOW_FRACTION = 0.15
GEOMETRY_JITTER = 0.15  # fraction of each geometry dimension's range

_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 20
    iterations: int = 150
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    velocity_clamp: float = 0.2   # fraction of each dimension's range
    seed: int = 0

    def validate(self) -> None:
        if self.swarm_size < 2:
            raise ParameterError("swarm_size must be >= 2")
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")
        if not 0.0 <= self.inertia <= 1.0:
            raise ParameterError("inertia must be in [0, 1]")
        if self.cognitive < 0 or self.social < 0:
            raise ParameterError("cognitive/social weights must be >= 0")


@dataclass(frozen=True)
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    personal_best: np.ndarray
    personal_best_loss: float


@dataclass
class SwarmState:
    positions: np.ndarray        # (N, D)
    velocities: np.ndarray       # (N, D)
    personal_best: np.ndarray    # (N, D)
    personal_best_loss: np.ndarray  # (N,)
    global_best: np.ndarray      # (D,)
    global_best_loss: float
    iteration: int = 0
    loss_trace: list[float] = field(default_factory=list)
    flagged: list[tuple[int, int]] = field(default_factory=list)

    @property
    def swarm_size(self) -> int:
        return self.positions.shape[0]

    def particle(self, i: int) -> Particle:
        return Particle(position=self.positions[i].copy(),
                        velocity=self.velocities[i].copy(),
                        personal_best=self.personal_best[i].copy(),
                        personal_best_loss=float(self.personal_best_loss[i]))


@dataclass(frozen=True)
class OptimizationResult:
    """Outcome of one pair attack (either search mode)."""

    best_vector: np.ndarray
    adv_vis: np.ndarray
    adv_ir: np.ndarray
    pred_vis: int
    pred_ir: int
    fooled_vis: bool
    fooled_ir: bool
    success: bool
    iterations_used: int
    loss_trace: list[float]
    trace_rows: list[LossBreakdown]
    geom_init: GeometryParams


def _sobel_magnitude(gray: np.ndarray) -> np.ndarray:
    gr = ndimage.sobel(gray, axis=0)
    gc = ndimage.sobel(gray, axis=1)
    return np.hypot(gr, gc)


def _top_local_maxima(saliency: np.ndarray, window: int,
                      count: int) -> list[tuple[int, int]]:
    peak = ndimage.maximum_filter(saliency, size=window, mode="nearest")
    rows, cols = np.nonzero(saliency == peak)
    values = saliency[rows, cols]
    # Deterministic ranking: by value descending, then scan order.
    order = np.lexsort((rows * saliency.shape[1] + cols, -values))
    picked = [(int(rows[k]), int(cols[k])) for k in order[:count]]
    return picked


def scene_init(pair, scorer, objective: ObjectiveConfig,
               layout: ParamLayout) -> GeometryParams:
    """Scene-conditioned starting geometry.

    Cross-modal edge saliency (averaged Sobel magnitudes of both grayscale
    branches, box-filtered) proposes candidate centers; a coarse search over
    centers x scales x rotations with default appearance and an identity
    transformation picks the joint-loss argmin.  Constant saliency falls
    back to a centered patch.
    """
    if pair.vis.shape[:2] != pair.ir.shape[:2]:
        raise ShapeError(
            f"unregistered pair: vis {pair.vis.shape[:2]} vs "
            f"ir {pair.ir.shape[:2]}")
    height, width = pair.vis.shape[:2]
    gray_vis = pair.vis @ _LUMA
    gray_ir = pair.ir[:, :, 0]
    saliency = 0.5 * (_sobel_magnitude(gray_vis) + _sobel_magnitude(gray_ir))
    window = max(1, round(SALIENCY_WINDOW_FRACTION * min(height, width)))
    smoothed = ndimage.uniform_filter(saliency, size=window, mode="nearest")

    curvature = 0.0 if layout.disable_bezier else INIT_CURVATURE
    if smoothed.max() == smoothed.min():
        return GeometryParams(center_row=0.5, center_col=0.5,
                              scale=FALLBACK_SCALE, rotation=0.0,
                              curvature=curvature)

    centers = _top_local_maxima(smoothed, window, INIT_CANDIDATE_CENTERS)
    identity = EotConfig.identity()
    best_geom = None
    best_loss = np.inf
    for (r, c) in centers:
        for scale in INIT_SCALES:
            for rotation in INIT_ROTATIONS:
                geom = GeometryParams(center_row=(r + 0.5) / height,
                                      center_col=(c + 0.5) / width,
                                      scale=scale, rotation=rotation,
                                      curvature=curvature)
                vector = layout.encode(layout.default_decoded(geom))
                breakdown = evaluate_candidate(
                    vector, pair, scorer, identity, objective, layout, seed=0)
                if breakdown.joint < best_loss:
                    best_loss = breakdown.joint
                    best_geom = geom
    return best_geom


def init_swarm(geom_init: GeometryParams, layout: ParamLayout, swarm_size: int,
               rng: np.random.Generator) -> SwarmState:
    """Particle 0 sits at the scene-conditioned pose with default appearance;
    the rest jitter around it in geometry and spread uniformly in appearance.
    """
    lo, hi = layout.bounds()
    dim = layout.dim
    base = layout.project(layout.encode(layout.default_decoded(geom_init)))
    positions = np.empty((swarm_size, dim))
    positions[0] = base
    span = hi - lo
    g = GEOMETRY_DIMS
    for i in range(1, swarm_size):
        jitter = rng.uniform(-GEOMETRY_JITTER, GEOMETRY_JITTER, size=g) * span[:g]
        positions[i, :g] = np.clip(base[:g] + jitter, lo[:g], hi[:g])
        positions[i, g:] = rng.uniform(lo[g:], hi[g:])
    return SwarmState(
        positions=positions,
        velocities=np.zeros((swarm_size, dim)),
        personal_best=positions.copy(),
        personal_best_loss=np.full(swarm_size, np.inf),
        global_best=base.copy(),
        global_best_loss=np.inf,
    )


def _update_bests(state: SwarmState, losses: np.ndarray) -> np.ndarray:
    """Strict-improvement personal/global best update; NaN losses flagged.

    Returns the boolean mask of particles with usable losses.
    """
    usable = ~np.isnan(losses)
    for i in np.nonzero(~usable)[0]:
        state.flagged.append((state.iteration + 1, int(i)))
    improved = usable & (losses < state.personal_best_loss)
    state.personal_best[improved] = state.positions[improved]
    state.personal_best_loss[improved] = losses[improved]
    best = int(np.argmin(state.personal_best_loss))
    if state.personal_best_loss[best] < state.global_best_loss:
        state.global_best_loss = float(state.personal_best_loss[best])
        state.global_best = state.personal_best[best].copy()
    return usable


def pso_step(state: SwarmState, losses: np.ndarray, config: PsoConfig,
             layout: ParamLayout, rng: np.random.Generator) -> SwarmState:
    """One swarm update: bests, then velocities, then projected positions.

    Mutates and returns ``state``.  Particles whose loss came back NaN are
    frozen for the step and recorded in ``state.flagged``.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.shape != (state.swarm_size,):
        raise ShapeError(
            f"expected {state.swarm_size} losses, got {losses.shape}")
    usable = _update_bests(state, losses)
    lo, hi = layout.bounds()
    span = hi - lo
    vmax = config.velocity_clamp * span
    xi1 = rng.uniform(size=state.positions.shape)
    xi2 = rng.uniform(size=state.positions.shape)
    velocity = (config.inertia * state.velocities
                + config.cognitive * xi1 * (state.personal_best - state.positions)
                + config.social * xi2 * (state.global_best[None, :]
                                         - state.positions))
    velocity = np.clip(velocity, -vmax, vmax)
    position = np.clip(state.positions + velocity, lo, hi)
    state.velocities[usable] = velocity[usable]
    state.positions[usable] = position[usable]
    state.iteration += 1
    state.loss_trace.append(state.global_best_loss)
    return state


def _random_step(state: SwarmState, losses: np.ndarray, layout: ParamLayout,
                 rng: np.random.Generator) -> SwarmState:
    """Baseline update: bests as in PSO, then fresh uniform positions."""
    usable = _update_bests(state, losses)
    lo, hi = layout.bounds()
    fresh = rng.uniform(lo, hi, size=state.positions.shape)
    state.positions[usable] = fresh[usable]
    state.iteration += 1
    state.loss_trace.append(state.global_best_loss)
    return state


def _check_fooled(vector: np.ndarray, pair, scorer,
                  layout: ParamLayout) -> tuple:
    """Score the untransformed composite of a candidate on both branches."""
    decoded = layout.decode(vector)
    height, width = pair.vis.shape[:2]
    mask, tex_vis, tex_ir = render_patch(decoded, height, width, layout)
    adv_vis = composite(pair.vis, tex_vis, mask, decoded.vis.opacity)
    adv_ir = composite(pair.ir, tex_ir, mask, decoded.ir.opacity)
    pred_vis = predict(scorer.score(adv_vis, "vis"))
    pred_ir = predict(scorer.score(adv_ir, "ir"))
    return adv_vis, adv_ir, pred_vis, pred_ir


def optimize(pair, scorer, pso_config: PsoConfig, eot_config: EotConfig,
             objective: ObjectiveConfig, layout: ParamLayout | None = None,
             seed: int | None = None, search: str = "pso",
             early_stop: bool = True) -> OptimizationResult:
    """Attack one image pair within the iteration budget.

    After every iteration the current global best is composited without
    transformation and scored on both branches; with ``early_stop`` the
    run ends as soon as both predictions leave the true class.  Evaluation
    rng is re-seeded per iteration from the run seed, so all particles of
    one iteration see common transformations.
    """
    if search not in ("pso", "random"):
        raise ParameterError(f"unknown search mode {search!r}")
    layout = layout or ParamLayout()
    pso_config.validate()
    eot_config.validate()
    run_seed = pso_config.seed if seed is None else seed

    geom_init = scene_init(pair, scorer, objective, layout)
    rng = np.random.default_rng(derive_seed(run_seed, "swarm"))
    state = init_swarm(geom_init, layout, pso_config.swarm_size, rng)

    trace_rows: list[LossBreakdown] = []
    best_row: LossBreakdown | None = None
    outcome = None
    for iteration in range(1, pso_config.iterations + 1):
        eval_seed = derive_seed(run_seed, "eot", iteration)
        losses = np.empty(state.swarm_size)
        for i in range(state.swarm_size):
            row = evaluate_candidate(state.positions[i], pair, scorer,
                                     eot_config, objective, layout,
                                     seed=eval_seed, geom_init=geom_init,
                                     tag=i)
            losses[i] = row.total
            if row.total < (best_row.total if best_row else np.inf):
                best_row = row
        if search == "pso":
            pso_step(state, losses, pso_config, layout, rng)
        else:
            _random_step(state, losses, layout, rng)
        trace_rows.append(best_row)
        adv_vis, adv_ir, pred_vis, pred_ir = _check_fooled(
            state.global_best, pair, scorer, layout)
        fooled_vis = pred_vis != pair.label
        fooled_ir = pred_ir != pair.label
        outcome = (adv_vis, adv_ir, pred_vis, pred_ir, fooled_vis, fooled_ir)
        if early_stop and fooled_vis and fooled_ir:
            break

    adv_vis, adv_ir, pred_vis, pred_ir, fooled_vis, fooled_ir = outcome
    return OptimizationResult(
        best_vector=state.global_best.copy(),
        adv_vis=adv_vis, adv_ir=adv_ir,
        pred_vis=pred_vis, pred_ir=pred_ir,
        fooled_vis=fooled_vis, fooled_ir=fooled_ir,
        success=fooled_vis and fooled_ir,
        iterations_used=state.iteration,
        loss_trace=list(state.loss_trace),
        trace_rows=trace_rows,
        geom_init=geom_init,
    )
