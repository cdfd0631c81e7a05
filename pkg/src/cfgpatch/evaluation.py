"""Paired attack protocol: clean filtering, orchestration, ASR reporting.

Pairs whose clean visible or infrared branch is already misclassified are
excluded up front so success rates only count genuine flips.  Each retained
pair is attacked independently with its own derived seed; an attack counts
as a joint success only when both branches are fooled at once.  Reports
carry raw fractions alongside the 2-decimal percentages.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CfgPatchError, ShapeError
from .eot import EotConfig
from .objective import ObjectiveConfig, predict
from .params import ParamLayout, decoded_to_json
from .pso import OptimizationResult, PsoConfig, optimize
from .seeding import derive_seed

REPORT_SCHEMA_VERSION = 1

OUTCOME_FIELDS = ("pair_id", "label", "clean_correct_vis", "clean_correct_ir",
                  "fooled_vis", "fooled_ir", "joint_success",
                  "iterations_used", "pred_vis", "pred_ir")
TRACE_FIELDS = ("iteration", "global_best_loss", "loss_vis", "loss_ir",
                "reward_vis", "reward_ir")


@dataclass(frozen=True)
class ImagePair:
    vis: np.ndarray   # (H, W, 3) in [0, 1]
    ir: np.ndarray    # (H, W, 1) in [0, 1]
    label: int
    pair_id: str

    def validate(self) -> None:
        if self.vis.ndim != 3 or self.vis.shape[2] != 3:
            raise ShapeError(f"vis image has shape {self.vis.shape}")
        if self.ir.ndim != 3 or self.ir.shape[2] != 1:
            raise ShapeError(f"ir image has shape {self.ir.shape}")
        if self.vis.shape[:2] != self.ir.shape[:2]:
            raise ShapeError(
                f"pair {self.pair_id} is unregistered: "
                f"{self.vis.shape[:2]} vs {self.ir.shape[:2]}")


@dataclass(frozen=True)
class Exclusion:
    pair_id: str
    reason: str  # "vis", "ir", or "vis+ir"


@dataclass(frozen=True)
class AttackOutcome:
    pair_id: str
    label: int
    clean_correct_vis: bool
    clean_correct_ir: bool
    # Attack fields stay None for pairs that failed the clean filter.
    fooled_vis: bool | None = None
    fooled_ir: bool | None = None
    joint_success: bool | None = None
    iterations_used: int | None = None
    pred_vis: int | None = None
    pred_ir: int | None = None

    def attacked(self) -> bool:
        return self.fooled_vis is not None


def paired_success(pred_vis: int, pred_ir: int, label: int):
    """Per-branch fooled flags and their conjunction."""
    fooled_vis = pred_vis != label
    fooled_ir = pred_ir != label
    return fooled_vis, fooled_ir, fooled_vis and fooled_ir


def clean_filter(pairs, scorer):
    """Keep pairs both of whose clean branches are correctly classified."""
    retained: list[ImagePair] = []
    exclusions: list[Exclusion] = []
    for pair in pairs:
        pair.validate()
        vis_ok = predict(scorer.score(pair.vis, "vis")) == pair.label
        ir_ok = predict(scorer.score(pair.ir, "ir")) == pair.label
        if vis_ok and ir_ok:
            retained.append(pair)
        else:
            failed = [name for name, ok in (("vis", vis_ok), ("ir", ir_ok))
                      if not ok]
            exclusions.append(Exclusion(pair_id=pair.pair_id,
                                        reason="+".join(failed)))
    return retained, exclusions


def compute_asr(outcomes, n_excluded: int = 0) -> dict:
    """ASR report over attacked outcomes; guards the empty case."""
    attacked = [o for o in outcomes if o.attacked()]
    n = len(attacked)
    report = {"n_evaluated": n, "n_excluded": n_excluded}
    if n == 0:
        report["undefined"] = True
        return report
    vis = sum(o.fooled_vis for o in attacked) / n
    ir = sum(o.fooled_ir for o in attacked) / n
    joint = sum(o.joint_success for o in attacked) / n
    report.update({
        "undefined": False,
        "asr_vis_frac": vis, "asr_ir_frac": ir, "asr_joint_frac": joint,
        "asr_vis_pct": round(100.0 * vis, 2),
        "asr_ir_pct": round(100.0 * ir, 2),
        "asr_joint_pct": round(100.0 * joint, 2),
    })
    return report


def attack_pair(pair: ImagePair, scorer, pso_config: PsoConfig,
                eot_config: EotConfig, objective: ObjectiveConfig,
                layout: ParamLayout, master_seed: int,
                search: str = "pso", early_stop: bool = True):
    """Run one attack with the pair's derived seed."""
    seed = derive_seed(master_seed, "pair", pair.pair_id)
    result = optimize(pair, scorer, pso_config, eot_config, objective,
                      layout=layout, seed=seed, search=search,
                      early_stop=early_stop)
    fooled_vis, fooled_ir, joint = paired_success(result.pred_vis,
                                                  result.pred_ir, pair.label)
    outcome = AttackOutcome(
        pair_id=pair.pair_id, label=pair.label,
        clean_correct_vis=True, clean_correct_ir=True,
        fooled_vis=fooled_vis, fooled_ir=fooled_ir, joint_success=joint,
        iterations_used=result.iterations_used,
        pred_vis=result.pred_vis, pred_ir=result.pred_ir)
    return outcome, result


def _attack_worker(args):
    pair, scorer_factory, pso_config, eot_config, objective, layout, \
        master_seed, search, early_stop = args
    scorer = scorer_factory()
    try:
        outcome, result = attack_pair(pair, scorer, pso_config, eot_config,
                                      objective, layout, master_seed,
                                      search=search, early_stop=early_stop)
        return pair.pair_id, outcome, result, None
    except CfgPatchError as exc:
        return pair.pair_id, None, None, f"{type(exc).__name__}: {exc}"
    finally:
        closer = getattr(scorer, "close", None)
        if closer and scorer_factory.owns_scorer:
            closer()


class ScorerHandle:
    """Picklable scorer source for worker processes.

    Wraps either a live scorer (shared, not closed by workers) or a builder
    invoked once per worker (owned, closed after the pair).
    """

    def __init__(self, scorer=None, builder=None):
        if (scorer is None) == (builder is None):
            raise ValueError("exactly one of scorer/builder required")
        self._scorer = scorer
        self._builder = builder
        self.owns_scorer = scorer is None

    def __call__(self):
        return self._scorer if self._scorer is not None else self._builder()


def run_attacks(pairs, scorer_handle: ScorerHandle, pso_config: PsoConfig,
                eot_config: EotConfig, objective: ObjectiveConfig,
                layout: ParamLayout, master_seed: int, workers: int = 1,
                search: str = "pso", early_stop: bool = True):
    """Clean-filter then attack every retained pair.

    Returns (outcomes sorted by pair_id, exclusions, results by pair_id,
    errors by pair_id).  Worker processes each build their own scorer from
    the handle; pairs whose scorer dies are reported as errors and do not
    affect the rest.
    """
    scorer = scorer_handle()
    retained, exclusions = clean_filter(pairs, scorer)
    outcomes = [
        AttackOutcome(pair_id=e.pair_id,
                      label=next(p.label for p in pairs if p.pair_id == e.pair_id),
                      clean_correct_vis="vis" not in e.reason,
                      clean_correct_ir="ir" not in e.reason)
        for e in exclusions
    ]
    results: dict[str, OptimizationResult] = {}
    errors: dict[str, str] = {}

    jobs = [(pair, scorer_handle, pso_config, eot_config, objective, layout,
             master_seed, search, early_stop) for pair in retained]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            finished = list(pool.map(_attack_worker, jobs))
    else:
        finished = [_attack_worker(job) for job in jobs]

    for pair_id, outcome, result, error in finished:
        if error is not None:
            errors[pair_id] = error
            continue
        outcomes.append(outcome)
        results[pair_id] = result

    outcomes.sort(key=lambda o: o.pair_id)
    return outcomes, exclusions, results, errors


def write_outcomes_csv(path, outcomes) -> None:
    def cell(value):
        if value is None:
            return ""
        if isinstance(value, bool):
            return int(value)
        return value

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(OUTCOME_FIELDS)
        for o in outcomes:
            writer.writerow([cell(getattr(o, name)) for name in OUTCOME_FIELDS])


def read_outcomes_csv(path) -> list[AttackOutcome]:
    outcomes = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            def as_bool(name):
                return None if row[name] == "" else bool(int(row[name]))

            def as_int(name):
                return None if row[name] == "" else int(row[name])

            outcomes.append(AttackOutcome(
                pair_id=row["pair_id"], label=int(row["label"]),
                clean_correct_vis=bool(int(row["clean_correct_vis"])),
                clean_correct_ir=bool(int(row["clean_correct_ir"])),
                fooled_vis=as_bool("fooled_vis"),
                fooled_ir=as_bool("fooled_ir"),
                joint_success=as_bool("joint_success"),
                iterations_used=as_int("iterations_used"),
                pred_vis=as_int("pred_vis"), pred_ir=as_int("pred_ir")))
    return outcomes


def write_trace_csv(path, trace: list, loss_trace: list[float]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_FIELDS)
        for i, (row, best) in enumerate(zip(trace, loss_trace), start=1):
            writer.writerow([i, repr(best), repr(row.loss_vis),
                             repr(row.loss_ir), repr(row.reward_vis),
                             repr(row.reward_ir)])


def build_report(config_dict: dict, outcomes, exclusions, errors,
                 created_at: str) -> dict:
    asr = compute_asr(outcomes, n_excluded=len(exclusions))
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "created_at": created_at,
        "config": config_dict,
        "n_pairs_total": len(outcomes) + len(errors),
        "asr": asr,
        "exclusions": [{"pair_id": e.pair_id, "reason": e.reason}
                       for e in exclusions],
        "errors": [{"pair_id": k, "message": v}
                   for k, v in sorted(errors.items())],
        "outcomes": [
            {"pair_id": o.pair_id, "fooled_vis": o.fooled_vis,
             "fooled_ir": o.fooled_ir, "joint_success": o.joint_success,
             "iterations_used": o.iterations_used,
             "pred_vis": o.pred_vis, "pred_ir": o.pred_ir}
            for o in outcomes if o.attacked()
        ],
    }


def result_params_json(result: OptimizationResult, layout: ParamLayout) -> dict:
    decoded = layout.decode(result.best_vector)
    return {
        "vector": [float(x) for x in result.best_vector],
        "names": list(layout.names()),
        "decoded": decoded_to_json(decoded),
    }
