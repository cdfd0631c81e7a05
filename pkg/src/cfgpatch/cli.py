"""Command-line entry point.

Subcommands:
  gen-data   synthesize a paired visible/infrared dataset + matched toy victim
  attack     run the full attack protocol from a JSON run config
  render     rasterize a stored parameter set into mask/texture PNGs
  eval       recompute success rates from a run directory and verify them

Verbosity comes from the CFGPATCH_LOG environment variable (debug, info,
warning, error; default info).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import datasets
from .config import RunConfig, ScorerSpec, config_to_dict, load_config
from .errors import CfgPatchError, ConfigError
from .evaluation import (
    ScorerHandle,
    build_report,
    compute_asr,
    read_outcomes_csv,
    result_params_json,
    run_attacks,
    write_outcomes_csv,
    write_trace_csv,
)
from .imgio import save_png
from .params import ParamLayout, decoded_from_json, render_patch

log = logging.getLogger("cfgpatch")


def _setup_logging() -> None:
    level = os.environ.get("CFGPATCH_LOG", "info").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def cmd_gen_data(args) -> int:
    spec = datasets.SynthSpec(
        class_count=args.classes, pairs_per_class=args.pairs_per_class,
        height=args.height, width=args.width, seed=args.seed,
        contrast=args.contrast, ir_band=args.ir_band,
        noise_sigma=args.noise_sigma)
    manifest = datasets.generate_dataset(spec, args.out)
    log.info("wrote %d pairs under %s", spec.class_count * spec.pairs_per_class,
             args.out)
    print(manifest)
    return 0


def _resolve_dataset(config: RunConfig, run_dir: Path):
    """Materialize the dataset and scorer spec for a run."""
    scorer_spec = config.scorer
    if config.synth is not None:
        data_dir = run_dir / "data"
        manifest = datasets.generate_dataset(config.synth, data_dir)
        if scorer_spec.kind == "toy" and scorer_spec.templates is None \
                and scorer_spec.seed is None:
            scorer_spec = dataclasses.replace(
                scorer_spec, templates=str(data_dir / datasets.VICTIM_NAME))
    else:
        manifest = Path(config.manifest)
    pairs = datasets.load_pairs(manifest)
    return pairs, scorer_spec


def execute_run(config: RunConfig) -> Path:
    """Full attack protocol; returns the populated run directory."""
    run_dir = Path(config.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    pairs, scorer_spec = _resolve_dataset(config, run_dir)

    scorer = scorer_spec.build()
    descriptor = scorer.describe()
    workers = config.workers
    if descriptor.kind == "remote" and not descriptor.concurrent and workers > 1:
        log.warning("scorer declares concurrent=false; forcing workers=1")
        workers = 1
    if scorer_spec.kind == "toy":
        handle = ScorerHandle(scorer=scorer)
    else:
        handle = ScorerHandle(builder=scorer_spec.build) if workers > 1 \
            else ScorerHandle(scorer=scorer)

    log.info("attacking %d pairs (%s search, %d workers)", len(pairs),
             config.search, workers)
    outcomes, exclusions, results, errors = run_attacks(
        pairs, handle, config.pso, config.eot, config.objective,
        config.layout, config.seed, workers=workers, search=config.search,
        early_stop=config.early_stop)
    for outcome in outcomes:
        if outcome.attacked():
            log.info("pair %s: joint_success=%s iterations=%d",
                     outcome.pair_id, outcome.joint_success,
                     outcome.iterations_used)
    for pair_id, message in errors.items():
        log.error("pair %s failed: %s", pair_id, message)

    (run_dir / "traces").mkdir(exist_ok=True)
    (run_dir / "adv").mkdir(exist_ok=True)
    (run_dir / "params").mkdir(exist_ok=True)
    for pair_id, result in sorted(results.items()):
        write_trace_csv(run_dir / "traces" / f"{pair_id}.csv",
                        result.trace_rows, result.loss_trace)
        save_png(run_dir / "adv" / f"{pair_id}_vis.png", result.adv_vis)
        save_png(run_dir / "adv" / f"{pair_id}_ir.png", result.adv_ir)
        params_doc = result_params_json(result, config.layout)
        (run_dir / "params" / f"{pair_id}.json").write_text(
            json.dumps(params_doc, indent=2, sort_keys=True) + "\n")

    write_outcomes_csv(run_dir / "outcomes.csv", outcomes)
    config_dict = config_to_dict(config)
    report = build_report(config_dict, outcomes, exclusions, errors,
                          created_at=datetime.now(timezone.utc).isoformat())
    (run_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    (run_dir / "config.json").write_text(
        json.dumps(config_dict, indent=2, sort_keys=True) + "\n")
    asr = report["asr"]
    if not asr.get("undefined"):
        log.info("ASR vis %.2f%% ir %.2f%% joint %.2f%% over %d pairs "
                 "(%d excluded)", asr["asr_vis_pct"], asr["asr_ir_pct"],
                 asr["asr_joint_pct"], asr["n_evaluated"], asr["n_excluded"])
    return run_dir


def cmd_attack(args) -> int:
    config = load_config(args.config, args.set or [])
    run_dir = execute_run(config)
    print(run_dir)
    return 0


def cmd_render(args) -> int:
    doc = json.loads(Path(args.params).read_text())
    decoded = decoded_from_json(doc["decoded"] if "decoded" in doc else doc)
    layout = ParamLayout(fractal_depth=args.fractal_depth,
                         disable_bezier=args.disable_bezier,
                         disable_fraser=args.disable_fraser)
    mask, tex_vis, tex_ir = render_patch(decoded, args.height, args.width,
                                         layout)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_png(out / "mask.png", mask.values)
    save_png(out / "patch_vis.png", tex_vis)
    save_png(out / "patch_ir.png", tex_ir)
    print(out)
    return 0


def cmd_eval(args) -> int:
    run_dir = Path(args.run)
    report = json.loads((run_dir / "report.json").read_text())
    outcomes = read_outcomes_csv(run_dir / "outcomes.csv")
    n_excluded = sum(not o.attacked() for o in outcomes)
    recomputed = compute_asr(outcomes, n_excluded=n_excluded)
    stored = report["asr"]
    summary = {"stored": stored, "recomputed": recomputed}
    print(json.dumps(summary, indent=2, sort_keys=True))
    if recomputed != stored:
        log.error("stored ASR does not match outcomes.csv")
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfgpatch",
        description="Cross-modal curved-fractal adversarial patch engine")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a synthetic paired dataset")
    gen.add_argument("--classes", type=int, default=30)
    gen.add_argument("--pairs-per-class", type=int, default=10)
    gen.add_argument("--height", type=int, default=64)
    gen.add_argument("--width", type=int, default=64)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--contrast", type=float,
                     default=datasets.SynthSpec.contrast)
    gen.add_argument("--ir-band", type=float, default=datasets.SynthSpec.ir_band)
    gen.add_argument("--noise-sigma", type=float,
                     default=datasets.SynthSpec.noise_sigma)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen_data)

    attack = sub.add_parser("attack", help="run the attack protocol")
    attack.add_argument("--config", required=True)
    attack.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config entry (dotted path)")
    attack.set_defaults(func=cmd_attack)

    render = sub.add_parser("render", help="render stored patch parameters")
    render.add_argument("--params", required=True,
                        help="params JSON (a run's params/<pair>.json)")
    render.add_argument("--height", type=int, default=256)
    render.add_argument("--width", type=int, default=256)
    render.add_argument("--fractal-depth", type=int, default=3)
    render.add_argument("--disable-bezier", action="store_true")
    render.add_argument("--disable-fraser", action="store_true")
    render.add_argument("--out", required=True)
    render.set_defaults(func=cmd_render)

    ev = sub.add_parser("eval", help="verify a run directory's report")
    ev.add_argument("--run", required=True)
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except CfgPatchError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
