"""Command-line entry point: synth, run, verify, ablate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

log = logging.getLogger("inst3d")


def cmd_synth(args) -> int:
    from .scene import save_scene
    from .synth import synth_scene

    scene = synth_scene(args.seed, args.instances, args.frames, points_per_instance=args.points,
                        look_away=args.look_away)
    save_scene(scene, args.out)
    log.info("wrote %s: %d points, %d frames, %d instances", args.out, len(scene.positions),
             len(scene.frames), len(scene.instances))
    return 0


def cmd_run(args) -> int:
    from .pipeline import PipelineConfig, run_pipeline
    from .scene import load_scene

    scene = load_scene(args.scene)
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    bundle, report = run_pipeline(scene, cfg)
    bundle.save(args.out)
    if args.report:
        report.save(args.report)
    if args.figures:
        from .plotting import render_run_figures

        render_run_figures(report, bundle, args.figures)
    if report.unobserved_instances:
        log.warning("unobserved instances: %s", report.unobserved_instances)
    t = report.tokens
    print(f"tokens: ours={t['total']} ({t['instance_tokens']} instance + {t['scene_tokens']} scene)  "
          + "  ".join(f"{k}={v}" for k, v in t["baselines"].items()))
    failed = [k for k, ok in report.checks.items() if not ok]
    if failed:
        log.error("run checks failed: %s", failed)
        return 1
    return 0


def cmd_verify(args) -> int:
    from .verify import FAULTS, fault_selftest, run_verify

    if args.selftest:
        result = fault_selftest()
        doc = {"selftest": result, "passed": all(result.values())}
        print(json.dumps(doc, indent=2, sort_keys=True))
        return 0 if doc["passed"] else 1
    report = run_verify(args.suite, fault=args.fault)
    doc = report.to_dict()
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.report:
        Path(args.report).write_text(text)
    for c in report.checks:
        if not c.passed:
            print(f"FAIL {c.suite}/{c.name}: {c.value:.3g} (tol {c.tol:.3g}) {c.detail}", file=sys.stderr)
    print(f"{'PASS' if report.passed else 'FAIL'}: {sum(c.passed for c in report.checks)}/{len(report.checks)} "
          f"checks, suites={','.join(report.suites)}" + (f", fault={args.fault}" if args.fault else "")
          + f", {report.seconds:.1f}s")
    if args.fault and args.fault not in FAULTS:
        return 2
    return 0 if report.passed else 1


def cmd_ablate(args) -> int:
    from .ablation import Grid, run_grid, summarise, write_outputs

    grid = Grid.load(args.grid)
    rows = run_grid(grid)
    paths = write_outputs(rows, args.out_dir, figures=not args.no_figures)
    cols = ("token_norm", "cosine_spread", "rotation_sensitivity")
    print(f"{'variant':<20}" + "".join(f"{c:>22}" for c in cols))
    for name, m in summarise(rows).items():
        print(f"{name:<20}" + "".join(f"{m[c]:>22.6g}" for c in cols))
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inst3d", description="Instance-token front end for 3D scene LMMs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic RGB-D scene")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--instances", type=int, default=4)
    s.add_argument("--frames", type=int, default=8)
    s.add_argument("--points", type=int, default=200, help="points per instance")
    s.add_argument("--look-away", action="store_true", help="point every camera away from the scene")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("run", help="scene -> token bundle and report")
    r.add_argument("--scene", required=True)
    r.add_argument("--config", help="JSON file mirroring PipelineConfig; defaults when omitted")
    r.add_argument("--out", required=True, help="token bundle path")
    r.add_argument("--report", help="JSON run report path")
    r.add_argument("--figures", help="directory for PNG figures")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="gradient / invariant / oracle suites")
    v.add_argument("--suite", default="all", choices=["all", "gradients", "invariants", "oracles"])
    v.add_argument("--fault", help="fault flag to inject for a harness self-test")
    v.add_argument("--selftest", action="store_true", help="check every suite fails under its paired fault")
    v.add_argument("--report", help="write the JSON report here as well as stdout summary")
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("ablate", help="run a grid of fusion / module variants")
    a.add_argument("--grid", required=True)
    a.add_argument("--out-dir", default="ablation_out")
    a.add_argument("--no-figures", action="store_true")
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
