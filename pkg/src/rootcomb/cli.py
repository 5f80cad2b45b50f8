"""Command line entry point: ``rootcomb {trial,experiment,render,diff}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

from rootcomb import kernels
from rootcomb.harness import (
    METHODS, ConfigError, ExperimentConfig, run_experiment, run_trial, summarize, write_trial,
)
from rootcomb.orientation import (
    ShapeMismatchError, difference_map, heatmap_rgb, load_state, save_state, write_ppm,
)
from rootcomb.simulator import SCENARIO_NAMES, builtin_scenarios, make_head_model, natural_field, render

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILED_TRIALS = 2


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    if getattr(args, "scenario", None):
        cfg = dataclasses.replace(cfg, scenario=args.scenario)
    return cfg.validate()


def cmd_trial(args) -> int:
    cfg = _load_config(args)
    t0 = time.perf_counter()
    result = run_trial(cfg, args.method, args.seed, keep_trajectories=True)
    write_trial(result, args.out)
    curve = " ".join(f"{r.mean_delta:.3f}" for r in result.records)
    print(f"{args.method} {cfg.scenario} seed {args.seed}: {result.initial_mean:.4f} -> "
          f"{result.final_mean:.4f} rad in {len(result.records) - 1} iterations "
          f"({time.perf_counter() - t0:.1f} s)")
    print(f"curve: {curve}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    seeds = list(range(args.seed, args.seed + args.seeds))
    scenarios = [args.scenario] if args.scenario else list(SCENARIO_NAMES)
    methods = [args.method] if args.method else list(METHODS)
    t0 = time.perf_counter()
    trials = run_experiment(cfg, seeds, scenarios, args.out, methods, workers=args.workers,
                            heatmaps=not args.no_heatmaps)
    print(f"{'method':<10}{'scenario':<10}{'trials':>7}{'mean':>10}{'std':>10}")
    for method, scenario, n, mean, std in summarize(trials):
        print(f"{method:<10}{scenario:<10}{n:>7}{float(mean):>10.4f}{float(std):>10.4f}")
    failed = [t for t in trials if t.status != "ok"]
    print(f"{len(trials)} trials, {len(failed)} failed, {time.perf_counter() - t0:.1f} s "
          f"(kernels: {kernels.BACKEND})")
    return EXIT_FAILED_TRIALS if failed else EXIT_OK


def cmd_render(args) -> int:
    cfg = _load_config(args)
    model = make_head_model(cfg.head_size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scen = {s.name: s for s in builtin_scenarios(
        model, cfg.n_strands, cfg.strand_length, cfg.strand_points, cfg.stiffness)}[cfg.scenario]
    init = natural_field(model, cfg.n_strands, cfg.strand_length, cfg.strand_points,
                         cfg.stiffness, cfg.init_jitter, args.seed)
    target = render(model, scen.target_field, cfg.rasterize_width)
    current = render(model, init, cfg.rasterize_width)
    save_state(target, out / f"{cfg.scenario}_target.orient")
    save_state(current, out / f"initial_seed{args.seed}.orient")
    report = difference_map(current.eroded(cfg.erosion), target.eroded(cfg.erosion), cfg.absent_penalty)
    write_ppm(out / f"{cfg.scenario}_initial_diff.ppm", heatmap_rgb(report))
    print(f"{cfg.scenario}: initial mean difference {report.mean:.4f} rad; wrote {out}")
    return EXIT_OK


def cmd_diff(args) -> int:
    cfg = _load_config(args)
    try:
        current, target = load_state(args.current), load_state(args.target)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read orientation state: {exc}") from exc
    try:
        report = difference_map(current.eroded(cfg.erosion), target.eroded(cfg.erosion),
                                cfg.absent_penalty)
    except ShapeMismatchError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"mean difference {report.mean:.6f} rad, {report.coverage_penalty_count} mask mismatch px")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_ppm(out / "difference.ppm", heatmap_rgb(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rootcomb", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="JSON file with ExperimentConfig fields")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=out_required, help="output directory")

    t = sub.add_parser("trial", help="one closed-loop trial")
    common(t)
    t.add_argument("--method", choices=METHODS, default="proposed")
    t.add_argument("--scenario", choices=SCENARIO_NAMES)
    t.set_defaults(func=cmd_trial)

    e = sub.add_parser("experiment", help="both methods over scenarios and seeds")
    common(e)
    e.add_argument("--seeds", type=int, default=10, help="number of consecutive seeds from --seed")
    e.add_argument("--method", choices=METHODS, help="restrict to one method")
    e.add_argument("--scenario", choices=SCENARIO_NAMES, help="restrict to one scenario")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--no-heatmaps", action="store_true")
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("render", help="write target and initial orientation maps")
    common(r)
    r.add_argument("--scenario", choices=SCENARIO_NAMES)
    r.set_defaults(func=cmd_render)

    d = sub.add_parser("diff", help="difference of two saved orientation maps")
    d.add_argument("current")
    d.add_argument("target")
    d.add_argument("--config")
    d.add_argument("--out")
    d.set_defaults(func=cmd_diff)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.ERROR if args.verbose == 0 else (logging.WARNING if args.verbose == 1 else logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
