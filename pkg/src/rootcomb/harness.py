"""Closed-loop styling trials and the proposed-vs-random experiment."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from rootcomb.orientation import (
    DifferenceReport, Similarity, align_target, difference_map, heatmap_rgb,
    write_ppm,
)
from rootcomb.planner import plan_root_centric, random_baseline_stroke
from rootcomb.simulator import (
    SCENARIO_NAMES, apply_stroke, builtin_scenarios, make_head_model, natural_field, photograph,
    render,
)
from rootcomb.tracing import FieldTracer, InvalidSeedError, SeedPolicy, select_seeds
from rootcomb.trajectory import RansacConfig, TrajectoryError, stroke_to_trajectory

logger = logging.getLogger(__name__)

METHODS = ("proposed", "random")

TRIALS_HEADER = ["method", "scenario", "seed", "status", "iterations", "initial_mean_rad",
                 "final_mean_rad", "strokes", "fallbacks", "error"]
SUMMARY_HEADER = ["method", "scenario", "trials", "mean_final_rad", "std_final_rad"]
CURVE_HEADER = ["method", "scenario", "seed", "iteration", "mean_delta_rad"]

# independent random streams per trial
_STREAM_INIT, _STREAM_NOISE, _STREAM_PICK, _STREAM_RANSAC = range(4)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Every tunable of a trial. Angles in radians unless the name says deg."""

    scenario: str = "5to5"
    # head and hair
    head_size: int = 256
    n_strands: int = 64
    strand_length: float = 100.0
    strand_points: int = 41
    stiffness: float = 0.2
    init_jitter: float = 0.08
    rasterize_width: float = 5.0
    # pose of the target photo relative to the head: (deg, scale, tx, ty)
    target_pose: tuple = (2.0, 1.0, 3.0, -2.0)
    # hairline of the head in the target photo relative to the subject
    donor_hairline_shift: float = 0.0
    donor_hairline_curvature: float = 0.004
    # comparison
    erosion: int = 15
    absent_penalty: float = math.pi / 2
    # seeding and tracing
    difference_threshold: float = 0.35
    max_seeds: int = 8
    min_seed_separation: float = 12.0
    trace_step: float = 1.0
    trace_max_steps: int = 600
    turn_limit_deg: float = 60.0
    target_seed_spacing: int = 8
    # planner
    candidate_radius: float = 12.0
    dbscan_eps: float = 25.0
    dbscan_min_pts: int = 2
    direction_weight: float = 1.0
    resample_points: int = 32
    comb_length: float = 20.0
    comb_width: float = 24.0
    stroke_samples: int = 32
    # comb physics
    compliance: float = 0.85
    noise_sigma: float = 0.05
    # trajectory
    ransac_iterations: int = 200
    inlier_tol: float = 1.5
    window: int = 11
    approach_clearance: float = 20.0
    retract_clearance: float = 20.0
    max_step_mm: float = 25.0
    # loop
    max_iterations: int = 15
    stop_threshold: float = 0.15

    def validate(self) -> "ExperimentConfig":
        problems = []
        if self.scenario not in SCENARIO_NAMES:
            problems.append(f"scenario must be one of {SCENARIO_NAMES}, got {self.scenario!r}")
        if self.erosion < 1 or self.erosion % 2 == 0:
            problems.append("erosion must be an odd kernel size >= 1")
        if not 0.0 <= self.compliance <= 1.0:
            problems.append("compliance must lie in [0, 1]")
        if not 0.0 <= self.stiffness <= 1.0:
            problems.append("stiffness must lie in [0, 1]")
        if not 0.0 < self.difference_threshold < math.pi:
            problems.append("difference_threshold must lie in (0, pi)")
        for name in ("n_strands", "max_seeds", "strand_points", "resample_points",
                     "stroke_samples", "ransac_iterations", "target_seed_spacing", "trace_max_steps"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        for name in ("strand_length", "rasterize_width", "comb_length", "comb_width",
                     "candidate_radius", "dbscan_eps", "inlier_tol", "trace_step", "max_step_mm"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if self.max_iterations < 0:
            problems.append("max_iterations must be >= 0")
        if len(self.target_pose) != 4:
            problems.append("target_pose must be [rotation_deg, scale, tx, ty]")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        doc = dict(doc)
        if "target_pose" in doc:
            doc["target_pose"] = tuple(doc["target_pose"])
        try:
            return cls(**doc).validate()
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["target_pose"] = list(self.target_pose)
        return d

    def seed_policy(self) -> SeedPolicy:
        return SeedPolicy(self.difference_threshold, self.max_seeds, self.min_seed_separation)

    def pose(self, model) -> Similarity:
        deg, scale, tx, ty = self.target_pose
        c = ((model.shape[1] - 1) / 2.0, (model.shape[0] - 1) / 2.0)
        return Similarity.about(c, math.radians(deg), scale, (tx, ty))


@dataclass
class IterationRecord:
    iteration: int
    mean_delta: float
    strokes_executed: int = 0
    fallback_events: int = 0
    wall_time: float = 0.0  # ms, excluded from CSV output


@dataclass
class TrajectoryAudit:
    """Frame and pose-count checks over every trajectory a trial produced."""

    trajectories: int = 0
    poses: int = 0
    max_frame_error: float = 0.0
    pose_count_violations: int = 0
    step_violations: int = 0

    def add(self, traj, stroke_points: int, max_step_mm: float):
        self.trajectories += 1
        self.poses += len(traj.poses)
        err = max(f.orthonormality_error() for f in traj.poses)
        self.max_frame_error = max(self.max_frame_error, err)
        if len(traj.poses) != stroke_points + 2:
            self.pose_count_violations += 1
        if traj.max_step() > max_step_mm:
            self.step_violations += 1

    def merge(self, other: "TrajectoryAudit"):
        self.trajectories += other.trajectories
        self.poses += other.poses
        self.max_frame_error = max(self.max_frame_error, other.max_frame_error)
        self.pose_count_violations += other.pose_count_violations
        self.step_violations += other.step_violations


@dataclass
class TrialResult:
    method: str
    scenario: str
    seed: int
    records: list = field(default_factory=list)
    status: str = "ok"
    error: str = ""
    audit: TrajectoryAudit = field(default_factory=TrajectoryAudit)
    initial_report: DifferenceReport = None
    final_report: DifferenceReport = None
    final_field: object = None
    trajectories: list = field(default_factory=list)

    @property
    def final_mean(self) -> float:
        return self.records[-1].mean_delta if self.records else float("nan")

    @property
    def initial_mean(self) -> float:
        return self.records[0].mean_delta if self.records else float("nan")

    def curve_rows(self):
        return [[self.method, self.scenario, self.seed, r.iteration, repr(r.mean_delta)]
                for r in self.records]

    def trial_row(self):
        return [self.method, self.scenario, self.seed, self.status, len(self.records),
                repr(self.initial_mean), repr(self.final_mean),
                sum(r.strokes_executed for r in self.records),
                sum(r.fallback_events for r in self.records), self.error]

    def curve_csv(self) -> str:
        return _csv_text(CURVE_HEADER, self.curve_rows())


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _seed(seed: int, *stream) -> int:
    return int(np.random.SeedSequence([seed, *stream]).generate_state(1)[0])


def sample_target_strands(state, spacing: int, step: float, max_steps: int, turn_limit: float):
    """Trace the target map from a regular grid of seeds over its mask."""
    tracer = FieldTracer(state)
    h, w = state.mask.shape
    strands = []
    for y in range(spacing // 2, h, spacing):
        for x in range(spacing // 2, w, spacing):
            if state.mask[y, x]:
                strands.append(tracer.trace((x, y), step, max_steps, turn_limit))
    return strands


class TrialSetup:
    """Everything about a trial that does not change between iterations."""

    def __init__(self, config: ExperimentConfig, seed: int):
        cfg = config
        self.config = cfg
        self.model = make_head_model(cfg.head_size)
        scenarios = {s.name: s for s in builtin_scenarios(
            self.model, cfg.n_strands, cfg.strand_length, cfg.strand_points, cfg.stiffness)}
        self.scenario = scenarios[cfg.scenario]
        self.initial_field = natural_field(
            self.model, cfg.n_strands, cfg.strand_length, cfg.strand_points, cfg.stiffness,
            cfg.init_jitter, _seed(seed, _STREAM_INIT))
        donor = make_head_model(cfg.head_size, hairline_shift=cfg.donor_hairline_shift,
                                hairline_curvature=cfg.donor_hairline_curvature)
        donor_style = {s.name: s for s in builtin_scenarios(
            donor, cfg.n_strands, cfg.strand_length, cfg.strand_points, cfg.stiffness)}[cfg.scenario]
        photo, photo_landmarks = photograph(donor, donor_style.target_field,
                                            cfg.pose(self.model), cfg.rasterize_width)
        self.aligned = align_target(photo, photo_landmarks, self.model.landmarks)
        self.aligned_eroded = self.aligned.eroded(cfg.erosion)
        self.target_strands = sample_target_strands(
            self.aligned, cfg.target_seed_spacing, cfg.trace_step, cfg.trace_max_steps,
            math.radians(cfg.turn_limit_deg))

    def measure(self, strand_field) -> tuple:
        cfg = self.config
        state = render(self.model, strand_field, cfg.rasterize_width)
        report = difference_map(state.eroded(cfg.erosion), self.aligned_eroded, cfg.absent_penalty)
        return state, report


def run_trial(config: ExperimentConfig, method: str, seed: int,
              keep_trajectories: bool = False, setup: TrialSetup = None) -> TrialResult:
    """One closed-loop styling run.

    Each iteration renders the hair, measures the mean orientation difference
    against the aligned target, stops if it is at or below ``stop_threshold``,
    and otherwise plans, lifts and executes one stroke per selected seed.
    The result is fully determined by ``(config, method, seed)``.
    """
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    cfg = config.validate()
    setup = setup or TrialSetup(cfg, seed)
    grid = setup.model.depth
    result = TrialResult(method, cfg.scenario, seed)
    policy = cfg.seed_policy()
    turn_limit = math.radians(cfg.turn_limit_deg)
    strand_field = setup.initial_field
    for it in range(cfg.max_iterations + 1):
        t0 = time.perf_counter()
        state, report = setup.measure(strand_field)
        record = IterationRecord(it, report.mean)
        result.records.append(record)
        if it == 0:
            result.initial_report = report
        result.final_report = report
        if report.mean <= cfg.stop_threshold or it == cfg.max_iterations:
            record.wall_time = 1e3 * (time.perf_counter() - t0)
            break
        tracer = FieldTracer(state)
        seeds = select_seeds(report, policy)
        for k, seed_px in enumerate(seeds):
            try:
                current = tracer.trace(seed_px, cfg.trace_step, cfg.trace_max_steps, turn_limit)
            except InvalidSeedError as exc:
                logger.warning("iteration %d seed %d: %s", it, k, exc)
                continue
            try:
                if method == "proposed":
                    stroke, fallback = plan_root_centric(
                        current, setup.target_strands, cfg.candidate_radius, cfg.dbscan_eps,
                        cfg.dbscan_min_pts, cfg.direction_weight, cfg.resample_points,
                        cfg.comb_length, cfg.stroke_samples, cfg.comb_width)
                    if stroke is None:
                        logger.info("iteration %d seed %d: no target strand rooted nearby", it, k)
                        continue
                    record.fallback_events += int(fallback)
                else:
                    stroke = random_baseline_stroke(
                        setup.target_strands, _seed(seed, _STREAM_PICK, it, k), cfg.comb_length,
                        cfg.stroke_samples, cfg.comb_width)
                traj = stroke_to_trajectory(
                    stroke, grid, cfg.window,
                    RansacConfig(cfg.ransac_iterations, cfg.inlier_tol, _seed(seed, _STREAM_RANSAC, it, k)),
                    cfg.approach_clearance, cfg.retract_clearance)
            except (TrajectoryError, ValueError) as exc:
                logger.warning("iteration %d seed %d: stroke skipped (%s)", it, k, exc)
                continue
            result.audit.add(traj, len(stroke.path), cfg.max_step_mm)
            if keep_trajectories:
                result.trajectories.append((it, k, traj))
            strand_field = apply_stroke(strand_field, stroke, cfg.comb_width, cfg.compliance,
                                        cfg.noise_sigma, _seed(seed, _STREAM_NOISE, it, k))
            record.strokes_executed += 1
        record.wall_time = 1e3 * (time.perf_counter() - t0)
    result.final_field = strand_field
    return result


def mean_curve(trials, length: int = None) -> np.ndarray:
    """Per-iteration mean over trials; a trial that stopped early holds its last value."""
    n = length or max(len(t.records) for t in trials)
    rows = []
    for t in trials:
        vals = [r.mean_delta for r in t.records]
        rows.append(vals + [vals[-1]] * (n - len(vals)))
    return np.mean(np.array(rows), axis=0)


def summarize(trials):
    """Summary rows ``[method, scenario, completed, mean, std]`` from completed trials."""
    groups = {}
    for t in trials:
        groups.setdefault((t.method, t.scenario), [])
        if t.status == "ok":
            groups[(t.method, t.scenario)].append(t.final_mean)
    rows = []
    for (method, scenario), vals in groups.items():
        arr = np.array(vals)
        mean = float(arr.mean()) if len(arr) else float("nan")
        std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        rows.append([method, scenario, len(arr), repr(mean), repr(std)])
    return rows


def _run_one(args):
    config, method, seed = args
    try:
        return run_trial(config, method, seed)
    except Exception as exc:  # recorded as a failure row, never aborts the experiment
        logger.exception("trial %s/%s/%d failed", method, config.scenario, seed)
        return TrialResult(method, config.scenario, seed, status="failed", error=repr(exc))


def run_experiment(config: ExperimentConfig, seeds, scenarios=SCENARIO_NAMES, out_dir=None,
                   methods=METHODS, workers: int = 1, heatmaps: bool = True):
    """Run every (method, scenario, seed) trial and write the CSV artifacts.

    Files written to ``out_dir``: ``trials.csv``, ``summary.csv``,
    ``curves.csv`` and, for the first seed of each method and scenario,
    initial/final difference heatmaps under ``heatmaps/``.
    Returns the list of ``TrialResult``.
    """
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ConfigError("an experiment needs at least two seeds")
    jobs = [(dataclasses.replace(config, scenario=sc).validate(), m, s)
            for sc in scenarios for m in methods for s in seeds]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            trials = list(pool.map(_run_one, jobs))
    else:
        trials = [_run_one(j) for j in jobs]
    if out_dir is not None:
        write_experiment(trials, out_dir, heatmaps)
    return trials


def write_experiment(trials, out_dir, heatmaps: bool = True):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trials.csv").write_text(_csv_text(TRIALS_HEADER, [t.trial_row() for t in trials]))
    (out / "summary.csv").write_text(_csv_text(SUMMARY_HEADER, summarize(trials)))
    curve_rows = [row for t in trials for row in t.curve_rows()]
    (out / "curves.csv").write_text(_csv_text(CURVE_HEADER, curve_rows))
    if heatmaps:
        hm = out / "heatmaps"
        hm.mkdir(exist_ok=True)
        seen = set()
        for t in trials:
            key = (t.method, t.scenario)
            if t.status != "ok" or key in seen:
                continue
            seen.add(key)
            stem = f"{t.method}_{t.scenario}_seed{t.seed}"
            write_ppm(hm / f"{stem}_initial.ppm", heatmap_rgb(t.initial_report))
            write_ppm(hm / f"{stem}_final.ppm", heatmap_rgb(t.final_report))


def write_trial(result: TrialResult, out_dir):
    """Curve CSV, trial row, heatmaps and (if kept) trajectory CSVs for one trial."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "curve.csv").write_text(result.curve_csv())
    (out / "trial.csv").write_text(_csv_text(TRIALS_HEADER, [result.trial_row()]))
    if result.status == "ok":
        write_ppm(out / "initial_heatmap.ppm", heatmap_rgb(result.initial_report))
        write_ppm(out / "final_heatmap.ppm", heatmap_rgb(result.final_report))
    if result.trajectories:
        tdir = out / "trajectories"
        tdir.mkdir(exist_ok=True)
        for it, k, traj in result.trajectories:
            (tdir / f"iter{it:02d}_stroke{k}.csv").write_text(traj.to_csv())


__all__ = [
    "ConfigError", "ExperimentConfig", "IterationRecord", "METHODS", "TrialResult",
    "TrialSetup", "mean_curve", "run_experiment", "run_trial",
    "summarize", "write_experiment", "write_trial",
]
