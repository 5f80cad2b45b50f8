"""Root-centric comb path planning with a 2.5D hair simulator and experiment harness."""

from rootcomb.harness import ExperimentConfig, run_experiment, run_trial
from rootcomb.kernels import BACKEND
from rootcomb.planner import CombStroke, generate_stroke, plan_root_centric, random_baseline_stroke
from rootcomb.tracing import Strand, select_seeds, trace_strand
from rootcomb.trajectory import stroke_to_trajectory

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CombStroke", "ExperimentConfig", "Strand", "generate_stroke", "plan_root_centric",
    "random_baseline_stroke", "run_experiment", "run_trial", "select_seeds", "stroke_to_trajectory",
    "trace_strand",
]
