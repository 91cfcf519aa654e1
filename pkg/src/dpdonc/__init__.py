"""Differentially private distributed online mirror descent for nonconvex costs."""

from .bregman import BregmanGeometry, divergence, mirror_step
from .engine import RunConfig, consensus_step, estimate_regret, run_monte_carlo, run_once
from .experiment import ExperimentConfig, preset, run_experiment
from .geometry import ConstraintSet, box, l1_ball, l2_ball, simplex
from .graph import WeightSchedule, contraction_constants, tracking_matrices, transition
from .privacy import NoiseSchedule, PrivacyAccountant, sensitivity
from .problems import LocalizationProblem, LocalizationScenario, QuadraticProblem

__version__ = "0.1.0"
