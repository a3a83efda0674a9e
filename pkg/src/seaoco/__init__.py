"""Optimistic online convex optimization under stochastically extended adversaries."""

from .geometry import Ball, Box, ball, box, project, prox_step
from .losses import Linear, LogSmooth, QuadraticTracking, Sample, make_family
from .environments import make_environment
from .optimistic_core import OFTRL, OMD
from .strongly_convex import OFTLSC
from .meta_msmwc import MsMwC, weighted_entropy_argmin
from .dyn_meta import DynMetaGrad, adahedge_gap
from .conversions import o2b_accelerated
from .harness import ExperimentSpec, run_batch, run_episode, expected_regret, rate_fit, bound_check

__version__ = "0.1.0"
