"""Polynomial-only argmax and sampling kernels with a metered SIMD-slot simulator."""

from .core import (
    CutMaxParams,
    ResidualStats,
    contraction_factor,
    convergence_trace,
    cutmax,
    cutmax_step,
    fixed_point_target,
    fixed_point_top_mass,
    residual_stats,
)
from .encargmax import ArgmaxReport, calibrate_scales, cutmax_he, league_argmax, tournament_argmax
from .grad import cutmax_jacobian, cutmax_jvp
from .hesim import CostLedger, NoiseModel, SlotContext, SlotVector
from .polyapprox import ApproxConfig, ApproxCost
from .rangeproof import HEScales, range_proof
from .sampling import SamplerConfig, gumbel_max_sample, nucleus_alpha, nucleus_one_shot_sample

__version__ = "0.1.0"

__all__ = [
    "ApproxConfig", "ApproxCost", "ArgmaxReport", "CostLedger", "CutMaxParams", "HEScales",
    "NoiseModel", "ResidualStats", "SamplerConfig", "SlotContext", "SlotVector",
    "calibrate_scales", "contraction_factor", "convergence_trace", "cutmax", "cutmax_he",
    "cutmax_jacobian", "cutmax_jvp", "cutmax_step", "fixed_point_target", "fixed_point_top_mass",
    "gumbel_max_sample", "league_argmax", "nucleus_alpha", "nucleus_one_shot_sample",
    "range_proof", "residual_stats", "tournament_argmax",
]
