"""Fluid approximation of the overloaded X queue under FQR-T control.

Main entry points: ``stationary_point``, ``pi12``, ``solve_ivp`` and
``simulate``.
"""
from .errors import (AssumptionViolated, DriftDegenerate, FqrtError, InvalidParameters,
                     NeverReachesS, NonConvergent, NotInA, NotInteriorCase, NumericalFailure,
                     SingularBoundary, StepTooLarge, TruncationInsufficient, WindowTooShort)
from .model import (BoundarySub, DriftPair, FluidState, ModelParams, Region, RegionTag,
                    canonical_params, classify, drift_pair, ftsp_rates, validate_params)
from .qbd import (build_blocks, pi12, pi12_bd_closed_form, qbd_pi12, solve_qbd,
                  truncated_oracle_pi12)
from .simulation import SimConfig, SimPath, SimState, difference_process_stats, simulate
from .solver import ExtendedState, Phase, Trajectory, euler_step, hitting_time, solve_ivp
from .stationarity import StationaryReport, region_of_star_by_rates, stationary_point

__all__ = [
    "AssumptionViolated", "BoundarySub", "DriftDegenerate", "DriftPair", "ExtendedState",
    "FluidState", "FqrtError", "InvalidParameters", "ModelParams", "NeverReachesS",
    "NonConvergent", "NotInA", "NotInteriorCase", "NumericalFailure", "Phase", "Region",
    "RegionTag", "SimConfig", "SimPath", "SimState", "SingularBoundary", "StationaryReport",
    "StepTooLarge", "Trajectory", "TruncationInsufficient", "WindowTooShort", "build_blocks",
    "canonical_params", "classify", "difference_process_stats", "drift_pair", "euler_step",
    "ftsp_rates", "hitting_time", "pi12", "pi12_bd_closed_form", "qbd_pi12",
    "region_of_star_by_rates", "simulate", "solve_ivp", "solve_qbd", "stationary_point",
    "truncated_oracle_pi12", "validate_params",
]
