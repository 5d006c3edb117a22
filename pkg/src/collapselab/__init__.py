"""Numerical laboratory for Brownian reduction of measurement-channel probabilities."""

__version__ = "0.1.0"

from .model import (BlockDensityMatrix, ChannelState, DiffusionSpec, HamiltonianBlocks,  # noqa: E402
                    InvariantViolation, ProximityParams, born_init, make_channel_state)
from .blocks import assemble_full, dp1_dt, dp2_dt, evolve_blocks  # noqa: E402
from .proximity import jump_amplitude, overlap, proximity_window, spread_fluctuation  # noqa: E402
from .reduction import (TrajectoryRecord, born_statistics, correlation_matrix,  # noqa: E402
                        pearle_step, run_trajectory)
from .fokker_planck import FpGrid, absorbed_fractions, fp_step  # noqa: E402
from .epr import EprConfig, epr_run, independence_check  # noqa: E402

__all__ = [
    "BlockDensityMatrix", "ChannelState", "DiffusionSpec", "HamiltonianBlocks", "InvariantViolation",
    "ProximityParams", "born_init", "make_channel_state", "assemble_full", "dp1_dt", "dp2_dt",
    "evolve_blocks", "jump_amplitude", "overlap", "proximity_window", "spread_fluctuation",
    "TrajectoryRecord", "born_statistics", "correlation_matrix", "pearle_step", "run_trajectory",
    "FpGrid", "absorbed_fractions", "fp_step", "EprConfig", "epr_run", "independence_check",
]
