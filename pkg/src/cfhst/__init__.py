"""Uplink spectral efficiency of cell-free massive MIMO-OFDM serving high-speed-train antennas."""

from .geometry import ScenarioConfig, build_snapshot, sweep_positions
from .montecarlo import ExperimentPlan, compute_cdf, run_plan

__all__ = ["ScenarioConfig", "build_snapshot", "sweep_positions",
           "ExperimentPlan", "compute_cdf", "run_plan"]
__version__ = "0.1.0"
