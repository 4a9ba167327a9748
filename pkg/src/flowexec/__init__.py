"""Optimal trade execution under dynamic order-flow imbalance.

Module map:

    ou_flow      flow-imbalance dynamics: moments and path simulation
    myopic       closed-form deterministic schedules and their costs
    riccati      fixed-horizon linear-quadratic value (coefficient ODEs)
    horizon      optimal-horizon search and receding-horizon stepping
    hjb_solver   indefinite-horizon value by explicit finite differences
    simulation   Monte Carlo strategy comparison with common random numbers
    discrete_dp  volume-bucket participation-rate dynamic program
    flow_metrics EWMA / bucket imbalance and VPIN from trade tapes
    cli          command-line wiring and CSV emission
"""

__version__ = "0.1.0"

from .errors import DataError, FlowexecError, SearchError, SimulationError, SolverError
from .myopic import InventoryRisk
from .ou_flow import FlowParams

__all__ = [
    "__version__",
    "FlowParams",
    "InventoryRisk",
    "FlowexecError",
    "SolverError",
    "SimulationError",
    "SearchError",
    "DataError",
]
