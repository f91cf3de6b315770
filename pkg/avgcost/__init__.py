"""
avgcost entrypoint package.
"""

from .logger import app_logger as log
from .errors import AvgCostError, ConvergenceError, ModelValidationError
from .resources import Resources
from .mdp import FiniteMdp, StationaryPolicy, ValueField, load_mdp
from .splitchain import SmallSetSpec, SplitChainModel, build_split_chain
from .oracles import optimal_average_cost_lp, enumerate_policies_bruteforce, solve_poisson
from .solvers import StopRule, IterationTrace, value_iteration, split_value_iteration, rvi_nu, rvi_min, rvi_anchor
from .rolling import evaluate_rolling_horizon
from .lqg import LqgModel, solve_riccati, build_variance_grid_mdp, simulate_closed_loop
from .runner import RunConfig, run
from .__version__ import __version__

__all__ = [
    "log",
    "AvgCostError",
    "ConvergenceError",
    "ModelValidationError",
    "Resources",
    "FiniteMdp",
    "StationaryPolicy",
    "ValueField",
    "load_mdp",
    "SmallSetSpec",
    "SplitChainModel",
    "build_split_chain",
    "optimal_average_cost_lp",
    "enumerate_policies_bruteforce",
    "solve_poisson",
    "StopRule",
    "IterationTrace",
    "value_iteration",
    "split_value_iteration",
    "rvi_nu",
    "rvi_min",
    "rvi_anchor",
    "evaluate_rolling_horizon",
    "LqgModel",
    "solve_riccati",
    "build_variance_grid_mdp",
    "simulate_closed_loop",
    "RunConfig",
    "run",
    "__version__",
]
