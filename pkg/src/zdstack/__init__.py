"""Zero-determinant and Stackelberg defender strategies in a two-target repeated security game."""

from __future__ import annotations

__version__ = "0.1.0"

from .analysis import (
    AnalysisConstants,
    RegimeReport,
    compare_zd_sse,
    compute_constants,
    gamma_membership,
    h_bound,
    remainder_g,
)
from .config import ConfigError, GameConfig, load_config, parse_config
from .estimators import BoundedlyRationalAttacker, StackelbergDefender, ZDDefender
from .game import (
    DETERMINISTIC_POLICIES,
    STATES,
    StageGame,
    batch_utilities,
    long_run_utilities,
    mixture_strategy,
    press_dyson_det,
    stationary_distribution,
    stubborn_utilities,
)
from .learning import SimulationConfig, simulate, sweep_lambda
from .response import best_response, best_response_certificate, solve_sse
from .validation import (
    AssumptionError,
    CaseMismatchError,
    DegenerateError,
    FeasibilityError,
    InputDomainError,
)
from .zd import ZDParameters, construct_zd, existence_report, named_zd, relation_feasible, zd_exists

__all__ = [
    "__version__",
    "AnalysisConstants",
    "RegimeReport",
    "compare_zd_sse",
    "compute_constants",
    "gamma_membership",
    "h_bound",
    "remainder_g",
    "ConfigError",
    "GameConfig",
    "load_config",
    "parse_config",
    "BoundedlyRationalAttacker",
    "StackelbergDefender",
    "ZDDefender",
    "DETERMINISTIC_POLICIES",
    "STATES",
    "StageGame",
    "batch_utilities",
    "long_run_utilities",
    "mixture_strategy",
    "press_dyson_det",
    "stationary_distribution",
    "stubborn_utilities",
    "SimulationConfig",
    "simulate",
    "sweep_lambda",
    "best_response",
    "best_response_certificate",
    "solve_sse",
    "AssumptionError",
    "CaseMismatchError",
    "DegenerateError",
    "FeasibilityError",
    "InputDomainError",
    "ZDParameters",
    "construct_zd",
    "existence_report",
    "named_zd",
    "relation_feasible",
    "zd_exists",
]
