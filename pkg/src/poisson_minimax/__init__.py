"""Minimax sequential tests for the intensity of a Poisson process."""

from .boundary import Boundaries, DpConfig, ValueGrid, extract_boundaries, solve_boundaries, solve_value
from .detector import DetectionOutcome, SequentialDetector, detect
from .errors import ConfigError, MinimaxError, PreconditionError, SolverError, UndecidedError
from .fode import FodeSolution, gamma_from_fode, solve_fode
from .lfd import HEstimate, LfdConfig, LfdReport, estimate_h, estimate_jbar, find_lfd, gamma_mc
from .model import (
    Costs,
    Decision,
    LikelihoodState,
    Model,
    PriorOdds,
    Regime,
    classify_regime,
    decide,
    likelihood,
    posterior,
)
from .pathsim import (
    ExitRecord,
    Interval,
    RngStream,
    Side,
    estimate_exit_functionals,
    simulate_exit,
    simulate_exits,
)

__version__ = "0.1.0"
