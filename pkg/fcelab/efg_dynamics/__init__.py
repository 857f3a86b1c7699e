"""
efg_dynamics - uncoupled learning dynamics and equilibrium audits for extensive-form games.

Main components:
- Game model: parse, validate and query finite games with perfect recall
- Learners: FCE (signal-history internal regret), EFCE and AFCE (low-memory) procedures
- Audit: regret families, equilibrium epsilons and decomposition checks
- ExperimentApp: async runner that writes traces, regret CSVs and summaries
"""

from .app import ExperimentApp
from .audit import (
    SampleTable,
    ace_epsilon,
    afce_epsilon,
    decomposition_gaps,
    efce_epsilon,
    empirical_signal,
    epsilon_report,
    fce_epsilon,
    fce_local_epsilon,
    regret_report,
    regret_trajectory,
)
from .exceptions import FceLabError, GameParseError, PerfectRecallError, ProfileCapError
from .game_io import builtin_game, load_game, parse_game, parse_signal
from .learners import resume, run_afce, run_efce, run_fce
from .models import (
    EmpiricalSignal,
    GameTree,
    PlayTrace,
    Procedure,
    PureStrategyProfile,
    RegretFamily,
    RunConfig,
)

__all__ = [
    "ExperimentApp",
    "SampleTable",
    "ace_epsilon",
    "afce_epsilon",
    "decomposition_gaps",
    "efce_epsilon",
    "empirical_signal",
    "epsilon_report",
    "fce_epsilon",
    "fce_local_epsilon",
    "regret_report",
    "regret_trajectory",
    "FceLabError",
    "GameParseError",
    "PerfectRecallError",
    "ProfileCapError",
    "builtin_game",
    "load_game",
    "parse_game",
    "parse_signal",
    "resume",
    "run_afce",
    "run_efce",
    "run_fce",
    "EmpiricalSignal",
    "GameTree",
    "PlayTrace",
    "Procedure",
    "PureStrategyProfile",
    "RegretFamily",
    "RunConfig",
]
