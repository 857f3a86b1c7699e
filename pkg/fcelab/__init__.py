"""
fcelab - learning forgiving correlated equilibria in extensive-form games.

This package contains:
- efg_dynamics: game model, uncoupled learners and equilibrium audits

Usage:
    from fcelab import builtin_game, run_fce, epsilon_report, empirical_signal
    from fcelab.efg_dynamics import ExperimentApp
"""

__version__ = "0.1.0"

from .efg_dynamics.app import ExperimentApp
from .efg_dynamics.audit import SampleTable, decomposition_gaps, empirical_signal, epsilon_report, regret_report
from .efg_dynamics.exceptions import FceLabError, GameParseError, ProfileCapError
from .efg_dynamics.game_io import builtin_game, load_game, parse_game
from .efg_dynamics.learners import run_afce, run_efce, run_fce
from .efg_dynamics.models import GameTree, PlayTrace, Procedure, RunConfig

__all__ = [
    "ExperimentApp",
    "SampleTable",
    "decomposition_gaps",
    "empirical_signal",
    "epsilon_report",
    "regret_report",
    "FceLabError",
    "GameParseError",
    "ProfileCapError",
    "builtin_game",
    "load_game",
    "parse_game",
    "run_afce",
    "run_efce",
    "run_fce",
    "GameTree",
    "PlayTrace",
    "Procedure",
    "RunConfig",
]
