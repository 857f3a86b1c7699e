"""
Long convergence runs on the built-in games. Deselect with: pytest -m "not slow"
"""

import pytest

from fcelab.efg_dynamics.audit import (
    SampleTable,
    efce_epsilon,
    empirical_signal,
    fce_local_epsilon,
    geometric_checkpoints,
    regret_report,
    regret_trajectory,
)
from fcelab.efg_dynamics.game_io import builtin_game
from fcelab.efg_dynamics.learners import run_efce, run_fce
from fcelab.efg_dynamics.models import RegretFamily

pytestmark = pytest.mark.slow


@pytest.mark.parametrize("name", ["matching_pennies", "battle_of_sexes_seq"])
@pytest.mark.parametrize("seed", range(5))
def test_fce_on_simultaneous_games(name, seed):
    game = builtin_game(name)
    trace = run_fce(game, 100_000, seed=seed)
    assert fce_local_epsilon(game, empirical_signal(trace)) <= 0.05


@pytest.mark.parametrize("seed", range(3))
def test_fce_on_kuhn(seed):
    game = builtin_game("kuhn_poker")
    trace = run_fce(game, 200_000, seed=seed)
    points = [p for p in geometric_checkpoints(trace.steps) if p >= 10_000]
    reports = regret_trajectory(trace, checkpoints=points, families=(RegretFamily.CFIR,))
    values = [report.maximum(RegretFamily.CFIR) for report in reports]
    assert values[-1] <= 0.05
    # allow noise between checkpoints, not growth
    for previous, current in zip(values, values[1:]):
        assert current <= 1.2 * previous + 1e-9


@pytest.mark.parametrize("name", ["kuhn_poker", "gated_entry"])
def test_efce_convergence(name):
    game = builtin_game(name)
    trace = run_efce(game, 200_000, seed=0)
    table = SampleTable.from_trace(trace)
    report = regret_report(table, families=(RegretFamily.AR,))
    assert report.maximum(RegretFamily.AR) <= 0.05
    assert table.efce_epsilon() <= 0.08
    assert efce_epsilon(game, empirical_signal(trace)) <= 0.08
