"""
Tests for internal and external regret matching rows.
"""

import numpy as np
import pytest

from fcelab.efg_dynamics.exceptions import EngineError
from fcelab.efg_dynamics.models import ExternalRegretRow, InternalRegretRow
from fcelab.efg_dynamics.regret_engines import (
    accumulate,
    default_mu,
    external_probabilities,
    external_step,
    internal_step,
    switching_probabilities,
)


def test_switching_probabilities():
    row = InternalRegretRow(np.array([[0.0, 3.0, -1.0], [0, 0, 0], [0, 0, 0]]), visits=1, last_action=0)
    assert switching_probabilities(row, 10.0) == pytest.approx([0.7, 0.3, 0.0])


def test_switching_is_normalised_when_mu_is_small():
    row = InternalRegretRow(np.array([[0.0, 30.0, 10.0], [0, 0, 0], [0, 0, 0]]), visits=1, last_action=0)
    assert switching_probabilities(row, 10.0) == pytest.approx([0.0, 0.75, 0.25])


def test_fresh_row_is_uniform():
    row = InternalRegretRow.empty(4)
    assert switching_probabilities(row, 1.0) == pytest.approx([0.25] * 4)


def test_nonpositive_mu_is_rejected():
    with pytest.raises(EngineError):
        switching_probabilities(InternalRegretRow.empty(2, 0), 0.0)


def test_no_regret_means_staying():
    row = InternalRegretRow.empty(3, last_action=2)
    accumulate(row, [-1.0, -2.0, 0.0])
    rng = np.random.default_rng(0)
    assert {internal_step(row, 1.0, rng) for _ in range(50)} == {2}


def test_accumulate_internal_row():
    row = InternalRegretRow.empty(2, last_action=1)
    accumulate(row, [0.5, 7.0])
    accumulate(row, [1.5, 0.0], action=0)
    assert row.regrets.tolist() == [[0.0, 0.0], [0.5, 0.0]]
    assert row.visits == 2
    with pytest.raises(EngineError):
        accumulate(row, [1.0, 2.0, 3.0])
    with pytest.raises(EngineError):
        accumulate(InternalRegretRow.empty(2), [1.0, 1.0])


def test_external_row():
    row = ExternalRegretRow.empty(3)
    assert external_probabilities(row) == pytest.approx([1 / 3] * 3)
    accumulate(row, [1.0, -1.0, 3.0])
    assert external_probabilities(row) == pytest.approx([0.25, 0.0, 0.75])
    rng = np.random.default_rng(3)
    assert {external_step(row, rng) for _ in range(100)} <= {0, 2}


def test_default_mu(matching_pennies, two_stage_solo):
    # two actions, payoff range 2
    assert default_mu(matching_pennies, 0) == 8.0
    assert default_mu(two_stage_solo, 1, factor=1.0) == 2.0


def _chi_square(counts, probs):
    expected = np.asarray(probs) * np.sum(counts)
    return float(np.sum((np.asarray(counts) - expected) ** 2 / expected))


def test_internal_step_samples_the_switching_distribution():
    row = InternalRegretRow(np.array([[0.0, 2.0, 1.0], [0, 0, 0], [0, 0, 0]]), visits=1, last_action=0)
    probs = switching_probabilities(row, 10.0)
    assert probs == pytest.approx([0.7, 0.2, 0.1])
    rng = np.random.default_rng(11)
    counts = np.bincount([internal_step(row, 10.0, rng) for _ in range(20_000)], minlength=3)
    # 2 degrees of freedom, p = 0.001
    assert _chi_square(counts, probs) < 13.816


def test_external_step_samples_the_positive_regrets():
    row = ExternalRegretRow(np.array([1.0, -1.0, 3.0]), visits=2)
    rng = np.random.default_rng(12)
    counts = np.bincount([external_step(row, rng) for _ in range(20_000)], minlength=3)
    assert counts[1] == 0
    # 1 degree of freedom, p = 0.001
    assert _chi_square(counts[[0, 2]], [0.25, 0.75]) < 10.828


@pytest.mark.parametrize("seed", range(20))
def test_repeated_switching_has_vanishing_internal_regret(seed):
    """One decision repeated against noisy payoffs: average positive internal regret goes to 0."""
    steps, mu = 10_000, 4.0
    rng = np.random.default_rng(seed)
    payoffs = np.array([0.55, 0.45]) + rng.normal(0.0, 0.3, size=(steps, 2))
    row = InternalRegretRow.empty(2)
    for u in payoffs:
        action = internal_step(row, mu, rng)
        accumulate(row, u - u[action], action=action)
        row.last_action = action
    assert row.visits == steps
    assert np.max(np.maximum(row.regrets, 0.0)) / steps < 0.05
