"""
Internal and external regret matching on single action sets.

Rows store cumulative regrets; averaging by the row's visit count happens when
an action is drawn.
"""

from typing import Optional, Sequence, Union

import numpy as np

from . import config
from .exceptions import EngineError
from .models import ExternalRegretRow, GameTree, InternalRegretRow

Row = Union[InternalRegretRow, ExternalRegretRow]


def positive_part(values: np.ndarray) -> np.ndarray:
    return np.maximum(values, 0.0)


def switching_probabilities(row: InternalRegretRow, mu: float) -> np.ndarray:
    """Distribution over the next action given the row's last action.

    b != a is played with probability max(0, r(a->b)) / (visits * mu); a keeps the rest.
    """
    if mu <= 0:
        raise EngineError(f"mu must be positive, got {mu}")
    n = row.regrets.shape[0]
    if row.last_action is None:
        return np.full(n, 1.0 / n)
    a = row.last_action
    probs = np.zeros(n)
    if row.visits > 0:
        probs = positive_part(row.regrets[a]) / (row.visits * mu)
        probs[a] = 0.0
        switch = probs.sum()
        if switch > 1.0:
            # mu below the regret bound; keep the draw well defined
            probs /= switch
    probs[a] = max(0.0, 1.0 - probs.sum())
    return probs


def internal_step(row: InternalRegretRow, mu: float, rng: np.random.Generator) -> int:
    """Stay at the last action or switch away in proportion to positive internal regret."""
    probs = switching_probabilities(row, mu)
    if row.last_action is None:
        return int(rng.integers(len(probs)))
    return int(rng.choice(len(probs), p=probs))


def external_probabilities(row: ExternalRegretRow) -> np.ndarray:
    positive = positive_part(row.regrets)
    total = positive.sum()
    if total <= 0:
        return np.full(len(positive), 1.0 / len(positive))
    return positive / total


def external_step(row: ExternalRegretRow, rng: np.random.Generator) -> int:
    """Play b with probability proportional to max(0, r(b)); uniform when no regret is positive."""
    positive = positive_part(row.regrets)
    if positive.sum() <= 0:
        return int(rng.integers(len(positive)))
    return int(rng.choice(len(positive), p=positive / positive.sum()))


def accumulate(row: Row, deltas: Sequence[float], action: Optional[int] = None) -> Row:
    """Add one observation of regret deltas to a row and count the visit.

    For an internal row the deltas are r(action->b) for every b, `action` defaulting
    to the row's last action; r(a->a) stays 0.
    """
    deltas = np.asarray(deltas, dtype=float)
    n = row.regrets.shape[0]
    if deltas.shape != (n,):
        raise EngineError(f"delta vector of shape {deltas.shape} does not match {n} actions")
    if isinstance(row, InternalRegretRow):
        source = row.last_action if action is None else action
        if source is None:
            raise EngineError("internal regret row has no action to accumulate against")
        row.regrets[source] += deltas
        row.regrets[source, source] = 0.0
    else:
        row.regrets += deltas
    row.visits += 1
    return row


def default_mu(game: GameTree, infoset_id: int, factor: float = config.MU_FACTOR) -> float:
    """factor * |A(I)| * payoff range of P(I) (range taken as 1 when it is 0)."""
    info = game.infoset(infoset_id)
    spread = game.payoff_range(info.player) or 1.0
    return factor * info.num_actions * spread
