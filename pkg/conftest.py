"""Shared fixtures: built-in games, random tiny games with perfect recall, random signals and traces."""

from typing import Dict, List, Optional, Tuple

import numpy as np
import pytest

from fcelab.efg_dynamics.game_io import builtin_game, parse_game
from fcelab.efg_dynamics.game_model import play_out_payoffs
from fcelab.efg_dynamics.models import (
    EmpiricalSignal,
    GameTree,
    LearnerConfig,
    PlayTrace,
    Procedure,
    PureStrategyProfile,
    TimestepRecord,
)

View = Tuple[Tuple[str, int], ...]


def random_tiny_game(rng: np.random.Generator, max_infosets: int = 6, max_actions: int = 3,
                     players: Optional[int] = None, chance: Optional[bool] = None,
                     max_depth: int = 3) -> GameTree:
    """A random game with perfect recall by construction.

    A node may join an existing infoset of its player only when the player's own
    (infoset, action) history is identical, which is exactly the recall condition.
    """
    players = int(rng.integers(1, 3)) if players is None else players
    chance = bool(rng.random() < 0.3) if chance is None else chance
    infosets: Dict[int, List[Tuple[str, View, int]]] = {p: [] for p in range(players)}
    lines = [f"game random_tiny players {players}"]
    counter = [0]

    def new_id() -> str:
        counter[0] += 1
        return f"n{counter[0]}"

    def total_infosets() -> int:
        return sum(len(v) for v in infosets.values())

    def terminal(node_id: str) -> None:
        payoffs = ", ".join(str(int(v)) for v in rng.integers(-2, 3, size=players))
        lines.append(f"node {node_id} terminal {{ {payoffs} }}")

    def build(node_id: str, depth: int, views: Tuple[View, ...]) -> None:
        if depth > 0 and (depth >= max_depth or rng.random() < 0.25):
            terminal(node_id)
            return
        p = int(rng.integers(players))
        candidates = [entry for entry in infosets[p] if entry[1] == views[p]]
        if candidates and (rng.random() < 0.6 or total_infosets() >= max_infosets):
            label, _, n = candidates[int(rng.integers(len(candidates)))]
        elif total_infosets() < max_infosets:
            label = f"p{p + 1}i{len(infosets[p])}"
            n = int(rng.integers(2, max_actions + 1))
            infosets[p].append((label, views[p], n))
        else:
            terminal(node_id)
            return
        children = [new_id() for _ in range(n)]
        actions = ", ".join(f"a{a} -> {child}" for a, child in enumerate(children))
        lines.append(f"node {node_id} player {p + 1} infoset {label} {{ {actions} }}")
        for a, child in enumerate(children):
            child_views = tuple(v + ((label, a),) if q == p else v for q, v in enumerate(views))
            build(child, depth + 1, child_views)

    empty: Tuple[View, ...] = tuple(() for _ in range(players))
    if chance:
        outcomes = [new_id(), new_id()]
        first = int(rng.integers(1, 4))
        lines.append(f"node root chance {{ c0 : {first}/4 -> {outcomes[0]}, c1 : {4 - first}/4 -> {outcomes[1]} }}")
        for child in outcomes:
            build(child, 0, empty)
    else:
        build("root", 0, empty)
    return parse_game("\n".join(lines) + "\n", "<random>")


def random_profile(game: GameTree, rng: np.random.Generator, with_chance: bool = False) -> PureStrategyProfile:
    choices = tuple(int(rng.integers(info.num_actions)) for info in game.infosets)
    chance = None
    if with_chance and game.has_chance:
        chance = tuple(int(rng.choice(len(game.node_children[node]), p=game.chance_probs[node]))
                       for node in game.chance_nodes)
    return PureStrategyProfile(choices, chance)


def random_signal(game: GameTree, rng: np.random.Generator, support: int = 8) -> EmpiricalSignal:
    """Dirichlet weights on up to `support` random strategic profiles."""
    size = int(rng.integers(1, support + 1))
    profiles = [random_profile(game, rng) for _ in range(size)]
    weights: Dict[PureStrategyProfile, float] = {}
    for profile, w in zip(profiles, rng.dirichlet(np.ones(size))):
        weights[profile] = weights.get(profile, 0.0) + float(w)
    return EmpiricalSignal(weights)


def random_trace(game: GameTree, rng: np.random.Generator, steps: int = 200) -> PlayTrace:
    """Uniformly random complete profiles; the decomposition bounds hold for any trace."""
    records = []
    for t in range(1, steps + 1):
        profile = random_profile(game, rng, with_chance=True)
        records.append(TimestepRecord(t, profile, play_out_payoffs(game, profile)))
    return PlayTrace(game, Procedure.FCE, 0, LearnerConfig(), records)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def matching_pennies() -> GameTree:
    return builtin_game("matching_pennies")


@pytest.fixture
def two_stage_solo() -> GameTree:
    return builtin_game("two_stage_solo")


@pytest.fixture
def gated_entry() -> GameTree:
    return builtin_game("gated_entry")


@pytest.fixture
def battle_of_sexes() -> GameTree:
    return builtin_game("battle_of_sexes_seq")


@pytest.fixture
def kuhn() -> GameTree:
    return builtin_game("kuhn_poker")
