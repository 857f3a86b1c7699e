"""
Extensive-form game representation and the combinatorial primitives built on it:
observability, reachability, successor and ancestry queries, signal histories,
deviation plans and the three utility functions.

All functions are pure; a GameTree is immutable once built.
"""

import itertools
from types import MappingProxyType
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import config
from .exceptions import (
    ChanceRealizationError,
    GameStructureError,
    PerfectRecallError,
    ProbabilitySumError,
    ProfileCapError,
    UnknownIdError,
)
from .logger import get_logger
from .models import (
    CHANCE,
    TERMINAL,
    DeviationPlan,
    GameDocument,
    GameTree,
    InfosetInfo,
    PureStrategyProfile,
    RecallReport,
    RecallViolation,
    SignalHistory,
)

logger = get_logger(__name__)

Ancestry = Tuple[Tuple[int, int], ...]


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def build_game(document: GameDocument) -> GameTree:
    """Intern a parsed document into a GameTree (structure and chance checks, no recall check)."""
    if not document.nodes:
        raise GameStructureError("game has no nodes")
    if document.players < 1:
        raise GameStructureError("game needs at least one strategic player", code="E-HEADER")

    records = {}
    for record in document.nodes:
        if record.id in records:
            raise GameStructureError(f"duplicate node id '{record.id}'", record.id, "E-DUPLICATE")
        records[record.id] = record
        _check_record(record, document.players)

    # depth-first preorder from the first record
    root_id = document.nodes[0].id
    order: List[str] = []
    parent_of: Dict[str, Optional[str]] = {}
    stack: List[Tuple[str, Optional[str]]] = [(root_id, None)]
    while stack:
        node_id, parent_id = stack.pop()
        if node_id in parent_of:
            raise GameStructureError(f"node '{node_id}' is reached twice (cycle or shared child)",
                                     parent_id or node_id)
        parent_of[node_id] = parent_id
        order.append(node_id)
        for _, child_id in reversed(records[node_id].actions):
            if child_id not in records:
                raise GameStructureError(f"node '{node_id}' points to unknown child '{child_id}'",
                                         node_id, "E-CHILD")
            stack.append((child_id, node_id))

    orphans = [r.id for r in document.nodes if r.id not in parent_of]
    if orphans:
        raise GameStructureError(f"orphan node(s) not reachable from the root: {', '.join(orphans)}",
                                 orphans[0])

    index = {node_id: i for i, node_id in enumerate(order)}
    owners: List[int] = []
    node_infoset: List[int] = []
    children: List[Tuple[int, ...]] = []
    action_labels: List[Tuple[str, ...]] = []
    probs: List[Tuple[float, ...]] = []
    payoffs: List[Tuple[float, ...]] = []
    chance_nodes: List[int] = []
    chance_index: List[int] = []
    infoset_ids: Dict[Tuple[int, str], int] = {}
    infoset_actions: List[Tuple[str, ...]] = []
    infoset_player: List[int] = []
    infoset_label: List[str] = []
    infoset_nodes: List[List[int]] = []

    for node_id in order:
        record = records[node_id]
        labels = tuple(action for action, _ in record.actions)
        children.append(tuple(index[child] for _, child in record.actions))
        action_labels.append(labels)
        chance_index.append(-1)
        if record.kind == "terminal":
            owners.append(TERMINAL)
            node_infoset.append(-1)
            probs.append(())
            payoffs.append(tuple(float(v) for v in record.payoffs))
        elif record.kind == "chance":
            owners.append(CHANCE)
            node_infoset.append(-1)
            probs.append(tuple(float(p) for p in record.probabilities))
            payoffs.append(())
            chance_index[-1] = len(chance_nodes)
            chance_nodes.append(index[node_id])
        else:
            player = record.player
            key = (player, record.infoset)
            if key not in infoset_ids:
                infoset_ids[key] = len(infoset_ids)
                infoset_actions.append(labels)
                infoset_player.append(player)
                infoset_label.append(record.infoset)
                infoset_nodes.append([])
            infoset_id = infoset_ids[key]
            if infoset_actions[infoset_id] != labels:
                raise GameStructureError(
                    f"infoset '{record.infoset}' of player {player + 1} has inconsistent actions "
                    f"{list(labels)} vs {list(infoset_actions[infoset_id])}", node_id, "E-INFOSET")
            owners.append(player)
            node_infoset.append(infoset_id)
            infoset_nodes[infoset_id].append(index[node_id])
            probs.append(())
            payoffs.append(())

    parents = tuple(index[parent_of[node_id]] if parent_of[node_id] is not None else -1
                    for node_id in order)
    histories = _node_histories(document.players, owners, node_infoset, children)

    ancestries: List[Ancestry] = [histories[nodes[0]][infoset_player[i]]
                                  for i, nodes in enumerate(infoset_nodes)]
    num_infosets = len(infoset_nodes)
    successors: List[List[List[int]]] = [[[] for _ in infoset_actions[i]] for i in range(num_infosets)]
    descendants: List[List[int]] = [[i] for i in range(num_infosets)]
    for infoset_id, ancestry in enumerate(ancestries):
        if ancestry:
            parent_infoset, action = ancestry[-1]
            successors[parent_infoset][action].append(infoset_id)
        for ancestor, _ in ancestry:
            descendants[ancestor].append(infoset_id)

    infosets = tuple(
        InfosetInfo(
            id=i,
            label=infoset_label[i],
            player=infoset_player[i],
            actions=infoset_actions[i],
            nodes=tuple(infoset_nodes[i]),
            ancestry=ancestries[i],
            successors=tuple(tuple(sorted(s)) for s in successors[i]),
            descendants=tuple(sorted(set(descendants[i]))),
        )
        for i in range(num_infosets)
    )
    player_infosets = tuple(tuple(i for i in range(num_infosets) if infoset_player[i] == p)
                            for p in range(document.players))

    game = GameTree(
        name=document.name,
        num_players=document.players,
        node_labels=tuple(order),
        node_owner=tuple(owners),
        node_infoset=tuple(node_infoset),
        node_children=tuple(children),
        node_action_labels=tuple(action_labels),
        node_parent=parents,
        chance_probs=tuple(probs),
        payoffs=tuple(payoffs),
        infosets=infosets,
        chance_nodes=tuple(chance_nodes),
        player_infosets=player_infosets,
        chance_index=tuple(chance_index),
        ancestry_maps=tuple(MappingProxyType(dict(a)) for a in ancestries),
    )
    logger.debug(f"Built game '{game.name}': {game.num_nodes} nodes, {game.num_infosets} infosets, "
                 f"{len(game.chance_nodes)} chance nodes")
    return game


def _check_record(record, players: int) -> None:
    if record.kind == "terminal":
        if len(record.payoffs) != players:
            raise GameStructureError(
                f"terminal '{record.id}' lists {len(record.payoffs)} payoffs, expected {players}",
                record.id, "E-PAYOFF")
        return
    if not record.actions:
        raise GameStructureError(f"node '{record.id}' has no actions", record.id)
    labels = [action for action, _ in record.actions]
    if len(set(labels)) != len(labels):
        raise GameStructureError(f"node '{record.id}' repeats an action label", record.id, "E-DUPLICATE")
    if record.kind == "chance":
        if any(p < 0 for p in record.probabilities):
            raise ProbabilitySumError(record.id, float(sum(record.probabilities)), record.line)
        total = float(sum(record.probabilities))
        if abs(total - 1.0) > config.CHANCE_SUM_TOLERANCE:
            raise ProbabilitySumError(record.id, total, record.line)
    elif record.player is None or not 0 <= record.player < players:
        raise GameStructureError(f"node '{record.id}' has invalid player {record.player}",
                                 record.id, "E-HEADER")


def _node_histories(players: int, owners: Sequence[int], node_infoset: Sequence[int],
                    children: Sequence[Tuple[int, ...]]) -> List[Tuple[Ancestry, ...]]:
    """Per node, each player's (infoset, action) sequence from the root; nodes are in preorder."""
    histories: List[Tuple[Ancestry, ...]] = [()] * len(owners)
    histories[0] = tuple(() for _ in range(players))
    for node, kids in enumerate(children):
        owner = owners[node]
        for action, child in enumerate(kids):
            if owner >= 0:
                updated = list(histories[node])
                updated[owner] = updated[owner] + ((node_infoset[node], action),)
                histories[child] = tuple(updated)
            else:
                histories[child] = histories[node]
    return histories


def validate_structure(game: GameTree) -> None:
    """Check parent/child consistency of an interned tree."""
    if not game.node_owner:
        raise GameStructureError("game has no nodes")
    for node, kids in enumerate(game.node_children):
        owner = game.node_owner[node]
        if owner == TERMINAL:
            if kids:
                raise GameStructureError(f"terminal node {game.node_labels[node]} has children",
                                         game.node_labels[node])
            continue
        if not kids:
            raise GameStructureError(f"non-terminal node {game.node_labels[node]} has no children",
                                     game.node_labels[node])
        for child in kids:
            if not 0 < child < game.num_nodes or game.node_parent[child] != node:
                raise GameStructureError(f"node {game.node_labels[node]} has a dangling child reference",
                                         game.node_labels[node], "E-CHILD")
    reached = {0}
    for node, kids in enumerate(game.node_children):
        if node in reached:
            reached.update(kids)
    if len(reached) != game.num_nodes:
        orphan = min(set(range(game.num_nodes)) - reached)
        raise GameStructureError(f"orphan node {game.node_labels[orphan]}", game.node_labels[orphan])


def validate_perfect_recall(game: GameTree) -> RecallReport:
    """Compare the player-view ancestry of every node of every infoset."""
    validate_structure(game)
    histories = _node_histories(game.num_players, game.node_owner, game.node_infoset, game.node_children)
    report = RecallReport()
    for info in game.infosets:
        first = histories[info.nodes[0]][info.player]
        for node in info.nodes[1:]:
            other = histories[node][info.player]
            if other != first:
                report.violations.append(RecallViolation(info.id, info.label, first, other))
                break
    if not report.ok:
        logger.warning(f"Perfect recall violated at {len(report.violations)} infoset(s) of '{game.name}'")
    return report


def require_perfect_recall(game: GameTree) -> GameTree:
    report = validate_perfect_recall(game)
    if not report.ok:
        raise PerfectRecallError(report.violations)
    return game


# ---------------------------------------------------------------------------
# Id checks and play-outs
# ---------------------------------------------------------------------------

def _check_infoset(game: GameTree, infoset_id: int) -> InfosetInfo:
    return game.infoset(infoset_id)


def _check_action(game: GameTree, infoset_id: int, action: int) -> InfosetInfo:
    info = game.infoset(infoset_id)
    if not 0 <= action < info.num_actions:
        raise UnknownIdError(f"action {action} is not valid at infoset {game.infoset_path(infoset_id)}")
    return info


def _chance_of(game: GameTree, s: PureStrategyProfile) -> Tuple[int, ...]:
    if not game.chance_nodes:
        return ()
    if s.chance is None:
        raise ChanceRealizationError(f"game '{game.name}' has chance nodes; profile carries no chance realization")
    return s.chance


def terminal_of(game: GameTree, choices: Sequence[int], chance: Sequence[int]) -> int:
    """Follow choices (by infoset) and realized chance from the root to a terminal node."""
    owners = game.node_owner
    children = game.node_children
    node = 0
    while True:
        owner = owners[node]
        if owner == TERMINAL:
            return node
        if owner == CHANCE:
            node = children[node][chance[game.chance_index[node]]]
        else:
            node = children[node][choices[game.node_infoset[node]]]


def path_nodes(game: GameTree, s: PureStrategyProfile) -> List[int]:
    """Nodes visited from the root to the terminal under s."""
    chance = _chance_of(game, s)
    owners = game.node_owner
    node = 0
    path = [node]
    while owners[node] != TERMINAL:
        if owners[node] == CHANCE:
            action = chance[game.chance_index[node]]
        else:
            action = s.choices[game.node_infoset[node]]
        node = game.node_children[node][action]
        path.append(node)
    return path


def path_infosets(game: GameTree, s: PureStrategyProfile) -> List[int]:
    """Infosets on the path of play under s, root first."""
    return [game.node_infoset[n] for n in path_nodes(game, s) if game.node_owner[n] >= 0]


def play_out_payoffs(game: GameTree, s: PureStrategyProfile) -> Tuple[float, ...]:
    return game.payoffs[terminal_of(game, s.choices, _chance_of(game, s))]


# ---------------------------------------------------------------------------
# Observability and reachability
# ---------------------------------------------------------------------------

def observed(game: GameTree, s: PureStrategyProfile, infoset_id: int, action: int) -> int:
    """O(s, I, a): 1 iff s(I) = a and I lies on the path of play under s."""
    _check_action(game, infoset_id, action)
    if s.choices[infoset_id] != action:
        return 0
    return observed_infoset(game, s, infoset_id)


def observed_infoset(game: GameTree, s: PureStrategyProfile, infoset_id: int) -> int:
    """O(s, I): 1 iff I is on the path of play under s."""
    _check_infoset(game, infoset_id)
    chance = _chance_of(game, s)
    owners = game.node_owner
    node = 0
    while True:
        owner = owners[node]
        if owner == TERMINAL:
            return 0
        if owner == CHANCE:
            action = chance[game.chance_index[node]]
        else:
            infoset = game.node_infoset[node]
            if infoset == infoset_id:
                return 1
            action = s.choices[infoset]
        node = game.node_children[node][action]


def reach_node(game: GameTree, s: PureStrategyProfile, infoset_id: int) -> Optional[int]:
    """The node of I that P(I) arrives at by forcing its ancestry actions, or None.

    Under perfect recall the owner only ever passes through its ancestry infosets on
    the way to I, so a single forced walk decides reachability.
    """
    info = _check_infoset(game, infoset_id)
    chance = _chance_of(game, s)
    forced = game.ancestry_maps[infoset_id]
    player = info.player
    owners = game.node_owner
    node = 0
    while True:
        owner = owners[node]
        if owner == TERMINAL:
            return None
        if owner == CHANCE:
            action = chance[game.chance_index[node]]
        else:
            infoset = game.node_infoset[node]
            if owner == player:
                if infoset == infoset_id:
                    return node
                action = forced.get(infoset, -1)
                if action < 0:
                    return None
            else:
                action = s.choices[infoset]
        node = game.node_children[node][action]


def reachable(game: GameTree, s: PureStrategyProfile, infoset_id: int) -> int:
    """R(s, I): 1 iff P(I) can steer its own moves so that I is on the path, others fixed by s."""
    return int(reach_node(game, s, infoset_id) is not None)


def reachable_by_search(game: GameTree, s: PureStrategyProfile, infoset_id: int) -> int:
    """R(s, I) straight from the definition: try every assignment of P(I)'s own infosets."""
    info = _check_infoset(game, infoset_id)
    for assignment in enumerate_player_strategies(game, game.player_infosets[info.player]):
        if observed_infoset(game, s.with_choices(assignment), infoset_id):
            return 1
    return 0


def counterfactual_payoffs(game: GameTree, s: PureStrategyProfile, infoset_id: int) -> Optional[np.ndarray]:
    """Payoff to P(I) of u(I, s|_{I->b}) for every b in A(I), or None when I is unreachable.

    The entry at s(I) is u(I, s_I).
    """
    node = reach_node(game, s, infoset_id)
    if node is None:
        return None
    player = game.infosets[infoset_id].player
    chance = _chance_of(game, s)
    owners = game.node_owner
    children = game.node_children
    values = np.empty(len(children[node]))
    for b, start in enumerate(children[node]):
        current = start
        while owners[current] != TERMINAL:
            if owners[current] == CHANCE:
                current = children[current][chance[game.chance_index[current]]]
            else:
                current = children[current][s.choices[game.node_infoset[current]]]
        values[b] = game.payoffs[current][player]
    return values


def reach_profile(game: GameTree, s: PureStrategyProfile, infoset_id: int) -> PureStrategyProfile:
    """s_I: P(I) plays the ancestry actions leading to I; s itself when I is unreachable."""
    if not reachable(game, s, infoset_id):
        return s
    return s.with_choices(game.ancestry_maps[infoset_id])


def override_action(game: GameTree, s: PureStrategyProfile, infoset_id: int, action: int) -> PureStrategyProfile:
    """s|_{I->b}: reach I and play b there; s itself when I is unreachable."""
    _check_action(game, infoset_id, action)
    if not reachable(game, s, infoset_id):
        return s
    overrides = dict(game.ancestry_maps[infoset_id])
    overrides[infoset_id] = action
    return s.with_choices(overrides)


# ---------------------------------------------------------------------------
# Successors, descendants, signal histories
# ---------------------------------------------------------------------------

def next_infoset(game: GameTree, s: PureStrategyProfile, infoset_id: int, action: int) -> Optional[int]:
    """N(s, I, a): where P(I) next acts under s|_{I->a}, or None."""
    info = _check_action(game, infoset_id, action)
    if not reachable(game, s, infoset_id):
        return None
    deviated = override_action(game, s, infoset_id, action)
    passed = False
    for node in path_nodes(game, deviated):
        if game.node_owner[node] != info.player:
            continue
        infoset = game.node_infoset[node]
        if passed:
            return infoset
        passed = infoset == infoset_id
    return None


def successors(game: GameTree, infoset_id: int, action: int) -> Tuple[int, ...]:
    """Succ(I, a), computed structurally."""
    return _check_action(game, infoset_id, action).successors[action]


def descendants(game: GameTree, infoset_id: int) -> Tuple[int, ...]:
    """DES(I): infosets of P(I) weakly below I, including I."""
    return _check_infoset(game, infoset_id).descendants


def signal_history(game: GameTree, s: PureStrategyProfile, infoset_id: int) -> SignalHistory:
    """S(s, I): recommendations along I's ancestry, then at I."""
    info = _check_infoset(game, infoset_id)
    entries = tuple(s.choices[ancestor] for ancestor, _ in info.ancestry) + (s.choices[infoset_id],)
    return SignalHistory(infoset_id, entries)


def partial_signal_history(game: GameTree, s: PureStrategyProfile, infoset_id: int) -> Tuple[int, ...]:
    """S(s, I)_{-1}."""
    info = _check_infoset(game, infoset_id)
    return tuple(s.choices[ancestor] for ancestor, _ in info.ancestry)


def all_signal_histories(game: GameTree, infoset_id: int) -> List[SignalHistory]:
    """S(I). Profiles are complete and independent per infoset, so every combination is realizable."""
    info = _check_infoset(game, infoset_id)
    ranges = [range(game.infosets[ancestor].num_actions) for ancestor, _ in info.ancestry]
    ranges.append(range(info.num_actions))
    return [SignalHistory(infoset_id, tuple(entries)) for entries in itertools.product(*ranges)]


# ---------------------------------------------------------------------------
# Utilities
# ---------------------------------------------------------------------------

def utility_reach(game: GameTree, infoset_id: int, s1: PureStrategyProfile, s2: PureStrategyProfile) -> float:
    """u(I, s1, s2): others follow s2, P(I) reaches I then follows s1; 0 if I is unreachable."""
    info = _check_infoset(game, infoset_id)
    if not reachable(game, s2, infoset_id):
        return 0.0
    choices = list(s2.choices)
    for own in game.player_infosets[info.player]:
        choices[own] = s1.choices[own]
    for ancestor, action in info.ancestry:
        choices[ancestor] = action
    return game.payoffs[terminal_of(game, choices, _chance_of(game, s2))][info.player]


def utility(game: GameTree, infoset_id: int, s: PureStrategyProfile) -> float:
    """u(I, s) = u(I, s, s)."""
    return utility_reach(game, infoset_id, s, s)


def utility_deviation(game: GameTree, infoset_id: int, d: DeviationPlan, s: PureStrategyProfile) -> float:
    """u(I, d, s): reach I, then play d(I', S(s, I')) at every own infoset I' from I on."""
    info = _check_infoset(game, infoset_id)
    chance = _chance_of(game, s)
    if not reachable(game, s, infoset_id):
        return game.payoffs[terminal_of(game, s.choices, chance)][info.player]
    choices = list(s.choices)
    for ancestor, action in info.ancestry:
        choices[ancestor] = action
    for below in info.descendants:
        choices[below] = d.action(below, signal_history(game, s, below).entries)
    return game.payoffs[terminal_of(game, choices, chance)][info.player]


def follow_plan(game: GameTree, player: int) -> DeviationPlan:
    """The plan that always plays the last recommendation."""
    plan = DeviationPlan(player)
    for infoset_id in game.player_infosets[player]:
        for history in all_signal_histories(game, infoset_id):
            plan.plan[(infoset_id, history.entries)] = history.last
    return plan


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------

def count_pure_profiles(game: GameTree) -> int:
    count = 1
    for info in game.infosets:
        count *= info.num_actions
    return count


def enumerate_pure_profiles(game: GameTree, cap: Optional[int] = None) -> List[PureStrategyProfile]:
    """Σ in lexicographic order of infoset ids (strategic choices only)."""
    cap = config.PROFILE_CAP if cap is None else cap
    count = count_pure_profiles(game)
    if count > cap:
        raise ProfileCapError(count, cap)
    ranges = [range(info.num_actions) for info in game.infosets]
    return [PureStrategyProfile(tuple(choices)) for choices in itertools.product(*ranges)]


def enumerate_player_strategies(game: GameTree, infosets: Sequence[int],
                                cap: Optional[int] = None) -> Iterator[Dict[int, int]]:
    """Every assignment of actions to the given infosets, as {infoset: action}."""
    cap = config.PROFILE_CAP if cap is None else cap
    count = 1
    for infoset_id in infosets:
        count *= game.infosets[infoset_id].num_actions
    if count > cap:
        raise ProfileCapError(count, cap)
    ranges = [range(game.infosets[i].num_actions) for i in infosets]
    for actions in itertools.product(*ranges):
        yield dict(zip(infosets, actions))


def chance_realizations(game: GameTree, cap: Optional[int] = None) -> List[Tuple[Tuple[int, ...], float]]:
    """Every complete chance realization with its probability (one empty realization if no chance)."""
    cap = config.PROFILE_CAP if cap is None else cap
    count = 1
    for node in game.chance_nodes:
        count *= len(game.node_children[node])
    if count > cap:
        raise ProfileCapError(count, cap)
    ranges = [range(len(game.node_children[node])) for node in game.chance_nodes]
    realizations = []
    for outcome in itertools.product(*ranges):
        prob = 1.0
        for node, action in zip(game.chance_nodes, outcome):
            prob *= game.chance_probs[node][action]
        if prob > 0:
            realizations.append((tuple(outcome), prob))
    return realizations
