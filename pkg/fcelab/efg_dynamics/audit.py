"""
Regret families, equilibrium epsilons and decomposition checks.

Everything here works on weighted joint samples: a strategic profile together
with a complete chance realisation, and a weight. A trace yields one sample per
distinct realized profile (weight = frequency / T). A signal keyed by strategic
profiles only is expanded through the game's chance distribution.

Inner maxima over continuation strategies and deviation plans are computed by a
best-response pass over the owner's infosets below the deviation point. The
exhaustive variants enumerate the same sets and exist for cross-checking.
"""

import itertools
import math
from collections import Counter, defaultdict
from typing import Any, Dict, Hashable, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from . import config
from .exceptions import EmptyTraceError, ProfileCapError, RelationError, UnknownIdError
from .game_model import (
    all_signal_histories,
    chance_realizations,
    counterfactual_payoffs,
    enumerate_player_strategies,
    path_infosets,
    reach_node,
    utility_deviation,
    utility_reach,
)
from .logger import get_logger
from .models import (
    CHANCE,
    TERMINAL,
    DeviationPlan,
    EmpiricalSignal,
    EpsilonReport,
    GameTree,
    GapEntry,
    GapReport,
    PlayTrace,
    PureStrategyProfile,
    RegretFamily,
    RegretReport,
)

logger = get_logger(__name__)

Sample = Tuple[PureStrategyProfile, float]
SignalKey = Tuple[int, Tuple[int, ...]]

DP = "dp"
EXHAUSTIVE = "exhaustive"


# ---------------------------------------------------------------------------
# Empirical signal and samples
# ---------------------------------------------------------------------------

def empirical_signal(trace: PlayTrace, keep_chance: bool = False) -> EmpiricalSignal:
    """h^T: frequencies of realized profiles.

    By default chance is marginalised (keys are strategic profiles). With
    keep_chance the realized chance moves stay in the key, which makes the
    signal carry exactly the trace's own samples.
    """
    if not trace.records:
        raise EmptyTraceError("cannot build an empirical signal from an empty trace")
    counts = Counter(record.profile if keep_chance else record.profile.strategic()
                     for record in trace.records)
    total = len(trace.records)
    return EmpiricalSignal({profile: count / total for profile, count in counts.items()})


def expand_signal(game: GameTree, signal: EmpiricalSignal, cap: Optional[int] = None) -> List[Sample]:
    """Weighted joint samples; chance-free profiles are spread over every chance realisation."""
    cap = config.PROFILE_CAP if cap is None else cap
    realizations = chance_realizations(game, cap) if game.has_chance else [((), 1.0)]
    samples: List[Sample] = []
    for profile, weight in signal.weights.items():
        if weight <= 0:
            continue
        if not game.has_chance:
            samples.append((profile.strategic(), weight))
        elif profile.chance is not None:
            samples.append((profile, weight))
        else:
            samples.extend((profile.with_chance(outcome), weight * prob) for outcome, prob in realizations)
    if len(samples) > cap:
        raise ProfileCapError(len(samples), cap)
    return samples


class SampleTable:
    """Weighted samples of one game with per-infoset counterfactual payoffs cached lazily."""

    def __init__(self, game: GameTree, samples: Sequence[Sample], steps: int = 0):
        self.game = game
        self.samples = list(samples)
        self.steps = steps
        self._values: Dict[int, List[Optional[np.ndarray]]] = {}
        self._paths: Optional[List[Set[int]]] = None

    @classmethod
    def from_trace(cls, trace: PlayTrace) -> "SampleTable":
        if not trace.records:
            raise EmptyTraceError("cannot audit an empty trace")
        signal = empirical_signal(trace, keep_chance=True)
        return cls(trace.game, list(signal.weights.items()), trace.steps)

    @classmethod
    def from_signal(cls, game: GameTree, signal: EmpiricalSignal, cap: Optional[int] = None) -> "SampleTable":
        return cls(game, expand_signal(game, signal, cap))

    # -- per-sample primitives ------------------------------------------------

    def values(self, infoset_id: int) -> List[Optional[np.ndarray]]:
        """Per sample, u(I, s|I->b) for every b, or None where I is unreachable."""
        if infoset_id not in self._values:
            self.game.infoset(infoset_id)
            self._values[infoset_id] = [counterfactual_payoffs(self.game, s, infoset_id)
                                        for s, _ in self.samples]
        return self._values[infoset_id]

    def on_path(self, k: int) -> Set[int]:
        if self._paths is None:
            self._paths = [set(path_infosets(self.game, s)) for s, _ in self.samples]
        return self._paths[k]

    def observed(self, k: int, infoset_id: int, action: int) -> bool:
        return self.samples[k][0].choices[infoset_id] == action and infoset_id in self.on_path(k)

    def baseline(self, k: int, infoset_id: int) -> float:
        """u(I, s) = u(I, s_I) for a sample where I is reachable."""
        values = self.values(infoset_id)[k]
        return float(values[self.samples[k][0].choices[infoset_id]])

    def gains(self, k: int, infoset_id: int) -> Optional[np.ndarray]:
        values = self.values(infoset_id)[k]
        if values is None:
            return None
        return values - values[self.samples[k][0].choices[infoset_id]]

    def _check_action(self, infoset_id: int, action: int) -> None:
        info = self.game.infoset(infoset_id)
        if not 0 <= action < info.num_actions:
            raise UnknownIdError(f"action {action} is not valid at {self.game.infoset_path(infoset_id)}")

    def _check_relation(self, parent: int, action: int, infoset_id: int) -> None:
        self._check_action(parent, action)
        info = self.game.infoset(infoset_id)
        if info.player != self.game.infosets[parent].player or infoset_id not in self.game.infosets[parent].descendants:
            raise RelationError(f"{self.game.infoset_path(infoset_id)} is not an own descendant of "
                                f"{self.game.infoset_path(parent)}")

    # -- one-action deviations ------------------------------------------------

    def counterfactual_vector(self, parent: int, action: int, infoset_id: int) -> np.ndarray:
        """Per b: sum of w * O(s, I^P, a) * R(s, I) * (u(I, s|I->b, s) - u(I, s))."""
        self._check_relation(parent, action, infoset_id)
        total = np.zeros(self.game.infosets[infoset_id].num_actions)
        for k, (_, w) in enumerate(self.samples):
            if not self.observed(k, parent, action):
                continue
            gains = self.gains(k, infoset_id)
            if gains is not None:
                total += w * gains
        return total

    def counterfactual_positive(self, parent: int, action: int, infoset_id: int) -> float:
        return max(0.0, float(self.counterfactual_vector(parent, action, infoset_id).max()))

    def agent_vector(self, infoset_id: int, action: int) -> np.ndarray:
        return self.counterfactual_vector(infoset_id, action, infoset_id)

    def signal_vectors(self, infoset_id: int) -> Dict[Tuple[int, ...], np.ndarray]:
        """Per realized signal history: sum of w * R(s, I) * (u(I, s|I->b) - u(I, s_I)) for every b."""
        info = self.game.infoset(infoset_id)
        vectors: Dict[Tuple[int, ...], np.ndarray] = {}
        for k, (s, w) in enumerate(self.samples):
            gains = self.gains(k, infoset_id)
            if gains is None:
                continue
            entries = tuple(s.choices[ancestor] for ancestor, _ in info.ancestry) + (s.choices[infoset_id],)
            if entries not in vectors:
                vectors[entries] = np.zeros(info.num_actions)
            vectors[entries] += w * gains
        return vectors

    # -- best responses -------------------------------------------------------

    def _members(self, infoset_id: int, parent: Optional[int] = None, action: Optional[int] = None,
                 gate: str = "R") -> List[int]:
        """Samples passing the gate: O(s, I^P, a) * R(s, I), O(s, I) or R(s, I)."""
        values = self.values(infoset_id)
        members = []
        for k in range(len(self.samples)):
            if values[k] is None:
                continue
            if parent is not None and not self.observed(k, parent, action):
                continue
            if gate == "O" and infoset_id not in self.on_path(k):
                continue
            members.append(k)
        return members

    def best_response(self, infoset_id: int, members: Iterable[int], by_history: bool = False,
                      exclude: Optional[int] = None) -> Dict[Hashable, float]:
        """Maximum weighted payoff of P(I) over continuations from I, per root key.

        Keys are infosets (one action per infoset) or, with by_history, pairs of
        infoset and the recommendation signal history (one action per pair, a
        deviation plan). `exclude` removes one action at I itself.
        """
        game = self.game
        player = game.infosets[infoset_id].player
        owners = game.node_owner
        children = game.node_children
        direct: Dict[Tuple[Hashable, int], float] = defaultdict(float)
        links: Dict[Tuple[Hashable, int], Set[Hashable]] = defaultdict(set)
        roots: Set[Hashable] = set()
        depth: Dict[Hashable, int] = {}

        for k in members:
            s, w = self.samples[k]
            start = reach_node(game, s, infoset_id)
            if start is None:
                continue
            stack: List[Tuple[int, Optional[Tuple[Hashable, int]]]] = [(start, None)]
            while stack:
                node, edge = stack.pop()
                while True:
                    owner = owners[node]
                    if owner == TERMINAL:
                        direct[edge] += w * game.payoffs[node][player]
                        break
                    if owner == CHANCE:
                        node = children[node][s.chance[game.chance_index[node]]]
                        continue
                    infoset = game.node_infoset[node]
                    if owner != player:
                        node = children[node][s.choices[infoset]]
                        continue
                    info = game.infosets[infoset]
                    if by_history:
                        key: Hashable = (infoset, tuple(s.choices[a] for a, _ in info.ancestry)
                                         + (s.choices[infoset],))
                    else:
                        key = infoset
                    depth[key] = len(info.ancestry)
                    if edge is None:
                        roots.add(key)
                    else:
                        links[edge].add(key)
                    for b, child in enumerate(children[node]):
                        if edge is None and b == exclude:
                            continue
                        stack.append((child, (key, b)))
                    break

        value: Dict[Hashable, float] = {}
        for key in sorted(depth, key=depth.get, reverse=True):
            infoset = key[0] if by_history else key
            best = -math.inf
            for b in range(game.infosets[infoset].num_actions):
                if key in roots and b == exclude:
                    continue
                total = direct.get((key, b), 0.0) + sum(value[c] for c in links.get((key, b), ()))
                best = max(best, total)
            value[key] = best
        return {key: value[key] for key in roots}

    def _exhaustive_strategy(self, infoset_id: int, members: Sequence[int], exclude: Optional[int],
                             cap: Optional[int]) -> float:
        best = -math.inf
        targets = self.game.infosets[infoset_id].descendants
        for assignment in enumerate_player_strategies(self.game, targets, cap):
            if exclude is not None and assignment[infoset_id] == exclude:
                continue
            total = 0.0
            for k in members:
                s, w = self.samples[k]
                total += w * utility_reach(self.game, infoset_id, s.with_choices(assignment), s)
            best = max(best, total)
        return best

    def _exhaustive_plan(self, infoset_id: int, entries: Tuple[int, ...], members: Sequence[int],
                         cap: Optional[int]) -> float:
        game = self.game
        info = game.infosets[infoset_id]
        pairs = [(j, history.entries)
                 for j in info.descendants
                 for history in all_signal_histories(game, j)
                 if history.entries[:len(entries)] == entries]
        cap = config.PROFILE_CAP if cap is None else cap
        count = 1
        for j, _ in pairs:
            count *= game.infosets[j].num_actions
            if count > cap:
                raise ProfileCapError(count, cap)
        best = -math.inf
        for actions in itertools.product(*[range(game.infosets[j].num_actions) for j, _ in pairs]):
            plan = DeviationPlan(info.player, dict(zip(pairs, actions)))
            total = 0.0
            for k in members:
                s, w = self.samples[k]
                total += w * utility_deviation(game, infoset_id, plan, s)
            best = max(best, total)
        return best

    def _baseline(self, infoset_id: int, members: Iterable[int]) -> float:
        return sum(self.samples[k][1] * self.baseline(k, infoset_id) for k in members)

    # -- regret families ------------------------------------------------------

    def external_regret(self, parent: int, action: int, infoset_id: int, method: str = DP,
                        cap: Optional[int] = None) -> float:
        """max over continuations s^B of sum w * O(s, I^P, a) * R(s, I) * (u(I, s^B, s) - u(I, s))."""
        self._check_relation(parent, action, infoset_id)
        members = self._members(infoset_id, parent, action)
        if not members:
            return 0.0
        if method == EXHAUSTIVE:
            best = self._exhaustive_strategy(infoset_id, members, None, cap)
        else:
            best = self.best_response(infoset_id, members)[infoset_id]
        return best - self._baseline(infoset_id, members)

    def internal_regret(self, infoset_id: int, action: int, method: str = DP,
                        cap: Optional[int] = None) -> float:
        """IR^{T+}(I, a): best continuation with s'(I) != a against the samples observing (I, a)."""
        self._check_action(infoset_id, action)
        if self.game.infosets[infoset_id].num_actions < 2:
            return 0.0
        members = self._members(infoset_id, infoset_id, action)
        if not members:
            return 0.0
        if method == EXHAUSTIVE:
            best = self._exhaustive_strategy(infoset_id, members, action, cap)
        else:
            best = self.best_response(infoset_id, members, exclude=action)[infoset_id]
        return max(0.0, best - self._baseline(infoset_id, members))

    def agent_regret(self, infoset_id: int, action: int) -> float:
        self._check_action(infoset_id, action)
        return max(0.0, float(self.agent_vector(infoset_id, action).max()))

    def plan_regrets(self, infoset_id: int, gate: str = "R", method: str = DP,
                     cap: Optional[int] = None) -> Dict[Tuple[int, ...], float]:
        """Per signal history at I: best deviation-plan gain, with R or O gating."""
        members = self._members(infoset_id, gate=gate)
        groups: Dict[Tuple[int, ...], List[int]] = defaultdict(list)
        info = self.game.infosets[infoset_id]
        for k in members:
            s = self.samples[k][0]
            groups[tuple(s.choices[a] for a, _ in info.ancestry) + (s.choices[infoset_id],)].append(k)
        if method == EXHAUSTIVE:
            best = {entries: self._exhaustive_plan(infoset_id, entries, group, cap)
                    for entries, group in groups.items()}
        else:
            best = {key[1]: v for key, v in self.best_response(infoset_id, members, by_history=True).items()}
        return {entries: best[entries] - self._baseline(infoset_id, group) for entries, group in groups.items()}

    # -- equilibrium constraint values ----------------------------------------

    def afce_values(self) -> Dict[Tuple[int, int, int], float]:
        """(I, a, b) -> sum h(s) O(s, I, a) (u(I, s_{I->b}, s) - u(I, s))."""
        values = {}
        for info in self.game.infosets:
            for a in range(info.num_actions):
                for b, v in enumerate(self.agent_vector(info.id, a)):
                    values[(info.id, a, b)] = float(v)
        return values

    def fce_local_values(self) -> Dict[Tuple[int, Tuple[int, ...], int], float]:
        """(I, signal history, b) -> sum h(s) R(s, I) 1(S(s, I) = history) (u(I, s_{I->b}) - u(I, s_I))."""
        values = {}
        for info in self.game.infosets:
            for entries, vector in self.signal_vectors(info.id).items():
                for b, v in enumerate(vector):
                    values[(info.id, entries, b)] = float(v)
        return values

    def afce_epsilon(self) -> float:
        return max([0.0, *self.afce_values().values()])

    def efce_value(self, infoset_id: int, action: int, method: str = DP, cap: Optional[int] = None) -> float:
        """Best gain of any strategy of P(I), s'(I) = a included, against the samples observing (I, a)."""
        return max(0.0, self.external_regret(infoset_id, action, infoset_id, method, cap))

    def efce_epsilon(self, method: str = DP, cap: Optional[int] = None) -> float:
        return max([0.0] + [self.efce_value(info.id, a, method, cap)
                            for info in self.game.infosets for a in range(info.num_actions)])

    def ace_epsilon(self, method: str = DP, cap: Optional[int] = None) -> float:
        return max([0.0] + [v for info in self.game.infosets
                            for v in self.plan_regrets(info.id, "O", method, cap).values()])

    def fce_epsilon(self, method: str = DP, cap: Optional[int] = None) -> float:
        return max([0.0] + [v for info in self.game.infosets
                            for v in self.plan_regrets(info.id, "R", method, cap).values()])

    def fce_local_epsilon(self) -> float:
        return max([0.0, *self.fce_local_values().values()])


# ---------------------------------------------------------------------------
# Trace regrets (averaged by T)
# ---------------------------------------------------------------------------

def _table(source: Union[PlayTrace, SampleTable]) -> SampleTable:
    return source if isinstance(source, SampleTable) else SampleTable.from_trace(source)


def external_regret(trace: Union[PlayTrace, SampleTable], parent: int, action: int, infoset_id: int,
                    method: str = DP, cap: Optional[int] = None) -> float:
    """ER^T(I^P, a, I); the positive part is ER^{T+}."""
    return _table(trace).external_regret(parent, action, infoset_id, method, cap)


def counterfactual_regret(trace: Union[PlayTrace, SampleTable], parent: int, action: int,
                          infoset_id: int, deviation: int) -> float:
    """CFR^T(I^P, a, I, b)."""
    table = _table(trace)
    table._check_action(infoset_id, deviation)
    return float(table.counterfactual_vector(parent, action, infoset_id)[deviation])


def counterfactual_regret_positive(trace: Union[PlayTrace, SampleTable], parent: int, action: int,
                                   infoset_id: int) -> float:
    """CFR^{T+}(I^P, a, I) = max(0, max_b CFR^T(I^P, a, I, b))."""
    return _table(trace).counterfactual_positive(parent, action, infoset_id)


def counterfactual_internal_regret(trace: Union[PlayTrace, SampleTable], infoset_id: int,
                                   entries: Sequence[int], deviation: int, cumulative: bool = False) -> float:
    """CFIR(I, signal history, b), averaged by T unless cumulative."""
    table = _table(trace)
    _check_signal_history(table.game, infoset_id, entries)
    table._check_action(infoset_id, deviation)
    vector = table.signal_vectors(infoset_id).get(tuple(entries))
    value = float(vector[deviation]) if vector is not None else 0.0
    return value * table.steps if cumulative else value


def counterfactual_internal_regret_positive(trace: Union[PlayTrace, SampleTable], infoset_id: int,
                                            entries: Sequence[int]) -> float:
    """CFIR^{T+}(I, signal history) = max(0, max_b CFIR)."""
    table = _table(trace)
    _check_signal_history(table.game, infoset_id, entries)
    vector = table.signal_vectors(infoset_id).get(tuple(entries))
    return max(0.0, float(vector.max())) if vector is not None else 0.0


def _check_signal_history(game: GameTree, infoset_id: int, entries: Sequence[int]) -> None:
    info = game.infoset(infoset_id)
    sets = [game.infosets[a].num_actions for a, _ in info.ancestry] + [info.num_actions]
    if len(entries) != len(sets) or any(not 0 <= e < n for e, n in zip(entries, sets)):
        raise UnknownIdError(f"{tuple(entries)} is not a signal history of {game.infoset_path(infoset_id)}")


def internal_regret(trace: Union[PlayTrace, SampleTable], infoset_id: int, action: int,
                    method: str = DP, cap: Optional[int] = None) -> float:
    """IR^{T+}(I, a)."""
    return _table(trace).internal_regret(infoset_id, action, method, cap)


def agent_regret(trace: Union[PlayTrace, SampleTable], infoset_id: int, action: int) -> float:
    """AR^{T+}(I, a)."""
    return _table(trace).agent_regret(infoset_id, action)


# ---------------------------------------------------------------------------
# Equilibrium epsilons of a signal
# ---------------------------------------------------------------------------

def _signal_table(game: GameTree, h: Union[EmpiricalSignal, SampleTable], cap: Optional[int]) -> SampleTable:
    return h if isinstance(h, SampleTable) else SampleTable.from_signal(game, h, cap)


def afce_epsilon(game: GameTree, h: Union[EmpiricalSignal, SampleTable], cap: Optional[int] = None) -> float:
    return _signal_table(game, h, cap).afce_epsilon()


def efce_epsilon(game: GameTree, h: Union[EmpiricalSignal, SampleTable], method: str = DP,
                 cap: Optional[int] = None) -> float:
    """Per (I, a): best gain of any strategy of P(I) on the samples observing (I, a), floored at 0."""
    return _signal_table(game, h, cap).efce_epsilon(method, cap)


def ace_epsilon(game: GameTree, h: Union[EmpiricalSignal, SampleTable], method: str = DP,
                cap: Optional[int] = None) -> float:
    return _signal_table(game, h, cap).ace_epsilon(method, cap)


def fce_epsilon(game: GameTree, h: Union[EmpiricalSignal, SampleTable], method: str = DP,
                cap: Optional[int] = None) -> float:
    return _signal_table(game, h, cap).fce_epsilon(method, cap)


def fce_local_epsilon(game: GameTree, h: Union[EmpiricalSignal, SampleTable], cap: Optional[int] = None) -> float:
    return _signal_table(game, h, cap).fce_local_epsilon()


def afce_values(game: GameTree, h: EmpiricalSignal, cap: Optional[int] = None) -> Dict[Tuple[int, int, int], float]:
    return SampleTable.from_signal(game, h, cap).afce_values()


def fce_local_values(game: GameTree, h: EmpiricalSignal, cap: Optional[int] = None) -> Dict[Any, float]:
    return SampleTable.from_signal(game, h, cap).fce_local_values()


def epsilon_report(game: GameTree, h: EmpiricalSignal, cap: Optional[int] = None,
                   tolerance: float = config.TOLERANCE) -> EpsilonReport:
    table = SampleTable.from_signal(game, h, cap)
    report = EpsilonReport(
        afce=table.afce_epsilon(),
        efce=table.efce_epsilon(),
        ace=table.ace_epsilon(),
        fce=table.fce_epsilon(),
        fce_local=table.fce_local_epsilon(),
        payoff_range=game.payoff_range(),
        tolerance=tolerance,
    )
    logger.info(f"Epsilons on '{game.name}': afce={report.afce:.6g} efce={report.efce:.6g} "
                f"ace={report.ace:.6g} fce={report.fce:.6g} fce_local={report.fce_local:.6g}")
    return report


# ---------------------------------------------------------------------------
# Decomposition inequalities
# ---------------------------------------------------------------------------

def valid_triplets(game: GameTree) -> List[Tuple[int, int, int]]:
    """(I^P, a, I) with I a strict own descendant of I^P that no profile puts on the path together
    with I^P while recommending a at I^P: the ancestry of I leaves I^P through an action other than a."""
    triplets = []
    for parent in game.infosets:
        for infoset_id in parent.descendants:
            if infoset_id == parent.id:
                continue
            through = game.ancestry_maps[infoset_id][parent.id]
            triplets.extend((parent.id, a, infoset_id) for a in range(parent.num_actions) if a != through)
    return triplets


def decomposition_gaps(trace: Union[PlayTrace, SampleTable], tolerance: float = config.TOLERANCE,
                       cap: Optional[int] = None) -> GapReport:
    """ER^{T+} against the sum of CFR^{T+} below I, and IR^{T+} against AR^{T+} plus the
    largest off-action successor sum of CFR^{T+}."""
    table = _table(trace)
    game = table.game
    cap = config.PROFILE_CAP if cap is None else cap
    profiles = 1
    for info in game.infosets:
        profiles *= info.num_actions
        if profiles > cap:
            raise ProfileCapError(profiles, cap)

    valid = set(valid_triplets(game))
    cfr_plus: Dict[Tuple[int, int, int], float] = {}

    def cfr(parent: int, action: int, infoset_id: int) -> float:
        key = (parent, action, infoset_id)
        if key not in cfr_plus:
            cfr_plus[key] = table.counterfactual_positive(parent, action, infoset_id)
        return cfr_plus[key]

    entries: List[GapEntry] = []
    for parent in game.infosets:
        for a in range(parent.num_actions):
            for infoset_id in parent.descendants:
                er = max(0.0, table.external_regret(parent.id, a, infoset_id))
                bound = sum(cfr(parent.id, a, j) for j in game.infosets[infoset_id].descendants)
                entries.append(GapEntry("ER", (parent.id, a, infoset_id), er, bound,
                                        (parent.id, a, infoset_id) in valid))
            successor_terms = [
                sum(cfr(parent.id, a, j) for i in parent.successors[b] for j in game.infosets[i].descendants)
                for b in range(parent.num_actions) if b != a
            ]
            bound = table.agent_regret(parent.id, a) + max(successor_terms, default=0.0)
            entries.append(GapEntry("IR", (parent.id, a), table.internal_regret(parent.id, a), bound))

    report = GapReport(entries, tolerance)
    if not report.ok:
        logger.warning(f"{len(report.violations)} decomposition gap(s) exceed tolerance {tolerance}")
    return report


# ---------------------------------------------------------------------------
# Reports over a trace
# ---------------------------------------------------------------------------

ALL_FAMILIES = (RegretFamily.ER, RegretFamily.CFR, RegretFamily.CFIR, RegretFamily.IR, RegretFamily.AR)


def regret_report(trace: Union[PlayTrace, SampleTable], families: Sequence[RegretFamily] = ALL_FAMILIES) -> RegretReport:
    """Average positive regrets per family and key at the trace horizon."""
    table = _table(trace)
    game = table.game
    report = RegretReport(steps=table.steps, payoff_range=game.payoff_range())
    for family in families:
        values: Dict[tuple, float] = {}
        for info in game.infosets:
            if family == RegretFamily.CFIR:
                for entries, vector in table.signal_vectors(info.id).items():
                    values[(info.id, entries)] = max(0.0, float(vector.max()))
                continue
            for a in range(info.num_actions):
                if family == RegretFamily.IR:
                    values[(info.id, a)] = table.internal_regret(info.id, a)
                elif family == RegretFamily.AR:
                    values[(info.id, a)] = table.agent_regret(info.id, a)
                else:
                    for infoset_id in info.descendants:
                        if family == RegretFamily.ER:
                            values[(info.id, a, infoset_id)] = max(
                                0.0, table.external_regret(info.id, a, infoset_id))
                        else:
                            values[(info.id, a, infoset_id)] = table.counterfactual_positive(
                                info.id, a, infoset_id)
        report.values[family] = values
    return report


def geometric_checkpoints(steps: int) -> List[int]:
    """Powers of two up to steps, plus steps itself."""
    points = []
    k = 1
    while k < steps:
        points.append(k)
        k *= 2
    points.append(steps)
    return points


def regret_trajectory(trace: PlayTrace, checkpoints: Optional[Sequence[int]] = None,
                      families: Sequence[RegretFamily] = ALL_FAMILIES) -> List[RegretReport]:
    """Regret reports on trace prefixes (geometric checkpoints by default)."""
    if not trace.records:
        raise EmptyTraceError("cannot compute a trajectory of an empty trace")
    points = geometric_checkpoints(trace.steps) if checkpoints is None else sorted(set(checkpoints))
    reports = []
    for step in points:
        if not 1 <= step <= trace.steps:
            raise UnknownIdError(f"checkpoint {step} is outside 1..{trace.steps}")
        report = regret_report(trace.prefix(step), families)
        logger.debug(f"Step {step}: " + ", ".join(f"{f.value}={report.maximum(f):.4g}" for f in families))
        reports.append(report)
    return reports


def format_key(game: GameTree, family: RegretFamily, key: tuple) -> str:
    """Readable key: player/infoset-label[/history or =action or >infoset]."""
    def action(infoset_id: int, a: int) -> str:
        return game.infosets[infoset_id].actions[a]

    if family == RegretFamily.CFIR:
        infoset_id, entries = key
        info = game.infosets[infoset_id]
        owners = [i for i, _ in info.ancestry] + [infoset_id]
        return f"{game.infoset_path(infoset_id)}/" + ",".join(action(i, a) for i, a in zip(owners, entries))
    if family in (RegretFamily.IR, RegretFamily.AR):
        infoset_id, a = key
        return f"{game.infoset_path(infoset_id)}={action(infoset_id, a)}"
    parent, a, infoset_id = key
    return f"{game.infoset_path(parent)}={action(parent, a)}>{game.infoset_path(infoset_id)}"
