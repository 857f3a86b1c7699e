from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from .exceptions import ConfigError, UnknownIdError

# node_owner markers for non-strategic nodes
CHANCE = -1
TERMINAL = -2


class Procedure(Enum):
    """Repeated-play procedures shipped by the learners module"""
    FCE = "fce"      # signal-history keyed internal regret (forgiving CE)
    EFCE = "efce"    # low-memory procedure, parts 1 and 2 (extensive-form CE)
    AFCE = "afce"    # low-memory part 1 only (agent-form CE)


class RegretFamily(Enum):
    """Regret families computed by the audit module"""
    ER = "ER"        # external regret of a subgame
    CFR = "CFR"      # counterfactual regret
    CFIR = "CFIR"    # counterfactual internal regret
    IR = "IR"        # internal regret
    AR = "AR"        # agent-form regret


@dataclass(frozen=True)
class InfosetInfo:
    id: int
    label: str
    player: int
    actions: Tuple[str, ...]
    nodes: Tuple[int, ...]
    # (infoset, action) pairs of the owner from the root down to this infoset
    ancestry: Tuple[Tuple[int, int], ...]
    successors: Tuple[Tuple[int, ...], ...] = ()
    descendants: Tuple[int, ...] = ()

    @property
    def parent(self) -> Optional[int]:
        return self.ancestry[-1][0] if self.ancestry else None

    @property
    def num_actions(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class GameTree:
    """Immutable finite extensive-form game; ids are interned in depth-first preorder."""
    name: str
    num_players: int
    node_labels: Tuple[str, ...]
    node_owner: Tuple[int, ...]
    node_infoset: Tuple[int, ...]
    node_children: Tuple[Tuple[int, ...], ...]
    node_action_labels: Tuple[Tuple[str, ...], ...]
    node_parent: Tuple[int, ...]
    chance_probs: Tuple[Tuple[float, ...], ...]
    payoffs: Tuple[Tuple[float, ...], ...]
    infosets: Tuple[InfosetInfo, ...]
    chance_nodes: Tuple[int, ...]
    player_infosets: Tuple[Tuple[int, ...], ...]
    # per node: position in chance_nodes, or -1
    chance_index: Tuple[int, ...] = ()
    # per infoset: {ancestor infoset: ancestry action}
    ancestry_maps: Tuple[Mapping[int, int], ...] = field(default=(), compare=False, repr=False)

    @property
    def num_nodes(self) -> int:
        return len(self.node_owner)

    @property
    def num_infosets(self) -> int:
        return len(self.infosets)

    @property
    def has_chance(self) -> bool:
        return bool(self.chance_nodes)

    def infoset(self, infoset_id: int) -> InfosetInfo:
        if not 0 <= infoset_id < len(self.infosets):
            raise UnknownIdError(f"unknown infoset id {infoset_id} in game '{self.name}'")
        return self.infosets[infoset_id]

    def infoset_by_label(self, player: int, label: str) -> InfosetInfo:
        for info in self.infosets:
            if info.player == player and info.label == label:
                return info
        raise UnknownIdError(f"no infoset '{label}' for player {player + 1}")

    def infoset_path(self, infoset_id: int) -> str:
        """Human-readable 'P<player>/<label>' used in reports."""
        info = self.infoset(infoset_id)
        return f"P{info.player + 1}/{info.label}"

    def payoff_range(self, player: Optional[int] = None) -> float:
        """Max minus min terminal payoff (for one player, or the widest over all)."""
        players = range(self.num_players) if player is None else [player]
        widest = 0.0
        for p in players:
            values = [pay[p] for pay in self.payoffs if pay]
            if values:
                widest = max(widest, max(values) - min(values))
        return widest


@dataclass(frozen=True)
class PureStrategyProfile:
    """One action index per infoset (by infoset id), plus the realized chance moves if any."""
    choices: Tuple[int, ...]
    chance: Optional[Tuple[int, ...]] = None

    def strategic(self) -> "PureStrategyProfile":
        return self if self.chance is None else PureStrategyProfile(self.choices)

    def with_choices(self, overrides: Mapping[int, int]) -> "PureStrategyProfile":
        if not overrides:
            return self
        choices = list(self.choices)
        for infoset_id, action in overrides.items():
            choices[infoset_id] = action
        return PureStrategyProfile(tuple(choices), self.chance)

    def with_chance(self, chance: Optional[Tuple[int, ...]]) -> "PureStrategyProfile":
        return PureStrategyProfile(self.choices, chance)


@dataclass(frozen=True)
class SignalHistory:
    infoset: int
    entries: Tuple[int, ...]

    @property
    def partial(self) -> Tuple[int, ...]:
        return self.entries[:-1]

    @property
    def last(self) -> int:
        return self.entries[-1]


@dataclass
class DeviationPlan:
    """Maps (infoset, signal-history entries) of one player to an action."""
    player: int
    plan: Dict[Tuple[int, Tuple[int, ...]], int] = field(default_factory=dict)

    def action(self, infoset_id: int, entries: Tuple[int, ...]) -> int:
        try:
            return self.plan[(infoset_id, entries)]
        except KeyError:
            raise UnknownIdError(
                f"deviation plan of player {self.player + 1} undefined at infoset {infoset_id}, history {entries}")


@dataclass
class InternalRegretRow:
    """Cumulative internal regrets r(a->b) of one action set."""
    regrets: np.ndarray
    visits: int = 0
    last_action: Optional[int] = None

    @classmethod
    def empty(cls, num_actions: int, last_action: Optional[int] = None) -> "InternalRegretRow":
        return cls(np.zeros((num_actions, num_actions)), 0, last_action)


@dataclass
class ExternalRegretRow:
    """Cumulative external regrets r(b) of one action set."""
    regrets: np.ndarray
    visits: int = 0

    @classmethod
    def empty(cls, num_actions: int) -> "ExternalRegretRow":
        return cls(np.zeros(num_actions), 0)


@dataclass
class LearnerConfig:
    mu: Optional[float] = None
    memory_cap: Optional[int] = None
    progress: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {"mu": self.mu, "memory_cap": self.memory_cap}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LearnerConfig":
        return cls(mu=data.get("mu"), memory_cap=data.get("memory_cap"))


@dataclass(frozen=True)
class TimestepRecord:
    t: int
    profile: PureStrategyProfile
    payoffs: Tuple[float, ...]


@dataclass
class Checkpoint:
    steps: int
    rng_states: List[Dict[str, Any]]
    learner_state: Dict[str, Any]


@dataclass
class PlayTrace:
    game: GameTree
    procedure: Procedure
    seed: int
    config: LearnerConfig
    records: List[TimestepRecord] = field(default_factory=list)
    checkpoint: Optional[Checkpoint] = None

    @property
    def steps(self) -> int:
        return len(self.records)

    def profiles(self) -> List[PureStrategyProfile]:
        return [record.profile for record in self.records]

    def prefix(self, steps: int) -> "PlayTrace":
        """The first `steps` records, without a checkpoint."""
        return PlayTrace(self.game, self.procedure, self.seed, self.config, self.records[:steps])


@dataclass
class EmpiricalSignal:
    """Distribution over profiles; chance-free keys are expanded through the chance distribution."""
    weights: Dict[PureStrategyProfile, float] = field(default_factory=dict)

    @property
    def total_mass(self) -> float:
        return float(sum(self.weights.values()))

    @property
    def support(self) -> List[PureStrategyProfile]:
        return [profile for profile, weight in self.weights.items() if weight > 0]


@dataclass
class RegretReport:
    steps: int
    payoff_range: float
    values: Dict[RegretFamily, Dict[tuple, float]] = field(default_factory=dict)

    def maximum(self, family: RegretFamily) -> float:
        family_values = self.values.get(family, {})
        return max(family_values.values()) if family_values else 0.0

    def argmax(self, family: RegretFamily) -> Optional[tuple]:
        family_values = self.values.get(family, {})
        if not family_values:
            return None
        return max(family_values, key=family_values.get)


@dataclass
class EpsilonReport:
    afce: float
    efce: float
    ace: float
    fce: float
    fce_local: float
    payoff_range: float
    tolerance: float

    @property
    def chain_ok(self) -> bool:
        """fce >= ace >= efce and ace >= afce; efce >= afce is not implied."""
        tol = self.tolerance
        return (self.fce >= self.ace - tol
                and self.ace >= self.efce - tol
                and self.ace >= self.afce - tol)

    @property
    def local_equivalence_ok(self) -> bool:
        tol = self.tolerance
        return (self.fce > tol) == (self.fce_local > tol) and self.fce_local <= self.fce + tol

    def to_dict(self) -> Dict[str, float]:
        return {
            "afce_epsilon": self.afce,
            "efce_epsilon": self.efce,
            "ace_epsilon": self.ace,
            "fce_epsilon": self.fce,
            "fce_local_epsilon": self.fce_local,
            "payoff_range": self.payoff_range,
        }


@dataclass(frozen=True)
class GapEntry:
    kind: str                 # "ER" or "IR"
    key: tuple
    lhs: float
    rhs: float
    valid: bool = True

    @property
    def gap(self) -> float:
        return self.lhs - self.rhs


@dataclass
class GapReport:
    entries: List[GapEntry]
    tolerance: float

    @property
    def max_gap(self) -> float:
        return max((e.gap for e in self.entries), default=float("-inf"))

    @property
    def violations(self) -> List[GapEntry]:
        return [e for e in self.entries if e.gap > self.tolerance]

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class NodeRecord:
    """One `node` line of a game document."""
    id: str
    kind: str                               # "player", "chance" or "terminal"
    line: int = 0
    column: int = 1
    player: Optional[int] = None            # 0-based strategic player
    infoset: Optional[str] = None
    actions: List[Tuple[str, str]] = field(default_factory=list)     # (action, child id)
    probabilities: List[float] = field(default_factory=list)
    payoffs: List[float] = field(default_factory=list)


@dataclass
class GameDocument:
    name: str
    players: int
    nodes: List[NodeRecord] = field(default_factory=list)
    comments: List[str] = field(default_factory=list)


@dataclass
class RunConfig:
    game: str
    procedure: Procedure = Procedure.FCE
    steps: int = 100_000
    seed: int = 0
    mu: Optional[float] = None
    checkpoint_every: int = 0
    output_dir: str = "runs"
    audit_every: Optional[int] = None    # None: geometric checkpoints; 0: final only
    profile_cap: int = 10**6
    jobs: int = 1
    progress: bool = False
    threshold: Optional[float] = None    # exit 1 when the procedure's target epsilon exceeds it

    def validate(self) -> None:
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.jobs < 1 or self.profile_cap < 1:
            raise ConfigError("jobs and profile cap must be >= 1")
        if self.checkpoint_every < 0 or (self.audit_every is not None and self.audit_every < 0):
            raise ConfigError("checkpoint interval and audit cadence must be >= 0")
        if self.mu is not None and self.mu <= 0:
            raise ConfigError("mu must be positive")
        if self.audit_every and self.steps % self.audit_every != 0:
            raise ConfigError("audit cadence must divide the step count (or be 0)")


@dataclass
class RecallViolation:
    infoset: int
    label: str
    first: Tuple[Tuple[int, int], ...]
    second: Tuple[Tuple[int, int], ...]


@dataclass
class RecallReport:
    violations: List[RecallViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations
