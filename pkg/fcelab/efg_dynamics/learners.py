"""
Repeated-play learning procedures.

Each strategic player is a separate agent object that sees the game tree, its own
payoffs and the realized play, and draws from its own random stream. The session
drives the agents one timestep at a time and records complete profiles.

- FceAgent: internal regret matching keyed by (infoset, signal history).
- LowMemoryAgent: internal regret keyed by (infoset, last observed action) at
  on-path infosets, plus external regret keyed by (closest on-path own ancestor,
  its action, infoset) at off-path infosets. With the off-path part disabled it
  is the agent-form learner.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
from tqdm import tqdm

from . import config
from .exceptions import CheckpointError, ConfigError, EngineError, MemoryCapError, TraceFormatError
from .game_io import game_digest
from .game_model import counterfactual_payoffs, path_infosets, play_out_payoffs
from .logger import get_logger
from .models import (
    CHANCE,
    TERMINAL,
    Checkpoint,
    ExternalRegretRow,
    GameTree,
    InternalRegretRow,
    LearnerConfig,
    PlayTrace,
    Procedure,
    PureStrategyProfile,
    TimestepRecord,
)
from .regret_engines import accumulate, default_mu, external_step, internal_step

logger = get_logger(__name__)


class PlayerAgent:
    """One player's uncoupled learner."""

    def __init__(self, game: GameTree, player: int, learner_config: Optional[LearnerConfig] = None):
        learner_config = learner_config or LearnerConfig()
        self.game = game
        self.player = player
        self.infosets = game.player_infosets[player]
        self.mu = {i: learner_config.mu if learner_config.mu is not None else default_mu(game, i)
                   for i in self.infosets}
        if any(mu <= 0 for mu in self.mu.values()):
            raise EngineError("mu must be positive")

    @property
    def row_count(self) -> int:
        raise NotImplementedError

    def replay(self, profile: PureStrategyProfile, rng: np.random.Generator) -> Dict[int, int]:
        """The choices this agent makes at a timestep whose realized play is `profile`."""
        raise NotImplementedError

    def observe(self, profile: PureStrategyProfile) -> None:
        raise NotImplementedError

    def _gains(self, profile: PureStrategyProfile, infoset_id: int) -> Optional[np.ndarray]:
        """u(I, s|I->b) - u(I, s_I) for every b; None when I is unreachable."""
        values = counterfactual_payoffs(self.game, profile, infoset_id)
        if values is None:
            return None
        return values - values[profile.choices[infoset_id]]


class FceAgent(PlayerAgent):
    def __init__(self, game: GameTree, player: int, learner_config: Optional[LearnerConfig] = None):
        super().__init__(game, player, learner_config)
        # (infoset, full signal history) -> row whose last action is the history's last entry
        self.rows: Dict[Tuple[int, Tuple[int, ...]], InternalRegretRow] = {}
        # (infoset, partial signal history) -> action played the last time it was seen
        self.last_action: Dict[Tuple[int, Tuple[int, ...]], int] = {}

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def choose(self, rng: np.random.Generator) -> Dict[int, int]:
        """Visit own infosets ancestor-first and pick an action at each."""
        choices: Dict[int, int] = {}
        for infoset_id in self.infosets:
            info = self.game.infosets[infoset_id]
            try:
                partial = tuple(choices[ancestor] for ancestor, _ in info.ancestry)
            except KeyError:
                raise EngineError(f"ancestor of {self.game.infoset_path(infoset_id)} not chosen yet")
            last = self.last_action.get((infoset_id, partial))
            if last is None:
                choices[infoset_id] = int(rng.integers(info.num_actions))
                continue
            row = self.rows[(infoset_id, partial + (last,))]
            choices[infoset_id] = internal_step(row, self.mu[infoset_id], rng)
        return choices

    def replay(self, profile: PureStrategyProfile, rng: np.random.Generator) -> Dict[int, int]:
        return self.choose(rng)

    def observe(self, profile: PureStrategyProfile) -> None:
        for infoset_id in self.infosets:
            info = self.game.infosets[infoset_id]
            played = profile.choices[infoset_id]
            partial = tuple(profile.choices[ancestor] for ancestor, _ in info.ancestry)
            self.last_action[(infoset_id, partial)] = played
            key = (infoset_id, partial + (played,))
            row = self.rows.get(key)
            if row is None:
                row = self.rows[key] = InternalRegretRow.empty(info.num_actions, played)
            gains = self._gains(profile, infoset_id)
            if gains is not None:
                accumulate(row, gains, played)


class LowMemoryAgent(PlayerAgent):
    def __init__(self, game: GameTree, player: int, learner_config: Optional[LearnerConfig] = None,
                 off_path: bool = True):
        super().__init__(game, player, learner_config)
        self.off_path = off_path
        self.on_path_rows: Dict[Tuple[int, int], InternalRegretRow] = {}
        self.off_path_rows: Dict[Tuple[int, int, int], ExternalRegretRow] = {}
        self.last_observed: Dict[int, int] = {}

    @property
    def row_count(self) -> int:
        return len(self.on_path_rows) + len(self.off_path_rows)

    def closest_on_path_ancestor(self, infoset_id: int, on_path: Set[int]) -> Optional[int]:
        for ancestor, _ in reversed(self.game.infosets[infoset_id].ancestry):
            if ancestor in on_path:
                return ancestor
        return None

    def choose_on_path(self, infoset_id: int, rng: np.random.Generator) -> int:
        last = self.last_observed.get(infoset_id)
        if last is None:
            return int(rng.integers(self.game.infosets[infoset_id].num_actions))
        return internal_step(self.on_path_rows[(infoset_id, last)], self.mu[infoset_id], rng)

    def choose_off_path(self, choices: Sequence[int], on_path: Set[int],
                        rng: np.random.Generator) -> Dict[int, int]:
        picks: Dict[int, int] = {}
        for infoset_id in self.infosets:
            if infoset_id in on_path:
                continue
            num_actions = self.game.infosets[infoset_id].num_actions
            ancestor = self.closest_on_path_ancestor(infoset_id, on_path) if self.off_path else None
            if ancestor is None:
                picks[infoset_id] = int(rng.integers(num_actions))
                continue
            row = self.off_path_rows.get((ancestor, choices[ancestor], infoset_id))
            picks[infoset_id] = external_step(row or ExternalRegretRow.empty(num_actions), rng)
        return picks

    def replay(self, profile: PureStrategyProfile, rng: np.random.Generator) -> Dict[int, int]:
        on_path = path_infosets(self.game, profile)
        picks = {i: self.choose_on_path(i, rng) for i in on_path if i in self.mu}
        picks.update(self.choose_off_path(profile.choices, set(on_path), rng))
        return picks

    def observe(self, profile: PureStrategyProfile) -> None:
        on_path = set(path_infosets(self.game, profile))
        for infoset_id in self.infosets:
            played = profile.choices[infoset_id]
            num_actions = self.game.infosets[infoset_id].num_actions
            if infoset_id in on_path:
                gains = self._gains(profile, infoset_id)
                key = (infoset_id, played)
                row = self.on_path_rows.get(key)
                if row is None:
                    row = self.on_path_rows[key] = InternalRegretRow.empty(num_actions, played)
                accumulate(row, gains, played)
                self.last_observed[infoset_id] = played
            elif self.off_path:
                ancestor = self.closest_on_path_ancestor(infoset_id, on_path)
                if ancestor is None:
                    continue
                gains = self._gains(profile, infoset_id)
                if gains is None:
                    continue
                key3 = (ancestor, profile.choices[ancestor], infoset_id)
                external = self.off_path_rows.get(key3)
                if external is None:
                    external = self.off_path_rows[key3] = ExternalRegretRow.empty(num_actions)
                accumulate(external, gains)


def make_agent(game: GameTree, player: int, procedure: Procedure,
               learner_config: Optional[LearnerConfig] = None) -> PlayerAgent:
    if procedure == Procedure.FCE:
        return FceAgent(game, player, learner_config)
    return LowMemoryAgent(game, player, learner_config, off_path=procedure == Procedure.EFCE)


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

def make_streams(seed: int, players: int) -> List[np.random.Generator]:
    """One counter-based stream per player plus one for chance (last)."""
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    children = np.random.SeedSequence(seed).spawn(players + 1)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def _encode_state(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _encode_state(v) for k, v in value.items()}
    return value


def _decode_state(value: Any) -> Any:
    if isinstance(value, list):
        return np.asarray(value, dtype=np.uint64)
    if isinstance(value, dict):
        return {k: _decode_state(v) for k, v in value.items()}
    return value


# ---------------------------------------------------------------------------
# Session
# ---------------------------------------------------------------------------

class LearningSession:
    """Runs one procedure on one game; state at t depends only on the records before t."""

    def __init__(self, game: GameTree, procedure: Procedure, seed: int = 0,
                 learner_config: Optional[LearnerConfig] = None):
        self.game = game
        self.procedure = procedure
        self.seed = seed
        self.config = learner_config or LearnerConfig()
        self.memory_cap = self.config.memory_cap or config.MEMORY_ROW_CAP
        self.agents = [make_agent(game, p, procedure, self.config) for p in range(game.num_players)]
        self.rngs = make_streams(seed, game.num_players)
        self.records: List[TimestepRecord] = []

    @property
    def row_count(self) -> int:
        return sum(agent.row_count for agent in self.agents)

    def _sample_chance(self) -> Optional[Tuple[int, ...]]:
        if not self.game.has_chance:
            return None
        rng = self.rngs[-1]
        return tuple(int(rng.choice(len(self.game.node_children[node]), p=self.game.chance_probs[node]))
                     for node in self.game.chance_nodes)

    def _choose_independently(self) -> List[int]:
        choices = [-1] * self.game.num_infosets
        for agent, rng in zip(self.agents, self.rngs):
            for infoset_id, action in agent.choose(rng).items():
                choices[infoset_id] = action
        return choices

    def _choose_along_path(self, chance: Optional[Tuple[int, ...]]) -> List[int]:
        game = self.game
        choices = [-1] * game.num_infosets
        on_path: Set[int] = set()
        node = 0
        while game.node_owner[node] != TERMINAL:
            owner = game.node_owner[node]
            if owner == CHANCE:
                node = game.node_children[node][chance[game.chance_index[node]]]
                continue
            infoset_id = game.node_infoset[node]
            action = self.agents[owner].choose_on_path(infoset_id, self.rngs[owner])
            choices[infoset_id] = action
            on_path.add(infoset_id)
            node = game.node_children[node][action]
        for agent, rng in zip(self.agents, self.rngs):
            for infoset_id, action in agent.choose_off_path(choices, on_path, rng).items():
                choices[infoset_id] = action
        return choices

    def step(self) -> TimestepRecord:
        chance = self._sample_chance()
        if self.procedure == Procedure.FCE:
            choices = self._choose_independently()
        else:
            choices = self._choose_along_path(chance)
        if min(choices, default=0) < 0:
            raise EngineError("incomplete profile: some infoset received no action")
        profile = PureStrategyProfile(tuple(choices), chance)
        record = TimestepRecord(len(self.records) + 1, profile, play_out_payoffs(self.game, profile))
        for agent in self.agents:
            agent.observe(profile)
        self.records.append(record)
        rows = self.row_count
        if rows > self.memory_cap:
            raise MemoryCapError(rows, self.memory_cap)
        return record

    def run(self, steps: int) -> "LearningSession":
        if steps < 0:
            raise ConfigError(f"step count must be non-negative, got {steps}")
        for _ in tqdm(range(steps), disable=not self.config.progress,
                      desc=f"{self.procedure.value}:{self.game.name}"):
            self.step()
        return self

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            steps=len(self.records),
            rng_states=[_encode_state(rng.bit_generator.state) for rng in self.rngs],
            learner_state={"rows": self.row_count, "rows_per_player": [a.row_count for a in self.agents]},
        )

    def restore(self, records: Iterable[TimestepRecord], checkpoint: Checkpoint) -> "LearningSession":
        """Rebuild agent state by re-observing the records, then reset the streams."""
        self.records = []
        for record in records:
            for agent in self.agents:
                agent.observe(record.profile)
            self.records.append(record)
        if len(self.records) != checkpoint.steps:
            raise CheckpointError(f"checkpoint is at step {checkpoint.steps}, trace has {len(self.records)}")
        expected = checkpoint.learner_state.get("rows")
        if expected is not None and expected != self.row_count:
            raise CheckpointError(f"replayed learner holds {self.row_count} rows, checkpoint says {expected}")
        if len(checkpoint.rng_states) != len(self.rngs):
            raise CheckpointError("checkpoint stream count does not match the game's players")
        for rng, state in zip(self.rngs, checkpoint.rng_states):
            rng.bit_generator.state = _decode_state(state)
        return self

    def trace(self) -> PlayTrace:
        return PlayTrace(self.game, self.procedure, self.seed, self.config, list(self.records), self.checkpoint())


def run_procedure(game: GameTree, procedure: Procedure, steps: int, seed: int = 0,
                  learner_config: Optional[LearnerConfig] = None) -> PlayTrace:
    if steps < 1:
        raise ConfigError(f"step count must be >= 1, got {steps}")
    logger.info(f"Running {procedure.value} on '{game.name}' for {steps} steps (seed {seed})")
    session = LearningSession(game, procedure, seed, learner_config).run(steps)
    logger.info(f"Finished {procedure.value} on '{game.name}': {session.row_count} regret rows")
    return session.trace()


def run_fce(game: GameTree, steps: int, seed: int = 0,
            learner_config: Optional[LearnerConfig] = None) -> PlayTrace:
    """Signal-history keyed internal regret matching; drives CFIR to zero."""
    return run_procedure(game, Procedure.FCE, steps, seed, learner_config)


def run_efce(game: GameTree, steps: int, seed: int = 0,
             learner_config: Optional[LearnerConfig] = None) -> PlayTrace:
    """Low-memory procedure: on-path internal regret plus off-path external regret."""
    return run_procedure(game, Procedure.EFCE, steps, seed, learner_config)


def run_afce(game: GameTree, steps: int, seed: int = 0,
             learner_config: Optional[LearnerConfig] = None) -> PlayTrace:
    """On-path internal regret only; off-path infosets are played uniformly."""
    return run_procedure(game, Procedure.AFCE, steps, seed, learner_config)


def resume(trace: PlayTrace, extra: int) -> PlayTrace:
    """Continue a trace from its checkpoint so that it ends `extra` steps after its last record."""
    if trace.checkpoint is None:
        raise CheckpointError("trace carries no checkpoint; it cannot be resumed")
    if extra < 0:
        raise ConfigError(f"extra step count must be non-negative, got {extra}")
    checkpoint = trace.checkpoint
    if checkpoint.steps > trace.steps:
        raise CheckpointError(f"checkpoint at step {checkpoint.steps} is past the trace end {trace.steps}")
    session = LearningSession(trace.game, trace.procedure, trace.seed, trace.config)
    session.restore(trace.records[:checkpoint.steps], checkpoint)
    session.run(trace.steps - checkpoint.steps + extra)
    logger.info(f"Resumed {trace.procedure.value} on '{trace.game.name}' from step {checkpoint.steps} "
                f"to {len(session.records)}")
    return session.trace()


# ---------------------------------------------------------------------------
# Trace files: JSON lines (header, one record per step, trailing checkpoint)
# ---------------------------------------------------------------------------

def trace_header(trace: PlayTrace) -> Dict[str, Any]:
    return {
        "format": config.TRACE_FORMAT,
        "version": config.TRACE_FORMAT_VERSION,
        "game": trace.game.name,
        "digest": game_digest(trace.game),
        "procedure": trace.procedure.value,
        "seed": trace.seed,
        "config": trace.config.to_dict(),
    }


def dump_trace_lines(trace: PlayTrace) -> Iterable[str]:
    yield json.dumps(trace_header(trace), sort_keys=True)
    for record in trace.records:
        yield json.dumps({
            "t": record.t,
            "choices": list(record.profile.choices),
            "chance": list(record.profile.chance) if record.profile.chance is not None else None,
            "payoffs": list(record.payoffs),
        })
    if trace.checkpoint is not None:
        checkpoint = trace.checkpoint
        yield json.dumps({"checkpoint": {
            "steps": checkpoint.steps,
            "rng_states": checkpoint.rng_states,
            "learner_state": checkpoint.learner_state,
        }}, sort_keys=True)


def dump_trace(trace: PlayTrace) -> str:
    return "\n".join(dump_trace_lines(trace)) + "\n"


def parse_trace(text: str, game: GameTree) -> PlayTrace:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise TraceFormatError("empty trace file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise TraceFormatError(f"invalid header: {e}", 1)
    if header.get("format") != config.TRACE_FORMAT or header.get("version") != config.TRACE_FORMAT_VERSION:
        raise TraceFormatError(f"unsupported trace format {header.get('format')!r} "
                               f"version {header.get('version')!r}", 1)
    if header.get("digest") != game_digest(game):
        raise TraceFormatError(f"trace was recorded on game '{header.get('game')}' "
                               f"(digest {header.get('digest')}), not '{game.name}'", 1)
    try:
        procedure = Procedure(header["procedure"])
    except (KeyError, ValueError):
        raise TraceFormatError(f"unknown procedure {header.get('procedure')!r}", 1)

    trace = PlayTrace(game, procedure, int(header.get("seed", 0)),
                      LearnerConfig.from_dict(header.get("config") or {}))
    for line_no, line in enumerate(lines[1:], start=2):
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as e:
            raise TraceFormatError(f"invalid JSON: {e}", line_no)
        if "checkpoint" in entry:
            data = entry["checkpoint"]
            trace.checkpoint = Checkpoint(int(data["steps"]), list(data["rng_states"]),
                                          dict(data.get("learner_state") or {}))
            continue
        trace.records.append(_parse_record(entry, game, line_no, len(trace.records) + 1))
    return trace


def _parse_record(entry: Dict[str, Any], game: GameTree, line_no: int, expected_t: int) -> TimestepRecord:
    try:
        t = int(entry["t"])
        choices = tuple(int(a) for a in entry["choices"])
        chance = entry.get("chance")
        chance = tuple(int(c) for c in chance) if chance is not None else None
        payoffs = tuple(float(v) for v in entry["payoffs"])
    except (KeyError, TypeError, ValueError) as e:
        raise TraceFormatError(f"malformed record: {e}", line_no)
    if t != expected_t:
        raise TraceFormatError(f"timesteps must be contiguous: expected {expected_t}, found {t}", line_no)
    if len(choices) != game.num_infosets:
        raise TraceFormatError(f"profile assigns {len(choices)} infosets, game has {game.num_infosets}", line_no)
    for info, action in zip(game.infosets, choices):
        if not 0 <= action < info.num_actions:
            raise TraceFormatError(f"action {action} is out of range at {game.infoset_path(info.id)}", line_no)
    if game.has_chance:
        if chance is None or len(chance) != len(game.chance_nodes):
            raise TraceFormatError("record lacks a complete chance realisation", line_no)
        for node, outcome in zip(game.chance_nodes, chance):
            if not 0 <= outcome < len(game.node_children[node]):
                raise TraceFormatError(f"chance outcome {outcome} out of range at node "
                                       f"'{game.node_labels[node]}'", line_no)
    else:
        chance = None
    return TimestepRecord(t, PureStrategyProfile(choices, chance), payoffs)


def save_trace(trace: PlayTrace, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(dump_trace(trace), encoding="utf-8")
    logger.info(f"Saved trace: {path}")
    return path


def load_trace(path: Union[str, Path], game: GameTree) -> PlayTrace:
    return parse_trace(Path(path).read_text(encoding="utf-8"), game)
