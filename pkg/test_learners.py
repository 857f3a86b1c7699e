"""
Tests for the uncoupled learners: determinism, resume, uncoupledness, memory accounting and traces.
"""

import dataclasses

import numpy as np
import pytest

from fcelab.efg_dynamics.exceptions import CheckpointError, ConfigError, MemoryCapError, TraceFormatError
from fcelab.efg_dynamics.game_io import BUILTIN_GAMES, builtin_game
from fcelab.efg_dynamics.game_model import play_out_payoffs, signal_history
from fcelab.efg_dynamics.learners import (
    FceAgent,
    LearningSession,
    LowMemoryAgent,
    dump_trace,
    load_trace,
    make_streams,
    parse_trace,
    resume,
    run_afce,
    run_efce,
    run_fce,
    save_trace,
)
from fcelab.efg_dynamics.models import LearnerConfig, Procedure


@pytest.mark.parametrize("runner", [run_fce, run_efce, run_afce])
def test_identical_seeds_give_identical_traces(kuhn, runner):
    assert dump_trace(runner(kuhn, 40, seed=3)) == dump_trace(runner(kuhn, 40, seed=3))


@pytest.mark.parametrize("runner", [run_fce, run_efce])
def test_records_are_complete_profiles(kuhn, runner):
    trace = runner(kuhn, 25, seed=1)
    assert [r.t for r in trace.records] == list(range(1, 26))
    for record in trace.records:
        assert len(record.profile.choices) == kuhn.num_infosets
        assert all(0 <= a < info.num_actions for a, info in zip(record.profile.choices, kuhn.infosets))
        assert record.payoffs == play_out_payoffs(kuhn, record.profile)


@pytest.mark.parametrize("procedure", list(Procedure))
def test_resume_is_bit_identical(kuhn, procedure):
    """Stopping at a checkpoint and resuming reproduces the uninterrupted run."""
    full = LearningSession(kuhn, procedure, seed=9).run(60).trace()
    half = LearningSession(kuhn, procedure, seed=9).run(35).trace()
    assert dump_trace(resume(half, 25)) == dump_trace(full)


def test_resume_needs_a_checkpoint(matching_pennies):
    trace = run_fce(matching_pennies, 5)
    trace.checkpoint = None
    with pytest.raises(CheckpointError):
        resume(trace, 5)


def test_negative_seed_is_rejected():
    with pytest.raises(ConfigError):
        make_streams(-1, 2)


def _perturb_payoffs(game, player, rng):
    payoffs = tuple(tuple(v + (float(rng.normal()) if p == player else 0.0) for p, v in enumerate(pay)) if pay else pay
                    for pay in game.payoffs)
    return dataclasses.replace(game, payoffs=payoffs)


@pytest.mark.parametrize("agent_cls", [FceAgent, LowMemoryAgent])
def test_agents_ignore_opponent_payoffs(kuhn, agent_cls):
    """Given the same realized play and stream, changing only the opponent's payoffs changes nothing."""
    trace = run_fce(kuhn, 80, seed=5)
    perturbed = _perturb_payoffs(kuhn, 1, np.random.default_rng(0))
    original_agent, other_agent = agent_cls(kuhn, 0), agent_cls(perturbed, 0)
    rng_a, rng_b = make_streams(4, 1)[0], make_streams(4, 1)[0]
    for record in trace.records:
        assert original_agent.replay(record.profile, rng_a) == other_agent.replay(record.profile, rng_b)
        original_agent.observe(record.profile)
        other_agent.observe(record.profile)


def test_own_payoffs_do_matter(kuhn):
    trace = run_fce(kuhn, 80, seed=5)
    perturbed = _perturb_payoffs(kuhn, 0, np.random.default_rng(0))
    original_agent, other_agent = FceAgent(kuhn, 0), FceAgent(perturbed, 0)
    for record in trace.records:
        original_agent.observe(record.profile)
        other_agent.observe(record.profile)
    differs = any(not np.allclose(original_agent.rows[key].regrets, other_agent.rows[key].regrets)
                  for key in original_agent.rows)
    assert differs


@pytest.mark.parametrize("name", sorted(BUILTIN_GAMES))
@pytest.mark.parametrize("steps", [1, 10, 100])
def test_fce_row_count_is_exact(name, steps):
    """One row per realized (infoset, signal history), never more than T * M."""
    game = builtin_game(name)
    session = LearningSession(game, Procedure.FCE, seed=2).run(steps)
    realized = {(info.id, signal_history(game, r.profile, info.id).entries)
                for r in session.records for info in game.infosets}
    assert session.row_count == len(realized)
    assert session.row_count <= steps * game.num_infosets


def test_low_memory_state_is_bounded(kuhn):
    bound = sum(info.num_actions for info in kuhn.infosets)
    bound += sum(kuhn.infosets[a].num_actions for info in kuhn.infosets for a, _ in info.ancestry)
    short = LearningSession(kuhn, Procedure.EFCE, seed=2).run(100).row_count
    long = LearningSession(kuhn, Procedure.EFCE, seed=2).run(1000).row_count
    assert short <= long <= bound


def test_memory_cap_overflow(kuhn):
    session = LearningSession(kuhn, Procedure.FCE, seed=0, learner_config=LearnerConfig(memory_cap=5))
    with pytest.raises(MemoryCapError):
        session.run(10)


def test_trace_files_round_trip(tmp_path, kuhn, gated_entry):
    trace = run_efce(kuhn, 30, seed=8)
    path = save_trace(trace, tmp_path / "trace.jsonl")
    loaded = load_trace(path, kuhn)
    assert dump_trace(loaded) == dump_trace(trace)
    assert loaded.procedure == Procedure.EFCE
    with pytest.raises(TraceFormatError):
        load_trace(path, gated_entry)


def test_malformed_trace_lines(matching_pennies):
    text = dump_trace(run_fce(matching_pennies, 3)).splitlines()
    with pytest.raises(TraceFormatError):
        parse_trace("\n".join([text[0], text[2]]), matching_pennies)
    with pytest.raises(TraceFormatError):
        parse_trace("\n".join([text[0], text[1].replace('"choices": [', '"choices": [7, ')]), matching_pennies)
    with pytest.raises(TraceFormatError):
        parse_trace("not json", matching_pennies)
