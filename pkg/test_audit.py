"""
Tests for the audit: regret families, epsilons, oracle agreement, the nesting chain,
the one-shot equivalence and the decomposition inequalities.
"""

import numpy as np
import pytest

from conftest import random_signal, random_tiny_game, random_trace
from fcelab.efg_dynamics.audit import (
    EXHAUSTIVE,
    SampleTable,
    ace_epsilon,
    afce_epsilon,
    afce_values,
    agent_regret,
    counterfactual_internal_regret,
    counterfactual_internal_regret_positive,
    counterfactual_regret_positive,
    counterfactual_regret,
    decomposition_gaps,
    efce_epsilon,
    empirical_signal,
    epsilon_report,
    expand_signal,
    external_regret,
    fce_epsilon,
    fce_local_epsilon,
    fce_local_values,
    format_key,
    geometric_checkpoints,
    internal_regret,
    regret_report,
    regret_trajectory,
    valid_triplets,
)
from fcelab.efg_dynamics.exceptions import EmptyTraceError, ProfileCapError, RelationError, UnknownIdError
from fcelab.efg_dynamics.game_io import parse_game, parse_signal
from fcelab.efg_dynamics.game_model import count_pure_profiles, play_out_payoffs
from fcelab.efg_dynamics.learners import run_efce, run_fce
from fcelab.efg_dynamics.models import (
    EmpiricalSignal,
    LearnerConfig,
    PlayTrace,
    Procedure,
    PureStrategyProfile,
    RegretFamily,
    TimestepRecord,
)

TOL = 1e-9

# Player 1 takes a sure 0.6 or gambles on matching player 2's hidden bit later on.
CORRELATED_GUESS = """\
game correlated_guess players 2
node root player 1 infoset R { a -> safe, b -> k }
node safe terminal { 0.6, 0 }
node k player 2 infoset K { y0 -> j0, y1 -> j1 }
node j0 player 1 infoset J { y0 -> m00, y1 -> m01 }
node m00 terminal { 1, 0 }
node m01 terminal { 0, 0 }
node j1 player 1 infoset J { y0 -> m10, y1 -> m11 }
node m10 terminal { 0, 0 }
node m11 terminal { 1, 0 }
"""

# Solo player: a leads to a coin flip and one more choice, b is a sure 0.5.
REROUTE = """\
game reroute players 1
node root player 1 infoset I { a -> deal, b -> out }
node deal chance { l : 1/2 -> left, r : 1/2 -> right }
node left player 1 infoset J1 { good -> lg, bad -> lb }
node right player 1 infoset J2 { good -> rg, bad -> rb }
node lg terminal { 1 }
node lb terminal { 0 }
node rg terminal { 1 }
node rb terminal { 0 }
node out terminal { 0.5 }
"""

# Matching pennies behind an unobserved coin flip.
PENNIES_AFTER_A_COIN = """\
game pennies_after_a_coin players 2
node root chance { l : 1/2 -> x, r : 1/2 -> y }
node x player 1 infoset I1 { H -> xh, T -> xt }
node xh player 2 infoset I2 { h -> xhh, t -> xht }
node xt player 2 infoset I2 { h -> xth, t -> xtt }
node y player 1 infoset I1 { H -> yh, T -> yt }
node yh player 2 infoset I2 { h -> yhh, t -> yht }
node yt player 2 infoset I2 { h -> yth, t -> ytt }
node xhh terminal { 1, -1 }
node xht terminal { -1, 1 }
node xth terminal { -1, 1 }
node xtt terminal { 1, -1 }
node yhh terminal { 1, -1 }
node yht terminal { -1, 1 }
node yth terminal { -1, 1 }
node ytt terminal { 1, -1 }
"""


def _point_mass(*choices):
    return EmpiricalSignal({PureStrategyProfile(tuple(choices)): 1.0})


def _trace_of(game, profiles):
    records = [TimestepRecord(t, p, play_out_payoffs(game, p)) for t, p in enumerate(profiles, start=1)]
    return PlayTrace(game, Procedure.FCE, 0, LearnerConfig(), records)


# ---------------------------------------------------------------------------
# Hand-checked values
# ---------------------------------------------------------------------------

def test_nash_point_mass_has_zero_epsilons(battle_of_sexes):
    report = epsilon_report(battle_of_sexes, _point_mass(0, 0))
    assert report.to_dict()["afce_epsilon"] == 0.0
    assert max(report.afce, report.efce, report.ace, report.fce, report.fce_local) == 0.0


def test_uniform_matching_pennies(matching_pennies):
    uniform = EmpiricalSignal({PureStrategyProfile((a, b)): 0.25 for a in range(2) for b in range(2)})
    report = epsilon_report(matching_pennies, uniform)
    assert report.afce == pytest.approx(0.0, abs=TOL)
    assert report.fce == pytest.approx(0.0, abs=TOL)
    assert report.chain_ok


def test_losing_point_mass(matching_pennies):
    """Player 2 recommended to lose gains 2 by deviating."""
    report = epsilon_report(matching_pennies, _point_mass(0, 0))
    assert report.afce == pytest.approx(2.0)
    assert report.fce == pytest.approx(2.0)
    assert report.fce_local == pytest.approx(2.0)


def test_two_stage_solo_regrets(two_stage_solo):
    """Always playing B forgoes 0.5 at the root, seen only through reachable I2."""
    trace = _trace_of(two_stage_solo, [PureStrategyProfile((1, 1))] * 4)
    assert agent_regret(trace, 0, 1) == pytest.approx(0.0)      # A then D pays 0 < 0.5
    assert internal_regret(trace, 0, 1) == pytest.approx(0.5)    # A then C pays 1
    assert external_regret(trace, 0, 1, 0) == pytest.approx(0.5)
    assert counterfactual_regret(trace, 0, 1, 1, 0) == pytest.approx(1.0)
    assert counterfactual_regret_positive(trace, 0, 1, 1) == pytest.approx(1.0)
    assert counterfactual_internal_regret(trace, 1, (1, 1), 0) == pytest.approx(1.0)
    assert counterfactual_internal_regret(trace, 1, (1, 1), 0, cumulative=True) == pytest.approx(4.0)
    assert counterfactual_internal_regret_positive(trace, 1, (0, 1)) == 0.0


def test_efce_can_sit_below_afce():
    """Off-path recommendations correlated with the opponent make agent deviations pay
    while no single continuation strategy does."""
    game = parse_game(CORRELATED_GUESS)
    h = EmpiricalSignal({PureStrategyProfile((0, 0, 0)): 0.5, PureStrategyProfile((0, 1, 1)): 0.5})
    assert afce_epsilon(game, h) == pytest.approx(0.4)
    assert efce_epsilon(game, h) == pytest.approx(0.0, abs=TOL)
    assert ace_epsilon(game, h) == pytest.approx(0.4)
    assert fce_epsilon(game, h) >= ace_epsilon(game, h) - TOL
    assert efce_epsilon(game, h, method=EXHAUSTIVE) == pytest.approx(0.0, abs=TOL)
    assert ace_epsilon(game, h, method=EXHAUSTIVE) == pytest.approx(0.4)


def test_efce_counts_deviations_that_keep_the_recommended_action():
    """Following a at I and then playing good at both coin outcomes beats every s'(I) != a."""
    game = parse_game(REROUTE)
    table = SampleTable.from_signal(game, parse_signal(game, "weight 1 profile I=a J1=bad J2=bad\n"))
    root = game.infoset_by_label(0, "I").id
    assert table.internal_regret(root, 0) == pytest.approx(0.5)
    assert table.efce_value(root, 0) == pytest.approx(1.0)
    assert table.efce_value(root, 0, EXHAUSTIVE) == pytest.approx(1.0)
    assert table.efce_epsilon() == pytest.approx(1.0)
    assert table.efce_epsilon(EXHAUSTIVE) == pytest.approx(1.0)
    assert table.afce_epsilon() == pytest.approx(0.5)
    assert table.ace_epsilon() == pytest.approx(1.0)
    assert table.fce_epsilon() == pytest.approx(1.0)


def test_input_errors(matching_pennies, kuhn):
    trace = _trace_of(matching_pennies, [PureStrategyProfile((0, 1))])
    with pytest.raises(EmptyTraceError):
        regret_report(_trace_of(matching_pennies, []))
    with pytest.raises(RelationError):
        counterfactual_regret(trace, 0, 0, 1, 0)
    with pytest.raises(UnknownIdError):
        counterfactual_internal_regret(trace, 1, (0, 1), 0)
    with pytest.raises(UnknownIdError):
        agent_regret(trace, 0, 5)
    with pytest.raises(ProfileCapError):
        expand_signal(kuhn, _point_mass(*([0] * kuhn.num_infosets)), cap=3)


# ---------------------------------------------------------------------------
# Structure helpers and reports
# ---------------------------------------------------------------------------

def test_valid_triplets(two_stage_solo, kuhn):
    assert valid_triplets(two_stage_solo) == [(0, 1, 1)]
    # each *_cb infoset hangs off its card's check action, so only bet qualifies
    assert len(valid_triplets(kuhn)) == 3


def test_geometric_checkpoints():
    assert geometric_checkpoints(10) == [1, 2, 4, 8, 10]
    assert geometric_checkpoints(8) == [1, 2, 4, 8]
    assert geometric_checkpoints(1) == [1]


def test_regret_report_and_trajectory(kuhn):
    trace = run_fce(kuhn, 50, seed=4)
    report = regret_report(trace)
    assert set(report.values) == set(RegretFamily)
    assert report.steps == 50
    assert all(v >= 0 for family in report.values.values() for v in family.values())
    trajectory = regret_trajectory(trace, families=(RegretFamily.CFIR, RegretFamily.AR))
    assert [r.steps for r in trajectory] == [1, 2, 4, 8, 16, 32, 50]
    with pytest.raises(UnknownIdError):
        regret_trajectory(trace, checkpoints=[60])


def test_format_key(matching_pennies, kuhn):
    assert format_key(matching_pennies, RegretFamily.IR, (0, 1)) == "P1/I1=T"
    assert format_key(matching_pennies, RegretFamily.CFR, (1, 0, 1)) == "P2/I2=h>P2/I2"
    info = next(i for i in kuhn.infosets if i.label == "K_cb")
    assert format_key(kuhn, RegretFamily.CFIR, (info.id, (0, 1))) == "P1/K_cb/check,call"


# ---------------------------------------------------------------------------
# Bridges between trace regrets and signal epsilons
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("runner", [run_fce, run_efce])
def test_trace_regrets_equal_epsilons_of_its_own_signal(kuhn, runner):
    trace = runner(kuhn, 120, seed=6)
    report = regret_report(trace)
    own = empirical_signal(trace, keep_chance=True)
    assert report.maximum(RegretFamily.CFIR) == pytest.approx(fce_local_epsilon(kuhn, own), abs=TOL)
    assert report.maximum(RegretFamily.AR) == pytest.approx(afce_epsilon(kuhn, own), abs=TOL)
    assert efce_epsilon(kuhn, own) >= report.maximum(RegretFamily.IR) - TOL


def test_chance_expansion_matches_explicit_joint_signal(kuhn, rng):
    """A strategic signal and its explicit chance-keeping expansion give the same constraint values."""
    strategic = random_signal(kuhn, rng, support=5)
    explicit = EmpiricalSignal({profile.with_chance(outcome): w * p
                                for profile, w in strategic.weights.items()
                                for outcome, p in [((c,), 1 / 6) for c in range(6)]})
    for left, right in [(afce_values(kuhn, strategic), afce_values(kuhn, explicit)),
                        (fce_local_values(kuhn, strategic), fce_local_values(kuhn, explicit))]:
        assert left.keys() == right.keys()
        for key in left:
            assert left[key] == pytest.approx(right[key], abs=TOL)


# ---------------------------------------------------------------------------
# Randomised properties
# ---------------------------------------------------------------------------

def _random_cases(seed, count, max_infosets=6, support=8):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        game = random_tiny_game(rng, max_infosets=max_infosets)
        yield game, random_signal(game, rng, support=support)


def test_nesting_chain_and_one_shot_equivalence():
    for game, h in _random_cases(2024, 200):
        report = epsilon_report(game, h)
        assert report.fce >= report.ace - TOL
        assert report.ace >= report.efce - TOL
        assert report.ace >= report.afce - TOL
        assert report.fce_local <= report.fce + TOL
        assert (report.fce > TOL) == (report.fce_local > TOL)
        assert min(report.afce, report.efce, report.ace, report.fce, report.fce_local) >= 0.0


def test_best_responses_match_enumeration():
    """The best-response pass agrees with brute force for every inner maximisation."""
    checked = 0
    for game, h in _random_cases(77, 50, max_infosets=4, support=5):
        table = SampleTable.from_signal(game, h)
        for info in game.infosets:
            for a in range(info.num_actions):
                assert table.internal_regret(info.id, a) == pytest.approx(
                    table.internal_regret(info.id, a, EXHAUSTIVE), abs=TOL)
                assert table.efce_value(info.id, a) == pytest.approx(
                    table.efce_value(info.id, a, EXHAUSTIVE), abs=TOL)
                assert table.efce_value(info.id, a) >= table.internal_regret(info.id, a) - TOL
                for below in info.descendants:
                    assert table.external_regret(info.id, a, below) == pytest.approx(
                        table.external_regret(info.id, a, below, EXHAUSTIVE), abs=TOL)
            for gate in ("R", "O"):
                try:
                    exhaustive = table.plan_regrets(info.id, gate, EXHAUSTIVE, cap=2000)
                except ProfileCapError:
                    continue
                dp = table.plan_regrets(info.id, gate)
                assert dp.keys() == exhaustive.keys()
                for key in dp:
                    assert dp[key] == pytest.approx(exhaustive[key], abs=TOL)
                checked += 1
    assert checked > 0


def _normal_form_epsilon(game, h):
    """max over players, recommendations a and deviations b of sum h(s) 1(s_i = a) (u_i(b, s_-i) - u_i(s))."""
    best = 0.0
    for info in game.infosets:
        for a in range(info.num_actions):
            for b in range(info.num_actions):
                gain = sum(w * (play_out_payoffs(game, s.with_choices({info.id: b}))[info.player]
                                - play_out_payoffs(game, s)[info.player])
                           for s, w in h.weights.items() if s.choices[info.id] == a)
                best = max(best, gain)
    return best


@pytest.mark.parametrize("name", ["matching_pennies", "battle_of_sexes"])
def test_one_shot_games_reduce_to_correlated_equilibrium(name, request, rng):
    game = request.getfixturevalue(name)
    for _ in range(25):
        h = random_signal(game, rng, support=4)
        expected = _normal_form_epsilon(game, h)
        report = epsilon_report(game, h)
        for value in (report.afce, report.efce, report.ace, report.fce, report.fce_local):
            assert value == pytest.approx(expected, abs=TOL)


def test_uninformative_chance_changes_no_epsilon(matching_pennies, rng):
    """Matching pennies behind a coin flip nobody observes."""
    coin = parse_game(PENNIES_AFTER_A_COIN)
    for _ in range(25):
        h = random_signal(matching_pennies, rng, support=4)
        plain, flipped = epsilon_report(matching_pennies, h), epsilon_report(coin, h)
        for left, right in zip(plain.to_dict().values(), flipped.to_dict().values()):
            assert left == pytest.approx(right, abs=TOL)


def test_decomposition_inequalities_on_random_traces():
    rng = np.random.default_rng(99)
    for _ in range(12):
        game = random_tiny_game(rng)
        for _ in range(2):
            report = decomposition_gaps(random_trace(game, rng, steps=200))
            assert report.ok, report.violations


@pytest.mark.slow
def test_decomposition_inequalities_full_sweep():
    rng = np.random.default_rng(100)
    violations = 0
    for _ in range(100):
        game = random_tiny_game(rng)
        for _ in range(10):
            violations += len(decomposition_gaps(random_trace(game, rng, steps=200)).violations)
    assert violations == 0


def test_learner_traces_satisfy_the_decomposition(two_stage_solo, gated_entry):
    for game in (two_stage_solo, gated_entry):
        for runner in (run_fce, run_efce):
            report = decomposition_gaps(runner(game, 300, seed=1))
            assert report.ok
            assert any(entry.valid for entry in report.entries) or game is gated_entry


def test_gap_check_respects_cap(kuhn):
    with pytest.raises(ProfileCapError):
        decomposition_gaps(run_fce(kuhn, 10), cap=1000)


def test_small_games_are_under_the_cap():
    rng = np.random.default_rng(5)
    assert all(count_pure_profiles(random_tiny_game(rng)) <= 3 ** 6 for _ in range(20))
