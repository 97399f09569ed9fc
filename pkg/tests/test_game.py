import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from support import TOY_SYSTEMS, circuit_from_text, rand_unit, random_circuit2, toy_game

from slpgame import circuit, game
from slpgame.game import ACTIONS, TENTH, GateConstraintSystem, x, xbar

ONE = Fraction(1)


def copy_of(profile):
    return {k: list(v) for k, v in profile.items()}


# -- rescaling ---------------------------------------------------------------


def test_rescale_constant_gate():
    circ = circuit.constant_circuit([Fraction(1, 2)], num_inputs=1)
    tenth = game.rescale_tenth(circ)
    assert tenth.levels[0][0] == ("c", Fraction(1, 20))
    assert tenth.bound == TENTH


def test_rescaled_evaluation_is_a_tenth():
    rng = random.Random(1)
    circ = random_circuit2(rng, 20)
    tenth = game.rescale_tenth(circ)
    for _ in range(50):
        p = (rand_unit(rng), rand_unit(rng))
        assert circuit.evaluate(tenth, (p[0] / 10, p[1] / 10)) == [v / 10 for v in circuit.evaluate(circ, p)]


@pytest.mark.parametrize("name", list(TOY_SYSTEMS))
def test_fixed_points_correspond(name):
    circ = toy_game(name)[0]
    tenth = game.rescale_tenth(circ)
    for i in range(6):
        for j in range(6):
            p = (Fraction(i, 5), Fraction(j, 5))
            fixed = circuit.residual(circ, p) == 0
            assert fixed == (circuit.residual(tenth, (p[0] / 10, p[1] / 10)) == 0)


# -- loopback ----------------------------------------------------------------


def test_loopback_backward_edges():
    system = game.add_loopback(game.rescale_tenth(circuit.identity_circuit()))
    assert system.num_levels == 4
    g = system.gates
    expect = {
        (9, 3): (7, 4),
        (10, 3): (8, 4),
        (7, 1): (9, 2),
        (8, 1): (10, 2),
        (9, 2): (9, 3),
        (10, 2): (10, 3),
    }
    for key, src in expect.items():
        assert g[key] == ("mul", src, ONE)
    backward = {k: gate[1] for k, gate in g.items() if gate[0] == "mul" and gate[1][1] > k[1]}
    assert backward == expect
    assert game.validate_system(system) == []


def test_loopback_of_constant_circuit():
    circ = game.rescale_tenth(circuit.constant_circuit([Fraction(1, 2), Fraction(1, 2)]))
    system = game.add_loopback(circ)
    n = system.num_levels
    values = {}
    for key, gate in system.gates.items():
        values[key] = Fraction(1, 20)
    assert game.check_assignment(system, values) == []
    assert values[(7, n)] == values[(8, n)] == Fraction(1, 20)


def test_loopback_rejects_bad_circuits():
    with pytest.raises(game.GameError):
        game.add_loopback(circuit.identity_circuit())   # not rescaled
    with pytest.raises(game.GameError):
        game.add_loopback(game.rescale_tenth(circuit.identity_circuit(3)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**9))
def test_satisfying_assignments_are_fixed_points(seed):
    rng = random.Random(seed)
    circ = random_circuit2(rng, 12)
    system = game.add_loopback(game.rescale_tenth(circ))
    p = (rand_unit(rng, 10), rand_unit(rng, 10))
    values = game.assignment_from_point(system, (p[0] / 10, p[1] / 10))
    ok = game.check_assignment(system, values) == []
    assert ok == (circuit.residual(circ, p) == 0)


# -- game construction -------------------------------------------------------


def test_constant_gate_row():
    system = GateConstraintSystem(2, {(1, 2): ("c", Fraction(1, 20))})
    g = game.build_game(system)
    dense = g.dense("c1", "v1")
    assert dense[xbar(1)] == [Fraction(1, 20)] * ACTIONS
    assert g.dense("c1", "v2")[x(1)][x(1)] == 1


def test_hide_and_seek_block():
    _, _, g, _, _ = toy_game("identity")
    z = g.dense("m2", "c1")
    for r in range(ACTIONS):
        for c in range(ACTIONS):
            same_pair = (r % 10) == (c % 10)
            assert z[r][c] == (g.M if same_pair else 0)


def test_mix_edges_are_zero_sum():
    _, _, g, _, _ = toy_game("shift")
    for a, b in g.edges:
        if a.startswith("m") or b.startswith("m"):
            ab, ba = g.dense(a, b), g.dense(b, a)
            assert all(ab[r][c] == -ba[c][r] for r in range(ACTIONS) for c in range(ACTIONS))


@pytest.mark.parametrize("name", list(TOY_SYSTEMS))
def test_player_count_and_shape(name):
    _, system, g, _, _ = toy_game(name)
    n = system.num_levels
    kinds = [p.kind for p in g.players]
    assert kinds.count("variable") == n
    assert kinds.count("constraint") == n - 1
    assert kinds.count("mix") == 2 * n - 1
    assert len(g.players) == 4 * n - 2
    assert game.is_caterpillar(g)
    for i, pid in enumerate(game.spine_ids(n), start=1):
        assert game.mix_partner(pid) == f"m{i}"
        assert f"m{i}" in g.neighbors(pid)


def test_non_caterpillar_detected():
    _, _, g, _, _ = toy_game("identity")
    extra = game.PolymatrixGame(g.players, g.edges + [("v1", "v3")], g.matrices, g.M, g.system)
    assert not game.is_caterpillar(extra)


def test_auto_and_manual_M():
    circ, system, g, assignment, _ = toy_game("double")
    P = max(abs(v) for (a, b), m in g.matrices.items() if "m" not in a + b for v in m.values())
    assert P == 2 and g.M == 81
    with pytest.raises(game.GameError):
        game.build_game(system, 80)
    big = game.build_game(system, 1000)
    profile = game.construct_equilibrium(big, assignment)
    assert game.is_nash(game.verify_regret(big, profile))


# -- equilibria --------------------------------------------------------------


@pytest.mark.parametrize("name", list(TOY_SYSTEMS))
def test_constructed_profile_is_an_equilibrium(name):
    circ, system, g, assignment, point = toy_game(name)
    profile = game.construct_equilibrium(g, assignment)
    game.check_profile(g, profile)
    regrets = game.verify_regret(g, profile)
    assert all(r == 0 for r in regrets.values())
    report = game.extract_gate_values(g, profile)
    assert report.violated == [] and report.fixed_point and report.point == point


def test_constant_system_strategies():
    _, system, g, assignment, _ = toy_game("constant")
    profile = game.construct_equilibrium(g, assignment)
    n = system.num_levels
    assert profile[f"v{n}"][x(7)] == Fraction(1, 20)
    assert profile[f"v{n}"][xbar(7)] == Fraction(1, 20)


def test_all_zero_gates():
    text = "input x, y\noutput a, b\na <- x *b 0\nb <- y *b 0\n"
    circ = circuit_from_text(text)
    system = game.add_loopback(game.rescale_tenth(circ))
    g = game.build_game(system)
    profile = game.construct_equilibrium(g, game.assignment_from_point(system, (0, 0)))
    assert game.is_nash(game.verify_regret(g, profile))
    for (slot, level), gate in system.gates.items():
        ci, _ = system.host(slot, level)
        assert profile[f"c{ci}"][x(slot)] == TENTH


@pytest.mark.parametrize("name", ["identity", "mixed", "reflect"])
def test_gadget_indifference(name):
    _, system, g, assignment, _ = toy_game(name)
    profile = game.construct_equilibrium(g, assignment)
    for (slot, level), gate in system.gates.items():
        f = game.gate_input(gate, assignment)
        if 0 < f < TENTH:
            ci, _ = system.host(slot, level)
            cid = f"c{ci}"
            pay = game.payoff_vector(g, cid, profile, exclude=(game.mix_partner(cid),))
            assert pay[x(slot)] == pay[xbar(slot)] == f


def test_uniform_mix_players_leave_regret():
    # why the mix players are balanced rather than uniform
    _, system, g, assignment, _ = toy_game("identity")
    profile = game.construct_equilibrium(g, assignment)
    for i in range(1, 2 * system.num_levels):
        profile[f"m{i}"] = [Fraction(1, ACTIONS)] * ACTIONS
    assert max(game.verify_regret(g, profile).values()) > 0


def test_unsatisfying_assignment_rejected():
    _, system, g, _, _ = toy_game("identity")
    bad = game.assignment_from_point(system, (Fraction(1, 100), Fraction(2, 100)))
    bad[(1, 2)] = Fraction(1, 50)
    with pytest.raises(game.GameError):
        game.construct_equilibrium(g, bad)


# -- regret and readback -----------------------------------------------------


def test_pair_sum_violation_gives_mix_player_regret():
    _, _, g, assignment, _ = toy_game("identity")
    base = game.construct_equilibrium(g, assignment)
    profile = copy_of(base)
    s = profile["v2"]
    d = Fraction(1, 100)
    s[xbar(3)] -= d
    s[x(4)] += d
    regrets = game.verify_regret(g, profile)
    assert regrets["m3"] > 0


def test_uniform_profile_is_not_nash():
    system = GateConstraintSystem(2, {(1, 2): ("c", Fraction(1, 20))})
    g = game.build_game(system)
    profile = {p.id: [Fraction(1, ACTIONS)] * ACTIONS for p in g.players}
    assert max(game.verify_regret(g, profile).values()) > 0


def test_gate_perturbation_is_reported():
    _, system, g, assignment, _ = toy_game("shift")
    profile = game.construct_equilibrium(g, assignment)
    e = Fraction(1, 1000)
    s = profile["v3"]
    sign = -1 if s[x(1)] >= e else 1
    s[x(1)] += sign * e
    s[xbar(1)] -= sign * e
    report = game.extract_gate_values(g, profile)
    assert (1, 3) in report.violated


def test_pair_sum_violation_rejected_by_readback():
    _, _, g, assignment, _ = toy_game("identity")
    profile = game.construct_equilibrium(g, assignment)
    profile["v1"][x(7)] += Fraction(1, 100)
    profile["v1"][x(1)] -= Fraction(1, 100)
    with pytest.raises(game.GameError):
        game.extract_gate_values(g, profile)


def test_profile_validation():
    _, _, g, assignment, _ = toy_game("identity")
    profile = game.construct_equilibrium(g, assignment)
    broken = copy_of(profile)
    broken["v1"] = broken["v1"][:-1]
    with pytest.raises(game.GameError):
        game.verify_regret(g, broken)
    broken = copy_of(profile)
    del broken["m1"]
    with pytest.raises(game.GameError):
        game.verify_regret(g, broken)
    broken = copy_of(profile)
    broken["v1"][0] += 1
    with pytest.raises(game.GameError):
        game.verify_regret(g, broken)


# -- JSON --------------------------------------------------------------------


def test_json_round_trips():
    circ, system, g, assignment, _ = toy_game("mixed")
    profile = game.construct_equilibrium(g, assignment)
    g2 = game.game_from_dict(game.game_to_dict(g), system)
    assert g2.players == g.players and g2.edges == g.edges and g2.M == g.M
    assert g2.matrices == {k: v for k, v in g.matrices.items() if v or k in g2.matrices}
    assert game.verify_regret(g2, profile) == game.verify_regret(g, profile)
    assert game.profile_from_dict(game.profile_to_dict(profile)) == profile
    s2 = game.system_from_dict(game.system_to_dict(system))
    assert s2 == system and s2.source == system.source
    assert game.assignment_from_dict(game.assignment_to_dict(assignment)) == assignment
    text = game.dumps(game.profile_to_dict(profile))
    assert game.dumps(game.profile_to_dict(game.profile_from_dict(__import__("json").loads(text)))) == text


def test_bad_json_rejected():
    with pytest.raises(game.GameError):
        game.game_from_dict({"players": [{"id": "v1", "kind": "variable", "actions": 3}], "edges": []})
    with pytest.raises(game.GameError):
        game.profile_from_dict({"v1": ["x"]})
    with pytest.raises(game.GameError):
        game.system_from_dict({"num_levels": 2, "gates": [{"slot": 1, "level": 2, "op": "pow"}]})
    with pytest.raises(game.GameError):
        game.assignment_from_dict({"1;2": "0"})
