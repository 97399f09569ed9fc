import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from support import random_colors, random_netlist

from slpgame import brouwer
from slpgame.brouwer import BoolCircuit, NetBuilder


def const_color(n: int, color: int) -> BoolCircuit:
    return brouwer.from_color_table(n, lambda gx, gy: color)


def brute_trichromatic(grid, size):
    out = []
    for sx in range(size - 1):
        for sy in range(size - 1):
            corners = {grid[sx + dx][sy + dy] for dx in (0, 1) for dy in (0, 1)}
            if corners == {1, 2, 3}:
                out.append((sx, sy))
    return out


# -- netlists ----------------------------------------------------------------


def test_gate_order_is_checked():
    with pytest.raises(brouwer.BrouwerError):
        BoolCircuit(2, (("or", 0, 2),), (2,))
    with pytest.raises(brouwer.BrouwerError):
        BoolCircuit(2, (("and", 0, 1),), (2,))


def test_netbuilder_comparators_exhaustive():
    width = 4
    for c in range(-1, 18):
        b = NetBuilder(width)
        bits = b.inputs()
        outs = [b.ge_const(bits, c), b.le_const(bits, c), b.eq_const(bits, c)]
        circ = b.finish(outs)
        for v in range(16):
            got = circ.evaluate(brouwer.int_bits(v, width))
            assert got == [int(v >= c), int(v <= c), int(v == c)], (c, v)


def test_from_function_matches_table():
    rng = random.Random(1)
    table = [rng.randint(1, 3) for _ in range(32)]
    circ = brouwer.from_function(5, lambda v: table[v])
    for v in range(32):
        out = circ.evaluate(brouwer.int_bits(v, 5))
        assert out.index(1) + 1 == table[v] and sum(out) == 1


def test_bnet_round_trip_and_errors():
    rng = random.Random(2)
    for _ in range(10):
        circ = random_netlist(rng)
        circ = BoolCircuit(circ.num_inputs, circ.gates, circ.outputs * 3)
        assert brouwer.parse_bnet(brouwer.format_bnet(circ)) == circ
    text = brouwer.format_bnet(brouwer.split_square_netlist(2))
    assert text.startswith("inputs 4\n")
    assert "g4 = NOT g2" in text
    with pytest.raises(brouwer.BrouwerError):
        brouwer.parse_bnet("inputs 2\ng3 = NOT g0\noutputs g3\n")
    with pytest.raises(brouwer.BrouwerError):
        brouwer.parse_bnet("inputs 2\ng2 = XOR g0 g1\noutputs g2\n")
    with pytest.raises(brouwer.BrouwerError):
        brouwer.parse_bnet("g2 = NOT g0\n")


def test_non_one_hot_output_is_reported():
    b = NetBuilder(2)
    one = b.OR(0, b.NOT(0))
    circ = b.finish([one, one, b.NOT(one)])
    inst = brouwer.DiscreteBrouwerInstance(1, circ)
    with pytest.raises(brouwer.BrouwerError):
        brouwer.eval_color(inst, 1, 1)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_split_square_one_hot_exhaustive(n):
    inst = brouwer.DiscreteBrouwerInstance(n, brouwer.split_square_netlist(n))
    for gx, gy in itertools.product(range(2**n), repeat=2):
        out = inst.circuit.evaluate(brouwer.point_bits(gx, gy, n))
        assert sorted(out) == [0, 0, 1]


# -- boundaries --------------------------------------------------------------


def test_original_left_column_is_color_one():
    rng = random.Random(3)
    inst = brouwer.make_instance(3, lambda gx, gy: rng.randint(1, 3))
    assert all(brouwer.eval_color(inst, 0, gy) == 1 for gy in range(8))


def test_constant_one_interior_corner():
    inst = brouwer.DiscreteBrouwerInstance(1, brouwer.enforce_boundary(const_color(1, 1), 1))
    grid = brouwer.color_grid(inst)
    assert grid == [[1, 1], [2, 3]]
    assert brouwer.eval_color(inst, 1, 1) == 3


def test_enforce_boundary_original_examples():
    inst = brouwer.DiscreteBrouwerInstance(2, brouwer.enforce_boundary(const_color(2, 3), 2))
    assert brouwer.eval_color(inst, 0, 3) == 1
    inner = brouwer.DiscreteBrouwerInstance(3, brouwer.enforce_boundary(const_color(3, 2), 3))
    assert brouwer.eval_color(inner, 3, 4) == 2


def test_enforce_boundary_thick_examples():
    eps = Fraction(1, 5)
    inst = brouwer.DiscreteBrouwerInstance(4, brouwer.enforce_boundary(const_color(4, 3), 4, eps), eps)
    assert brouwer.eval_color(inst, 1, 8) == 2       # x = 1/16 <= eps < y
    assert brouwer.eval_color(inst, 8, 3) == 1       # y = 3/16 <= eps
    assert brouwer.eval_color(inst, 3, 3) == 1       # both small: color 1 wins
    assert brouwer.eval_color(inst, 8, 13) == 3      # y = 13/16 >= 1 - eps
    assert brouwer.eval_color(inst, 4, 8) == 3       # interior keeps its color
    inst2 = brouwer.DiscreteBrouwerInstance(4, brouwer.enforce_boundary(const_color(4, 1), 4, eps), eps)
    assert brouwer.eval_color(inst2, 8, 8) == 1


@pytest.mark.parametrize("eps", [None, Fraction(1, 5), Fraction(1, 4), Fraction(2, 5)])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_boundary_law_exhaustive(n, eps):
    rng = random.Random(n)
    colors = random_colors(rng, n)
    inst = brouwer.make_instance(n, lambda gx, gy: colors[gx][gy], eps)
    for gx, gy in itertools.product(range(2**n), repeat=2):
        want = brouwer.required_color(n, gx, gy, eps)
        got = brouwer.eval_color(inst, gx, gy)
        assert got == (want if want is not None else colors[gx][gy])
    assert brouwer.check_boundary(inst) == []


def test_thick_boundary_ties():
    eps = Fraction(1, 4)
    assert brouwer.required_color(2, 2, 1, eps) == 1   # y = eps
    assert brouwer.required_color(2, 1, 2, eps) == 2   # x = eps, y > eps
    assert brouwer.required_color(2, 3, 2, eps) == 3   # x = 1 - eps
    assert brouwer.required_color(3, 4, 4, eps) is None


# -- thickening --------------------------------------------------------------


def test_thick_size_examples():
    assert brouwer.thick_size(2, Fraction(1, 5)) == 3
    assert brouwer.thick_size(2, Fraction(2, 5)) == 5
    with pytest.raises(brouwer.BrouwerError):
        brouwer.thick_size(2, Fraction(1, 2))


def test_thicken_layout():
    rng = random.Random(4)
    colors = random_colors(rng, 2)
    inst = brouwer.make_instance(2, lambda gx, gy: colors[gx][gy])
    orig = brouwer.color_grid(inst)
    thick, emb = brouwer.thicken(inst, Fraction(1, 5))
    assert (thick.n, emb.x0, emb.y0) == (3, 2, 2)
    grid = brouwer.color_grid(thick)
    for gx, gy in itertools.product(range(8), repeat=2):
        if brouwer.required_color(3, gx, gy, thick.eps) is not None:
            continue
        if emb.inside(gx, gy):
            ox, oy = emb.to_original(gx, gy)
            assert grid[gx][gy] == orig[ox][oy]
        elif gy < emb.y0:
            assert grid[gx][gy] == 1
    assert brouwer.check_boundary(thick) == []


def test_thicken_requires_original_boundary():
    inst = brouwer.DiscreteBrouwerInstance(2, brouwer.split_square_netlist(2), Fraction(2, 5))
    with pytest.raises(brouwer.BrouwerError):
        brouwer.thicken(inst, Fraction(1, 5))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3]), st.sampled_from([Fraction(1, 5), Fraction(1, 8), Fraction(1, 3)]))
def test_thicken_preserves_solutions(seed, n, eps):
    rng = random.Random(seed)
    colors = random_colors(rng, n)
    inst = brouwer.make_instance(n, lambda gx, gy: colors[gx][gy])
    original = set(brouwer.find_trichromatic(inst))
    assert original, "every instance with these boundaries has a solution"
    thick, emb = brouwer.thicken(inst, eps)
    found = brouwer.find_trichromatic(thick)
    assert found
    for sq in found:
        assert emb.square_to_original(*sq) in original
        # no solution touches the border
        for cx, cy in itertools.product((sq[0], sq[0] + 1), (sq[1], sq[1] + 1)):
            assert brouwer.required_color(thick.n, cx, cy, eps) is None


# -- solutions ---------------------------------------------------------------


def test_diagonal_instance_solutions():
    def colors(gx, gy):
        if gy < gx:
            return 1
        if gx == 0:
            return 2
        return 3

    inst = brouwer.DiscreteBrouwerInstance(2, brouwer.from_color_table(2, colors))
    grid = brouwer.color_grid(inst)
    assert brouwer.find_trichromatic(inst) == brute_trichromatic(grid, 4)
    assert brouwer.find_trichromatic(inst) == [(0, 0)]


def test_forced_boundary_solution_at_the_corner():
    inst = brouwer.make_instance(3, lambda gx, gy: 2)
    squares = brouwer.find_trichromatic(inst)
    assert squares == [(0, 6)]
    grid = brouwer.color_grid(inst)
    assert {grid[0][6], grid[1][6], grid[0][7], grid[1][7]} == {1, 2, 3}


def test_split_square_instance():
    inst = brouwer.DiscreteBrouwerInstance(2, brouwer.split_square_netlist(2), Fraction(2, 5))
    assert brouwer.color_grid(inst) == [[1, 1, 2, 2], [1, 1, 2, 2], [1, 1, 3, 3], [1, 1, 3, 3]]
    assert brouwer.check_boundary(inst) == []
    assert brouwer.find_trichromatic(inst) == [(1, 1)]
    assert len(inst.circuit.gates) == 6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 2, 3]))
def test_find_trichromatic_matches_brute_force(seed, n):
    rng = random.Random(seed)
    colors = random_colors(rng, n)
    inst = brouwer.make_instance(n, lambda gx, gy: colors[gx][gy])
    grid = brouwer.color_grid(inst)
    assert brouwer.find_trichromatic(inst) == brute_trichromatic(grid, 2**n)
