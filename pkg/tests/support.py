"""Random program, netlist and toy-system generators shared by the tests."""
from __future__ import annotations

import random
from fractions import Fraction

from slpgame import brouwer, circuit, game, slp
from slpgame.slp import AddB, Const, MulB, SubB

MUL_CONSTANTS = [Fraction(0), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3, 4), Fraction(5, 3), Fraction(16)]


def rand_unit(rng: random.Random, den: int = 1000) -> Fraction:
    return Fraction(rng.randint(0, den), den)


def random_flat(rng: random.Random, max_lines: int = 60, num_inputs: int | None = None,
                num_outputs: int | None = None) -> slp.FlatSlp:
    """A random flat program; inline constants never appear on line 1."""
    if num_inputs is None:
        num_inputs = rng.randint(1, 3)
    inputs = [f"in{i}" for i in range(1, num_inputs + 1)]
    names = list(inputs)
    pool = [f"v{i}" for i in range(1, 7)]
    lines = []
    count = rng.randint(1, max_lines)
    for i in range(count):
        target = rng.choice(pool)

        def arg():
            if i > 0 and rng.random() < 0.15:
                return rand_unit(rng, 8)
            return rng.choice(names)

        kind = rng.random()
        if kind < 0.1:
            op = Const(rand_unit(rng, 16))
        elif kind < 0.45:
            op = AddB(arg(), arg())
        elif kind < 0.7:
            op = SubB(arg(), arg())
        else:
            op = MulB(rng.choice(names), rng.choice(MUL_CONSTANTS))
        if isinstance(op, (AddB, SubB)) and not slp.operands(op):
            op = type(op)(rng.choice(names), op.b)
        lines.append((target, op))
        if target not in names:
            names.append(target)
    assigned = [v for v in names if v not in inputs]
    k = num_outputs if num_outputs is not None else rng.randint(1, min(3, len(assigned)))
    if len(assigned) < k:
        for v in pool:
            if v not in assigned and len(assigned) < k:
                lines.append((v, MulB(inputs[0], Fraction(1))))
                assigned.append(v)
    outputs = rng.sample(assigned, k)
    return slp.flat_from_lines(inputs, lines, outputs)


def random_circuit2(rng: random.Random, max_lines: int = 30) -> circuit.SyncCircuit:
    """Random two-input two-output synchronous circuit."""
    flat = random_flat(rng, max_lines, num_inputs=2, num_outputs=2)
    return circuit.compile_slp(flat)


def random_netlist(rng: random.Random, max_inputs: int = 8, max_gates: int = 16) -> brouwer.BoolCircuit:
    ni = rng.randint(1, max_inputs)
    gates = []
    for g in range(rng.randint(1, max_gates)):
        wires = ni + g
        if rng.random() < 0.4:
            gates.append(("not", rng.randrange(wires)))
        else:
            gates.append(("or", rng.randrange(wires), rng.randrange(wires)))
    return brouwer.BoolCircuit(ni, tuple(gates), (ni + len(gates) - 1,))


def random_colors(rng: random.Random, n: int) -> list[list[int]]:
    size = 2**n
    return [[rng.randint(1, 3) for _ in range(size)] for _ in range(size)]


def circuit_from_text(text: str) -> circuit.SyncCircuit:
    return circuit.compile_slp(slp.expand(slp.parse_slp(text)))


# Toy circuits on [0,1]^2 with a known exact fixed point.
TOY_SYSTEMS = {
    "constant": ("input x, y\noutput a, b\na <- 0.5\nb <- 0.5\n", ("1/2", "1/2")),
    "identity": ("input x, y\noutput a, b\na <- x *b 1\nb <- y *b 1\n", ("3/10", "7/10")),
    "shift": ("input x, y\noutput a, b\na <- x +b 0.25\nb <- y *b 0\n", ("1", "0")),
    "reflect": ("input x, y\noutput a, b\nh <- 1\na <- h -b x\nb <- y *b 0.5\n", ("1/2", "0")),
    "double": ("input x, y\noutput a, b\na <- x *b 2\nh <- y *b 0.5\nb <- h +b 0.25\n", ("0", "1/2")),
    "mixed": ("input x, y\noutput a, b\ns <- x +b y\na <- s *b 0.5\nb <- y *b 1\n", ("2/5", "2/5")),
}


def toy_game(name: str):
    """(circuit, system, game, assignment, point) for a toy system."""
    text, point = TOY_SYSTEMS[name]
    circ = circuit_from_text(text)
    point = tuple(Fraction(v) for v in point)
    system = game.add_loopback(game.rescale_tenth(circ))
    g = game.build_game(system)
    assignment = game.assignment_from_point(system, [v / 10 for v in point])
    return circ, system, g, assignment, point
