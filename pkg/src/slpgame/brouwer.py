"""Discrete Brouwer instances given by NOT/OR netlists.

A color circuit reads 2n bits, the n bits of the grid x coordinate followed
by the n bits of y, most significant first, and returns a one-hot triple for
colors 1, 2, 3.  Refs ``0 .. num_inputs-1`` are inputs and ref
``num_inputs + g`` is gate ``g``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .rational import q


class BrouwerError(ValueError):
    pass


@dataclass(frozen=True)
class BoolCircuit:
    num_inputs: int
    gates: tuple  # ("not", r) | ("or", r1, r2)
    outputs: tuple

    def __post_init__(self):
        for g_index, g in enumerate(self.gates):
            limit = self.num_inputs + g_index
            if g[0] == "not" and len(g) == 2:
                refs = g[1:]
            elif g[0] == "or" and len(g) == 3:
                refs = g[1:]
            else:
                raise BrouwerError(f"gate {g_index}: unknown gate {g!r}")
            for r in refs:
                if not 0 <= r < limit:
                    raise BrouwerError(f"gate {g_index}: ref {r} is not an earlier wire")
        for r in self.outputs:
            if not 0 <= r < self.num_inputs + len(self.gates):
                raise BrouwerError(f"output ref {r} out of range")

    def wires(self, bits: Sequence[int]) -> list[int]:
        """Values of all inputs followed by all gates."""
        if len(bits) != self.num_inputs:
            raise BrouwerError(f"expected {self.num_inputs} bits, got {len(bits)}")
        vals = [1 if b else 0 for b in bits]
        for g in self.gates:
            if g[0] == "not":
                vals.append(1 - vals[g[1]])
            else:
                vals.append(vals[g[1]] | vals[g[2]])
        return vals

    def evaluate(self, bits: Sequence[int]) -> list[int]:
        vals = self.wires(bits)
        return [vals[r] for r in self.outputs]


def int_bits(value: int, width: int) -> list[int]:
    """Big-endian bits of ``value``."""
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def point_bits(gx: int, gy: int, n: int) -> list[int]:
    return int_bits(gx, n) + int_bits(gy, n)


# ---------------------------------------------------------------------------
# Building netlists


class NetBuilder:
    """Incremental NOT/OR netlist with constant folding.

    Wires are ints; the Python booleans True/False stand for constants.
    """

    def __init__(self, num_inputs: int):
        self.num_inputs = num_inputs
        self.gates: list[tuple] = []
        self._memo: dict[tuple, int] = {}

    def inputs(self) -> list[int]:
        return list(range(self.num_inputs))

    def _emit(self, gate: tuple) -> int:
        ref = self._memo.get(gate)
        if ref is None:
            ref = self.num_inputs + len(self.gates)
            self.gates.append(gate)
            self._memo[gate] = ref
        return ref

    def copy_gates(self, circ: BoolCircuit) -> list[int]:
        """Append ``circ``'s gates (sharing inputs); return its wire map."""
        if circ.num_inputs != self.num_inputs:
            raise BrouwerError("input count mismatch")
        wire = list(range(self.num_inputs))
        for g in circ.gates:
            if g[0] == "not":
                wire.append(self.NOT(wire[g[1]]))
            else:
                wire.append(self.OR(wire[g[1]], wire[g[2]]))
        return wire

    def NOT(self, a):
        if a is True or a is False:
            return not a
        if a >= self.num_inputs:
            g = self.gates[a - self.num_inputs]
            if g[0] == "not":
                return g[1]
        return self._emit(("not", a))

    def OR(self, a, b):
        if a is True or b is True:
            return True
        if a is False:
            return b
        if b is False or a == b:
            return a
        return self._emit(("or", min(a, b), max(a, b)))

    def AND(self, a, b):
        return self.NOT(self.OR(self.NOT(a), self.NOT(b)))

    def any(self, wires: Iterable):
        out = False
        for w in wires:
            out = self.OR(out, w)
        return out

    def all(self, wires: Iterable):
        out = True
        for w in wires:
            out = self.AND(out, w)
        return out

    def ge_const(self, bits: Sequence, c: int):
        """bits (MSB first) read as an integer is >= c."""
        width = len(bits)
        if c <= 0:
            return True
        if c >= 1 << width:
            return False
        ge = True
        for i in range(width - 1, -1, -1):
            if (c >> (width - 1 - i)) & 1:
                ge = self.AND(bits[i], ge)
            else:
                ge = self.OR(bits[i], ge)
        return ge

    def le_const(self, bits: Sequence, c: int):
        return self.NOT(self.ge_const(bits, c + 1))

    def eq_const(self, bits: Sequence, c: int):
        if not 0 <= c < 1 << len(bits):
            return False
        lits = [b if bit else self.NOT(b) for b, bit in zip(bits, int_bits(c, len(bits)))]
        return self.all(lits)

    def as_gate(self, w) -> int:
        """A gate ref carrying the value of wire or constant ``w``."""
        if w is True or w is False:
            if self.num_inputs == 0:
                raise BrouwerError("constant output needs at least one input")
            t = self.OR(0, self.NOT(0))
            return t if w else self.NOT(t)
        if w < self.num_inputs:
            return self._emit(("not", self._emit(("not", w))))
        return w

    def finish(self, outputs: Sequence) -> BoolCircuit:
        outs = tuple(self.as_gate(w) for w in outputs)
        return BoolCircuit(self.num_inputs, tuple(self.gates), outs)


def from_function(num_inputs: int, fn: Callable[[int], int]) -> "BoolCircuit":
    """Netlist for a color function of the packed input integer.

    ``fn(v)`` returns a color in {1,2,3} for the input whose bits, MSB
    first, spell ``v``.  Built by Shannon expansion with shared subtables.
    """
    b = NetBuilder(num_inputs)
    size = 1 << num_inputs
    table = [fn(v) for v in range(size)]
    for c in table:
        if c not in (1, 2, 3):
            raise BrouwerError(f"color {c} is not in {{1, 2, 3}}")
    memo: dict = {}

    def build(indicator: tuple, depth: int):
        key = (indicator, depth)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if all(indicator):
            res = True
        elif not any(indicator):
            res = False
        else:
            half = len(indicator) // 2
            low = build(indicator[:half], depth + 1)
            high = build(indicator[half:], depth + 1)
            x = depth
            res = b.OR(b.AND(x, high), b.AND(b.NOT(x), low))
        memo[key] = res
        return res

    c2 = build(tuple(c == 2 for c in table), 0)
    c3 = build(tuple(c == 3 for c in table), 0)
    c1 = b.NOT(b.OR(c2, c3))
    return b.finish([c1, c2, c3])


def from_color_table(n: int, colors: Callable[[int, int], int]) -> "BoolCircuit":
    """Netlist whose color at grid point (gx, gy) is ``colors(gx, gy)``."""
    mask = (1 << n) - 1
    return from_function(2 * n, lambda v: colors(v >> n, v & mask))


# ---------------------------------------------------------------------------
# Instances


@dataclass(frozen=True)
class DiscreteBrouwerInstance:
    n: int
    circuit: BoolCircuit
    eps: Fraction | None = None  # None: original boundary; otherwise thick

    def __post_init__(self):
        if self.n < 1:
            raise BrouwerError("n must be positive")
        if self.circuit.num_inputs != 2 * self.n:
            raise BrouwerError(f"color circuit must read 2n = {2 * self.n} bits")
        if len(self.circuit.outputs) != 3:
            raise BrouwerError("color circuit must have exactly 3 outputs")
        if self.eps is not None and not 0 < self.eps < Fraction(1, 2):
            raise BrouwerError("thickness must satisfy 0 < eps < 1/2")

    @property
    def size(self) -> int:
        return 1 << self.n

    @property
    def kind(self) -> str:
        return "original" if self.eps is None else "thick"


def eval_color(inst: DiscreteBrouwerInstance, gx: int, gy: int) -> int:
    if not (0 <= gx < inst.size and 0 <= gy < inst.size):
        raise BrouwerError(f"grid point ({gx}, {gy}) outside the {inst.size}x{inst.size} grid")
    out = inst.circuit.evaluate(point_bits(gx, gy, inst.n))
    if sum(out) != 1:
        raise BrouwerError(f"outputs {out} at ({gx}, {gy}) are not one-hot")
    return out.index(1) + 1


def color_grid(inst: DiscreteBrouwerInstance) -> list[list[int]]:
    """``grid[gx][gy]`` for every grid point."""
    return [[eval_color(inst, gx, gy) for gy in range(inst.size)] for gx in range(inst.size)]


def required_color(n: int, gx: int, gy: int, eps: Fraction | None) -> int | None:
    """Color forced by the boundary rules at a grid point, if any."""
    top = (1 << n) - 1
    if eps is None:
        if gx == 0:
            return 1
        if gy == 0:
            return 2
        if gx == top or gy == top:
            return 3
        return None
    scale = 1 << n
    x, y = Fraction(gx, scale), Fraction(gy, scale)
    if y <= eps:
        return 1
    if x <= eps:
        return 2
    if y >= 1 - eps or x >= 1 - eps:
        return 3
    return None


def enforce_boundary(circ: BoolCircuit, n: int, eps: Fraction | None = None) -> BoolCircuit:
    """Wrap ``circ`` so the boundary rules hold.

    With ``eps=None`` the one-point-wide original rules apply; otherwise the
    rules of a border of width ``eps``.  Interior colors are unchanged.
    """
    if circ.num_inputs != 2 * n:
        raise BrouwerError(f"color circuit must read 2n = {2 * n} bits")
    b = NetBuilder(2 * n)
    wire = b.copy_gates(circ)
    o1, o2, o3 = (wire[r] for r in circ.outputs)
    xs, ys = list(range(n)), list(range(n, 2 * n))
    top = (1 << n) - 1
    if eps is None:
        a = b.eq_const(xs, 0)
        bb = b.eq_const(ys, 0)
        c = b.OR(b.eq_const(xs, top), b.eq_const(ys, top))
    else:
        eps = q(eps)
        scale = 1 << n
        # grid value g/2^n <= eps  <=>  g <= floor(eps * 2^n)
        low = (eps * scale).numerator // (eps * scale).denominator
        # g/2^n >= 1 - eps  <=>  g >= ceil((1 - eps) * 2^n)
        hi_val = (1 - eps) * scale
        high = -((-hi_val.numerator) // hi_val.denominator)
        a = b.le_const(ys, low)
        bb = b.le_const(xs, low)
        c = b.OR(b.ge_const(ys, high), b.ge_const(xs, high))
    na, nb, nc = b.NOT(a), b.NOT(bb), b.NOT(c)
    out1 = b.OR(a, b.all([nb, nc, o1]))
    out2 = b.AND(na, b.OR(bb, b.AND(nc, o2)))
    out3 = b.all([na, nb, b.OR(c, o3)])
    return b.finish([out1, out2, out3])


def make_instance(n: int, colors: Callable[[int, int], int], eps: Fraction | None = None) -> DiscreteBrouwerInstance:
    """Instance from a color table, with the boundary rules enforced."""
    circ = enforce_boundary(from_color_table(n, colors), n, eps)
    return DiscreteBrouwerInstance(n, circ, None if eps is None else q(eps))


def check_boundary(inst: DiscreteBrouwerInstance) -> list[tuple[int, int, int, int]]:
    """Grid points violating the boundary rules: ``(gx, gy, got, want)``."""
    bad = []
    for gx in range(inst.size):
        for gy in range(inst.size):
            want = required_color(inst.n, gx, gy, inst.eps)
            if want is not None:
                got = eval_color(inst, gx, gy)
                if got != want:
                    bad.append((gx, gy, got, want))
    return bad


def find_trichromatic(inst: DiscreteBrouwerInstance) -> list[tuple[int, int]]:
    """Lower-left corners of all squares whose corners use all three colors."""
    grid = color_grid(inst)
    out = []
    for sx in range(inst.size - 1):
        for sy in range(inst.size - 1):
            corners = {grid[sx][sy], grid[sx + 1][sy], grid[sx][sy + 1], grid[sx + 1][sy + 1]}
            if len(corners) == 3:
                out.append((sx, sy))
    return out


# ---------------------------------------------------------------------------
# Thickening


@dataclass(frozen=True)
class ThickEmbedding:
    n: int
    n_prime: int
    eps: Fraction
    x0: int  # grid units of the new grid
    y0: int

    def to_original(self, gx: int, gy: int) -> tuple[int, int]:
        """Original grid point shown at new point (gx, gy).

        The embedding transposes coordinates: the thick rules put color 1 at
        the bottom and color 2 on the left, the original rules the other way
        round.
        """
        return gy - self.y0, gx - self.x0

    def square_to_original(self, sx: int, sy: int) -> tuple[int, int]:
        return self.to_original(sx, sy)

    def inside(self, gx: int, gy: int) -> bool:
        top = (1 << self.n) - 1
        return 0 <= gx - self.x0 <= top and 0 <= gy - self.y0 <= top


def thick_size(n: int, eps: Fraction) -> int:
    """Smallest n' with 2^n / 2^n' < 1 - 2 eps."""
    eps = q(eps)
    if not 0 < eps < Fraction(1, 2):
        raise BrouwerError("thickness must satisfy 0 < eps < 1/2")
    n_prime = n
    while Fraction(1 << n, 1 << n_prime) >= 1 - 2 * eps:
        n_prime += 1
    return n_prime


def thicken(inst: DiscreteBrouwerInstance, eps) -> tuple[DiscreteBrouwerInstance, ThickEmbedding]:
    """Embed an original-boundary instance in the middle of a finer grid
    whose border of width ``eps`` satisfies the thick rules."""
    if inst.eps is not None:
        raise BrouwerError("thicken expects an instance with the original boundary")
    eps = q(eps)
    n, n2 = inst.n, thick_size(inst.n, eps)
    offset = (1 << (n2 - 1)) - (1 << (n - 1))
    emb = ThickEmbedding(n, n2, eps, offset, offset)

    b = NetBuilder(2 * n2)
    xs, ys = list(range(n2)), list(range(n2, 2 * n2))
    top = (1 << n) - 1
    # inside test and the shifted coordinates
    in_x = b.AND(b.ge_const(xs, offset), b.le_const(xs, offset + top))
    in_y = b.AND(b.ge_const(ys, offset), b.le_const(ys, offset + top))
    inside = b.AND(in_x, in_y)
    # original x reads new y - y0 and original y reads new x - x0
    sub_y = _sub_const(b, ys, offset, n)
    sub_x = _sub_const(b, xs, offset, n)
    wire = list(sub_y) + list(sub_x)
    for g in inst.circuit.gates:
        if g[0] == "not":
            wire.append(b.NOT(wire[g[1]]))
        else:
            wire.append(b.OR(wire[g[1]], wire[g[2]]))
    o1, o2, o3 = (wire[r] for r in inst.circuit.outputs)
    below = b.NOT(b.ge_const(ys, offset))           # y - y0 < 0
    left = b.le_const(xs, offset)                   # x - x0 <= 0
    out_a = b.AND(b.NOT(inside), below)
    out_b = b.all([b.NOT(inside), b.NOT(below), left])
    out_c = b.all([b.NOT(inside), b.NOT(below), b.NOT(left)])
    c1 = b.OR(b.AND(inside, o1), out_a)
    c2 = b.OR(b.AND(inside, o2), out_b)
    c3 = b.OR(b.AND(inside, o3), out_c)
    raw = b.finish([c1, c2, c3])
    circ = enforce_boundary(raw, n2, eps)
    return DiscreteBrouwerInstance(n2, circ, eps), emb


def _sub_const(b: NetBuilder, bits: Sequence, c: int, out_width: int) -> list:
    """Low ``out_width`` bits (MSB first) of ``bits - c`` modulo 2^len."""
    width = len(bits)
    cbits = int_bits((-c) % (1 << width), width)
    # ripple-carry add of the two's complement constant, LSB first
    out = [None] * width
    carry = False
    for i in range(width - 1, -1, -1):
        a = bits[i]
        if cbits[i]:
            s = b.NOT(_xor(b, a, carry))
            carry = b.OR(a, carry)
        else:
            s = _xor(b, a, carry)
            carry = b.AND(a, carry)
        out[i] = s
    return out[width - out_width:]


def _xor(b: NetBuilder, a, c):
    return b.OR(b.AND(a, b.NOT(c)), b.AND(b.NOT(a), c))


# ---------------------------------------------------------------------------
# .bnet text format


def format_bnet(circ: BoolCircuit) -> str:
    lines = [f"inputs {circ.num_inputs}"]
    for g_index, g in enumerate(circ.gates):
        k = circ.num_inputs + g_index
        if g[0] == "not":
            lines.append(f"g{k} = NOT g{g[1]}")
        else:
            lines.append(f"g{k} = OR g{g[1]} g{g[2]}")
    lines.append("outputs " + " ".join(f"g{r}" for r in circ.outputs))
    return "\n".join(lines) + "\n"


def parse_bnet(text: str) -> BoolCircuit:
    """Parse the ``.bnet`` netlist format.

    Inputs are wires ``g0 .. g(m-1)``; gate lines must define the following
    wires in order.  ``#`` starts a comment.
    """
    num_inputs = None
    gates: list[tuple] = []
    outputs = None

    def wire(tok: str, lineno: int) -> int:
        if not tok.startswith("g") or not tok[1:].isdigit():
            raise BrouwerError(f"line {lineno}: bad wire name {tok!r}")
        return int(tok[1:])

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "inputs":
            if num_inputs is not None or len(parts) != 2 or not parts[1].isdigit():
                raise BrouwerError(f"line {lineno}: bad inputs declaration")
            num_inputs = int(parts[1])
        elif parts[0] == "outputs":
            outputs = tuple(wire(t, lineno) for t in parts[1:])
        else:
            if num_inputs is None:
                raise BrouwerError(f"line {lineno}: gate before inputs declaration")
            if len(parts) < 4 or parts[1] != "=":
                raise BrouwerError(f"line {lineno}: expected 'gK = NOT gI' or 'gK = OR gI gJ'")
            k = wire(parts[0], lineno)
            if k != num_inputs + len(gates):
                raise BrouwerError(f"line {lineno}: expected g{num_inputs + len(gates)}, found {parts[0]}")
            op = parts[2].upper()
            if op == "NOT" and len(parts) == 4:
                gates.append(("not", wire(parts[3], lineno)))
            elif op == "OR" and len(parts) == 5:
                gates.append(("or", wire(parts[3], lineno), wire(parts[4], lineno)))
            else:
                raise BrouwerError(f"line {lineno}: unknown gate {' '.join(parts[2:])!r}")
    if num_inputs is None or outputs is None:
        raise BrouwerError("netlist needs both an inputs and an outputs line")
    return BoolCircuit(num_inputs, tuple(gates), outputs)


# ---------------------------------------------------------------------------
# Sample instances


def split_square_netlist(n: int) -> BoolCircuit:
    """Colors from the two most significant bits: 1 below the middle, 2 in
    the upper-left quarter, 3 in the upper-right quarter.

    For n = 2 this is a six-gate netlist satisfying the thick rules for any
    eps in [1/4, 1/2) with a single trichromatic square at (1, 1).
    """
    x1, y1 = 0, n
    b = NetBuilder(2 * n)
    c1 = b._emit(("not", y1))
    nx = b._emit(("not", x1))
    t = b._emit(("or", nx, c1))
    c3 = b._emit(("not", t))
    u = b._emit(("or", c1, c3))
    c2 = b._emit(("not", u))
    return BoolCircuit(2 * n, tuple(b.gates), (c1, c2, c3))
