"""Synchronous circuits: compilation from flat SLPs, evaluation, validation.

Gates are tuples::

    ("c", c)            constant
    ("add", ra, rb)     min(a + b, B)
    ("sub", ra, rb)     max(a - b, 0)
    ("mul", ra, c)      min(a * c, B)

A ref is ``(level, slot)``; level 0 holds the circuit inputs and gate levels
are numbered from 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .rational import fmt, q
from .slp import (
    AddB,
    Const,
    FlatSlp,
    MulB,
    SlpError,
    SubB,
    check_inputs,
    gc_paused,
    inline_constants,
    liveness,
)

try:  # optional fast rationals for bulk evaluation
    import gmpy2
except ImportError:  # pragma: no cover
    gmpy2 = None

ONE = Fraction(1)
ZERO = Fraction(0)
DUMMY = ("c", ZERO)


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class SyncCircuit:
    num_inputs: int
    levels: tuple
    outputs: tuple
    bound: Fraction = ONE
    _plans: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def width(self) -> int:
        return max((len(level) for level in self.levels), default=0)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def gate(self, ref) -> tuple:
        level, slot = ref
        return self.levels[level - 1][slot]


@dataclass(frozen=True)
class ValidationReport:
    is_synchronous: bool
    width: int
    depth: int
    violations: tuple = ()


# ---------------------------------------------------------------------------
# Compilation


@gc_paused
def compile_slp(flat: FlatSlp, report=None) -> SyncCircuit:
    """One level per line.

    Slot j of level i holds the j-th variable live at line i: the line's own
    gate for its target, a ``*b 1`` copy from level i - 1 for everything
    else, and a c-gate for each inline constant the next line reads.  Levels
    are padded with constant-0 gates up to the maximum number of live
    variables.
    """
    if report is None:
        report = liveness(flat)
    width = report.max_live
    prev: dict[str, tuple] = {v: (0, j) for j, v in enumerate(flat.inputs)}
    lines = flat.lines
    levels = []
    for i, (line, row) in enumerate(zip(lines, report.live_at_line), start=1):
        cur: dict[str, tuple] = {}
        gates = []
        target = line.var
        for j, v in enumerate(row):
            cur[v] = (i, j)
            if v == target:
                gates.append(_rewire(line.op, prev, i))
            elif v[:2] == "%c":
                k = int(v[v.index(".") + 1:])
                gates.append(("c", inline_constants(lines[i].op)[k - 1]))
            else:
                try:
                    gates.append(("mul", prev[v], ONE))
                except KeyError:
                    raise SlpError(f"line {i}: {v!r} read before assignment") from None
        gates.extend([DUMMY] * (width - len(gates)))
        levels.append(tuple(gates))
        prev = cur
    try:
        outputs = tuple(prev[v] for v in flat.outputs)
    except KeyError as exc:
        raise SlpError(f"output {exc.args[0]!r} is never assigned") from None
    return SyncCircuit(len(flat.inputs), tuple(levels), outputs)


def _rewire(op, prev: dict, i: int) -> tuple:
    def ref(v, k):
        if isinstance(v, str):
            try:
                return prev[v]
            except KeyError:
                raise SlpError(f"line {i}: {v!r} read before assignment") from None
        k[0] += 1
        return prev[f"%c{i}.{k[0]}"]

    if isinstance(op, Const):
        return ("c", op.c)
    if isinstance(op, AddB):
        counter = [0]
        return ("add", ref(op.a, counter), ref(op.b, counter))
    if isinstance(op, SubB):
        counter = [0]
        return ("sub", ref(op.a, counter), ref(op.b, counter))
    if isinstance(op, MulB):
        return ("mul", ref(op.a, None), op.c)
    raise SlpError(f"unknown op {op!r}")


# ---------------------------------------------------------------------------
# Evaluation


def evaluate_levels(circ: SyncCircuit, point: Sequence) -> list[list[Fraction]]:
    """Values of every gate; entry 0 is the input vector."""
    bound = circ.bound
    values = [check_inputs(point, circ.num_inputs, bound)]
    for level in circ.levels:
        row = []
        for g in level:
            kind = g[0]
            if kind == "c":
                row.append(g[1])
                continue
            a = values[g[1][0]][g[1][1]]
            if kind == "mul":
                s = a * g[2]
                row.append(s if s < bound else bound)
            else:
                b = values[g[2][0]][g[2][1]]
                if kind == "add":
                    s = a + b
                    row.append(s if s < bound else bound)
                else:
                    s = a - b
                    row.append(s if s > 0 else ZERO)
        values.append(row)
    return values


def evaluate(circ: SyncCircuit, point: Sequence) -> list[Fraction]:
    """Exact level-by-level evaluation, returning the output values."""
    values = evaluate_levels(circ, point)
    return [values[lv][sl] for lv, sl in circ.outputs]


def fast_evaluator(circ: SyncCircuit, backend: str = "auto") -> Callable:
    """Return ``f(point) -> list`` computing only the outputs' cone.

    Copy gates are resolved to their source and the remaining gates are
    emitted as one generated Python function.  With the gmpy2 backend the
    function takes and returns ``gmpy2.mpq`` values; otherwise Fractions.
    Results are identical to :func:`evaluate`.
    """
    if backend == "auto":
        backend = "gmpy2" if gmpy2 is not None else "fraction"
    key = ("fast", backend)
    cached = circ._plans.get(key)
    if cached is not None:
        return cached
    num = gmpy2.mpq if backend == "gmpy2" else Fraction

    def root(ref):
        # follow copy chains back to the gate that computes the value
        while ref[0] > 0:
            g = circ.levels[ref[0] - 1][ref[1]]
            if g[0] != "mul" or g[2] != 1:
                break
            ref = g[1]
        return ref

    needed: set = set()
    stack = [root(r) for r in circ.outputs]
    while stack:
        ref = stack.pop()
        if ref in needed:
            continue
        needed.add(ref)
        if ref[0] == 0:
            continue
        g = circ.gate(ref)
        if g[0] in ("add", "sub"):
            stack.append(root(g[1]))
            stack.append(root(g[2]))
        elif g[0] == "mul":
            stack.append(root(g[1]))

    consts: dict = {}

    def cname(c) -> str:
        name = consts.get(c)
        if name is None:
            name = f"k{len(consts)}"
            consts[c] = name
        return name

    def vname(ref) -> str:
        lv, sl = root(ref)
        return f"i{sl}" if lv == 0 else f"v{lv}_{sl}"

    bname = cname(circ.bound)
    zname = cname(ZERO)
    body = []
    for ref in sorted(r for r in needed if r[0] > 0):
        g = circ.gate(ref)
        name = f"v{ref[0]}_{ref[1]}"
        if g[0] == "c":
            body.append(f"    {name} = {cname(g[1])}")
        elif g[0] == "mul":
            body.append(f"    {name} = {vname(g[1])} * {cname(g[2])}")
            body.append(f"    if {name} > {bname}: {name} = {bname}")
        elif g[0] == "add":
            body.append(f"    {name} = {vname(g[1])} + {vname(g[2])}")
            body.append(f"    if {name} > {bname}: {name} = {bname}")
        else:
            body.append(f"    {name} = {vname(g[1])} - {vname(g[2])}")
            body.append(f"    if {name} < {zname}: {name} = {zname}")
    args = ", ".join(f"i{j}" for j in range(circ.num_inputs))
    outs = ", ".join(vname(r) for r in circ.outputs)
    src = f"def _f({args}):\n" + "\n".join(body) + f"\n    return [{outs}]\n"
    namespace = {name: num(c.numerator, c.denominator) if backend == "gmpy2" else c
                 for c, name in consts.items()}
    exec(compile(src, "<circuit>", "exec"), namespace)
    inner = namespace["_f"]

    def run(point):
        return inner(*point)

    circ._plans[key] = run
    return run


def to_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    return Fraction(int(v.numerator), int(v.denominator))


def residual(circ: SyncCircuit, point: Sequence) -> Fraction:
    """Infinity-norm distance between ``point`` and the circuit's image."""
    if circ.num_inputs != 2 or len(circ.outputs) != 2:
        raise CircuitError("residual needs a circuit with 2 inputs and 2 outputs")
    if len(point) != 2:
        raise CircuitError("residual needs a 2D point")
    out = evaluate(circ, point)
    return max(abs(q(point[0]) - out[0]), abs(q(point[1]) - out[1]))


def residuals(circ: SyncCircuit, points: Sequence) -> list[Fraction]:
    """Residuals of many points through the fast evaluator."""
    if circ.num_inputs != 2 or len(circ.outputs) != 2:
        raise CircuitError("residual needs a circuit with 2 inputs and 2 outputs")
    f = fast_evaluator(circ)
    mk = gmpy2.mpq if gmpy2 is not None else Fraction
    out = []
    for x, y in points:
        x, y = q(x), q(y)
        check_inputs((x, y), 2, circ.bound)
        px, py = mk(x.numerator, x.denominator), mk(y.numerator, y.denominator)
        fx, fy = f((px, py))
        out.append(to_fraction(max(abs(px - fx), abs(py - fy))))
    return out


# ---------------------------------------------------------------------------
# Validation


def validate(circ: SyncCircuit) -> ValidationReport:
    """Check refs and synchronicity; never raises."""
    violations = []
    sizes = [circ.num_inputs] + [len(level) for level in circ.levels]

    def ok(ref) -> bool:
        return (isinstance(ref, tuple) and len(ref) == 2 and 0 <= ref[0] < len(sizes)
                and 0 <= ref[1] < sizes[ref[0]])

    for i, level in enumerate(circ.levels, start=1):
        for j, g in enumerate(level):
            kind = g[0]
            if kind == "c":
                if not ZERO <= g[1] <= circ.bound:
                    violations.append(f"gate ({i},{j}): constant {g[1]} out of range")
                continue
            refs = (g[1], g[2]) if kind in ("add", "sub") else (g[1],)
            for r in refs:
                if not ok(r):
                    violations.append(f"gate ({i},{j}): bad ref {r!r}")
                elif kind in ("add", "sub") and r[0] != i - 1:
                    violations.append(f"gate ({i},{j}): {kind} reads level {r[0]}, expected {i - 1}")
                elif kind == "mul" and r[0] >= i:
                    violations.append(f"gate ({i},{j}): mul reads level {r[0]} which is not earlier")
            if kind == "mul" and g[2] < 0:
                violations.append(f"gate ({i},{j}): negative multiplier {g[2]}")
    for r in circ.outputs:
        if not ok(r):
            violations.append(f"output: bad ref {r!r}")
    return ValidationReport(not violations, circ.width, circ.depth, tuple(violations))


# ---------------------------------------------------------------------------
# Small circuits and JSON


def identity_circuit(arity: int = 2) -> SyncCircuit:
    level = tuple(("mul", (0, j), ONE) for j in range(arity))
    return SyncCircuit(arity, (level,), tuple((1, j) for j in range(arity)))


def constant_circuit(values: Sequence, num_inputs: int = 2) -> SyncCircuit:
    level = tuple(("c", q(v)) for v in values)
    return SyncCircuit(num_inputs, (level,), tuple((1, j) for j in range(len(values))))


def _ref_json(ref):
    return [ref[0], ref[1]]


def gate_to_json(g) -> dict:
    if g[0] == "c":
        return {"op": "c", "args": [], "const": fmt(g[1])}
    if g[0] == "mul":
        return {"op": "mul", "args": [_ref_json(g[1])], "const": fmt(g[2])}
    return {"op": g[0], "args": [_ref_json(g[1]), _ref_json(g[2])], "const": None}


def gate_from_json(d: dict) -> tuple:
    op = d["op"]
    args = [tuple(int(x) for x in a) for a in d.get("args", [])]
    if op == "c":
        return ("c", q(d["const"]))
    if op == "mul":
        return ("mul", args[0], q(d["const"]))
    if op in ("add", "sub"):
        return (op, args[0], args[1])
    raise CircuitError(f"unknown gate op {op!r}")


def circuit_to_dict(circ: SyncCircuit) -> dict:
    d = {
        "num_inputs": circ.num_inputs,
        "levels": [[gate_to_json(g) for g in level] for level in circ.levels],
        "outputs": [_ref_json(r) for r in circ.outputs],
    }
    if circ.bound != ONE:
        d["bound"] = fmt(circ.bound)
    return d


def check_refs(circ: SyncCircuit) -> None:
    """Every gate reads an existing gate on an earlier level."""
    sizes = [circ.num_inputs] + [len(level) for level in circ.levels]

    def ok(ref, below):
        return isinstance(ref, tuple) and len(ref) == 2 and 0 <= ref[0] < below and 0 <= ref[1] < sizes[ref[0]]

    for i, level in enumerate(circ.levels, start=1):
        for j, g in enumerate(level):
            refs = g[1:3] if g[0] in ("add", "sub") else g[1:2] if g[0] == "mul" else ()
            for r in refs:
                if not ok(r, i):
                    raise CircuitError(f"gate ({i},{j}) reads missing ref {r}")
    for r in circ.outputs:
        if not ok(r, len(sizes)):
            raise CircuitError(f"output ref {r} does not exist")


def circuit_from_dict(d: dict) -> SyncCircuit:
    try:
        circ = SyncCircuit(
            int(d["num_inputs"]),
            tuple(tuple(gate_from_json(g) for g in level) for level in d["levels"]),
            tuple(tuple(int(x) for x in r) for r in d["outputs"]),
            q(d.get("bound", "1")),
        )
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise CircuitError(f"malformed circuit JSON: {exc}") from None
    check_refs(circ)
    return circ


def dumps(circ: SyncCircuit) -> str:
    return json.dumps(circuit_to_dict(circ), separators=(",", ":"))


def loads(text: str) -> SyncCircuit:
    return circuit_from_dict(json.loads(text))
