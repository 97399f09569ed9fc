"""Twenty-action caterpillar polymatrix games that simulate a circuit.

Pipeline: rescale a width-8 circuit to [0, 1/10], wrap it into a gate
constraint system whose slots 9 and 10 carry the outputs back to the inputs,
then turn every level into a variable player and every pair of adjacent
levels into a constraint player.  Each spine player also faces a mix player
in a hide-and-seek game that forces probability 1/10 on every action pair.

Slots and levels of a constraint system are 1-based; gate refs are
``(slot, level)``.  Action ``x_i`` has index ``i - 1`` and its partner
``xbar_i`` has index ``10 + i - 1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .circuit import SyncCircuit, evaluate, evaluate_levels, circuit_from_dict, circuit_to_dict
from .rational import fmt, q

TENTH = Fraction(1, 10)
SLOTS = 10
ACTIONS = 20
IN_SLOTS = (7, 8)
LOOP_SLOTS = (9, 10)


class GameError(ValueError):
    pass


def x(i: int) -> int:
    return i - 1


def xbar(i: int) -> int:
    return SLOTS + i - 1


# ---------------------------------------------------------------------------
# Rescaling


def rescale_tenth(circ: SyncCircuit) -> SyncCircuit:
    """Same circuit with constants divided by ten and clip bound 1/10."""
    levels = tuple(
        tuple(("c", g[1] / 10) if g[0] == "c" else g for g in level)
        for level in circ.levels
    )
    return SyncCircuit(circ.num_inputs, levels, circ.outputs, circ.bound / 10)


# ---------------------------------------------------------------------------
# Gate constraint systems


@dataclass(frozen=True)
class GateConstraintSystem:
    """Gates ``g[(slot, level)]`` over bound-1/10 operators.

    ``("c", c)``, ``("add", r1, r2)``, ``("sub", r1, r2)``, ``("mul", r, c)``
    with refs ``(slot, level)`` on an adjacent level.
    """

    num_levels: int
    gates: Mapping
    inputs: tuple = ((7, 1), (8, 1))
    outputs: tuple = ()
    source: SyncCircuit | None = field(default=None, compare=False)

    def gate_refs(self, gate) -> tuple:
        if gate[0] in ("add", "sub"):
            return (gate[1], gate[2])
        if gate[0] == "mul":
            return (gate[1],)
        return ()

    def host(self, slot: int, level: int) -> tuple[int, int]:
        """(constraint index, input-side level) for the gate at a slot."""
        gate = self.gates[(slot, level)]
        refs = self.gate_refs(gate)
        if refs:
            src = refs[0][1]
        else:
            src = level - 1 if level > 1 else level + 1
        if src == level - 1:
            return level - 1, src
        if src == level + 1:
            return level, src
        raise GameError(f"gate ({slot},{level}) reads level {src}, which is not adjacent")


def validate_system(sys: GateConstraintSystem) -> list[str]:
    problems = []
    used: set = set()
    for (slot, level), gate in sorted(sys.gates.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        if not (1 <= slot <= SLOTS and 1 <= level <= sys.num_levels):
            problems.append(f"gate ({slot},{level}) outside the {SLOTS}x{sys.num_levels} grid")
            continue
        refs = sys.gate_refs(gate)
        levels = {r[1] for r in refs}
        if len(levels) > 1:
            problems.append(f"gate ({slot},{level}) reads two different levels")
        for r in refs:
            if r not in sys.gates:
                problems.append(f"gate ({slot},{level}) reads empty slot {r}")
        if gate[0] == "c" and not 0 <= gate[1] <= TENTH:
            problems.append(f"gate ({slot},{level}) constant {gate[1]} outside [0, 1/10]")
        if gate[0] == "mul" and gate[2] < 0:
            problems.append(f"gate ({slot},{level}) has a negative multiplier")
        try:
            c, _ = sys.host(slot, level)
        except GameError as exc:
            problems.append(str(exc))
            continue
        if not 1 <= c < sys.num_levels:
            problems.append(f"gate ({slot},{level}) has no constraint player to host it")
        elif (c, slot) in used:
            problems.append(f"constraint player c{c} hosts two gadgets on pair {slot}")
        used.add((c, slot))
    return problems


def add_loopback(circ01: SyncCircuit) -> GateConstraintSystem:
    """Lay a bound-1/10 circuit out on slots 1-8 and feed its outputs back.

    Level 1 holds the inputs at slots 7, 8 as copies of level 2's slots
    9, 10; level 2 copies them to slots 1, 2; circuit level l sits at level
    l + 2; the last level copies the outputs to slots 7, 8; slots 9, 10 carry
    them back down one level at a time.
    """
    if circ01.num_inputs != 2 or len(circ01.outputs) != 2:
        raise GameError("loopback needs a circuit with 2 inputs and 2 outputs")
    if circ01.width > 8:
        raise GameError(f"circuit width {circ01.width} exceeds 8")
    if circ01.bound != TENTH:
        raise GameError("loopback expects a circuit rescaled to [0, 1/10]")
    d = circ01.depth
    if d < 1:
        raise GameError("circuit needs at least one level")
    last = d + 3

    def sref(ref):
        lv, sl = ref
        return (sl + 1, 2) if lv == 0 else (sl + 1, lv + 2)

    gates: dict = {}
    one = Fraction(1)
    gates[(7, 1)] = ("mul", (9, 2), one)
    gates[(8, 1)] = ("mul", (10, 2), one)
    gates[(1, 2)] = ("mul", (7, 1), one)
    gates[(2, 2)] = ("mul", (8, 1), one)
    for lv, level in enumerate(circ01.levels, start=1):
        for sl, g in enumerate(level):
            if g[0] == "c":
                ng = g
            elif g[0] == "mul":
                if g[1][0] != lv - 1:
                    raise GameError(f"gate ({lv},{sl}) reads level {g[1][0]}; the game needs a synchronous circuit")
                ng = ("mul", sref(g[1]), g[2])
            else:
                ng = (g[0], sref(g[1]), sref(g[2]))
            gates[(sl + 1, lv + 2)] = ng
    out_x, out_y = (sref(r) for r in circ01.outputs)
    if out_x[1] != last - 1 or out_y[1] != last - 1:
        raise GameError("circuit outputs must sit on its last level")
    gates[(7, last)] = ("mul", out_x, one)
    gates[(8, last)] = ("mul", out_y, one)
    gates[(9, last - 1)] = ("mul", (7, last), one)
    gates[(10, last - 1)] = ("mul", (8, last), one)
    for j in range(2, last - 1):
        gates[(9, j)] = ("mul", (9, j + 1), one)
        gates[(10, j)] = ("mul", (10, j + 1), one)
    sys = GateConstraintSystem(last, gates, ((7, 1), (8, 1)), ((7, last), (8, last)), circ01)
    problems = validate_system(sys)
    if problems:
        raise GameError("; ".join(problems))
    return sys


def gate_value(gate, values: Mapping) -> Fraction:
    kind = gate[0]
    if kind == "c":
        return gate[1]
    a = values[gate[1]]
    if kind == "mul":
        return min(a * gate[2], TENTH)
    b = values[gate[2]]
    if kind == "add":
        return min(a + b, TENTH)
    return max(a - b, Fraction(0))


def gate_input(gate, values: Mapping) -> Fraction:
    """The unclipped quantity f the gadget compares against."""
    kind = gate[0]
    if kind == "c":
        return gate[1]
    a = values[gate[1]]
    if kind == "mul":
        return a * gate[2]
    b = values[gate[2]]
    return a + b if kind == "add" else a - b


def check_assignment(sys: GateConstraintSystem, values: Mapping) -> list[tuple[int, int]]:
    """Gates whose value differs from the gate function of its inputs."""
    bad = []
    for key in sorted(sys.gates, key=lambda k: (k[1], k[0])):
        v = values.get(key)
        if v is None or not 0 <= v <= TENTH or v != gate_value(sys.gates[key], values):
            bad.append(key)
    return bad


def assignment_from_point(sys: GateConstraintSystem, point: Sequence) -> dict:
    """Gate values obtained by running the source circuit at ``point``.

    They satisfy every constraint exactly when ``point`` is a fixed point.
    """
    if sys.source is None:
        raise GameError("system has no source circuit")
    circ = sys.source
    px, py = q(point[0]), q(point[1])
    vals = evaluate_levels(circ, (px, py))
    last = sys.num_levels
    out: dict = {(7, 1): px, (8, 1): py, (1, 2): px, (2, 2): py}
    for lv, row in enumerate(vals[1:], start=1):
        for sl, v in enumerate(row):
            out[(sl + 1, lv + 2)] = v
    ox, oy = (vals[lv][sl] for lv, sl in circ.outputs)
    out[(7, last)] = ox
    out[(8, last)] = oy
    for j in range(2, last):
        out[(9, j)] = ox
        out[(10, j)] = oy
    return out


# ---------------------------------------------------------------------------
# Games


@dataclass(frozen=True)
class Player:
    id: str
    kind: str  # "variable" | "constraint" | "mix"
    index: int


@dataclass
class PolymatrixGame:
    players: list
    edges: list  # (a, b) ids, each unordered edge once
    matrices: dict  # (a, b) -> {(row, col): value}, payoff to a
    M: Fraction = Fraction(0)
    system: GateConstraintSystem | None = None

    def __post_init__(self):
        self._by_id = {p.id: p for p in self.players}
        self._nbrs: dict = {p.id: [] for p in self.players}
        for a, b in self.edges:
            self._nbrs[a].append(b)
            self._nbrs[b].append(a)

    def player(self, pid: str) -> Player:
        return self._by_id[pid]

    def neighbors(self, pid: str) -> list[str]:
        return self._nbrs[pid]

    def matrix(self, a: str, b: str) -> dict:
        return self.matrices.setdefault((a, b), {})

    def dense(self, a: str, b: str) -> list[list[Fraction]]:
        m = self.matrices.get((a, b), {})
        return [[m.get((r, c), Fraction(0)) for c in range(ACTIONS)] for r in range(ACTIONS)]


def spine_ids(num_levels: int) -> list[str]:
    out = []
    for j in range(1, num_levels + 1):
        out.append(f"v{j}")
        if j < num_levels:
            out.append(f"c{j}")
    return out


def hide_and_seek(M: Fraction) -> dict:
    z = {}
    for a in range(1, SLOTS + 1):
        for r in (x(a), xbar(a)):
            for c in (x(a), xbar(a)):
                z[(r, c)] = M
    return z


def _embed_gadgets(sys: GateConstraintSystem) -> dict:
    mats: dict = {}

    def put(a, b, r, c, val):
        m = mats.setdefault((a, b), {})
        m[(r, c)] = m.get((r, c), Fraction(0)) + val

    for (slot, level), gate in sorted(sys.gates.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        ci, src = sys.host(slot, level)
        v, c, u = f"v{level}", f"c{ci}", f"v{src}"
        put(v, c, x(slot), xbar(slot), Fraction(1))
        put(v, c, xbar(slot), x(slot), Fraction(1))
        put(c, v, x(slot), x(slot), Fraction(1))
        row = xbar(slot)
        kind = gate[0]
        if kind == "c":
            for col in range(ACTIONS):
                put(c, u, row, col, gate[1])
        elif kind == "mul":
            put(c, u, row, x(gate[1][0]), gate[2])
        else:
            put(c, u, row, x(gate[1][0]), Fraction(1))
            put(c, u, row, x(gate[2][0]), Fraction(1) if kind == "add" else Fraction(-1))
    # drop cancelled entries
    for m in mats.values():
        for key in [k for k, val in m.items() if val == 0]:
            del m[key]
    return mats


def build_game(sys: GateConstraintSystem, M="auto") -> PolymatrixGame:
    """Caterpillar game: spine v1 - c1 - v2 - ... - vN with a mix leaf on
    every spine player.  ``M="auto"`` uses 40 P + 1 where P is the largest
    absolute payoff between spine players."""
    problems = validate_system(sys)
    if problems:
        raise GameError("; ".join(problems))
    n = sys.num_levels
    mats = _embed_gadgets(sys)
    P = max((abs(v) for m in mats.values() for v in m.values()), default=Fraction(0))
    if M == "auto" or M is None:
        M = 40 * P + 1
    M = q(M)
    if M <= 40 * P:
        raise GameError(f"M = {M} must exceed 40 P = {40 * P}")
    spine = spine_ids(n)
    players: list[Player] = []
    edges: list = []
    for pos, pid in enumerate(spine, start=1):
        kind = "variable" if pid[0] == "v" else "constraint"
        players.append(Player(pid, kind, int(pid[1:])))
    for i in range(1, 2 * n):
        players.append(Player(f"m{i}", "mix", i))
    for a, b in zip(spine, spine[1:]):
        edges.append((a, b))
    z = hide_and_seek(M)
    negz = {k: -v for k, v in z.items()}
    for i, pid in enumerate(spine, start=1):
        m = f"m{i}"
        edges.append((m, pid))
        mats[(m, pid)] = dict(z)
        mats[(pid, m)] = dict(negz)
    for a, b in zip(spine, spine[1:]):
        mats.setdefault((a, b), {})
        mats.setdefault((b, a), {})
    return PolymatrixGame(players, edges, mats, M, sys)


def mix_partner(pid: str) -> str:
    """Mix player attached to a spine player."""
    j = int(pid[1:])
    return f"m{2 * j - 1}" if pid[0] == "v" else f"m{2 * j}"


def is_caterpillar(game: PolymatrixGame) -> bool:
    """Tree whose non-leaf vertices form a single path."""
    ids = [p.id for p in game.players]
    if len(game.edges) != len(ids) - 1:
        return False
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        for nb in game.neighbors(stack.pop()):
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    if len(seen) != len(ids):
        return False
    inner = [p for p in ids if len(game.neighbors(p)) > 1]
    if len(inner) <= 1:
        return True
    inner_set = set(inner)
    degrees = [sum(1 for nb in game.neighbors(p) if nb in inner_set) for p in inner]
    return all(d <= 2 for d in degrees) and sum(1 for d in degrees if d == 1) == 2


# ---------------------------------------------------------------------------
# Payoffs and regret


def payoff_vector(game: PolymatrixGame, pid: str, profile: Mapping, exclude: tuple = ()) -> list[Fraction]:
    """Expected payoff of each of ``pid``'s actions against the profile."""
    out = [Fraction(0)] * ACTIONS
    for nb in game.neighbors(pid):
        if nb in exclude:
            continue
        s = profile[nb]
        for (r, c), val in game.matrices.get((pid, nb), {}).items():
            if s[c]:
                out[r] += val * s[c]
    return out


def check_profile(game: PolymatrixGame, profile: Mapping) -> None:
    for p in game.players:
        s = profile.get(p.id)
        if s is None:
            raise GameError(f"profile has no strategy for {p.id}")
        if len(s) != ACTIONS:
            raise GameError(f"{p.id}: expected {ACTIONS} probabilities, got {len(s)}")
        if any(v < 0 for v in s) or sum(s) != 1:
            raise GameError(f"{p.id}: not a probability vector")


def verify_regret(game: PolymatrixGame, profile: Mapping) -> dict[str, Fraction]:
    """Best-response payoff minus current payoff, per player, exactly."""
    check_profile(game, profile)
    out = {}
    for p in game.players:
        pay = payoff_vector(game, p.id, profile)
        s = profile[p.id]
        current = sum((a * b for a, b in zip(s, pay)), Fraction(0))
        out[p.id] = max(pay) - current
    return out


def is_nash(regrets: Mapping) -> bool:
    return all(r == 0 for r in regrets.values())


# ---------------------------------------------------------------------------
# Equilibrium construction and readback


def construct_equilibrium(game: PolymatrixGame, assignment: Mapping) -> dict[str, list[Fraction]]:
    """Profile realizing a satisfying gate assignment.

    Variable players put the gate value on x_i and the rest of 1/10 on
    xbar_i (empty slots count as 0).  Constraint players split each gadget
    pair by the sign of f: (1/20, 1/20) inside (0, 1/10), all on x_i when
    f <= 0 and all on xbar_i when f >= 1/10.  Each mix player weights pair
    a by 1/10 + (q_a - mean q) / M, where q_a is its opponent's best payoff
    on pair a from the spine; this levels the opponent's pair payoffs.
    """
    sys = game.system
    if sys is None:
        raise GameError("game has no constraint system")
    values = {k: q(v) for k, v in assignment.items()}
    bad = check_assignment(sys, values)
    if bad:
        raise GameError(f"assignment violates gates {bad[:5]}")
    n = sys.num_levels
    half = TENTH / 2
    profile: dict[str, list[Fraction]] = {}
    for j in range(1, n + 1):
        s = [Fraction(0)] * ACTIONS
        for i in range(1, SLOTS + 1):
            v = values.get((i, j), Fraction(0)) if (i, j) in sys.gates else Fraction(0)
            s[x(i)] = v
            s[xbar(i)] = TENTH - v
        profile[f"v{j}"] = s
    for c in range(1, n):
        s = [half] * ACTIONS
        profile[f"c{c}"] = s
    for (slot, level), gate in sys.gates.items():
        ci, _ = sys.host(slot, level)
        f = gate_input(gate, values)
        s = profile[f"c{ci}"]
        if f <= 0:
            s[x(slot)], s[xbar(slot)] = TENTH, Fraction(0)
        elif f >= TENTH:
            s[x(slot)], s[xbar(slot)] = Fraction(0), TENTH
    for pid in spine_ids(n):
        # spine payoffs only, before the mix player is set
        pay = payoff_vector(game, pid, profile, exclude=(mix_partner(pid),))
        qs = [max(pay[x(a)], pay[xbar(a)]) for a in range(1, SLOTS + 1)]
        mean = sum(qs, Fraction(0)) / SLOTS
        s = [Fraction(0)] * ACTIONS
        for a in range(1, SLOTS + 1):
            w = TENTH + (qs[a - 1] - mean) / game.M
            if w < 0:
                raise GameError("M too small to balance the mix player")
            s[x(a)] = s[xbar(a)] = w / 2
        profile[mix_partner(pid)] = s
    return profile


@dataclass
class GateReport:
    values: dict
    violated: list
    point: tuple
    fixed_point: bool | None


def extract_gate_values(game: PolymatrixGame, profile: Mapping) -> GateReport:
    """Read gate values off the variable players and check every gate.

    ``point`` is ten times the input slots, in the original [0,1] scale;
    ``fixed_point`` says whether the source circuit fixes it.
    """
    sys = game.system
    if sys is None:
        raise GameError("game has no constraint system")
    check_profile(game, profile)
    for p in game.players:
        if p.kind == "mix":
            continue
        s = profile[p.id]
        for i in range(1, SLOTS + 1):
            if s[x(i)] + s[xbar(i)] != TENTH:
                raise GameError(f"{p.id}: pair {i} carries {s[x(i)] + s[xbar(i)]}, not 1/10")
    values = {(i, j): profile[f"v{j}"][x(i)] for (i, j) in sys.gates}
    violated = check_assignment(sys, values)
    px, py = values[sys.inputs[0]], values[sys.inputs[1]]
    fixed = None
    if sys.source is not None:
        out = evaluate(sys.source, (px, py))
        fixed = out[0] == px and out[1] == py
    return GateReport(values, violated, (10 * px, 10 * py), fixed)


# ---------------------------------------------------------------------------
# JSON


def game_to_dict(game: PolymatrixGame) -> dict:
    return {
        "M": fmt(game.M),
        "players": [{"id": p.id, "kind": p.kind, "actions": ACTIONS} for p in game.players],
        "edges": [
            {
                "a": a,
                "b": b,
                "A_ab": [[fmt(v) for v in row] for row in game.dense(a, b)],
                "A_ba": [[fmt(v) for v in row] for row in game.dense(b, a)],
            }
            for a, b in game.edges
        ],
    }


def _sparse(rows) -> dict:
    out = {}
    for r, row in enumerate(rows):
        for c, v in enumerate(row):
            v = q(v)
            if v:
                out[(r, c)] = v
    return out


def game_from_dict(d: dict, system: GateConstraintSystem | None = None) -> PolymatrixGame:
    try:
        players = []
        for p in d["players"]:
            if int(p.get("actions", ACTIONS)) != ACTIONS:
                raise GameError(f"player {p['id']} must have {ACTIONS} actions")
            pid = p["id"]
            players.append(Player(pid, p["kind"], int(pid[1:])))
        edges, mats = [], {}
        for e in d["edges"]:
            a, b = e["a"], e["b"]
            edges.append((a, b))
            mats[(a, b)] = _sparse(e["A_ab"])
            mats[(b, a)] = _sparse(e["A_ba"])
        return PolymatrixGame(players, edges, mats, q(d.get("M", "0")), system)
    except (KeyError, TypeError, ValueError) as exc:
        raise GameError(f"malformed game JSON: {exc}") from None


def profile_to_dict(profile: Mapping) -> dict:
    return {pid: [fmt(v) for v in s] for pid, s in profile.items()}


def profile_from_dict(d: Mapping) -> dict:
    try:
        return {pid: [q(v) for v in s] for pid, s in d.items()}
    except (TypeError, ValueError) as exc:
        raise GameError(f"malformed profile JSON: {exc}") from None


def _gate_json(gate) -> dict:
    kind = gate[0]
    if kind == "c":
        return {"op": "c", "args": [], "const": fmt(gate[1])}
    if kind == "mul":
        return {"op": "mul", "args": [list(gate[1])], "const": fmt(gate[2])}
    return {"op": kind, "args": [list(gate[1]), list(gate[2])], "const": None}


def system_to_dict(sys: GateConstraintSystem) -> dict:
    d = {
        "num_levels": sys.num_levels,
        "inputs": [list(r) for r in sys.inputs],
        "outputs": [list(r) for r in sys.outputs],
        "gates": [
            {"slot": s, "level": lv, **_gate_json(g)}
            for (s, lv), g in sorted(sys.gates.items(), key=lambda kv: (kv[0][1], kv[0][0]))
        ],
    }
    if sys.source is not None:
        d["source"] = circuit_to_dict(sys.source)
    return d


def system_from_dict(d: dict) -> GateConstraintSystem:
    try:
        gates = {}
        for g in d["gates"]:
            args = [tuple(int(v) for v in a) for a in g.get("args", [])]
            op = g["op"]
            if op == "c":
                gate = ("c", q(g["const"]))
            elif op == "mul":
                gate = ("mul", args[0], q(g["const"]))
            elif op in ("add", "sub"):
                gate = (op, args[0], args[1])
            else:
                raise GameError(f"unknown gate op {op!r}")
            gates[(int(g["slot"]), int(g["level"]))] = gate
        source = circuit_from_dict(d["source"]) if "source" in d else None
        sys = GateConstraintSystem(
            int(d["num_levels"]),
            gates,
            tuple(tuple(int(v) for v in r) for r in d.get("inputs", [[7, 1], [8, 1]])),
            tuple(tuple(int(v) for v in r) for r in d.get("outputs", [])),
            source,
        )
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise GameError(f"malformed system JSON: {exc}") from None
    problems = validate_system(sys)
    if problems:
        raise GameError("; ".join(problems))
    return sys


def assignment_to_dict(values: Mapping) -> dict:
    return {f"{s},{lv}": fmt(v) for (s, lv), v in sorted(values.items(), key=lambda kv: (kv[0][1], kv[0][0]))}


def assignment_from_dict(d: Mapping) -> dict:
    out = {}
    try:
        for key, v in d.items():
            s, lv = key.split(",")
            out[(int(s), int(lv))] = q(v)
    except (ValueError, AttributeError) as exc:
        raise GameError(f"malformed assignment JSON: {exc}") from None
    return out


def dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))
