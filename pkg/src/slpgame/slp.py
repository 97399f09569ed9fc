"""Straight-line programs over the four bounded gates.

A program is written in a small line-oriented DSL::

    input in1
    output out1
    x <- 0.5
    z <- x +b in1
    x <- x *b 0.5
    out1 <- z +b x

Besides assignments the DSL has compile-time ``for`` loops, ``if`` blocks and
``macro`` definitions.  All of these are resolved by :func:`expand`, which
produces a :class:`FlatSlp` containing assignments only.

Gate semantics (bound ``B`` is 1 unless stated otherwise)::

    c        -> c
    a +b b   -> min(a + b, B)
    a -b b   -> max(a - b, 0)
    a *b c   -> min(a * c, B)        (c >= 0)
"""
from __future__ import annotations

import functools
import gc
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

ONE = Fraction(1)
ZERO = Fraction(0)



def gc_paused(fn):
    """Run ``fn`` with the cyclic collector off.

    Expansion and compilation allocate tens of thousands of small acyclic
    tuples, which otherwise trigger repeated full collections.
    """
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        was = gc.isenabled()
        gc.disable()
        try:
            return fn(*args, **kwargs)
        finally:
            if was:
                gc.enable()
    return wrapper


class SlpError(Exception):
    """Base class for every SLP-level failure."""


class SlpSyntaxError(SlpError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class ExpansionError(SlpError):
    pass


class EvaluationError(SlpError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: Fraction
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Str:
    value: str
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Name:
    id: str
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class ListLit:
    items: tuple
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class RangeList:
    lo: Any
    hi: Any
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Any
    right: Any
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: Any
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Index:
    base: Any
    index: Any
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    pos: tuple[int, int] = (0, 0)


# Gate operations.  In a structured program the fields hold expressions; in a
# FlatSlp they hold variable names (str) and Fractions.


@dataclass(frozen=True)
class Const:
    c: Any


@dataclass(frozen=True)
class AddB:
    a: Any
    b: Any


@dataclass(frozen=True)
class SubB:
    a: Any
    b: Any


@dataclass(frozen=True)
class MulB:
    a: Any
    c: Any


Op = Const | AddB | SubB | MulB


@dataclass(frozen=True)
class Assign:
    var: str
    op: Any
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class ForLoop:
    var: str
    lo: Any
    hi: Any  # None when iterating over the list expression in ``lo``
    body: tuple
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class IfConst:
    pred: Any
    body: tuple
    orelse: tuple = ()
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class MacroCall:
    name: str
    args: tuple
    pos: tuple[int, int] = (0, 0)


@dataclass
class SlpProgram:
    """A structured program, or a macro when ``name`` is set."""

    params: list[str]
    body: list
    outputs: list[str] = field(default_factory=list)
    consts: dict[str, Any] = field(default_factory=dict)
    macros: dict[str, "SlpProgram"] = field(default_factory=dict)
    name: str | None = None


@dataclass(frozen=True)
class FlatSlp:
    inputs: tuple[str, ...]
    lines: tuple[Assign, ...]
    outputs: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.lines)


@dataclass(frozen=True)
class LivenessReport:
    live_at_line: tuple[tuple[str, ...], ...]
    max_live: int


def operands(op) -> tuple:
    """Variable operands read by a flat op."""
    if isinstance(op, (AddB, SubB)):
        return tuple(v for v in (op.a, op.b) if isinstance(v, str))
    if isinstance(op, MulB):
        return (op.a,)
    return ()


def inline_constants(op) -> tuple:
    """Constant operands of a flat +b/-b op."""
    if isinstance(op, (AddB, SubB)):
        return tuple(v for v in (op.a, op.b) if not isinstance(v, str))
    return ()


def _clip(v: Fraction, bound: Fraction = ONE) -> Fraction:
    return ZERO if v < 0 else (bound if v > bound else v)


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<sep>;)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<str>"[^"\n]*")
  | (?P<gate>[+\-*]b(?![A-Za-z0-9_']))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*'*)
  | (?P<op><-|\.\.|==|!=|<=|>=|[<>+\-*/%^()\[\]{},=])
    """,
    re.VERBOSE,
)

KEYWORDS = {"input", "output", "const", "macro", "for", "in", "if", "else", "and", "or", "not"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SlpSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            tokens.append(Token("sep", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind == "sep":
            tokens.append(Token("sep", ";", line, col))
        elif kind == "ident" and value in KEYWORDS:
            tokens.append(Token("kw", value, line, col))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, text: str, inputs: Sequence[str] | None, consts: Iterable[str] = ()):
        self.toks = tokenize(text)
        self.external = set(consts)
        self.i = 0
        self.inputs: list[str] = list(inputs) if inputs is not None else []
        self.strict = inputs is not None
        self.outputs: list[str] = []
        self.consts: dict[str, Any] = {}
        self.macros: dict[str, SlpProgram] = {}

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        raise SlpSyntaxError(message, tok.line, tok.col)

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.accept(kind, text)
        if t is None:
            want = text or kind
            got = self.tok.text or self.tok.kind
            self.error(f"expected {want!r}, found {got!r}")
        return t

    def skip_seps(self):
        while self.accept("sep"):
            pass

    def end_statement(self):
        if self.at("sep"):
            self.skip_seps()
        elif not (self.at("op", "}") or self.at("eof")):
            self.error(f"unexpected {self.tok.text!r} after statement")

    # top level
    def parse_file(self) -> SlpProgram:
        body: list = []
        scope = _NameScope(known=set(self.inputs), ct=set(self.external), params=None)
        self.skip_seps()
        while not self.at("eof"):
            if self.at("kw", "input"):
                self.i += 1
                names = self.name_list()
                for nm in names:
                    if nm not in self.inputs:
                        self.inputs.append(nm)
                    scope.known.add(nm)
                self.strict = True
                self.end_statement()
            elif self.at("kw", "output"):
                self.i += 1
                self.outputs.extend(self.name_list())
                self.end_statement()
            elif self.at("kw", "const"):
                self.i += 1
                name = self.expect("ident").text
                self.expect("op", "=")
                self.consts[name] = self.expr(scope, ct_only=True)
                scope.ct.add(name)
                self.end_statement()
            elif self.at("kw", "macro"):
                self.macro_def()
                self.end_statement()
            else:
                body.append(self.statement(scope))
                self.end_statement()
        return SlpProgram(
            params=list(self.inputs),
            body=body,
            outputs=list(self.outputs),
            consts=dict(self.consts),
            macros=dict(self.macros),
        )

    def name_list(self) -> list[str]:
        names = [self.expect("ident").text]
        while self.accept("op", ","):
            names.append(self.expect("ident").text)
        return names

    def macro_def(self):
        self.expect("kw", "macro")
        name_tok = self.expect("ident")
        self.expect("op", "(")
        params: list[str] = []
        if not self.at("op", ")"):
            params = self.name_list()
        self.expect("op", ")")
        scope = _NameScope(known=set(params), ct=set(self.consts) | self.external, params=set(params))
        body = self.block(scope)
        self.macros[name_tok.text] = SlpProgram(params=params, body=body, name=name_tok.text)

    def block(self, scope: "_NameScope") -> list:
        self.expect("op", "{")
        self.skip_seps()
        body = []
        while not self.accept("op", "}"):
            if self.at("eof"):
                self.error("unterminated block")
            body.append(self.statement(scope))
            self.end_statement()
        return body

    def statement(self, scope: "_NameScope"):
        t = self.tok
        pos = (t.line, t.col)
        if self.accept("kw", "for"):
            var = self.expect("ident").text
            self.expect("kw", "in")
            lo = self.expr(scope, ct_only=True, what="loop bound")
            hi = None
            if self.accept("op", ".."):
                hi = self.expr(scope, ct_only=True, what="loop bound")
            inner = scope.child(ct_extra={var})
            body = self.block(inner)
            scope.known |= inner.known
            return ForLoop(var, lo, hi, tuple(body), pos)
        if self.accept("kw", "if"):
            pred = self.expr(scope, ct_only=True, what="if predicate")
            inner = scope.child()
            body = self.block(inner)
            orelse: list = []
            if self.accept("kw", "else"):
                other = scope.child()
                orelse = self.block(other)
                inner.known |= other.known
            scope.known |= inner.known
            return IfConst(pred, tuple(body), tuple(orelse), pos)
        if t.kind != "ident":
            self.error(f"expected a statement, found {t.text or t.kind!r}")
        self.i += 1
        if self.accept("op", "("):
            args = []
            if not self.at("op", ")"):
                args.append(self.call_arg(scope))
                while self.accept("op", ","):
                    args.append(self.call_arg(scope))
            self.expect("op", ")")
            return MacroCall(t.text, tuple(args), pos)
        self.expect("op", "<-")
        op = self.rhs(scope)
        scope.known.add(t.text)
        return Assign(t.text, op, pos)

    def call_arg(self, scope: "_NameScope"):
        # Bare names may name variables the macro is about to define.
        if self.at("ident") and self.toks[self.i + 1].text in (",", ")"):
            t = self.tok
            self.i += 1
            if t.text not in scope.ct:
                scope.known.add(t.text)
            return Name(t.text, (t.line, t.col))
        return self.expr(scope)

    def rhs(self, scope: "_NameScope"):
        left = self.additive(scope)
        if self.at("gate"):
            gate = self.tok.text
            self.i += 1
            right = self.additive(scope)
            if gate == "+b":
                self.check_operand(left, scope)
                self.check_operand(right, scope)
                return AddB(left, right)
            if gate == "-b":
                self.check_operand(left, scope)
                self.check_operand(right, scope)
                return SubB(left, right)
            # *b: one side is the variable, the other the constant
            if isinstance(right, Name) and right.id not in scope.ct and not (
                isinstance(left, Name) and left.id not in scope.ct
            ):
                left, right = right, left
            self.check_operand(left, scope)
            if _is_negative_literal(right):
                p = _first_pos(right)
                raise SlpSyntaxError("*b multiplier must be non-negative", *p)
            return MulB(left, right)
        self.check_operand(left, scope)
        return Const(left)

    def check_operand(self, expr, scope: "_NameScope"):
        for nm in _names_in(expr):
            if nm.id in scope.ct or nm.id in scope.known:
                continue
            if scope.params is None and not self.strict:
                self.inputs.append(nm.id)
                scope.known.add(nm.id)
                continue
            raise SlpSyntaxError(f"reference to undeclared variable {nm.id!r}", *nm.pos)

    # expressions
    def expr(self, scope: "_NameScope", ct_only: bool = False, what: str = "constant"):
        e = self.or_expr(scope)
        if ct_only:
            for nm in _names_in(e):
                if nm.id in scope.ct:
                    continue
                if scope.params is not None and (nm.id in scope.params or nm.id not in scope.known):
                    continue  # resolved at expansion time
                if nm.id in scope.known or scope.params is None:
                    raise SlpSyntaxError(f"non-constant {what}: {nm.id!r} is not a compile-time name", *nm.pos)
                raise SlpSyntaxError(f"unknown name {nm.id!r} in {what}", *nm.pos)
        return e

    def or_expr(self, scope):
        left = self.and_expr(scope)
        while self.at("kw", "or"):
            t = self.tok
            self.i += 1
            left = BinOp("or", left, self.and_expr(scope), (t.line, t.col))
        return left

    def and_expr(self, scope):
        left = self.not_expr(scope)
        while self.at("kw", "and"):
            t = self.tok
            self.i += 1
            left = BinOp("and", left, self.not_expr(scope), (t.line, t.col))
        return left

    def not_expr(self, scope):
        if self.at("kw", "not"):
            t = self.tok
            self.i += 1
            return Unary("not", self.not_expr(scope), (t.line, t.col))
        return self.comparison(scope)

    def comparison(self, scope):
        left = self.additive(scope)
        t = self.tok
        if t.kind == "op" and t.text in ("==", "!=", "<", "<=", ">", ">="):
            self.i += 1
            return BinOp(t.text, left, self.additive(scope), (t.line, t.col))
        if self.at("kw", "in"):
            self.i += 1
            return BinOp("in", left, self.additive(scope), (t.line, t.col))
        if self.at("kw", "not") and self.toks[self.i + 1].text == "in":
            self.i += 2
            return BinOp("not in", left, self.additive(scope), (t.line, t.col))
        return left

    def additive(self, scope):
        left = self.term(scope)
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            t = self.tok
            self.i += 1
            left = BinOp(t.text, left, self.term(scope), (t.line, t.col))
        return left

    def term(self, scope):
        left = self.unary(scope)
        while self.tok.kind == "op" and self.tok.text in ("*", "/", "%"):
            t = self.tok
            self.i += 1
            left = BinOp(t.text, left, self.unary(scope), (t.line, t.col))
        return left

    def unary(self, scope):
        if self.at("op", "-"):
            t = self.tok
            self.i += 1
            return Unary("-", self.unary(scope), (t.line, t.col))
        return self.power(scope)

    def power(self, scope):
        base = self.postfix(scope)
        if self.at("op", "^"):
            t = self.tok
            self.i += 1
            return BinOp("^", base, self.unary(scope), (t.line, t.col))
        return base

    def postfix(self, scope):
        e = self.atom(scope)
        while self.at("op", "["):
            t = self.tok
            self.i += 1
            idx = self.or_expr(scope)
            self.expect("op", "]")
            e = Index(e, idx, (t.line, t.col))
        return e

    def atom(self, scope):
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "num":
            self.i += 1
            return Num(Fraction(t.text), pos)
        if t.kind == "str":
            self.i += 1
            return Str(t.text[1:-1], pos)
        if t.kind == "ident":
            self.i += 1
            if self.at("op", "("):
                self.i += 1
                args = []
                if not self.at("op", ")"):
                    args.append(self.or_expr(scope))
                    while self.accept("op", ","):
                        args.append(self.or_expr(scope))
                self.expect("op", ")")
                return Call(t.text, tuple(args), pos)
            return Name(t.text, pos)
        if self.accept("op", "("):
            e = self.or_expr(scope)
            self.expect("op", ")")
            return e
        if self.accept("op", "["):
            items = []
            if self.accept("op", "]"):
                return ListLit((), pos)
            first = self.or_expr(scope)
            if self.accept("op", ".."):
                hi = self.or_expr(scope)
                self.expect("op", "]")
                return RangeList(first, hi, pos)
            items.append(first)
            while self.accept("op", ","):
                items.append(self.or_expr(scope))
            self.expect("op", "]")
            return ListLit(tuple(items), pos)
        self.error(f"expected an expression, found {t.text or t.kind!r}")


@dataclass
class _NameScope:
    known: set
    ct: set
    params: set | None  # None at top level

    def child(self, ct_extra: Iterable[str] = ()) -> "_NameScope":
        return _NameScope(known=set(self.known), ct=set(self.ct) | set(ct_extra), params=self.params)


def _names_in(expr) -> list[Name]:
    out: list[Name] = []

    def walk(e):
        if isinstance(e, Name):
            out.append(e)
        elif isinstance(e, BinOp):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Unary):
            walk(e.operand)
        elif isinstance(e, Index):
            walk(e.base)
            walk(e.index)
        elif isinstance(e, Call):
            for a in e.args:
                walk(a)
        elif isinstance(e, ListLit):
            for a in e.items:
                walk(a)
        elif isinstance(e, RangeList):
            walk(e.lo)
            walk(e.hi)

    walk(expr)
    return out


def _first_pos(e) -> tuple[int, int]:
    return getattr(e, "pos", (0, 0))


def _is_negative_literal(e) -> bool:
    return isinstance(e, Unary) and e.op == "-" and isinstance(e.operand, Num) and e.operand.value > 0


def parse_slp(text: str, inputs: Sequence[str] | None = None, consts: Iterable[str] = ()) -> SlpProgram:
    """Parse DSL source into a structured :class:`SlpProgram`.

    Inputs come from ``input`` declarations or the ``inputs`` argument; with
    neither, names read before being assigned are taken as inputs in order
    of first appearance.  ``consts`` names compile-time values that will be
    supplied to :func:`expand`.
    """
    return _Parser(text, inputs, consts).parse_file()


# ---------------------------------------------------------------------------
# Compile-time evaluation

_BUILTINS = {
    "abs": lambda v: abs(v),
    "len": lambda v: Fraction(len(v)),
    "max": lambda *v: _maxmin(max, v),
    "min": lambda *v: _maxmin(min, v),
    "index": lambda seq, v: Fraction(list(seq).index(v) + 1),
    "floor": lambda v: Fraction(v.numerator // v.denominator),
}


def _maxmin(fn, args):
    if len(args) == 1 and isinstance(args[0], tuple):
        args = args[0]
        if not args:
            return ZERO
    return fn(args)


def _as_int(v, pos) -> int:
    if not isinstance(v, Fraction) or v.denominator != 1:
        raise ExpansionError(f"{pos[0]}:{pos[1]}: expected an integer, got {v!r}")
    return int(v)


def ceval(e, ct: dict):
    """Evaluate a compile-time expression.  Numbers are Fractions, lists are
    tuples and indexing is 1-based."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Str):
        return e.value
    if isinstance(e, Name):
        try:
            return ct[e.id]
        except KeyError:
            raise ExpansionError(
                f"{e.pos[0]}:{e.pos[1]}: {e.id!r} is not a compile-time value"
            ) from None
    if isinstance(e, ListLit):
        return tuple(ceval(x, ct) for x in e.items)
    if isinstance(e, RangeList):
        lo = _as_int(ceval(e.lo, ct), e.pos)
        hi = _as_int(ceval(e.hi, ct), e.pos)
        return tuple(Fraction(i) for i in range(lo, hi + 1))
    if isinstance(e, Unary):
        v = ceval(e.operand, ct)
        return (not v) if e.op == "not" else -v
    if isinstance(e, Index):
        base = ceval(e.base, ct)
        idx = _as_int(ceval(e.index, ct), e.pos)
        if not 1 <= idx <= len(base):
            raise ExpansionError(f"{e.pos[0]}:{e.pos[1]}: index {idx} out of range")
        return base[idx - 1]
    if isinstance(e, Call):
        fn = _BUILTINS.get(e.func)
        if fn is None:
            raise ExpansionError(f"{e.pos[0]}:{e.pos[1]}: unknown function {e.func!r}")
        return fn(*(ceval(a, ct) for a in e.args))
    if isinstance(e, BinOp):
        op = e.op
        if op == "and":
            return bool(ceval(e.left, ct)) and bool(ceval(e.right, ct))
        if op == "or":
            return bool(ceval(e.left, ct)) or bool(ceval(e.right, ct))
        a = ceval(e.left, ct)
        b = ceval(e.right, ct)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return Fraction(a) / b
        if op == "%":
            return Fraction(a) % b
        if op == "^":
            return Fraction(a) ** _as_int(b, e.pos)
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        if op == "in":
            return a in b
        if op == "not in":
            return a not in b
    raise ExpansionError(f"cannot evaluate {e!r}")


def _loop_values(stmt: ForLoop, ct: dict):
    if stmt.hi is None:
        seq = ceval(stmt.lo, ct)
        if not isinstance(seq, tuple):
            raise ExpansionError(f"{stmt.pos[0]}:{stmt.pos[1]}: for-loop needs a range or a list")
        return seq
    lo = _as_int(ceval(stmt.lo, ct), stmt.pos)
    hi = _as_int(ceval(stmt.hi, ct), stmt.pos)
    return [Fraction(i) for i in range(lo, hi + 1)]


# ---------------------------------------------------------------------------
# Expansion


class _Scope:
    """Name resolution for one macro activation (or the top level)."""

    __slots__ = ("ct", "alias", "suffix")

    def __init__(self, ct: dict, alias: dict | None, suffix: str | None):
        self.ct = ct
        self.alias = alias
        self.suffix = suffix

    def var(self, name: str) -> str:
        if self.alias is None:
            return name
        actual = self.alias.get(name)
        if actual is not None:
            return actual
        return name + self.suffix


class _Expander:
    def __init__(self, macros: dict, max_depth: int = 64):
        self.macros = macros
        self.lines: list[Assign] = []
        self.invocations = 0
        self.temps = 0
        self.max_depth = max_depth
        self.stack: list[str] = []

    def operand(self, e, scope: _Scope):
        """Return ('v', name) or ('c', Fraction)."""
        if isinstance(e, Name) and e.id not in scope.ct:
            return "v", scope.var(e.id)
        v = ceval(e, scope.ct)
        if not isinstance(v, Fraction):
            raise ExpansionError(f"{_first_pos(e)}: gate operand must be a number, got {v!r}")
        return "c", v

    def gate_operand(self, e, scope: _Scope, pos):
        """Operand of +b/-b: a variable name or an inline constant."""
        kind, v = self.operand(e, scope)
        if kind == "v":
            return v
        v = _check_unit(v, pos)
        if self.lines:
            return v
        # the first line has no earlier level to host the constant
        self.temps += 1
        tmp = f"%t{self.temps}"
        self.lines.append(Assign(tmp, Const(v), pos))
        return tmp

    def assign(self, stmt: Assign, scope: _Scope):
        target = scope.var(stmt.var)
        op = stmt.op
        pos = stmt.pos
        if isinstance(op, Const):
            kind, v = self.operand(op.c, scope)
            flat = MulB(v, ONE) if kind == "v" else Const(_check_unit(v, pos))
        elif isinstance(op, (AddB, SubB)):
            ka, a = self.operand(op.a, scope)
            kb, b = self.operand(op.b, scope)
            if ka == "c" and kb == "c":
                flat = Const(_clip(a + b if isinstance(op, AddB) else a - b))
            else:
                flat = type(op)(self.gate_operand(op.a, scope, pos), self.gate_operand(op.b, scope, pos))
        else:
            ka, a = self.operand(op.a, scope)
            kc, c = self.operand(op.c, scope)
            if ka == "c" and kc == "v":
                ka, a, kc, c = kc, c, ka, a
            if kc != "c":
                raise ExpansionError(f"{pos[0]}:{pos[1]}: *b needs a constant multiplier")
            if c < 0:
                raise ExpansionError(f"{pos[0]}:{pos[1]}: *b multiplier must be non-negative, got {c}")
            flat = Const(_clip(a * c)) if ka == "c" else MulB(a, c)
        self.lines.append(Assign(target, flat, pos))

    def block(self, body, scope: _Scope):
        for stmt in body:
            if isinstance(stmt, Assign):
                self.assign(stmt, scope)
            elif isinstance(stmt, ForLoop):
                saved = scope.ct.get(stmt.var, _MISSING)
                for value in _loop_values(stmt, scope.ct):
                    scope.ct[stmt.var] = value
                    self.block(stmt.body, scope)
                if saved is _MISSING:
                    scope.ct.pop(stmt.var, None)
                else:
                    scope.ct[stmt.var] = saved
            elif isinstance(stmt, IfConst):
                if ceval(stmt.pred, scope.ct):
                    self.block(stmt.body, scope)
                else:
                    self.block(stmt.orelse, scope)
            elif isinstance(stmt, MacroCall):
                self.call(stmt, scope)
            else:
                raise ExpansionError(f"unknown statement {stmt!r}")

    def call(self, stmt: MacroCall, scope: _Scope):
        macro = self.macros.get(stmt.name)
        if macro is None:
            raise ExpansionError(f"{stmt.pos[0]}:{stmt.pos[1]}: unbound macro {stmt.name!r}")
        if stmt.name in self.stack:
            chain = " -> ".join(self.stack + [stmt.name])
            raise ExpansionError(f"recursive macro call: {chain}")
        if len(stmt.args) != len(macro.params):
            raise ExpansionError(
                f"{stmt.pos[0]}:{stmt.pos[1]}: {stmt.name} expects {len(macro.params)} arguments, got {len(stmt.args)}"
            )
        ct = dict(self.globals)
        alias: dict[str, str] = {}
        for param, arg in zip(macro.params, stmt.args):
            if isinstance(arg, Name) and arg.id not in scope.ct:
                alias[param] = scope.var(arg.id)
            else:
                ct[param] = ceval(arg, scope.ct)
        self.invocations += 1
        inner = _Scope(ct, alias, f"@{stmt.name}{self.invocations}")
        self.stack.append(stmt.name)
        self.block(macro.body, inner)
        self.stack.pop()


_MISSING = object()


def _check_unit(v: Fraction, pos) -> Fraction:
    if not ZERO <= v <= ONE:
        raise ExpansionError(f"{pos[0]}:{pos[1]}: constant {v} outside [0, 1]")
    return v


def eval_consts(consts: dict, base: dict | None = None) -> dict:
    ct = dict(base or {})
    for name, e in consts.items():
        ct[name] = e if not isinstance(e, (Num, Str, Name, ListLit, RangeList, BinOp, Unary, Index, Call)) else ceval(e, ct)
    return ct


@gc_paused
def expand(program: SlpProgram, macro_lib: dict | None = None, consts: dict | None = None) -> FlatSlp:
    """Unroll loops, resolve ifs and inline macros.

    ``consts`` supplies compile-time values (Fractions, strings, tuples) that
    the program's own ``const`` declarations may override.
    """
    macros = dict(macro_lib or {})
    macros.update(program.macros)
    ex = _Expander(macros)
    ex.globals = eval_consts(program.consts, consts)
    ex.block(program.body, _Scope(dict(ex.globals), None, None))
    return FlatSlp(tuple(program.params), tuple(ex.lines), tuple(program.outputs))


def flat_from_lines(inputs: Sequence[str], lines: Iterable[tuple], outputs: Sequence[str]) -> FlatSlp:
    """Build a FlatSlp from ``(var, op)`` pairs."""
    return FlatSlp(tuple(inputs), tuple(Assign(v, op) for v, op in lines), tuple(outputs))


def format_flat(flat: FlatSlp) -> str:
    """Render a flat program back into DSL source."""
    out = []
    if flat.inputs:
        out.append("input " + ", ".join(flat.inputs))
    if flat.outputs:
        out.append("output " + ", ".join(flat.outputs))
    for line in flat.lines:
        op = line.op
        if isinstance(op, Const):
            rhs = _fmt_num(op.c)
        elif isinstance(op, AddB):
            rhs = f"{op.a} +b {op.b}"
        elif isinstance(op, SubB):
            rhs = f"{op.a} -b {op.b}"
        else:
            rhs = f"{op.a} *b {_fmt_num(op.c)}"
        out.append(f"{line.var} <- {rhs}")
    return "\n".join(out) + "\n"


def _fmt_num(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


# ---------------------------------------------------------------------------
# Liveness


@gc_paused
def liveness(flat: FlatSlp) -> LivenessReport:
    """Live variables per line.

    A variable is live at line i when it is assigned at some line j <= i
    (inputs count as assigned before line 1) and read at some line k >= i;
    declared outputs are read by a virtual line after the last one.  The
    target of line i is always live at line i, so a dead store still owns a
    slot for the line that computes it.  Each list is ordered by first
    definition, inputs first.

    An inline constant read by a +b/-b on line i needs a c-gate one level
    earlier, so it appears as a cell named ``%c<i>.<j>`` at the end of the
    list for line i - 1.
    """
    n = len(flat.lines)
    cells: dict[int, list[str]] = {}
    for i, line in enumerate(flat.lines, start=1):
        consts = inline_constants(line.op)
        if consts and i == 1:
            raise SlpError("the first line cannot read an inline constant")
        if consts:
            cells[i - 1] = [f"%c{i}.{j}" for j in range(1, len(consts) + 1)]
    first_def: dict[str, int] = {}
    order: dict[str, int] = {}
    last_use: dict[str, int] = {}
    for v in flat.inputs:
        first_def.setdefault(v, 0)
        order.setdefault(v, len(order))
    for i, line in enumerate(flat.lines, start=1):
        for v in operands(line.op):
            last_use[v] = i
        if line.var not in first_def:
            first_def[line.var] = i
            order[line.var] = len(order)
    for v in flat.outputs:
        last_use[v] = n + 1

    # sweep: variables enter at first_def and leave after last_use
    enter: dict[int, list[str]] = {}
    leave: dict[int, list[str]] = {}
    for v, d in first_def.items():
        u = last_use.get(v)
        if u is None or u < max(d, 1):
            continue
        enter.setdefault(max(d, 1), []).append(v)
        leave.setdefault(u, []).append(v)
    active: dict[str, int] = {}
    rows: list[tuple[str, ...]] = []
    max_live = 0
    for i, line in enumerate(flat.lines, start=1):
        for v in enter.get(i, ()):
            active[v] = order[v]
        if line.var in active:
            row = sorted(active, key=active.__getitem__)
        else:
            row = sorted([*active, line.var], key=order.__getitem__)
        row.extend(cells.get(i, ()))
        rows.append(tuple(row))
        if len(row) > max_live:
            max_live = len(row)
        for v in leave.get(i, ()):
            del active[v]
    return LivenessReport(tuple(rows), max_live)


# ---------------------------------------------------------------------------
# Interpretation


def _read(v, env):
    return env[v] if isinstance(v, str) else v


def apply_gate(op, env: dict, bound: Fraction = ONE) -> Fraction:
    if isinstance(op, Const):
        return op.c
    if isinstance(op, AddB):
        s = _read(op.a, env) + _read(op.b, env)
        return s if s < bound else bound
    if isinstance(op, SubB):
        s = _read(op.a, env) - _read(op.b, env)
        return s if s > 0 else ZERO
    s = env[op.a] * op.c
    return s if s < bound else bound


def check_inputs(values: Sequence, arity: int, bound: Fraction = ONE) -> list[Fraction]:
    if len(values) != arity:
        raise EvaluationError(f"expected {arity} inputs, got {len(values)}")
    out = []
    for v in values:
        v = Fraction(v)
        if not ZERO <= v <= bound:
            raise EvaluationError(f"input {v} outside [0, {bound}]")
        out.append(v)
    return out


def interpret(flat: FlatSlp, inputs: Sequence, trace: list | None = None) -> list[Fraction]:
    """Run a flat program exactly and return the declared outputs.

    When ``trace`` is a list, every stored value is appended to it.
    """
    env = dict(zip(flat.inputs, check_inputs(inputs, len(flat.inputs))))
    for line in flat.lines:
        try:
            value = apply_gate(line.op, env)
        except KeyError as exc:
            raise EvaluationError(f"line {line.pos}: {exc.args[0]!r} read before assignment") from None
        env[line.var] = value
        if trace is not None:
            trace.append(value)
    try:
        return [env[v] for v in flat.outputs]
    except KeyError as exc:
        raise EvaluationError(f"output {exc.args[0]!r} never assigned") from None


def run_structured(program: SlpProgram, inputs: Sequence, macro_lib: dict | None = None,
                   consts: dict | None = None) -> list[Fraction]:
    """Evaluate a structured program directly, without flattening it.

    This walks loops, ifs and macro bodies at run time and serves as the
    independent reference for :func:`expand`.
    """
    macros = dict(macro_lib or {})
    macros.update(program.macros)
    glob = eval_consts(program.consts, consts)
    values = check_inputs(inputs, len(program.params))
    store: dict[str, Fraction] = dict(zip(program.params, values))

    def read(e, ct, alias, frame):
        if isinstance(e, Name) and e.id not in ct:
            return frame[alias.get(e.id, e.id)] if alias is not None else store[e.id]
        return ceval(e, ct)

    def write(name, value, alias, frame):
        if alias is None:
            store[name] = value
        else:
            frame[alias.get(name, name)] = value

    def run(body, ct, alias, frame):
        for stmt in body:
            if isinstance(stmt, Assign):
                op = stmt.op
                if isinstance(op, Const):
                    v = read(op.c, ct, alias, frame)
                    if not isinstance(op.c, Name) or op.c.id in ct:
                        _check_unit(v, stmt.pos)
                elif isinstance(op, AddB):
                    v = min(read(op.a, ct, alias, frame) + read(op.b, ct, alias, frame), ONE)
                elif isinstance(op, SubB):
                    v = max(read(op.a, ct, alias, frame) - read(op.b, ct, alias, frame), ZERO)
                else:
                    v = min(read(op.a, ct, alias, frame) * read(op.c, ct, alias, frame), ONE)
                write(stmt.var, v, alias, frame)
            elif isinstance(stmt, ForLoop):
                for value in _loop_values(stmt, ct):
                    run(stmt.body, {**ct, stmt.var: value}, alias, frame)
            elif isinstance(stmt, IfConst):
                run(stmt.body if ceval(stmt.pred, ct) else stmt.orelse, ct, alias, frame)
            else:
                macro = macros[stmt.name]
                mct = dict(glob)
                cells: dict[str, Any] = {}
                for param, arg in zip(macro.params, stmt.args):
                    if isinstance(arg, Name) and arg.id not in ct:
                        cells[param] = _Cell(lambda n=arg.id: _get(n, alias, frame, store),
                                             lambda v, n=arg.id: write(n, v, alias, frame))
                    else:
                        mct[param] = ceval(arg, ct)
                run(macro.body, mct, {}, _Frame(cells))

    run(program.body, dict(glob), None, None)
    return [store[v] for v in program.outputs]


def _get(name, alias, frame, store):
    if alias is None:
        return store[name]
    return frame[alias.get(name, name)]


class _Cell:
    __slots__ = ("get", "set")

    def __init__(self, get, set_):
        self.get = get
        self.set = set_


class _Frame(dict):
    """Macro-local storage; parameters bound to caller variables are cells."""

    def __init__(self, cells: dict):
        super().__init__()
        self.cells = cells

    def __getitem__(self, key):
        cell = self.cells.get(key)
        if cell is not None:
            return cell.get()
        return dict.__getitem__(self, key)

    def __setitem__(self, key, value):
        cell = self.cells.get(key)
        if cell is not None:
            cell.set(value)
        else:
            dict.__setitem__(self, key, value)
