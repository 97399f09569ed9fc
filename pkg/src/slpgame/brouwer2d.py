"""From a thick discrete Brouwer instance to a width-eight 2D-Brouwer circuit.

The circuit is written as an SLP in the DSL (see :data:`MACRO_SOURCE`) that
keeps every Boolean value in one packed variable ``x = sum b_i / 2^i``.
The module also holds the oracles used to check the construction: the
poorly-positioned sample count, the displacement geometry bound and a grid
search over residuals.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .brouwer import BoolCircuit, DiscreteBrouwerInstance
from .circuit import SyncCircuit, compile_slp, residuals
from .rational import q
from .slp import FlatSlp, SlpProgram, expand, liveness, parse_slp

DEFAULT_R = Fraction(577, 408)

# Compile-time names the macros read from the enclosing program.
LIBRARY_CONSTS = ("L", "G", "T", "K", "n", "k", "C", "eps", "R", "delta", "P1", "P2", "P3")

MACRO_SOURCE = """\
# Leading bit of x scaled by the gain L, clipped to [0, 1].
macro ExtractBit(x, b) {
  b <- 0.5
  b <- x -b b
  b <- b *b L
}

# Decode the first m bits of x into y as sum b_i / 2^i; x is consumed.
macro ExtractBits(x, y, m) {
  for i in 1..m {
    ExtractBit(x, b)
    t <- b *b 0.5
    x <- x -b t
    x <- x *b 2
    t <- b *b 1/2^i
    y <- y +b t
  }
}

# Move the leading bit of a continuous value x into b.
macro FirstBit(x, b) {
  b <- 0.5
  b <- x -b b
  b <- b *b L

  b <- b *b 0.5
  x <- x -b b
  x <- x *b 2
  b <- b *b 2
}

# FirstBit for packed values: K bits are exact multiples of 1/2^K, so a
# threshold just below 1/2 with gain 2^(K+1) decodes every bit exactly.
macro ReadBit(x, b) {
  b <- T
  b <- x -b b
  b <- b *b G

  b <- b *b 0.5
  x <- x -b b
  x <- x *b 2
  b <- b *b 2
}

# Zero the bits of x listed in I.  +2 variables.
macro Clear(I, x) {
  x' <- x *b 1
  for i in 1..max(I) {
    b <- 0
    ReadBit(x', b)
    if i in I {
      b <- b *b 1/2^i
      x <- x -b b
    }
  }
}

# Store the first len(S) bits of y at positions S of x.  +2 variables.
macro Pack(x, y, S) {
  Clear(S, x)
  y' <- y *b 1
  for j in 1..len(S) {
    b <- 0
    FirstBit(y', b)
    b <- b *b 1/2^S[j]
    x <- x +b b
  }
}

# y <- y +b sum_j b_{S[j]} / 2^j.  +2 variables.
macro Unpack(x, y, S) {
  x' <- x *b 1
  for i in 1..max(S) {
    b <- 0
    ReadBit(x', b)
    if i in S {
      b <- b *b 1/2^index(S, i)
      y <- y +b b
    }
  }
}

# Bit i3 of x becomes bit i1 OR bit i2.  +3 variables.
macro Or(x, i1, i2, i3) {
  a <- 0
  Unpack(x, a, [i1])
  Unpack(x, a, [i2])
  a <- a *b 2
  Pack(x, a, [i3])
}

# Bit i2 of x becomes NOT bit i1.  +3 variables.
macro Not(x, i1, i2) {
  a <- 0
  Unpack(x, a, [i1])
  a <- a *b 2
  b <- 1
  a <- b -b a
  Pack(x, a, [i2])
}

# Gate t of C writes bit m + t of x.  +3 variables.
macro Simulate(C, x, m) {
  for t in 1..len(C) {
    if C[t][1] == "or" {
      Or(x, C[t][2], C[t][3], m + t)
    }
    if C[t][1] == "not" {
      Not(x, C[t][2], m + t)
    }
  }
}

# (ox, oy) <- (ox, oy) + (dx, dy) * b_i / k.  +3 variables.
macro AddVector(x, i, ox, oy, dx, dy, k) {
  a <- 0
  Unpack(x, a, [i])
  a <- a *b 2*abs(dx)/k
  if dx < 0 {
    ox <- ox -b a
  } else {
    ox <- ox +b a
  }

  a <- 0
  Unpack(x, a, [i])
  a <- a *b 2*abs(dy)/k
  if dy < 0 {
    oy <- oy -b a
  } else {
    oy <- oy +b a
  }
}

# Average the color displacement over k samples p + (i - 1) * delta.
macro Reduction(in_x, in_y, out_x, out_y) {
  out_x <- in_x *b 1
  out_y <- in_y *b 1
  for i in 1..k {
    x <- 0
    Pack(x, in_x, [1..n])
    Pack(x, in_y, [n+1..2*n])
    Simulate(C, x, 2*n)
    AddVector(x, P1, out_x, out_y, 0, eps, k)
    AddVector(x, P2, out_x, out_y, eps, eps*(1-R), k)
    AddVector(x, P3, out_x, out_y, -eps, eps*(1-R), k)
    if i < k {
      in_x <- in_x +b delta
      in_y <- in_y +b delta
    }
  }
}
"""

REDUCTION_MAIN = """\
input in_x, in_y
output out_x, out_y
Reduction(in_x, in_y, out_x, out_y)
"""


class ParamError(ValueError):
    pass


def _within(r: Fraction, tol: Fraction) -> bool:
    """|r - sqrt(2)| <= tol, decided exactly."""
    lo, hi = r - tol, r + tol
    return (lo <= 0 or lo * lo <= 2) and hi * hi >= 2


def sqrt2_approx(tol) -> Fraction:
    """First continued-fraction convergent of sqrt(2) within ``tol``."""
    tol = q(tol)
    if tol <= 0:
        raise ParamError("tolerance must be positive")
    p0, q0, p1, q1 = 1, 1, 3, 2
    r = Fraction(p0, q0)
    while not _within(r, tol):
        r = Fraction(p1, q1)
        p0, q0, p1, q1 = p1, q1, 2 * p1 + p0, 2 * q1 + q0
    return r


@dataclass(frozen=True)
class ReductionParams:
    n: int
    k: int
    eps: Fraction = Fraction(2, 5)
    R: Fraction = DEFAULT_R
    eps_prime: Fraction | None = None
    R_tolerance: Fraction = Fraction(1, 10**5)

    def __post_init__(self):
        object.__setattr__(self, "eps", q(self.eps))
        object.__setattr__(self, "R", q(self.R))
        if self.eps_prime is None:
            object.__setattr__(self, "eps_prime", (self.R - 1) * self.eps * Fraction(9, 10))
        else:
            object.__setattr__(self, "eps_prime", q(self.eps_prime))
        if self.n < 1:
            raise ParamError("n must be at least 1")
        if self.k < 1:
            raise ParamError("k must be at least 1")
        if not 0 < self.eps < Fraction(1, 2):
            raise ParamError("eps must satisfy 0 < eps < 1/2")
        if not self.R > 1 or not _within(self.R, q(self.R_tolerance)):
            raise ParamError(f"R = {self.R} is not within {self.R_tolerance} of sqrt(2)")
        if not 0 < self.eps_prime < (self.R - 1) * self.eps:
            raise ParamError("eps' must satisfy 0 < eps' < (R - 1) * eps")

    @property
    def L(self) -> int:
        """Decode gain (k + 2) * 2^(n + 1)."""
        return (self.k + 2) << (self.n + 1)

    @property
    def delta(self) -> Fraction:
        """Offset between consecutive samples."""
        return Fraction(1, (self.k + 1) << (self.n + 1))

    def vectors(self) -> dict[int, tuple[Fraction, Fraction]]:
        e, r = self.eps, self.R
        return {1: (Fraction(0), e), 2: (e, e * (1 - r)), 3: (-e, e * (1 - r))}


@lru_cache(maxsize=1)
def macro_library() -> dict[str, SlpProgram]:
    """The packed-bit macros, parsed."""
    return dict(parse_slp(MACRO_SOURCE, inputs=[], consts=LIBRARY_CONSTS).macros)


def circuit_table(circ: BoolCircuit) -> tuple:
    """Gates as ``("or", p1, p2)`` / ``("not", p)`` over 1-based packed
    positions (input bits first, then gates)."""
    rows = []
    for g in circ.gates:
        if g[0] == "or":
            rows.append(("or", Fraction(g[1] + 1), Fraction(g[2] + 1)))
        else:
            rows.append(("not", Fraction(g[1] + 1)))
    return tuple(rows)


def reduction_consts(inst: DiscreteBrouwerInstance, params: ReductionParams) -> dict:
    circ = inst.circuit
    if inst.n != params.n:
        raise ParamError(f"instance has n = {inst.n} but params have n = {params.n}")
    big_k = circ.num_inputs + len(circ.gates)
    p1, p2, p3 = (Fraction(r + 1) for r in circ.outputs)
    return {
        "n": Fraction(params.n),
        "k": Fraction(params.k),
        "L": Fraction(params.L),
        "K": Fraction(big_k),
        "G": Fraction(2) ** (big_k + 1),
        "T": Fraction(1, 2) - Fraction(1, 2 ** (big_k + 1)),
        "eps": params.eps,
        "R": params.R,
        "delta": params.delta,
        "C": circuit_table(circ),
        "P1": p1,
        "P2": p2,
        "P3": p3,
    }


def _render(v) -> str:
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, tuple):
        return "[" + ", ".join(_render(x) for x in v) + "]"
    v = Fraction(v)
    if v.denominator == 1:
        return str(v.numerator) if v >= 0 else f"-{-v.numerator}"
    sign = "-" if v < 0 else ""
    return f"{sign}{abs(v.numerator)}/{v.denominator}"


def reduction_source(inst: DiscreteBrouwerInstance, params: ReductionParams) -> str:
    """Self-contained DSL text for the reduction program."""
    consts = reduction_consts(inst, params)
    head = [f"# n={params.n} k={params.k} eps={_render(params.eps)} R={_render(params.R)}"]
    head += [f"const {name} = {_render(v)}" for name, v in consts.items()]
    return "\n".join(head) + "\n\n" + MACRO_SOURCE + "\n" + REDUCTION_MAIN


def reduction_flat(inst: DiscreteBrouwerInstance, params: ReductionParams) -> FlatSlp:
    program = parse_slp(REDUCTION_MAIN, consts=LIBRARY_CONSTS)
    return expand(program, macro_library(), reduction_consts(inst, params))


def build_reduction(inst: DiscreteBrouwerInstance, params: ReductionParams) -> SyncCircuit:
    """Two-input two-output circuit whose approximate fixed points sit near
    trichromatic squares of ``inst``."""
    flat = reduction_flat(inst, params)
    return compile_slp(flat, liveness(flat))


# ---------------------------------------------------------------------------
# Packed-value helpers


def packed(*bits: int) -> Fraction:
    return sum((Fraction(b, 2**i) for i, b in enumerate(bits, start=1)), Fraction(0))


def unpacked(x: Fraction, width: int) -> list[int]:
    """Bits of a valid packing of ``width`` bits."""
    v = x * 2**width
    if v.denominator != 1 or not 0 <= v < 2**width:
        raise ValueError(f"{x} is not a packing of {width} bits")
    v = int(v)
    return [(v >> (width - i)) & 1 for i in range(1, width + 1)]


def run_macro(call: str, values: dict, consts: dict, outputs: Sequence[str]) -> dict:
    """Expand and run a single macro call over named variables.

    ``values`` gives the initial value of each variable; those variables
    become the program inputs.  Returns the final values of ``outputs``.
    """
    from .slp import interpret

    names = list(values)
    text = f"output {', '.join(outputs)}\n{call}\n"
    program = parse_slp(text, inputs=names, consts=tuple(consts) + LIBRARY_CONSTS)
    flat = expand(program, macro_library(), consts)
    result = interpret(flat, [values[v] for v in names])
    return dict(zip(outputs, result))


# ---------------------------------------------------------------------------
# Oracles


def poorly_positioned_coordinate(t: Fraction, n: int, L) -> bool:
    """t lies in some I(a) = [a/2^n, a/2^n + 1/L)."""
    t = q(t)
    scaled = t * 2**n
    frac = scaled - (scaled.numerator // scaled.denominator)
    return frac < Fraction(2**n) / q(L)


def sample_points(p: Sequence, params: ReductionParams) -> list[tuple[Fraction, Fraction]]:
    """The k samples p + (i - 1) * delta, unclipped."""
    x, y = q(p[0]), q(p[1])
    d = params.delta
    return [(x + i * d, y + i * d) for i in range(params.k)]


def count_poorly_positioned(p: Sequence, params: ReductionParams, L=None) -> int:
    """Number of samples with at least one poorly-positioned coordinate."""
    L = params.L if L is None else L
    n = params.n
    return sum(
        1 for sx, sy in sample_points(p, params)
        if poorly_positioned_coordinate(sx, n, L) or poorly_positioned_coordinate(sy, n, L)
    )


def max_poorly_positioned_on_grid(params: ReductionParams, bits: int) -> int:
    """Largest count over all p in the 2^-bits grid of [0,1]^2.

    Works in integer units of 1/den with den = (k+1) 2^(n+1) 2^bits, where
    coordinate a/2^bits is ``a * step`` and the sample offset is ``unit``.
    A coordinate v is poorly positioned iff (v mod period) * L < period * 2^n
    with period = den / 2^n.  Each coordinate yields a bitmask of bad
    samples and a point's count is the popcount of the union.
    """
    n, k, L = params.n, params.k, params.L
    den = (k + 1) << (n + 1) << bits
    step = (k + 1) << (n + 1)
    unit = 1 << bits
    period = den >> n
    limit = period << n
    masks = set()
    for a in range((1 << bits) + 1):
        m = 0
        for i in range(k):
            if ((a * step + i * unit) % period) * L < limit:
                m |= 1 << i
        masks.add(m)
    return max(bin(mx | my).count("1") for mx in masks for my in masks)


def segment_min_norm(u: Sequence, v: Sequence) -> Fraction:
    """min over lambda in [0,1] of ||lambda u + (1 - lambda) v||_inf, exact."""
    u = (q(u[0]), q(u[1]))
    v = (q(v[0]), q(v[1]))
    cands = {Fraction(0), Fraction(1)}
    dx, dy = u[0] - v[0], u[1] - v[1]
    # zeros of each coordinate and the crossings |X| = |Y|
    if dx != 0:
        cands.add(-v[0] / dx)
    if dy != 0:
        cands.add(-v[1] / dy)
    for s in (1, -1):
        den = dx - s * dy
        if den != 0:
            cands.add((s * v[1] - v[0]) / den)
    best = None
    for lam in cands:
        if 0 <= lam <= 1:
            x = lam * u[0] + (1 - lam) * v[0]
            y = lam * u[1] + (1 - lam) * v[1]
            val = max(abs(x), abs(y))
            if best is None or val < best:
                best = val
    return best


def displacement_geometry_check(params: ReductionParams) -> Fraction:
    """Minimum infinity norm over all segments between two color vectors."""
    vec = params.vectors()
    return min(segment_min_norm(vec[a], vec[b]) for a, b in ((1, 2), (1, 3), (2, 3)))


def grid_points(resolution: int) -> list[tuple[Fraction, Fraction]]:
    pts = [Fraction(i, resolution) for i in range(resolution + 1)]
    return [(x, y) for x in pts for y in pts]


def grid_search(circ: SyncCircuit, resolution: int) -> list[tuple[tuple[Fraction, Fraction], Fraction]]:
    """Residual at every point i/resolution, sorted by (residual, point)."""
    if resolution < 1 or resolution & (resolution - 1):
        raise ParamError("resolution must be a power of two")
    pts = grid_points(resolution)
    res = residuals(circ, pts)
    return sorted(zip(pts, res), key=lambda pr: (pr[1], pr[0]))


def square_distance(p: Sequence, square: tuple[int, int], n: int) -> Fraction:
    """Infinity distance from p to the closed grid square with lower-left
    corner ``square``."""
    side = Fraction(1, 2**n)
    dist = Fraction(0)
    for coord, s in zip(p, square):
        lo, hi = s * side, (s + 1) * side
        c = q(coord)
        d = lo - c if c < lo else (c - hi if c > hi else Fraction(0))
        dist = max(dist, d)
    return dist
