"""Command line entry point.

Exit codes: 0 success, 2 bad input or parameters, 3 a checked invariant
failed.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction
from pathlib import Path

from . import brouwer, brouwer2d, circuit, game, slp
from .rational import fmt, q

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BREACH = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def _rational(text: str) -> Fraction:
    try:
        return q(text)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None


def _read_json(path: str):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON: {exc}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def _params(args, n: int) -> brouwer2d.ReductionParams:
    try:
        R = brouwer2d.sqrt2_approx(args.sqrt2_prec)
        return brouwer2d.ReductionParams(
            n=n, k=args.k, eps=args.eps, R=R, eps_prime=args.eps_prime,
            R_tolerance=args.sqrt2_prec,
        )
    except brouwer2d.ParamError as exc:
        raise CliError(str(exc)) from None


# ---------------------------------------------------------------------------
# Subcommands


def cmd_compile(args) -> int:
    text = _read(args.slp)
    try:
        program = slp.parse_slp(text, consts=brouwer2d.LIBRARY_CONSTS)
        flat = slp.expand(program, brouwer2d.macro_library())
        report = slp.liveness(flat)
        circ = circuit.compile_slp(flat, report)
    except slp.SlpError as exc:
        raise CliError(f"{args.slp}: {exc}") from None
    check = circuit.validate(circ)
    if not check.is_synchronous or circ.width != report.max_live:
        raise CliError("compiled circuit failed validation: " + "; ".join(check.violations), EXIT_BREACH)
    lines = [
        f"lines: {len(flat)}",
        f"max_live: {report.max_live}",
        f"width: {circ.width}",
        f"depth: {circ.depth}",
    ]
    _emit(_dump(circuit.circuit_to_dict(circ)), args.out)
    print("\n".join(lines), file=sys.stdout if args.out else sys.stderr)
    return EXIT_OK


def _load_bnet(path: str) -> brouwer.BoolCircuit:
    try:
        return brouwer.parse_bnet(_read(path))
    except brouwer.BrouwerError as exc:
        raise CliError(f"{path}: {exc}") from None


def _instance(circ: brouwer.BoolCircuit, eps=None) -> brouwer.DiscreteBrouwerInstance:
    if circ.num_inputs % 2:
        raise CliError("a color circuit reads an even number of bits")
    try:
        return brouwer.DiscreteBrouwerInstance(circ.num_inputs // 2, circ, eps)
    except brouwer.BrouwerError as exc:
        raise CliError(str(exc)) from None


def _check_n(args, inst) -> None:
    if args.n is not None and args.n != inst.n:
        raise CliError(f"--n {args.n} does not match the netlist (n = {inst.n})")


def _thicken(inst, eps):
    bad = brouwer.check_boundary(inst)
    if bad:
        gx, gy, got, want = bad[0]
        raise CliError(f"instance breaks the boundary rules at ({gx}, {gy}): color {got}, expected {want}")
    try:
        return brouwer.thicken(inst, eps)
    except brouwer.BrouwerError as exc:
        raise CliError(str(exc)) from None


def cmd_thicken(args) -> int:
    inst = _instance(_load_bnet(args.bnet))
    _check_n(args, inst)
    thick, emb = _thicken(inst, args.eps)
    head = (
        f"# thick instance: n={thick.n} eps={fmt(emb.eps)} "
        f"embeds n={emb.n} at ({emb.x0}, {emb.y0}) with x and y swapped\n"
    )
    _emit(head + brouwer.format_bnet(thick.circuit), args.out)
    return EXIT_OK


def cmd_reduce(args) -> int:
    inst = _instance(_load_bnet(args.bnet))
    _check_n(args, inst)
    if not 0 < args.eps < Fraction(1, 2):
        raise CliError("--eps must satisfy 0 < eps < 1/2")
    if args.thick:
        thick = brouwer.DiscreteBrouwerInstance(inst.n, inst.circuit, args.eps)
        bad = brouwer.check_boundary(thick)
        if bad:
            raise CliError(f"instance is not eps-thick: first violation at {bad[0][:2]}")
        emb = None
    else:
        thick, emb = _thicken(inst, args.eps)
    params = _params(args, thick.n)
    circ = brouwer2d.build_reduction(thick, params)
    check = circuit.validate(circ)
    if not check.is_synchronous:
        raise CliError("reduction circuit is not synchronous", EXIT_BREACH)
    d = circuit.circuit_to_dict(circ)
    d["provenance"] = {
        "source": Path(args.bnet).name,
        "n": params.n,
        "k": params.k,
        "eps": fmt(params.eps),
        "eps_prime": fmt(params.eps_prime),
        "R": fmt(params.R),
        "L": params.L,
        "delta": fmt(params.delta),
        "thickened": emb is not None,
        "width": circ.width,
        "depth": circ.depth,
    }
    if emb is not None:
        d["provenance"]["embedding"] = {"n": emb.n, "x0": emb.x0, "y0": emb.y0}
    _emit(json.dumps(d, separators=(",", ":")) + "\n", args.out)
    return EXIT_OK


def _load_circuit(path: str) -> circuit.SyncCircuit:
    try:
        return circuit.circuit_from_dict(_read_json(path))
    except circuit.CircuitError as exc:
        raise CliError(f"{path}: {exc}") from None


def _M(text: str):
    if text.lower() == "auto":
        return "auto"
    try:
        return q(text)
    except (ValueError, ZeroDivisionError):
        raise CliError(f"--M must be 'auto' or a rational, got {text!r}") from None


def cmd_game(args) -> int:
    circ = _load_circuit(args.circuit)
    try:
        system = game.add_loopback(game.rescale_tenth(circ))
        g = game.build_game(system, _M(args.M))
    except game.GameError as exc:
        raise CliError(str(exc)) from None
    if args.system_out:
        Path(args.system_out).write_text(_dump(game.system_to_dict(system)), encoding="utf-8")
    _emit(json.dumps(game.game_to_dict(g), separators=(",", ":")) + "\n", args.out)
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    try:
        system = game.system_from_dict(_read_json(args.system))
        g = game.build_game(system, _M(args.M))
        data = _read_json(args.assignment)
        if isinstance(data, dict) and "point" in data:
            point = [q(v) / 10 for v in data["point"]]
            assignment = game.assignment_from_point(system, point)
        else:
            assignment = game.assignment_from_dict(data)
        profile = game.construct_equilibrium(g, assignment)
    except (game.GameError, circuit.CircuitError, slp.SlpError, ValueError) as exc:
        raise CliError(str(exc)) from None
    _emit(_dump(game.profile_to_dict(profile)), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        g = game.game_from_dict(_read_json(args.game))
        profile = game.profile_from_dict(_read_json(args.profile))
        regrets = game.verify_regret(g, profile)
    except game.GameError as exc:
        raise CliError(str(exc)) from None
    lines = [f"{pid}: {fmt(r)}" for pid, r in regrets.items()]
    nash = game.is_nash(regrets)
    lines.append(f"is_nash: {'true' if nash else 'false'}")
    if not nash:
        worst = max(regrets, key=lambda p: regrets[p])
        names = ", ".join(p for p, r in regrets.items() if r > 0)
        lines.append(f"violators: {names}")
        lines.append(f"largest regret: {worst} ({fmt(regrets[worst])})")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_search(args) -> int:
    circ = _load_circuit(args.circuit)
    try:
        table = brouwer2d.grid_search(circ, args.resolution)
    except (brouwer2d.ParamError, circuit.CircuitError) as exc:
        raise CliError(str(exc)) from None
    rows = ["x,y,residual"]
    rows += [f"{fmt(x)},{fmt(y)},{fmt(r)}" for (x, y), r in table[: args.top or None]]
    _emit("\n".join(rows) + "\n", args.out)
    return EXIT_OK


def cmd_check_geometry(args) -> int:
    params = _params(args, args.n or 1)
    got = brouwer2d.displacement_geometry_check(params)
    bound = (params.R - 1) * params.eps - Fraction(1, 1000)
    ok = got >= bound
    print(f"R: {fmt(params.R)}")
    print(f"eps: {fmt(params.eps)}")
    print(f"min_segment_norm: {fmt(got)} ({float(got):.6f})")
    print(f"required: {fmt(bound)} ({float(bound):.6f})")
    print(f"ok: {'true' if ok else 'false'}")
    return EXIT_OK if ok else EXIT_BREACH


def cmd_check_samples(args) -> int:
    params = _params(args, args.n or 4)
    worst = brouwer2d.max_poorly_positioned_on_grid(params, args.bits)
    rng = random.Random(args.seed)
    worst_random = 0
    den = 1 << 30
    for _ in range(args.random):
        p = (Fraction(rng.randrange(den + 1), den), Fraction(rng.randrange(den + 1), den))
        worst_random = max(worst_random, brouwer2d.count_poorly_positioned(p, params))
    ok = max(worst, worst_random) <= 2
    print(f"n: {params.n} k: {params.k} L: {params.L}")
    print(f"grid 2^-{args.bits}: max poorly positioned samples = {worst}")
    if args.random:
        print(f"{args.random} random points (seed {args.seed}): max = {worst_random}")
    print(f"ok: {'true' if ok else 'false'}")
    return EXIT_OK if ok else EXIT_BREACH


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slpgame", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, reduction=False):
        p.add_argument("--out", help="write the result here instead of stdout")
        if reduction:
            p.add_argument("--n", type=int, help="bits per coordinate")
            p.add_argument("--k", type=int, default=5, help="number of samples")
            p.add_argument("--eps", type=_rational, default=Fraction(2, 5))
            p.add_argument("--eps-prime", type=_rational, default=None)
            p.add_argument("--sqrt2-prec", type=_rational, default=Fraction(1, 10**5),
                           help="tolerance of the rational stand-in for sqrt(2)")
        return p

    p = common(sub.add_parser("compile", help="compile an SLP file to a circuit"))
    p.add_argument("slp")
    p.set_defaults(func=cmd_compile)

    p = common(sub.add_parser("thicken", help="embed a netlist instance into a thick one"))
    p.add_argument("bnet")
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=_rational, default=Fraction(1, 5))
    p.set_defaults(func=cmd_thicken)

    p = common(sub.add_parser("reduce", help="build the 2D-Brouwer circuit for a netlist"), reduction=True)
    p.add_argument("bnet")
    p.add_argument("--thick", action="store_true", help="the netlist already satisfies the thick rules")
    p.set_defaults(func=cmd_reduce)

    p = common(sub.add_parser("game", help="build the polymatrix game for a circuit"))
    p.add_argument("circuit")
    p.add_argument("--M", default="auto")
    p.add_argument("--system-out", help="also write the gate constraint system")
    p.set_defaults(func=cmd_game)

    p = common(sub.add_parser("equilibrium", help="construct an equilibrium from a gate assignment"))
    p.add_argument("system")
    p.add_argument("assignment", help='gate map {"slot,level": value} or {"point": [x, y]}')
    p.add_argument("--M", default="auto")
    p.set_defaults(func=cmd_equilibrium)

    p = common(sub.add_parser("verify", help="exact regret of every player"))
    p.add_argument("game")
    p.add_argument("profile")
    p.set_defaults(func=cmd_verify)

    p = common(sub.add_parser("search", help="residuals on a grid"))
    p.add_argument("circuit")
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--top", type=int, default=0, help="only print the best rows")
    p.set_defaults(func=cmd_search)

    p = common(sub.add_parser("check-geometry", help="displacement vector segment bound"), reduction=True)
    p.set_defaults(func=cmd_check_geometry)

    p = common(sub.add_parser("check-samples", help="poorly positioned sample bound"), reduction=True)
    p.add_argument("--bits", type=int, default=9, help="grid resolution 2^-bits")
    p.add_argument("--random", type=int, default=0, help="extra random points")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check_samples)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
