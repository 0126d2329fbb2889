"""``oneway-prt`` command-line front end.

Exit status: 0 success, 1 verification failure, 2 usage or input error, 3 resource cap.
Reports go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import exactrcc, protocols, suite
from ._config import Caps, CapExceeded, format_rational, parse_rational
from .fnspec import PfnParseError, generate, parse_function, serialize_function
from .prtlp import (
    AccuracyParams,
    compute_prt,
    format_solution,
    format_witness,
    parse_solution,
    parse_witness,
    verify_solution,
    verify_witness,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read(path: str, stdin_used: list) -> str:
    if path == "-":
        if stdin_used:
            raise UsageError("standard input can feed only one argument")
        stdin_used.append(True)
        return sys.stdin.read()
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str | None, text: str, out) -> None:
    if path is None or path == "-":
        out.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _caps(args) -> Caps:
    caps = Caps.from_env()
    names = {f.name for f in dataclasses.fields(Caps)}
    for item in args.cap or []:
        key, _, val = item.partition("=")
        key = key.strip().lower().replace("-", "_")
        if key not in names or not val:
            raise UsageError(f"unknown cap override {item!r}; known: {', '.join(sorted(names))}")
        caps = dataclasses.replace(caps, **{key: int(val)})
    return caps


def _acc(args, need_delta=False) -> AccuracyParams:
    eps = parse_rational(args.eps)
    delta = parse_rational(args.delta) if getattr(args, "delta", None) else None
    if need_delta and delta is None:
        raise UsageError("--delta is required")
    return AccuracyParams(eps, delta)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="oneway-prt", description=__doc__.splitlines()[0])
    p.add_argument("--cap", action="append", metavar="NAME=VALUE", help="override a resource cap (e.g. max_pivots=1000)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def fn_cmd(name, help_, eps=True, delta=False):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("fn", help="function file in .pfn format, '-' for stdin")
        if eps:
            sp.add_argument("--eps", required=True, help="error bound as p/q")
        if delta:
            sp.add_argument("--delta", required=True, help="boosting slack as p/q")
        sp.add_argument("-o", "--output", default=None)
        return sp

    sp = fn_cmd("prt", "compute the one-way partition bound")
    sp.add_argument("--solution", help="write the primal solution here instead of stdout")
    sp.add_argument("--witness", help="write the dual witness here instead of stdout")
    fn_cmd("rcc", "exact one-way randomized communication complexity")
    fn_cmd("compile", "compile an optimal LP solution into a zero-communication protocol")
    sp = sub.add_parser("boost", help="boost a zero-communication protocol into a one-way protocol")
    sp.add_argument("proto")
    sp.add_argument("fn")
    sp.add_argument("--eps", required=True)
    sp.add_argument("--delta", required=True)
    sp.add_argument("--explicit", action="store_true", help="emit the expanded strategy mixture")
    sp.add_argument("-o", "--output", default=None)
    sp = sub.add_parser("simulate", help="Monte-Carlo estimate of protocol statistics")
    sp.add_argument("proto")
    sp.add_argument("fn")
    sp.add_argument("--samples", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--strict", action="store_true", help="exit 1 when an exact value falls outside its interval")
    sp = fn_cmd("verify-witness", "check a dual witness and report the certified lower bound")
    sp.add_argument("witness")
    sp = fn_cmd("verify-solution", "check a primal solution")
    sp.add_argument("solution")
    fn_cmd("sandwich", "verify both sides of the characterization", delta=True)
    sp = sub.add_parser("gen", help="generate a standard function as .pfn")
    sp.add_argument("kind", choices=("eq", "gt", "index", "random", "const"))
    sp.add_argument("n", type=int)
    sp.add_argument("--density", default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("-o", "--output", default=None)
    sp = sub.add_parser("suite", help="run the corpus verification suite")
    sp.add_argument("--keep-going", action="store_true")
    return p


def _cmd(args, out) -> int:
    caps = _caps(args)
    stdin_used: list = []
    cmd = args.command
    if cmd == "gen":
        density = parse_rational(args.density) if args.density else None
        f = generate(args.kind, args.n, density=density, seed=args.seed, caps=caps)
        _write(args.output, serialize_function(f), out)
        return EXIT_OK
    if cmd == "suite":
        ok = suite.run_suite(caps, fail_fast=not args.keep_going, emit=lambda r: print(r, file=out, flush=True))
        print("suite PASS" if ok else "suite FAIL", file=out)
        return EXIT_OK if ok else EXIT_FAIL

    if cmd in ("boost", "simulate"):
        proto = protocols.parse_protocol(_read(args.proto, stdin_used))
    f = parse_function(_read(args.fn, stdin_used), caps)

    if cmd == "prt":
        acc = _acc(args)
        res = compute_prt(f, acc, caps)
        text = f"prt {format_rational(res.value)}\n"
        sol, wit = format_solution(f, acc, res.solution), format_witness(f, acc, res.witness)
        if args.solution:
            _write(args.solution, sol, out)
        else:
            text += sol
        if args.witness:
            _write(args.witness, wit, out)
        else:
            text += wit
        _write(args.output, text, out)
        return EXIT_OK
    if cmd == "rcc":
        res = exactrcc.exact_rcc(f, _acc(args), caps=caps)
        lines = ["c game_value"] + [f"{c} {format_rational(v)}" for c, v in sorted(res.game_values.items())]
        lines.append(f"R1 {res.c_star}")
        _write(args.output, "\n".join(lines) + "\n" + protocols.format_protocol(res.optimal_mix), out)
        return EXIT_OK
    if cmd == "compile":
        acc = _acc(args)
        res = compute_prt(f, acc, caps)
        _write(args.output, protocols.format_protocol(protocols.compile_protocol(res.solution, f, acc)), out)
        return EXIT_OK
    if cmd == "boost":
        acc = _acc(args, need_delta=True)
        if not isinstance(proto, protocols.ZeroCommProtocol):
            raise UsageError("boost expects a zerocomm protocol")
        base = protocols.exact_stats(proto, f, caps)
        if base.worst_err is None or base.worst_err > acc.epsilon:
            print(f"base protocol error {base.worst_err} exceeds eps {acc.epsilon}", file=sys.stderr)
            return EXIT_FAIL
        bp = protocols.boost(proto, f, acc, caps)
        st = protocols.exact_stats(bp, f, caps)
        result = protocols.materialize(bp, caps) if args.explicit else bp
        report = [
            f"# rounds {bp.rounds}",
            f"# message_bits {bp.c}",
            f"# failure_prob {format_rational(bp.failure_prob)}",
            f"# worst_err {format_rational(st.worst_err)}",
            f"# bound eps+delta {format_rational(acc.epsilon + acc.delta)}",
        ]
        _write(args.output, protocols.format_protocol(result) + "\n".join(report) + "\n", out)
        return EXIT_OK if st.worst_err <= acc.epsilon + acc.delta else EXIT_FAIL
    if cmd == "simulate":
        if args.samples < 1:
            raise UsageError("--samples must be >= 1")
        exact = protocols.exact_stats(proto, f, caps)
        sim = protocols.simulate(proto, f, args.samples, args.seed)
        lines = [f"samples {sim.samples}", f"seed {sim.seed}", "cell quantity estimate halfwidth exact flag"]
        flagged = 0
        for cell in sorted(exact.per_input_eff):
            est, hw, ex = sim.eff[cell], sim.eff_halfwidth[cell], exact.per_input_eff[cell]
            bad = abs(float(est - ex)) > hw
            flagged += bad
            lines.append(f"{cell[0]},{cell[1]} eff {float(est):.6f} {hw:.6f} {format_rational(ex)} {'FLAG' if bad else 'ok'}")
        for cell in sorted(exact.per_input_err):
            if cell not in sim.err:
                lines.append(f"{cell[0]},{cell[1]} err n/a 1.000000 {format_rational(exact.per_input_err[cell])} ok")
                continue
            est, hw, ex = sim.err[cell], sim.err_halfwidth[cell], exact.per_input_err[cell]
            bad = abs(float(est - ex)) > hw
            flagged += bad
            lines.append(f"{cell[0]},{cell[1]} err {float(est):.6f} {hw:.6f} {format_rational(ex)} {'FLAG' if bad else 'ok'}")
        lines.append(f"flagged {flagged}")
        out.write("\n".join(lines) + "\n")
        return EXIT_FAIL if args.strict and flagged else EXIT_OK
    if cmd == "verify-witness":
        acc = _acc(args)
        chk = verify_witness(f, acc, parse_witness(_read(args.witness, stdin_used)))
        if chk.ok:
            _write(args.output, f"certified lower bound {format_rational(chk.value)}\n", out)
            return EXIT_OK
        _write(args.output, "witness INVALID\n" + "\n".join(chk.lines()) + "\n", out)
        return EXIT_FAIL
    if cmd == "verify-solution":
        acc = _acc(args)
        chk = verify_solution(f, acc, parse_solution(_read(args.solution, stdin_used)))
        if chk.ok:
            _write(args.output, f"feasible solution with value {format_rational(chk.value)}\n", out)
            return EXIT_OK
        _write(args.output, "solution INVALID\n" + "\n".join(chk.lines()) + "\n", out)
        return EXIT_FAIL
    if cmd == "sandwich":
        rep = exactrcc.verify_sandwich(f, _acc(args, need_delta=True), caps)
        _write(args.output, rep.text(), out)
        return EXIT_OK if rep.ok else EXIT_FAIL
    raise UsageError(f"unknown command {cmd}")  # pragma: no cover


def run(argv: list[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
        return _cmd(args, out)
    except CapExceeded as exc:
        print(f"oneway-prt: resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (UsageError, PfnParseError, ValueError) as exc:
        print(f"oneway-prt: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


__all__ = ["run", "main", "build_parser"]
