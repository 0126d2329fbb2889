"""Exact one-way public-coin communication complexity on tiny instances.

A public-coin protocol with ``c``-bit messages is a mixture of deterministic ones, so
the least achievable worst-case error at cost ``c`` is the value of a zero-sum game
between the protocol designer (rows: deterministic protocols) and an adversary picking
a defined input cell. The game is solved as an exact LP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from . import _kernels, ratlp
from ._config import DEFAULT_CAPS, Caps, CapExceeded, format_rational
from .fnspec import PartialFunction
from .prtlp import AccuracyParams, compute_prt
from .protocols import OneWayProtocol, Strategy, boost, compile_protocol, exact_stats
from .ratlp import Constraint, LinearProgram, Relation, Sense

ZERO = Fraction(0)
ONE = Fraction(1)


def restricted_growth_strings(n: int, max_blocks: int) -> Iterator[tuple[int, ...]]:
    """Set partitions of ``range(n)`` into at most ``max_blocks`` blocks, as RGS tuples."""
    if n == 0:
        yield ()
        return
    a = [0] * n

    def rec(i: int, top: int):
        if i == n:
            yield tuple(a)
            return
        for v in range(min(top + 2, max_blocks)):
            a[i] = v
            yield from rec(i + 1, max(top, v))

    a[0] = 0
    yield from rec(1, 0)


@dataclass(frozen=True)
class PureStrategies:
    """Deterministic one-way protocols at cost ``c`` as parallel arrays.

    ``msg[s, x]`` is the message for ``x``, ``out[s, m, y]`` Bob's answer, and
    ``err[s, k]`` is 1 iff strategy ``s`` errs on the ``k``-th defined cell.
    """

    c: int
    msg: np.ndarray
    out: np.ndarray
    err: np.ndarray
    cells: tuple[tuple[int, int], ...]

    def __len__(self):
        return self.err.shape[0]

    def strategy(self, s: int, prob: Fraction) -> Strategy:
        return Strategy(prob, tuple(int(v) for v in self.msg[s]), tuple(tuple(int(v) for v in r) for r in self.out[s]))


def _slot_options(f: PartialFunction, block: list[int], y: int, col: dict, prune: bool):
    """Bob's choices of ``z`` for one (message, column) slot and the error pattern of each."""
    opts = []
    seen = {}
    for z in range(f.nz):
        pat = tuple(col[(x, y)] for x in block if f(x, y) is not None and f(x, y) != z)
        if prune:
            if pat in seen:
                continue
            seen[pat] = z
        opts.append((z, frozenset(pat)))
    if prune:
        opts = [(z, p) for z, p in opts if not any(q < p for _, q in opts)]
    return opts


def enumerate_strategies(f: PartialFunction, c: int, prune: bool = True, caps: Caps = DEFAULT_CAPS) -> PureStrategies:
    """Deterministic protocols at cost ``c``, up to relabelling messages.

    With ``prune`` only Pareto-undominated error vectors survive, which never changes
    the game value: any mixture can shift weight from a dominated row to its dominator.
    """
    K = 1 << c
    if K**f.nx > caps.max_raw_msg_fns:
        raise CapExceeded(f"{K}^{f.nx} message functions exceed the cap of {caps.max_raw_msg_fns}")
    cells = f.domain
    col = {cell: k for k, cell in enumerate(cells)}
    L = len(cells)
    msgs, outs, errs = [], [], []
    total = 0
    for rgs in restricted_growth_strings(f.nx, K):
        nblocks = max(rgs) + 1
        blocks = [[x for x in range(f.nx) if rgs[x] == m] for m in range(nblocks)]
        slots = [(m, y) for m in range(nblocks) for y in range(f.ny)]
        options = [_slot_options(f, blocks[m], y, col, prune) for m, y in slots]
        count = math.prod(len(o) for o in options)
        total += count
        if total > caps.max_atoms:
            raise CapExceeded(f"more than {caps.max_atoms} pure strategies at cost {c}")
        # mixed-radix product over slots; slots touch disjoint cells so patterns add
        E = np.zeros((1, L), dtype=np.int64)
        Z = np.zeros((1, len(slots)), dtype=np.int64)
        for k, opts in enumerate(options):
            P = np.zeros((len(opts), L), dtype=np.int64)
            for i, (_, pat) in enumerate(opts):
                P[i, list(pat)] = 1
            zs = np.array([z for z, _ in opts], dtype=np.int64)
            E = (E[:, None, :] + P[None, :, :]).reshape(E.shape[0] * len(opts), L)
            Z = np.repeat(Z, len(opts), axis=0)
            Z[:, k] = np.tile(zs, Z.shape[0] // len(opts))
        out = np.zeros((count, K, f.ny), dtype=np.int64)
        out[:, :nblocks, :] = Z.reshape(count, nblocks, f.ny)
        msgs.append(np.broadcast_to(np.array(rgs, dtype=np.int64), (count, f.nx)))
        outs.append(out)
        errs.append(E)
    msg = np.concatenate(msgs)
    out = np.concatenate(outs)
    err = np.concatenate(errs)
    if prune and len(err) > 1:
        keep = _kernels.pareto_keep(err)
        msg, out, err = msg[keep], out[keep], err[keep]
    return PureStrategies(c, np.ascontiguousarray(msg), out, err, cells)


def game_lp(strats: PureStrategies) -> LinearProgram:
    """``min t`` subject to each cell's mixed error ``<= t`` and the mixture summing to 1."""
    n, L = strats.err.shape
    t = n
    cons = []
    for k in range(L):
        nz = np.flatnonzero(strats.err[:, k])
        cons.append(Constraint(tuple((int(s), ONE) for s in nz) + ((t, -ONE),), Relation.LE, ZERO))
    cons.append(Constraint(tuple((s, ONE) for s in range(n)), Relation.EQ, ONE))
    return LinearProgram(n + 1, ((t, ONE),), Sense.MIN, tuple(cons))


def min_error_at_cost(
    f: PartialFunction, c: int, prune: bool = True, caps: Caps = DEFAULT_CAPS
) -> tuple[Fraction, OneWayProtocol]:
    strats = enumerate_strategies(f, c, prune, caps)
    out = ratlp.solve(game_lp(strats), caps.max_pivots)
    if not out.optimal:
        raise RuntimeError(f"game LP reported {out.status.value}")
    mix = tuple(strats.strategy(s, w) for s, w in enumerate(out.primal[:-1]) if w)
    proto = OneWayProtocol(f.nx, f.ny, f.nz, c, mix)
    return out.value, proto


@dataclass(frozen=True)
class RccResult:
    c_star: int
    game_values: dict[int, Fraction]
    optimal_mix: OneWayProtocol


def _check_rcc_caps(f: PartialFunction, caps: Caps):
    if f.nx * f.ny > caps.max_rcc_cells:
        raise CapExceeded(f"{f.nx}x{f.ny} instance exceeds the exact-R1 cap of {caps.max_rcc_cells} cells")


def sufficient_cost(f: PartialFunction) -> int:
    """Sending ``x`` outright costs ``ceil(log2 nx)`` bits and never errs."""
    return (f.nx - 1).bit_length()


def exact_rcc(f: PartialFunction, acc: AccuracyParams | Fraction, prune: bool = True, caps: Caps = DEFAULT_CAPS) -> RccResult:
    eps = acc.epsilon if isinstance(acc, AccuracyParams) else Fraction(acc)
    _check_rcc_caps(f, caps)
    values = {}
    for c in range(sufficient_cost(f) + 1):
        if c > caps.max_rcc_cost:
            raise CapExceeded(f"message length {c} exceeds the exact-R1 cap of {caps.max_rcc_cost}")
        v, mix = min_error_at_cost(f, c, prune, caps)
        values[c] = v
        if v <= eps:
            return RccResult(c, values, mix)
    raise AssertionError("sending x outright must reach error 0")  # pragma: no cover


# sandwich verification ----------------------------------------------------------------

@dataclass(frozen=True)
class SandwichLine:
    name: str
    left: str
    op: str
    right: str
    ok: bool

    def __str__(self):
        return f"{self.name} {self.left} {self.op} {self.right} {'PASS' if self.ok else 'FAIL'}"


@dataclass(frozen=True)
class SandwichReport:
    prt: Fraction
    rcc_eps: int
    rcc_eps_delta: int
    rounds: int
    c_boosted: int
    boosted_err: Fraction
    lines: tuple[SandwichLine, ...] = field(default_factory=tuple)
    notes: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return all(line.ok for line in self.lines)

    def text(self) -> str:
        head = [
            f"prt {format_rational(self.prt)}",
            f"R1_eps {self.rcc_eps}",
            f"R1_eps+delta {self.rcc_eps_delta}",
            f"boost_rounds {self.rounds}",
            f"c_boosted {self.c_boosted}",
            f"boosted_worst_err {format_rational(self.boosted_err)}",
        ]
        return "\n".join(head + [f"# {n}" for n in self.notes] + [str(line) for line in self.lines]) + "\n"


def log2_le_int(q: Fraction, c: int) -> bool:
    """Exact test of ``log2(q) <= c`` for positive rational ``q``."""
    return q <= Fraction(2) ** c


def verify_sandwich(f: PartialFunction, acc: AccuracyParams, caps: Caps = DEFAULT_CAPS) -> SandwichReport:
    """Check both sides of ``log prt <= R1_eps`` and ``R1_{eps+delta} <= c_boosted``.

    ``c_boosted = ceil(log2(T + 1))`` where ``T`` is the least round count with
    ``(1 - 1/prt)^T <= delta``; this is the explicit form of the additive
    ``log log(1/delta)`` term.
    """
    if acc.delta is None:
        raise ValueError("sandwich needs delta")
    prt = compute_prt(f, acc, caps)
    zc = compile_protocol(prt.solution, f, acc)
    boosted = boost(zc, f, acc, caps)
    bstats = exact_stats(boosted, f)
    eps_delta = acc.epsilon + acc.delta
    r_eps = exact_rcc(f, acc.epsilon, caps=caps)
    r_epsd = exact_rcc(f, eps_delta, caps=caps)
    val_at_boost, _ = min_error_at_cost(f, boosted.c, caps=caps) if boosted.c <= sufficient_cost(f) else (ZERO, None)
    lines = (
        SandwichLine(
            "lower_bound",
            f"2^R1_eps={2**r_eps.c_star}",
            ">=",
            f"prt={format_rational(prt.value)}",
            log2_le_int(prt.value, r_eps.c_star),
        ),
        SandwichLine("upper_bound", f"R1_eps+delta={r_epsd.c_star}", "<=", f"c_boosted={boosted.c}", r_epsd.c_star <= boosted.c),
        SandwichLine(
            "boosted_error",
            f"err={format_rational(bstats.worst_err)}",
            "<=",
            f"eps+delta={format_rational(eps_delta)}",
            bstats.worst_err <= eps_delta,
        ),
        SandwichLine(
            "game_at_c_boosted",
            f"min_err={format_rational(val_at_boost)}",
            "<=",
            f"eps+delta={format_rational(eps_delta)}",
            val_at_boost <= eps_delta,
        ),
    )
    notes = ["rounds T is the least integer with (1-eff)^T <= delta; c_boosted = ceil(log2(T+1)) includes a failure symbol"]
    if acc.is_extension:
        notes.append("epsilon=0 is a boundary extension of the open interval (0,1/2)")
    return SandwichReport(prt.value, r_eps.c_star, r_epsd.c_star, boosted.rounds, boosted.c, bstats.worst_err, lines, tuple(notes))
