"""Zero-communication protocols with abort, one-way protocols, and the conversions
between them and partition-bound LP solutions.

Every probability is an exact ``Fraction``. Subsets of ``X`` are bitmasks.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from . import _kernels
from ._config import DEFAULT_CAPS, Caps, CapExceeded, format_rational, parse_rational
from .fnspec import PartialFunction
from .prtlp import AccuracyParams, PrimalSolution, verify_solution

ZERO = Fraction(0)
ONE = Fraction(1)

Dist = tuple[Fraction, ...]


def _is_dist(row, nz) -> bool:
    return len(row) == nz and all(v >= 0 for v in row) and sum(row, ZERO) == 1


@dataclass(frozen=True)
class Atom:
    prob: Fraction
    alice_set: int
    bob_out: tuple[Dist, ...]  # bob_out[y][z]


@dataclass(frozen=True)
class ZeroCommProtocol:
    """Shared-randomness protocol where Alice either accepts (``x in alice_set``) or aborts
    and Bob answers from ``bob_out`` without hearing from her."""

    nx: int
    ny: int
    nz: int
    atoms: tuple[Atom, ...]
    declared_eff: Fraction

    def __post_init__(self):
        atoms = tuple(
            Atom(Fraction(a.prob), int(a.alice_set), tuple(tuple(Fraction(v) for v in row) for row in a.bob_out))
            for a in self.atoms
        )
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "declared_eff", Fraction(self.declared_eff))
        if not atoms:
            raise ValueError("protocol needs at least one atom")
        for a in atoms:
            if a.prob <= 0:
                raise ValueError(f"atom probability {a.prob} is not positive")
            if not 0 <= a.alice_set < 1 << self.nx:
                raise ValueError(f"alice_set {a.alice_set} is not a subset of range({self.nx})")
            if len(a.bob_out) != self.ny or not all(_is_dist(row, self.nz) for row in a.bob_out):
                raise ValueError("each atom needs one exact output distribution over Z per y")
        if sum((a.prob for a in atoms), ZERO) != 1:
            raise ValueError("atom probabilities must sum to exactly 1")
        if not 0 < self.declared_eff <= 1:
            raise ValueError("declared_eff must lie in (0, 1]")

    def nonabort(self, x: int) -> Fraction:
        return sum((a.prob for a in self.atoms if a.alice_set >> x & 1), ZERO)

    def uniformity_violations(self) -> list[tuple[int, Fraction]]:
        return [(x, e) for x in range(self.nx) if (e := self.nonabort(x)) != self.declared_eff]

    @property
    def is_uniform(self) -> bool:
        return not self.uniformity_violations()


@dataclass(frozen=True)
class Strategy:
    prob: Fraction
    msg_fn: tuple[int, ...]  # msg_fn[x]
    out_fn: tuple[tuple[int, ...], ...]  # out_fn[m][y]


@dataclass(frozen=True)
class OneWayProtocol:
    """Public-coin one-way protocol: a distribution over deterministic ``c``-bit protocols."""

    nx: int
    ny: int
    nz: int
    c: int
    strategies: tuple[Strategy, ...]

    def __post_init__(self):
        strategies = tuple(
            Strategy(Fraction(s.prob), tuple(s.msg_fn), tuple(tuple(r) for r in s.out_fn)) for s in self.strategies
        )
        object.__setattr__(self, "strategies", strategies)
        if self.c < 0:
            raise ValueError("message length must be non-negative")
        K = 1 << self.c
        if sum((s.prob for s in strategies), ZERO) != 1 or any(s.prob <= 0 for s in strategies):
            raise ValueError("strategy probabilities must be positive and sum to exactly 1")
        for s in strategies:
            if len(s.msg_fn) != self.nx or any(not 0 <= m < K for m in s.msg_fn):
                raise ValueError(f"msg_fn must map each of {self.nx} inputs into range({K})")
            if len(s.out_fn) != K or any(len(r) != self.ny or any(not 0 <= z < self.nz for z in r) for r in s.out_fn):
                raise ValueError(f"out_fn must be a total {K}x{self.ny} table over range({self.nz})")


@dataclass(frozen=True)
class BoostedProtocol:
    """One-way protocol built by drawing ``rounds`` independent copies of ``base``'s
    randomness; Alice sends the index of the first copy she accepts, or the reserved
    failure symbol ``rounds``, on which Bob outputs a uniformly random value."""

    base: ZeroCommProtocol
    rounds: int

    @property
    def nx(self):
        return self.base.nx

    @property
    def ny(self):
        return self.base.ny

    @property
    def nz(self):
        return self.base.nz

    @property
    def c(self) -> int:
        # ceil(log2(rounds + 1)): indices 0..rounds-1 plus the failure symbol
        return self.rounds.bit_length()

    @property
    def failure_prob(self) -> Fraction:
        return (1 - self.base.declared_eff) ** self.rounds


AnyProtocol = Union[ZeroCommProtocol, OneWayProtocol, BoostedProtocol]


@dataclass(frozen=True)
class ProtocolStats:
    per_input_eff: dict[tuple[int, int], Fraction]
    per_input_err: dict[tuple[int, int], Fraction]
    worst_err: Fraction | None
    eff: Fraction | None  # common non-abort probability, None if it varies
    undefined: tuple[tuple[int, int], ...] = ()  # defined cells where Alice always aborts

    @property
    def uniform(self) -> bool:
        return self.eff is not None


def _check_dims(p, f: PartialFunction):
    if (p.nx, p.ny, p.nz) != (f.nx, f.ny, f.nz):
        raise ValueError(f"protocol is {p.nx}x{p.ny}->{p.nz}, function is {f.nx}x{f.ny}->{f.nz}")


# Protocol conversions ---------------------------------------------------------

def compile_protocol(sol: PrimalSolution, f: PartialFunction, acc: AccuracyParams) -> ZeroCommProtocol:
    """Alice samples ``A`` with probability ``w_A / sum w`` and accepts iff ``x in A``;
    Bob answers ``z`` with probability ``w_{A,y,z} / w_A``."""
    check = verify_solution(f, acc, sol)
    if not check:
        raise ValueError("solution does not verify: " + "; ".join(check.lines()[:5]))
    total = sol.value
    atoms = []
    for A in sorted(sol.set_weights):
        wA = sol.set_weights[A]
        if wA == 0:
            continue
        rows = tuple(tuple(sol.cell_weights.get((A, y, z), ZERO) / wA for z in range(f.nz)) for y in range(f.ny))
        atoms.append(Atom(wA / total, A, rows))
    return ZeroCommProtocol(f.nx, f.ny, f.nz, tuple(atoms), 1 / total)


def merge_atoms(p: ZeroCommProtocol) -> ZeroCommProtocol:
    """Canonical form: one atom per distinct ``alice_set``, Bob rows mixed by weight."""
    groups: dict[int, list[Atom]] = {}
    for a in p.atoms:
        groups.setdefault(a.alice_set, []).append(a)
    atoms = []
    for A in sorted(groups):
        grp = groups[A]
        P = sum((a.prob for a in grp), ZERO)
        rows = tuple(
            tuple(sum((a.prob * a.bob_out[y][z] for a in grp), ZERO) / P for z in range(p.nz)) for y in range(p.ny)
        )
        atoms.append(Atom(P, A, rows))
    return ZeroCommProtocol(p.nx, p.ny, p.nz, tuple(atoms), p.declared_eff)


def extract_weights(p: ZeroCommProtocol) -> PrimalSolution:
    """LP weights ``w_A = (1/eff) Pr[A_r = A]`` and ``w_{A,y,z} = (1/eff) Pr[A_r = A, Bob says z]``."""
    if any(a.alice_set == 0 for a in p.atoms):
        raise ValueError("atoms with an empty alice_set are not supported")
    bad = p.uniformity_violations()
    if bad:
        raise ValueError(f"non-abort probability is not uniform: x={bad[0][0]} has {bad[0][1]}")
    inv = 1 / p.declared_eff
    sets, cells = {}, {}
    for a in merge_atoms(p).atoms:
        sets[a.alice_set] = a.prob * inv
        for y, row in enumerate(a.bob_out):
            for z, q in enumerate(row):
                if q:
                    cells[(a.alice_set, y, z)] = a.prob * q * inv
    return PrimalSolution(sets, cells)


def oneway_to_zerocomm(p: OneWayProtocol) -> ZeroCommProtocol:
    """Guess Alice's message uniformly; she accepts iff the guess is what she would send."""
    K = 1 << p.c
    atoms = []
    for s in p.strategies:
        for m in range(K):
            A = sum(1 << x for x in range(p.nx) if s.msg_fn[x] == m)
            rows = tuple(tuple(ONE if z == s.out_fn[m][y] else ZERO for z in range(p.nz)) for y in range(p.ny))
            atoms.append(Atom(s.prob / K, A, rows))
    return ZeroCommProtocol(p.nx, p.ny, p.nz, tuple(atoms), Fraction(1, K))


def rounds_needed(eff: Fraction, delta: Fraction, cap: int = DEFAULT_CAPS.max_boost_rounds) -> int:
    """Least ``T >= 1`` with ``(1 - eff)^T <= delta``, decided in exact arithmetic."""
    eff, delta = Fraction(eff), Fraction(delta)
    if not 0 < eff <= 1:
        raise ValueError("eff must lie in (0, 1]")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    q = 1 - eff
    if q == 0:
        return 1
    ok = lambda T: q**T <= delta  # noqa: E731
    T = max(1, math.ceil(math.log(delta) / math.log(q)))
    if T > cap + 1:
        raise CapExceeded(f"boosting needs about {T} rounds, cap is {cap}")
    while T > 1 and ok(T - 1):
        T -= 1
    while not ok(T):
        T += 1
    if T > cap:
        raise CapExceeded(f"boosting needs {T} rounds, cap is {cap}")
    return T


def boost(p: ZeroCommProtocol, f: PartialFunction, acc: AccuracyParams, caps: Caps = DEFAULT_CAPS) -> BoostedProtocol:
    """Repeat ``p`` until Alice accepts, with just enough rounds that all rounds abort
    with probability at most ``acc.delta``."""
    _check_dims(p, f)
    if acc.delta is None:
        raise ValueError("boosting needs delta")
    bad = p.uniformity_violations()
    if bad:
        raise ValueError(f"non-abort probability is not uniform: x={bad[0][0]} has {bad[0][1]}")
    return BoostedProtocol(p, rounds_needed(p.declared_eff, acc.delta, caps.max_boost_rounds))


# deterministic decompositions --------------------------------------------------

def coupled_pieces(p: ZeroCommProtocol) -> list[tuple[Fraction, int, tuple[int, ...]]]:
    """Split each atom's randomized Bob into deterministic pieces ``(prob, alice_set, z per y)``.

    One shared uniform value drives every column through its inverse CDF, so each
    per-column output distribution, and hence every per-cell statistic, is preserved.
    """
    pieces = []
    for a in p.atoms:
        cdfs = []
        cuts = {ZERO, ONE}
        for row in a.bob_out:
            acc, cdf = ZERO, []
            for q in row:
                acc += q
                cdf.append(acc)
                cuts.add(acc)
            cdfs.append(cdf)
        cuts = sorted(cuts)
        for lo, hi in zip(cuts, cuts[1:]):
            zvec = tuple(next(z for z, c in enumerate(cdf) if c > lo) for cdf in cdfs)
            pieces.append((a.prob * (hi - lo), a.alice_set, zvec))
    return pieces


def materialize(p: BoostedProtocol, caps: Caps = DEFAULT_CAPS) -> OneWayProtocol:
    """Expand a boosted protocol into an explicit strategy mixture (exponential in rounds)."""
    pieces = coupled_pieces(p.base)
    T, nz = p.rounds, p.nz
    count = len(pieces) ** T * nz
    if count > caps.max_atoms:
        raise CapExceeded(f"explicit boosted protocol would have {count} strategies, cap is {caps.max_atoms}")
    K = 1 << p.c
    strategies = []
    idx = [0] * T
    while True:
        prob = Fraction(1, nz)
        for i in idx:
            prob *= pieces[i][0]
        msg = []
        for x in range(p.nx):
            j = next((j for j, i in enumerate(idx) if pieces[i][1] >> x & 1), T)
            msg.append(j)
        for z0 in range(nz):
            out = [pieces[i][2] for i in idx] + [(z0,) * p.ny] + [(0,) * p.ny] * (K - T - 1)
            strategies.append(Strategy(prob, tuple(msg), tuple(out)))
        k = T - 1
        while k >= 0 and idx[k] == len(pieces) - 1:
            idx[k] = 0
            k -= 1
        if k < 0:
            break
        idx[k] += 1
    return OneWayProtocol(p.nx, p.ny, p.nz, p.c, tuple(strategies))


# exact statistics ------------------------------------------------------------------

def exact_stats(p: AnyProtocol, f: PartialFunction, caps: Caps = DEFAULT_CAPS) -> ProtocolStats:
    _check_dims(p, f)
    if isinstance(p, ZeroCommProtocol):
        if len(p.atoms) > caps.max_atoms:
            raise CapExceeded(f"{len(p.atoms)} atoms exceed the cap of {caps.max_atoms}")
        return _stats_zerocomm(p, f)
    if isinstance(p, OneWayProtocol):
        if len(p.strategies) > caps.max_atoms:
            raise CapExceeded(f"{len(p.strategies)} strategies exceed the cap of {caps.max_atoms}")
        err = {}
        for x, y in f.domain:
            v = f(x, y)
            err[(x, y)] = sum((s.prob for s in p.strategies if s.out_fn[s.msg_fn[x]][y] != v), ZERO)
        return _finish({(x, y): ONE for x in range(f.nx) for y in range(f.ny)}, err, ())
    if isinstance(p, BoostedProtocol):
        return _stats_boosted(p, f)
    raise TypeError(f"not a protocol: {type(p).__name__}")


def _finish(eff, err, undefined) -> ProtocolStats:
    vals = set(eff.values())
    common = vals.pop() if len(vals) == 1 else None
    worst = None if undefined else max(err.values(), default=ZERO)
    return ProtocolStats(eff, err, worst, common, tuple(undefined))


def _stats_zerocomm(p: ZeroCommProtocol, f: PartialFunction) -> ProtocolStats:
    e = [p.nonabort(x) for x in range(f.nx)]
    eff = {(x, y): e[x] for x in range(f.nx) for y in range(f.ny)}
    err, undefined = {}, []
    for x, y in f.domain:
        if e[x] == 0:
            undefined.append((x, y))
            continue
        v = f(x, y)
        right = sum((a.prob * a.bob_out[y][v] for a in p.atoms if a.alice_set >> x & 1), ZERO)
        err[(x, y)] = 1 - right / e[x]
    return _finish(eff, err, undefined)


def _stats_boosted(p: BoostedProtocol, f: PartialFunction) -> ProtocolStats:
    # rounds are i.i.d.: conditioned on some round being accepted, the accepted round is
    # distributed as the base protocol conditioned on non-abort
    base = _stats_zerocomm(p.base, f)
    guess_err = 1 - Fraction(1, f.nz)
    err = {}
    for x, y in f.domain:
        g = (1 - base.per_input_eff[(x, y)]) ** p.rounds
        cond = base.per_input_err.get((x, y), ZERO)
        err[(x, y)] = (1 - g) * cond + g * guess_err
    return _finish({(x, y): ONE for x in range(f.nx) for y in range(f.ny)}, err, ())


# Monte-Carlo --------------------------------------------------------------------

#: samples per randomness shard; shard k draws from SeedSequence(seed, spawn_key=(k,))
SHARD = 1 << 16
CONFIDENCE = 0.99


def hoeffding_halfwidth(n: int, confidence: float = CONFIDENCE) -> float:
    """Two-sided distribution-free half-width for a mean of ``n`` Bernoulli draws, capped at 1."""
    if n <= 0:
        return 1.0
    return min(1.0, math.sqrt(math.log(2 / (1 - confidence)) / (2 * n)))


@dataclass(frozen=True)
class SimulatedStats:
    samples: int
    seed: int
    eff: dict[tuple[int, int], Fraction]
    eff_halfwidth: dict[tuple[int, int], float]
    err: dict[tuple[int, int], Fraction]  # conditional on non-abort
    err_halfwidth: dict[tuple[int, int], float]
    worst_err: Fraction | None

    def disagreements(self, exact: ProtocolStats) -> list[str]:
        """Quantities of ``exact`` lying outside this estimate's half-width."""
        out = []
        for cell, e in exact.per_input_eff.items():
            if abs(float(self.eff[cell] - e)) > self.eff_halfwidth[cell]:
                out.append(f"eff{cell}")
        for cell, e in exact.per_input_err.items():
            if cell in self.err and abs(float(self.err[cell] - e)) > self.err_halfwidth[cell]:
                out.append(f"err{cell}")
        return out


class _ExactSampler:
    """Exact sampling from a finite rational distribution via uniform integer draws."""

    def __init__(self, probs: list[Fraction]):
        D = 1
        for q in probs:
            D = D * q.denominator // math.gcd(D, q.denominator)
        self.D = D
        nums = [int(q * D) for q in probs]
        cum, acc = [], 0
        for v in nums:
            acc += v
            cum.append(acc)
        self.cum_py = cum
        self.small = D < 2**62
        if self.small:
            self.cum = np.array(cum, dtype=np.int64)

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.small:
            u = rng.integers(0, self.D, size=size, dtype=np.int64)
            return np.searchsorted(self.cum, u, side="right")
        # big denominators: exact Python integers, seeded from the shard stream
        import bisect

        py = random.Random(int(rng.integers(0, 2**63)))
        n = int(np.prod(size))
        out = np.fromiter((bisect.bisect_right(self.cum_py, py.randrange(self.D)) for _ in range(n)), np.int64, n)
        return out.reshape(size)


def _shard_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k,))))


def _piece_tables(p, f):
    if isinstance(p, OneWayProtocol):
        full = (1 << p.nx) - 1
        probs = [s.prob for s in p.strategies]
        masks = np.full(len(probs), full, dtype=np.int64)
        outz = np.array(
            [[[s.out_fn[s.msg_fn[x]][y] for y in range(p.ny)] for x in range(p.nx)] for s in p.strategies],
            dtype=np.int64,
        ).reshape(len(probs), p.nx, p.ny)
        return probs, masks, outz
    base = p.base if isinstance(p, BoostedProtocol) else p
    pieces = coupled_pieces(base)
    probs = [q for q, _, _ in pieces]
    masks = np.array([A for _, A, _ in pieces], dtype=np.int64)
    zv = np.array([z for _, _, z in pieces], dtype=np.int64).reshape(len(pieces), base.ny)
    outz = np.repeat(zv[:, None, :], base.nx, axis=1)
    return probs, masks, outz


def simulate(p: AnyProtocol, f: PartialFunction, samples: int, seed: int) -> SimulatedStats:
    """Monte-Carlo estimate of per-cell non-abort and conditional error probabilities.

    Results depend only on ``(p, f, samples, seed)``.
    """
    _check_dims(p, f)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    probs, masks, outz = _piece_tables(p, f)
    sampler = _ExactSampler(probs)
    fvals = f.as_array()
    nx, ny = f.nx, f.ny
    nonabort = np.zeros(nx, dtype=np.int64)
    errs = np.zeros((nx, ny), dtype=np.int64)
    boosted = isinstance(p, BoostedProtocol)
    shard = SHARD if not boosted else max(1, min(SHARD, (1 << 22) // p.rounds))
    done, k = 0, 0
    while done < samples:
        n = min(shard, samples - done)
        rng = _shard_rng(seed, k)
        if boosted:
            draws = sampler.draw(rng, (n, p.rounds))
            fallback = rng.integers(0, f.nz, size=n, dtype=np.int64)
            _, e = _kernels.boost_tally(draws, fallback, masks, outz, fvals)
            nonabort += n
        else:
            idx = sampler.draw(rng, n)
            a, e = _kernels.tally(idx, masks, outz, fvals)
            nonabort += a
        errs += e
        done += n
        k += 1
    eff, effhw, err, errhw = {}, {}, {}, {}
    hw_all = hoeffding_halfwidth(samples)
    for x in range(nx):
        for y in range(ny):
            eff[(x, y)] = Fraction(int(nonabort[x]), samples)
            effhw[(x, y)] = hw_all
    for x, y in f.domain:
        n_ok = int(nonabort[x])
        errhw[(x, y)] = hoeffding_halfwidth(n_ok)
        if n_ok:
            err[(x, y)] = Fraction(int(errs[x, y]), n_ok)
    worst = max(err.values(), default=None) if len(err) == len(f.domain) else None
    if not f.domain:
        worst = ZERO
    return SimulatedStats(samples, seed, eff, effhw, err, errhw, worst)


# text serialization ------------------------------------------------------------

def _fmt_dist(row: Dist) -> str:
    return ",".join(f"{z}={format_rational(q)}" for z, q in enumerate(row) if q)


def _fmt_zc_atoms(p: ZeroCommProtocol) -> list[str]:
    return [
        f"{format_rational(a.prob)} {a.alice_set} " + ";".join(f"{y}:{_fmt_dist(r)}" for y, r in enumerate(a.bob_out))
        for a in p.atoms
    ]


def format_protocol(p: AnyProtocol) -> str:
    if isinstance(p, ZeroCommProtocol):
        lines = [f"protocol v1 zerocomm {p.nx} {p.ny} {p.nz} {format_rational(p.declared_eff)}"]
        lines += _fmt_zc_atoms(p)
    elif isinstance(p, OneWayProtocol):
        lines = [f"protocol v1 oneway {p.nx} {p.ny} {p.nz} {p.c}"]
        for s in p.strategies:
            msg = ",".join(map(str, s.msg_fn))
            out = ";".join(",".join(map(str, r)) for r in s.out_fn)
            lines.append(f"{format_rational(s.prob)} {msg} {out}")
    elif isinstance(p, BoostedProtocol):
        b = p.base
        lines = [f"protocol v1 boosted {b.nx} {b.ny} {b.nz} {p.rounds} {format_rational(b.declared_eff)}"]
        lines += _fmt_zc_atoms(b)
    else:
        raise TypeError(type(p).__name__)
    return "\n".join(lines) + "\n"


def _parse_zc_atom(line: str, ny: int, nz: int) -> Atom:
    prob, mask, body = line.split()
    rows = [[ZERO] * nz for _ in range(ny)]
    for part in body.split(";"):
        y, _, dist = part.partition(":")
        for item in filter(None, dist.split(",")):
            z, _, q = item.partition("=")
            rows[int(y)][int(z)] = parse_rational(q)
    return Atom(parse_rational(prob), int(mask), tuple(map(tuple, rows)))


def parse_protocol(text: str) -> AnyProtocol:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError("empty protocol file")
    head = lines[0].split()
    if head[:2] != ["protocol", "v1"] or len(head) < 3:
        raise ValueError("expected header 'protocol v1 <kind> ...'")
    kind = head[2]
    try:
        if kind == "zerocomm":
            nx, ny, nz = map(int, head[3:6])
            atoms = tuple(_parse_zc_atom(ln, ny, nz) for ln in lines[1:])
            return ZeroCommProtocol(nx, ny, nz, atoms, parse_rational(head[6]))
        if kind == "boosted":
            nx, ny, nz, T = map(int, head[3:7])
            atoms = tuple(_parse_zc_atom(ln, ny, nz) for ln in lines[1:])
            return BoostedProtocol(ZeroCommProtocol(nx, ny, nz, atoms, parse_rational(head[7])), T)
        if kind == "oneway":
            nx, ny, nz, c = map(int, head[3:7])
            strategies = []
            for ln in lines[1:]:
                prob, msg, out = ln.split()
                strategies.append(
                    Strategy(
                        parse_rational(prob),
                        tuple(int(t) for t in msg.split(",")),
                        tuple(tuple(int(t) for t in r.split(",")) for r in out.split(";")),
                    )
                )
            return OneWayProtocol(nx, ny, nz, c, tuple(strategies))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed {kind} protocol: {exc}") from None
    raise ValueError(f"unknown protocol kind {kind!r}")
