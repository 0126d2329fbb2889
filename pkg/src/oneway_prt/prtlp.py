"""The one-way partition bound LP: primal and dual programs, solutions, and witnesses.

Subsets ``A`` of ``X`` are bitmasks (bit ``x`` set iff ``x in A``). The empty set is
left out of the variable set since it enters no covering or correctness constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

from . import ratlp
from ._config import DEFAULT_CAPS, Caps, CapExceeded, format_rational, parse_rational
from .fnspec import PartialFunction
from .ratlp import Bound, Constraint, LinearProgram, Relation, Sense

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class AccuracyParams:
    """Worst-case error ``epsilon`` and optional boosting slack ``delta``.

    ``epsilon = 0`` is accepted as a boundary extension of the open interval (0, 1/2).
    """

    epsilon: Fraction
    delta: Fraction | None = None

    def __post_init__(self):
        eps = Fraction(self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        if not 0 <= eps < Fraction(1, 2):
            raise ValueError(f"epsilon must lie in [0, 1/2), got {eps}")
        if self.delta is not None:
            d = Fraction(self.delta)
            object.__setattr__(self, "delta", d)
            if not 0 < d < Fraction(1, 2):
                raise ValueError(f"delta must lie in (0, 1/2), got {d}")
            if eps + d >= 1:
                raise ValueError("epsilon + delta must be < 1")

    @property
    def is_extension(self) -> bool:
        return self.epsilon == 0


def subsets(nx: int) -> range:
    return range(1, 1 << nx)


def members(mask: int) -> Iterator[int]:
    x = 0
    while mask:
        if mask & 1:
            yield x
        mask >>= 1
        x += 1


class _Layout:
    """Column layout of the primal program."""

    def __init__(self, f: PartialFunction):
        self.f = f
        self.S = (1 << f.nx) - 1
        self.block = f.ny * f.nz
        self.num_vars = self.S * (1 + self.block)

    def set_col(self, A: int) -> int:
        return A - 1

    def cell_col(self, A: int, y: int, z: int) -> int:
        return self.S + (A - 1) * self.block + y * self.f.nz + z

    def decode(self, j: int) -> tuple:
        if j < self.S:
            return (j + 1,)
        k = j - self.S
        A = k // self.block + 1
        y, z = divmod(k % self.block, self.f.nz)
        return (A, y, z)


def primal_size(f: PartialFunction) -> int:
    return ((1 << f.nx) - 1) * (1 + f.ny * f.nz)


def _check_cap(f: PartialFunction, caps: Caps) -> None:
    n = primal_size(f)
    if n > caps.max_lp_vars:
        raise CapExceeded(
            f"partition-bound LP for nx={f.nx}, ny={f.ny}, nz={f.nz} has {n} variables, cap is {caps.max_lp_vars}"
        )


def build_primal(f: PartialFunction, acc: AccuracyParams, caps: Caps = DEFAULT_CAPS) -> LinearProgram:
    """Constraint order: ``nx`` covering rows, then ``(A, y)`` distribution rows, then
    one correctness row per defined cell in row-major order."""
    _check_cap(f, caps)
    L = _Layout(f)
    cons = []
    for x in range(f.nx):
        cons.append(Constraint(tuple((L.set_col(A), ONE) for A in subsets(f.nx) if A >> x & 1), Relation.EQ, ZERO + 1))
    for A in subsets(f.nx):
        for y in range(f.ny):
            row = [(L.cell_col(A, y, z), ONE) for z in range(f.nz)]
            row.append((L.set_col(A), -ONE))
            cons.append(Constraint(tuple(row), Relation.EQ, ZERO))
    target = 1 - acc.epsilon
    for x, y in f.domain:
        z = f(x, y)
        cons.append(
            Constraint(tuple((L.cell_col(A, y, z), ONE) for A in subsets(f.nx) if A >> x & 1), Relation.GE, target)
        )
    objective = tuple((L.set_col(A), ONE) for A in subsets(f.nx))
    return LinearProgram(L.num_vars, objective, Sense.MIN, tuple(cons))


class _DualLayout:
    def __init__(self, f: PartialFunction):
        self.f = f
        self.S = (1 << f.nx) - 1
        self.cells = f.domain
        self.mu_index = {c: i for i, c in enumerate(self.cells)}
        self.n_mu = len(self.cells)
        self.num_vars = self.n_mu + self.S * f.ny + f.nx

    def lam_ay(self, A: int, y: int) -> int:
        return self.n_mu + (A - 1) * self.f.ny + y

    def lam_x(self, x: int) -> int:
        return self.n_mu + self.S * self.f.ny + x


def build_dual(f: PartialFunction, acc: AccuracyParams, caps: Caps = DEFAULT_CAPS) -> LinearProgram:
    """Constraint order: one row per ``(A, y, z)``, then one row per ``A``."""
    _check_cap(f, caps)
    L = _DualLayout(f)
    cons = []
    for A in subsets(f.nx):
        for y in range(f.ny):
            for z in range(f.nz):
                row = [(L.mu_index[(x, y)], ONE) for x in members(A) if f(x, y) == z]
                row.append((L.lam_ay(A, y), -ONE))
                cons.append(Constraint(tuple(row), Relation.LE, ZERO))
    for A in subsets(f.nx):
        row = [(L.lam_ay(A, y), ONE) for y in range(f.ny)]
        row += [(L.lam_x(x), -ONE) for x in members(A)]
        cons.append(Constraint(tuple(row), Relation.LE, ONE))
    target = 1 - acc.epsilon
    objective = [(i, target) for i in range(L.n_mu)] + [(L.lam_x(x), -ONE) for x in range(f.nx)]
    bounds = (Bound.NONNEG,) * (L.num_vars - f.nx) + (Bound.FREE,) * f.nx
    return LinearProgram(L.num_vars, tuple(objective), Sense.MAX, tuple(cons), bounds)


@dataclass(frozen=True)
class PrimalSolution:
    """Sparse primal weights: ``set_weights[A]`` and ``cell_weights[(A, y, z)]``."""

    set_weights: dict[int, Fraction]
    cell_weights: dict[tuple[int, int, int], Fraction] = field(default_factory=dict)

    @property
    def value(self) -> Fraction:
        return sum(self.set_weights.values(), ZERO)


@dataclass(frozen=True)
class DualWitness:
    epsilon: Fraction
    mu: dict[tuple[int, int], Fraction]
    lambda_ay: dict[tuple[int, int], Fraction] = field(default_factory=dict)
    lambda_x: dict[int, Fraction] = field(default_factory=dict)

    @property
    def value(self) -> Fraction:
        return (1 - self.epsilon) * sum(self.mu.values(), ZERO) - sum(self.lambda_x.values(), ZERO)


@dataclass(frozen=True)
class Check:
    """Outcome of an exact constraint-by-constraint verification."""

    violations: tuple[tuple[str, tuple, Fraction], ...]
    value: Fraction | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def lines(self) -> list[str]:
        return [
            f"{name} {' '.join(map(str, key))} residual {format_rational(res)}" for name, key, res in self.violations
        ]


def _check_mask(f: PartialFunction, A: int) -> None:
    if not 0 < A < 1 << f.nx:
        raise ValueError(f"subset bitmask {A} outside 1..{(1 << f.nx) - 1}")


def verify_solution(f: PartialFunction, acc: AccuracyParams, sol: PrimalSolution) -> Check:
    for A in sol.set_weights:
        _check_mask(f, A)
    for A, y, z in sol.cell_weights:
        _check_mask(f, A)
        if not (0 <= y < f.ny and 0 <= z < f.nz):
            raise ValueError(f"cell weight index {(A, y, z)} out of range")
    bad = []
    for A, w in sol.set_weights.items():
        if w < 0:
            bad.append(("nonneg-set", (A,), -w))
    for key, w in sol.cell_weights.items():
        if w < 0:
            bad.append(("nonneg-cell", key, -w))
    for x in range(f.nx):
        s = sum((w for A, w in sol.set_weights.items() if A >> x & 1), ZERO)
        if s != 1:
            bad.append(("covering", (x,), 1 - s))
    dist: dict[tuple[int, int], Fraction] = {}
    for (A, y, z), w in sol.cell_weights.items():
        dist[(A, y)] = dist.get((A, y), ZERO) + w
    masks = sorted(set(sol.set_weights) | {A for A, _ in dist})
    for A in masks:
        wA = sol.set_weights.get(A, ZERO)
        for y in range(f.ny):
            s = dist.get((A, y), ZERO)
            if s != wA:
                bad.append(("distribution", (A, y), wA - s))
    target = 1 - acc.epsilon
    for x, y in f.domain:
        z = f(x, y)
        s = sum((w for (A, yy, zz), w in sol.cell_weights.items() if yy == y and zz == z and A >> x & 1), ZERO)
        if s < target:
            bad.append(("correctness", (x, y), target - s))
    return Check(tuple(bad), sol.value)


def verify_witness(f: PartialFunction, acc: AccuracyParams, w: DualWitness) -> Check:
    """On success ``Check.value`` is a certified lower bound on the partition bound."""
    for x, y in w.mu:
        if not (0 <= x < f.nx and 0 <= y < f.ny):
            raise ValueError(f"mu index {(x, y)} out of range")
        if f(x, y) is None:
            raise ValueError(f"mu index {(x, y)} is not a defined cell")
    for A, y in w.lambda_ay:
        _check_mask(f, A)
        if not 0 <= y < f.ny:
            raise ValueError(f"lambda index {(A, y)} out of range")
    for x in w.lambda_x:
        if not 0 <= x < f.nx:
            raise ValueError(f"lambda_x index {x} out of range")
    if w.epsilon != acc.epsilon:
        raise ValueError(f"witness built for epsilon={w.epsilon}, verifying at {acc.epsilon}")
    bad = []
    for key, v in w.mu.items():
        if v < 0:
            bad.append(("nonneg-mu", key, -v))
    for key, v in w.lambda_ay.items():
        if v < 0:
            bad.append(("nonneg-lambda", key, -v))
    lam_x = [w.lambda_x.get(x, ZERO) for x in range(f.nx)]
    for A in subsets(f.nx):
        total = ZERO
        for y in range(f.ny):
            lam = w.lambda_ay.get((A, y), ZERO)
            total += lam
            for z in range(f.nz):
                s = sum((w.mu.get((x, y), ZERO) for x in members(A) if f(x, y) == z), ZERO)
                if s > lam:
                    bad.append(("cell", (A, y, z), s - lam))
        cap = 1 + sum((lam_x[x] for x in members(A)), ZERO)
        if total > cap:
            bad.append(("subset", (A,), total - cap))
    return Check(tuple(bad), w.value)


def solution_from_point(f: PartialFunction, point) -> PrimalSolution:
    L = _Layout(f)
    sets, cells = {}, {}
    for j, v in enumerate(point):
        if v:
            key = L.decode(j)
            if len(key) == 1:
                sets[key[0]] = v
            else:
                cells[key] = v
    return PrimalSolution(sets, cells)


def witness_from_primal_duals(f: PartialFunction, acc: AccuracyParams, dual) -> DualWitness:
    """Translate the primal program's constraint multipliers into the dual's variables."""
    S = (1 << f.nx) - 1
    lam_x = {x: -dual[x] for x in range(f.nx) if dual[x]}
    lam_ay = {}
    k = f.nx
    for A in subsets(f.nx):
        for y in range(f.ny):
            if dual[k]:
                lam_ay[(A, y)] = -dual[k]
            k += 1
    assert k == f.nx + S * f.ny
    mu = {c: dual[k + i] for i, c in enumerate(f.domain) if dual[k + i]}
    return DualWitness(acc.epsilon, mu, lam_ay, lam_x)


def witness_from_dual_point(f: PartialFunction, acc: AccuracyParams, point) -> DualWitness:
    L = _DualLayout(f)
    mu = {c: point[i] for i, c in enumerate(L.cells) if point[i]}
    lam_ay = {}
    for A in subsets(f.nx):
        for y in range(f.ny):
            v = point[L.lam_ay(A, y)]
            if v:
                lam_ay[(A, y)] = v
    lam_x = {x: point[L.lam_x(x)] for x in range(f.nx) if point[L.lam_x(x)]}
    return DualWitness(acc.epsilon, mu, lam_ay, lam_x)


@dataclass(frozen=True)
class PrtResult:
    value: Fraction
    solution: PrimalSolution
    witness: DualWitness
    pivots: int = 0

    def __iter__(self):
        return iter((self.value, self.solution, self.witness))


def compute_prt(f: PartialFunction, acc: AccuracyParams, caps: Caps = DEFAULT_CAPS) -> PrtResult:
    """Solve the primal exactly; the witness comes from the same solve's multipliers.

    Both are re-verified against the constraint lists before returning.
    """
    lp = build_primal(f, acc, caps)
    out = ratlp.solve(lp, caps.max_pivots)
    if not out.optimal:
        raise RuntimeError(f"partition-bound LP reported {out.status.value}; it is always feasible and bounded")
    sol = solution_from_point(f, out.primal)
    wit = witness_from_primal_duals(f, acc, out.dual)
    sc, wc = verify_solution(f, acc, sol), verify_witness(f, acc, wit)
    if not sc or not wc or sol.value != out.value or wit.value != out.value:
        raise RuntimeError("solver output failed exact re-verification: " + "; ".join(sc.lines() + wc.lines()))
    return PrtResult(out.value, sol, wit, out.pivots)


def compute_prt_dual(f: PartialFunction, acc: AccuracyParams, caps: Caps = DEFAULT_CAPS) -> tuple[Fraction, DualWitness]:
    """Solve the hand-built dual program on its own."""
    lp = build_dual(f, acc, caps)
    out = ratlp.solve(lp, caps.max_pivots)
    if not out.optimal:
        raise RuntimeError(f"dual LP reported {out.status.value}")
    return out.value, witness_from_dual_point(f, acc, out.primal)


# text reports ---------------------------------------------------------------

def _header(kind: str, f: PartialFunction, acc: AccuracyParams, value: Fraction) -> list[str]:
    lines = [f"{kind} v1", f"{f.nx} {f.ny} {f.nz}", f"epsilon {format_rational(acc.epsilon)}"]
    if acc.is_extension:
        lines.append("# epsilon=0 is a boundary extension of the open interval (0,1/2)")
    lines.append(f"value {format_rational(value)}")
    return lines


def format_solution(f: PartialFunction, acc: AccuracyParams, sol: PrimalSolution) -> str:
    lines = _header("prt-solution", f, acc, sol.value)
    for A in sorted(sol.set_weights):
        lines.append(f"set {A} {format_rational(sol.set_weights[A])}")
    for key in sorted(sol.cell_weights):
        lines.append(f"cell {key[0]} {key[1]} {key[2]} {format_rational(sol.cell_weights[key])}")
    return "\n".join(lines) + "\n"


def format_witness(f: PartialFunction, acc: AccuracyParams, w: DualWitness) -> str:
    lines = _header("prt-witness", f, acc, w.value)
    for key in sorted(w.mu):
        lines.append(f"mu {key[0]} {key[1]} {format_rational(w.mu[key])}")
    for key in sorted(w.lambda_ay):
        lines.append(f"lam {key[0]} {key[1]} {format_rational(w.lambda_ay[key])}")
    for x in sorted(w.lambda_x):
        lines.append(f"lamx {x} {format_rational(w.lambda_x[x])}")
    return "\n".join(lines) + "\n"


def _records(text: str, kind: str):
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or lines[0] != [kind, "v1"]:
        raise ValueError(f"expected header '{kind} v1'")
    dims = tuple(int(t) for t in lines[1])
    eps = None
    body = []
    for toks in lines[2:]:
        if toks[0] == "epsilon":
            eps = parse_rational(toks[1])
        elif toks[0] == "value":
            continue
        else:
            body.append(toks)
    if eps is None:
        raise ValueError("missing epsilon line")
    return dims, eps, body


def parse_solution(text: str) -> PrimalSolution:
    _, _, body = _records(text, "prt-solution")
    sets, cells = {}, {}
    for toks in body:
        if toks[0] == "set" and len(toks) == 3:
            sets[int(toks[1])] = parse_rational(toks[2])
        elif toks[0] == "cell" and len(toks) == 5:
            cells[(int(toks[1]), int(toks[2]), int(toks[3]))] = parse_rational(toks[4])
        else:
            raise ValueError(f"unrecognised solution record {' '.join(toks)!r}")
    return PrimalSolution(sets, cells)


def parse_witness(text: str) -> DualWitness:
    _, eps, body = _records(text, "prt-witness")
    mu, lam, lamx = {}, {}, {}
    for toks in body:
        if toks[0] == "mu" and len(toks) == 4:
            mu[(int(toks[1]), int(toks[2]))] = parse_rational(toks[3])
        elif toks[0] == "lam" and len(toks) == 4:
            lam[(int(toks[1]), int(toks[2]))] = parse_rational(toks[3])
        elif toks[0] == "lamx" and len(toks) == 3:
            lamx[int(toks[1])] = parse_rational(toks[2])
        else:
            raise ValueError(f"unrecognised witness record {' '.join(toks)!r}")
    return DualWitness(eps, mu, lam, lamx)
