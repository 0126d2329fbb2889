"""Exact rational linear programming: a two-phase tableau simplex.

Arithmetic never leaves the rationals. Internally the tableau uses ``gmpy2.mpq`` when
it is importable (about an order of magnitude faster than ``fractions.Fraction``);
set ``ONEWAY_PRT_PURE_FRACTION=1`` to force the stdlib type. All values crossing the
public API are ``Fraction``.

Pivoting starts with the largest-coefficient rule and falls back to Bland's rule for
the remainder of the solve once a run of degenerate pivots is observed, so the
method always terminates.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from ._config import DEFAULT_CAPS, PivotLimitExceeded, format_rational

try:
    if os.environ.get("ONEWAY_PRT_PURE_FRACTION", "") not in ("", "0"):
        raise ImportError
    from gmpy2 import mpq as _Q

    def _to_fraction(q) -> Fraction:
        return Fraction(int(q.numerator), int(q.denominator))

    def _to_q(v: Fraction):
        return _Q(v.numerator, v.denominator)

except ImportError:  # pragma: no cover - exercised only without gmpy2
    _Q = Fraction

    def _to_fraction(q) -> Fraction:
        return q

    def _to_q(v: Fraction):
        return v


ZERO = Fraction(0)

#: consecutive degenerate pivots tolerated before switching to Bland's rule
DEGENERACY_SWITCH = 20


class Sense(enum.Enum):
    MIN = "min"
    MAX = "max"


class Relation(enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Bound(enum.Enum):
    NONNEG = ">=0"
    FREE = "free"


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


SparseRow = tuple[tuple[int, Fraction], ...]


def sparse(coeffs: Mapping[int, object] | Iterable[tuple[int, object]]) -> SparseRow:
    """Canonical sparse row: sorted indices, duplicate indices summed, zeros dropped."""
    acc: dict[int, Fraction] = {}
    items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
    for j, v in items:
        acc[int(j)] = acc.get(int(j), ZERO) + Fraction(v)
    return tuple((j, v) for j, v in sorted(acc.items()) if v != 0)


@dataclass(frozen=True)
class Constraint:
    coeffs: SparseRow
    rel: Relation
    rhs: Fraction

    def __post_init__(self):
        object.__setattr__(self, "coeffs", sparse(self.coeffs))
        object.__setattr__(self, "rhs", Fraction(self.rhs))

    def lhs(self, point: Sequence[Fraction]) -> Fraction:
        return sum((v * point[j] for j, v in self.coeffs), ZERO)


@dataclass(frozen=True)
class LinearProgram:
    num_vars: int
    objective: SparseRow
    sense: Sense
    constraints: tuple[Constraint, ...]
    bounds: tuple[Bound, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objective", sparse(self.objective))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        bounds = tuple(self.bounds) or (Bound.NONNEG,) * self.num_vars
        object.__setattr__(self, "bounds", bounds)
        if len(bounds) != self.num_vars:
            raise ValueError(f"{len(bounds)} bounds given for {self.num_vars} variables")
        used = set()
        for row in (self.objective, *(c.coeffs for c in self.constraints)):
            for j, _ in row:
                if not 0 <= j < self.num_vars:
                    raise ValueError(f"coefficient index {j} outside 0..{self.num_vars - 1}")
                used.add(j)
        if len(used) != self.num_vars:
            missing = sorted(set(range(self.num_vars)) - used)[:5]
            raise ValueError(f"variables never referenced: {missing}")

    def objective_value(self, point: Sequence[Fraction]) -> Fraction:
        return sum((v * point[j] for j, v in self.objective), ZERO)


@dataclass(frozen=True)
class LPOutcome:
    status: Status
    value: Fraction | None = None
    primal: tuple[Fraction, ...] = ()
    dual: tuple[Fraction, ...] = ()
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass(frozen=True)
class Violation:
    kind: str  # "constraint", "bound", "dual-sign", "reduced-cost", "gap", "slackness"
    index: int
    residual: Fraction

    def __str__(self):
        return f"{self.kind}[{self.index}] residual {format_rational(self.residual)}"


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.feasible


def check_point(lp: LinearProgram, point: Sequence) -> FeasibilityReport:
    """Every violated constraint or bound of ``lp`` at ``point``, with exact residuals."""
    if len(point) != lp.num_vars:
        raise ValueError(f"point has {len(point)} entries, program has {lp.num_vars} variables")
    point = [Fraction(v) for v in point]
    out = []
    for i, con in enumerate(lp.constraints):
        diff = con.lhs(point) - con.rhs
        if (con.rel is Relation.LE and diff > 0) or (con.rel is Relation.GE and diff < 0):
            out.append(Violation("constraint", i, abs(diff)))
        elif con.rel is Relation.EQ and diff != 0:
            out.append(Violation("constraint", i, diff))
    for j, b in enumerate(lp.bounds):
        if b is Bound.NONNEG and point[j] < 0:
            out.append(Violation("bound", j, -point[j]))
    return FeasibilityReport(tuple(out))


def check_dual(lp: LinearProgram, dual: Sequence) -> FeasibilityReport:
    """Dual feasibility of multipliers ``dual`` (one per constraint).

    Sign convention: for a minimisation, ``>=`` rows carry non-negative multipliers and
    ``<=`` rows non-positive ones, and the reduced costs ``c - A^T y`` are non-negative on
    non-negative variables and zero on free ones. Maximisation mirrors every sign.
    """
    if len(dual) != len(lp.constraints):
        raise ValueError(f"dual has {len(dual)} entries, program has {len(lp.constraints)} constraints")
    y = [Fraction(v) for v in dual]
    flip = 1 if lp.sense is Sense.MIN else -1
    out = []
    for i, con in enumerate(lp.constraints):
        s = flip * y[i]
        if (con.rel is Relation.GE and s < 0) or (con.rel is Relation.LE and s > 0):
            out.append(Violation("dual-sign", i, abs(y[i])))
    reduced = _reduced_costs(lp, y)
    for j, b in enumerate(lp.bounds):
        d = flip * reduced[j]
        if (b is Bound.NONNEG and d < 0) or (b is Bound.FREE and d != 0):
            out.append(Violation("reduced-cost", j, reduced[j]))
    return FeasibilityReport(tuple(out))


def _reduced_costs(lp: LinearProgram, y: Sequence[Fraction]) -> list[Fraction]:
    reduced = [ZERO] * lp.num_vars
    for j, v in lp.objective:
        reduced[j] += v
    for yi, con in zip(y, lp.constraints):
        if yi:
            for j, v in con.coeffs:
                reduced[j] -= yi * v
    return reduced


def dual_value(lp: LinearProgram, dual: Sequence) -> Fraction:
    return sum((Fraction(yi) * con.rhs for yi, con in zip(dual, lp.constraints)), ZERO)


def certify(lp: LinearProgram, outcome: LPOutcome) -> FeasibilityReport:
    """Exact optimality certificate check for an ``Optimal`` outcome.

    Verifies primal feasibility, dual feasibility, zero duality gap and complementary
    slackness. An empty report means the claimed optimum is proven.
    """
    if not outcome.optimal:
        raise ValueError("only optimal outcomes carry certificates")
    x = list(outcome.primal)
    y = list(outcome.dual)
    out = list(check_point(lp, x).violations) + list(check_dual(lp, y).violations)
    primal_obj = lp.objective_value(x)
    gap = primal_obj - dual_value(lp, y)
    if gap != 0 or primal_obj != outcome.value:
        out.append(Violation("gap", 0, gap if gap != 0 else primal_obj - outcome.value))
    for i, con in enumerate(lp.constraints):
        slack = con.lhs(x) - con.rhs
        if y[i] * slack != 0:
            out.append(Violation("slackness", i, y[i] * slack))
    for j, d in enumerate(_reduced_costs(lp, y)):
        if d * x[j] != 0:
            out.append(Violation("slackness", len(lp.constraints) + j, d * x[j]))
    return FeasibilityReport(tuple(out))


class _Tableau:
    """Dense rational tableau over the standard form ``A x = b, x >= 0, b >= 0``."""

    def __init__(self, rows, rhs, art_cols, cost2, ncols, max_pivots):
        self.m = len(rows)
        self.n = ncols
        self.rows = rows  # each row has n coefficients followed by the rhs
        self.basis = [-1] * self.m
        self.art = art_cols
        self.max_pivots = max_pivots
        self.pivots = 0
        self.degenerate_run = 0
        self.bland = False
        zero = _Q(0)
        for i in range(self.m):
            rows[i].append(rhs[i])
        # phase-two reduced costs: all slack/artificial costs are zero so c itself is reduced
        self.obj2 = list(cost2) + [zero]
        self.obj1 = [zero] * (self.n + 1)
        for j in art_cols:
            self.obj1[j] = _Q(1)

    def price_phase1(self, init_basis):
        self.basis = list(init_basis)
        for i, b in enumerate(self.basis):
            if b in self.art:
                row = self.rows[i]
                for j in range(self.n + 1):
                    if row[j]:
                        self.obj1[j] -= row[j]

    def pivot(self, r, s):
        self.pivots += 1
        if self.pivots > self.max_pivots:
            raise PivotLimitExceeded(f"simplex exceeded the pivot cap of {self.max_pivots}")
        prow = self.rows[r]
        a = prow[s]
        if a != 1:
            inv = 1 / a
            for j in range(self.n + 1):
                if prow[j]:
                    prow[j] *= inv
        nz = [j for j in range(self.n + 1) if prow[j]]
        for i in range(self.m):
            if i == r:
                continue
            row = self.rows[i]
            f = row[s]
            if f:
                for j in nz:
                    row[j] -= f * prow[j]
        for obj in (self.obj1, self.obj2):
            f = obj[s]
            if f:
                for j in nz:
                    obj[j] -= f * prow[j]
        self.basis[r] = s

    def run(self, obj, allowed) -> bool:
        """Pivot to optimality on ``obj``; ``False`` signals an unbounded direction."""
        while True:
            s = self._entering(obj, allowed)
            if s < 0:
                return True
            r = self._leaving(s)
            if r < 0:
                return False
            if self.rows[r][self.n] == 0:
                self.degenerate_run += 1
                if self.degenerate_run > DEGENERACY_SWITCH:
                    self.bland = True
            else:
                self.degenerate_run = 0
            self.pivot(r, s)

    def _entering(self, obj, allowed) -> int:
        best, best_j = 0, -1
        for j in allowed:
            v = obj[j]
            if v < 0:
                if self.bland:
                    return j
                if best_j < 0 or v < best:
                    best, best_j = v, j
        return best_j

    def _leaving(self, s) -> int:
        best_r, best_ratio = -1, None
        n = self.n
        for i in range(self.m):
            a = self.rows[i][s]
            if a > 0:
                ratio = self.rows[i][n] / a
                if (
                    best_r < 0
                    or ratio < best_ratio
                    or (ratio == best_ratio and self.basis[i] < self.basis[best_r])
                ):
                    best_r, best_ratio = i, ratio
        return best_r


def solve(lp: LinearProgram, max_pivots: int | None = None) -> LPOutcome:
    """Solve ``lp`` exactly.

    Returns an ``LPOutcome`` whose status is mathematical; hitting the pivot cap raises
    ``PivotLimitExceeded`` instead.
    """
    if max_pivots is None:
        max_pivots = DEFAULT_CAPS.max_pivots
    zero, one = _Q(0), _Q(1)
    # structural columns: a free variable is split into (plus, minus)
    col_of: list[tuple[int, int]] = []  # var -> (plus col, minus col or -1)
    ncols = 0
    for b in lp.bounds:
        if b is Bound.FREE:
            col_of.append((ncols, ncols + 1))
            ncols += 2
        else:
            col_of.append((ncols, -1))
            ncols += 1
    n_struct = ncols

    sign = 1 if lp.sense is Sense.MIN else -1
    m = len(lp.constraints)
    flips = []
    rels = []
    for con in lp.constraints:
        flip = -1 if con.rhs < 0 else 1
        rel = con.rel
        if flip < 0 and rel is not Relation.EQ:
            rel = Relation.GE if rel is Relation.LE else Relation.LE
        flips.append(flip)
        rels.append(rel)
    extra = 0
    for rel in rels:
        extra += 2 if rel is Relation.GE else 1
    ncols += extra

    rows = []
    rhs = []
    init_basis = []
    art_cols = set()
    next_col = n_struct
    for i, con in enumerate(lp.constraints):
        row = [zero] * ncols
        flip = flips[i]
        for j, v in con.coeffs:
            q = _to_q(v) * flip
            p, mcol = col_of[j]
            row[p] += q
            if mcol >= 0:
                row[mcol] -= q
        rel = rels[i]
        if rel is Relation.LE:
            row[next_col] = one
            init_basis.append(next_col)
            next_col += 1
        elif rel is Relation.GE:
            row[next_col] = -one
            row[next_col + 1] = one
            art_cols.add(next_col + 1)
            init_basis.append(next_col + 1)
            next_col += 2
        else:
            row[next_col] = one
            art_cols.add(next_col)
            init_basis.append(next_col)
            next_col += 1
        rows.append(row)
        rhs.append(_to_q(con.rhs) * flip)

    cost = [zero] * ncols
    for j, v in lp.objective:
        q = _to_q(v) * sign
        p, mcol = col_of[j]
        cost[p] += q
        if mcol >= 0:
            cost[mcol] -= q

    tab = _Tableau(rows, rhs, art_cols, cost, ncols, max_pivots)
    tab.price_phase1(init_basis)
    if art_cols:
        tab.run(tab.obj1, range(ncols))
        if tab.obj1[ncols] != 0:  # holds -(sum of artificials)
            return LPOutcome(Status.INFEASIBLE, pivots=tab.pivots)
        for i in range(m):
            if tab.basis[i] in art_cols:
                row = tab.rows[i]
                for j in range(ncols):
                    if j not in art_cols and row[j]:
                        tab.pivot(i, j)
                        break
    allowed = [j for j in range(ncols) if j not in art_cols]
    if not tab.run(tab.obj2, allowed):
        return LPOutcome(Status.UNBOUNDED, pivots=tab.pivots)

    colval = [zero] * ncols
    for i, b in enumerate(tab.basis):
        colval[b] = tab.rows[i][ncols]
    primal = []
    for p, mcol in col_of:
        v = colval[p] - (colval[mcol] if mcol >= 0 else zero)
        primal.append(_to_fraction(v))
    dual = []
    for i in range(m):
        y = -tab.obj2[init_basis[i]] * flips[i] * sign
        dual.append(_to_fraction(y))
    value = lp.objective_value(primal)
    return LPOutcome(Status.OPTIMAL, value, tuple(primal), tuple(dual), tab.pivots)


def dump_lp(lp: LinearProgram) -> str:
    """Line-oriented debugging dump; not a stable interchange format."""

    def row_text(row: SparseRow) -> str:
        return " ".join(f"{j}:{format_rational(v)}" for j, v in row)

    lines = [f"lp {lp.num_vars} {lp.sense.value}", "obj " + row_text(lp.objective)]
    for j, b in enumerate(lp.bounds):
        if b is Bound.FREE:
            lines.append(f"free {j}")
    for con in lp.constraints:
        lines.append(f"row {row_text(con.coeffs)} {con.rel.value} {format_rational(con.rhs)}")
    return "\n".join(lines) + "\n"
