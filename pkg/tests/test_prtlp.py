from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.optimize import linprog

from oneway_prt._config import CapExceeded, Caps
from oneway_prt.fnspec import PartialFunction, generate
from oneway_prt.prtlp import (
    AccuracyParams,
    DualWitness,
    PrimalSolution,
    build_dual,
    build_primal,
    compute_prt,
    compute_prt_dual,
    format_solution,
    format_witness,
    parse_solution,
    parse_witness,
    solution_from_point,
    verify_solution,
    verify_witness,
)
from oneway_prt.ratlp import Relation, Sense, check_point
from oneway_prt.suite import corpus

from conftest import EPS, partial_functions

ZERO_EPS = AccuracyParams(F(0))


def singleton_solution(f):
    """w_{x} = 1 with Bob answering f(x, y) (0 where undefined)."""
    sets = {1 << x: F(1) for x in range(f.nx)}
    cells = {(1 << x, y, f(x, y) or 0): F(1) for x in range(f.nx) for y in range(f.ny)}
    return PrimalSolution(sets, cells)


def eq1_witness():
    # mu = 1 everywhere, lambda_{A,y} = 1, lambda_x = 1: value 4 - 2 = 2 at eps = 0
    return DualWitness(F(0), {(x, y): F(1) for x in range(2) for y in range(2)},
                       {(A, y): F(1) for A in (1, 2, 3) for y in range(2)}, {0: F(1), 1: F(1)})


def test_accuracy_params():
    with pytest.raises(ValueError):
        AccuracyParams(F(1, 2))
    with pytest.raises(ValueError):
        AccuracyParams(F(-1, 8))
    with pytest.raises(ValueError):
        AccuracyParams(F(1, 4), F(1, 2))
    assert AccuracyParams(F(0)).is_extension
    assert not AccuracyParams(F(1, 8), F(1, 8)).is_extension


def test_primal_shape_constant(const2):
    lp = build_primal(const2, AccuracyParams(F(1, 4)))
    assert lp.num_vars == 3 * (1 + 2 * 2)
    assert lp.sense is Sense.MIN
    rels = [c.rel for c in lp.constraints]
    assert rels == [Relation.EQ] * (2 + 3 * 2) + [Relation.GE] * 4


def test_dual_shape(eq1):
    lp = build_dual(eq1, ZERO_EPS)
    assert lp.sense is Sense.MAX
    assert lp.num_vars == 4 + 3 * 2 + 2
    assert len(lp.constraints) == 3 * 2 * 2 + 3


def test_size_cap():
    f = PartialFunction(21, 1, 2, tuple((0,) for _ in range(21)))
    with pytest.raises(CapExceeded, match="variables"):
        build_primal(f, ZERO_EPS)
    with pytest.raises(CapExceeded):
        build_dual(f, ZERO_EPS)
    with pytest.raises(CapExceeded):
        build_primal(generate("eq", 2), ZERO_EPS, Caps(max_lp_vars=10))


def test_eq1_oracle(eq1):
    # feasible primal of value 2 and feasible dual of value 2 pin the optimum
    sol = singleton_solution(eq1)
    assert verify_solution(eq1, ZERO_EPS, sol).ok and sol.value == 2
    w = eq1_witness()
    chk = verify_witness(eq1, ZERO_EPS, w)
    assert chk.ok and chk.value == 2
    res = compute_prt(eq1, ZERO_EPS)
    assert res.value == 2
    assert compute_prt_dual(eq1, ZERO_EPS)[0] == 2


def test_singleton_point_feasible_in_lp(eq1):
    lp = build_primal(eq1, ZERO_EPS)
    sol = singleton_solution(eq1)
    point = [F(0)] * lp.num_vars
    S = 3
    for A, w in sol.set_weights.items():
        point[A - 1] = w
    for (A, y, z), w in sol.cell_weights.items():
        point[S + (A - 1) * 4 + y * 2 + z] = w
    assert check_point(lp, point).feasible
    assert solution_from_point(eq1, point) == sol


def test_verify_solution_failures(eq1):
    full = PrimalSolution({3: F(1)}, {(3, 0, 1): F(1), (3, 1, 1): F(1)})
    chk = verify_solution(eq1, ZERO_EPS, full)
    assert not chk.ok
    assert {name for name, _, _ in chk.violations} == {"correctness"}
    empty = verify_solution(eq1, ZERO_EPS, PrimalSolution({}, {}))
    covering = [(k, r) for name, k, r in empty.violations if name == "covering"]
    assert covering == [((0,), F(1)), ((1,), F(1))]
    with pytest.raises(ValueError):
        verify_solution(eq1, ZERO_EPS, PrimalSolution({4: F(1)}))


def test_verify_witness(eq1):
    zero = verify_witness(eq1, ZERO_EPS, DualWitness(F(0), {}))
    assert zero.ok and zero.value == 0
    res = compute_prt(eq1, ZERO_EPS)
    chk = verify_witness(eq1, ZERO_EPS, res.witness)
    assert chk.ok and chk.value == 2
    w = eq1_witness()
    broken = DualWitness(w.epsilon, w.mu, {**w.lambda_ay, (1, 0): F(1, 2)}, w.lambda_x)
    names = [(n, k) for n, k, _ in verify_witness(eq1, ZERO_EPS, broken).violations]
    assert ("cell", (1, 0, 1)) in names
    with pytest.raises(ValueError):
        verify_witness(eq1, ZERO_EPS, DualWitness(F(0), {(2, 0): F(1)}))


def test_constant_is_one(const2):
    for e in EPS:
        res = compute_prt(const2, AccuracyParams(e))
        assert res.value == 1
        v, _ = compute_prt_dual(const2, AccuracyParams(e))
        assert v == 1


def test_eq1_epsilon_ordering(eq1):
    a = compute_prt(eq1, AccuracyParams(F(1, 4))).value
    b = compute_prt(eq1, ZERO_EPS).value
    assert a <= b


def _scipy_prt(f, eps):
    lp = build_primal(f, AccuracyParams(eps))
    n = lp.num_vars
    c = np.zeros(n)
    for j, v in lp.objective:
        c[j] = float(v)
    ub, bub, eq, beq = [], [], [], []
    for con in lp.constraints:
        row = np.zeros(n)
        for j, v in con.coeffs:
            row[j] = float(v)
        if con.rel is Relation.EQ:
            eq.append(row), beq.append(float(con.rhs))
        else:
            ub.append(-row), bub.append(-float(con.rhs))
    res = linprog(c, A_ub=np.array(ub) if ub else None, b_ub=bub or None, A_eq=np.array(eq), b_eq=beq, method="highs")
    assert res.status == 0
    return res.fun


@pytest.mark.parametrize("name,f", corpus(), ids=[n for n, _ in corpus()])
@pytest.mark.parametrize("eps", EPS, ids=str)
def test_corpus_strong_duality_and_float_oracle(name, f, eps):
    acc = AccuracyParams(eps)
    res = compute_prt(f, acc)
    dual_value, wit = compute_prt_dual(f, acc)
    assert res.value == dual_value
    assert verify_witness(f, acc, wit).ok and wit.value == res.value
    assert abs(float(res.value) - _scipy_prt(f, eps)) < 1e-8


@settings(max_examples=40)
@given(partial_functions(max_nx=3, max_ny=3, max_nz=3))
def test_properties_on_random_functions(f):
    vals = [compute_prt(f, AccuracyParams(e)).value for e in EPS]
    assert all(v >= 1 for v in vals)
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    if f.domain:
        assert compute_prt(f.restrict(f.domain[:1]), AccuracyParams(F(1, 4))).value <= vals[2]
    g = f.permute(list(range(f.nx))[::-1], list(range(f.ny))[::-1])
    assert compute_prt(g, AccuracyParams(F(1, 4))).value == vals[2]


@settings(max_examples=25)
@given(partial_functions(max_nx=3, max_ny=2, max_nz=2))
def test_strong_duality_random(f):
    acc = AccuracyParams(F(1, 8))
    assert compute_prt(f, acc).value == compute_prt_dual(f, acc)[0]


def test_reports_roundtrip():
    f = generate("gt", 2)
    acc = AccuracyParams(F(1, 3))
    res = compute_prt(f, acc)
    sol_text = format_solution(f, acc, res.solution)
    wit_text = format_witness(f, acc, res.witness)
    assert parse_solution(sol_text) == res.solution
    assert parse_witness(wit_text) == res.witness
    assert sol_text.splitlines()[:4] == ["prt-solution v1", "4 4 2", "epsilon 1/3", f"value {res.value.numerator}/{res.value.denominator}"]
    assert "boundary extension" in format_witness(f, ZERO_EPS, compute_prt(f, ZERO_EPS).witness)
