import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oneway_prt import _kernels
from oneway_prt._config import CapExceeded, Caps
from oneway_prt.fnspec import generate
from oneway_prt.prtlp import AccuracyParams, PrimalSolution, compute_prt, verify_solution
from oneway_prt.protocols import (
    Atom,
    BoostedProtocol,
    OneWayProtocol,
    Strategy,
    ZeroCommProtocol,
    boost,
    compile_protocol,
    coupled_pieces,
    exact_stats,
    extract_weights,
    format_protocol,
    hoeffding_halfwidth,
    materialize,
    merge_atoms,
    oneway_to_zerocomm,
    parse_protocol,
    rounds_needed,
    simulate,
)
from oneway_prt.suite import corpus

from conftest import EPS, partial_functions

POINT = {0: (F(1), F(0)), 1: (F(0), F(1))}
ZERO_EPS = AccuracyParams(F(0))


def eq1_singletons():
    return PrimalSolution({1: F(1), 2: F(1)}, {(1, 0, 1): F(1), (1, 1, 0): F(1), (2, 0, 0): F(1), (2, 1, 1): F(1)})


def eq1_zc():
    return compile_protocol(eq1_singletons(), generate("eq", 1), ZERO_EPS)


def send_x_eq1():
    return OneWayProtocol(2, 2, 2, 1, (Strategy(F(1), (0, 1), ((1, 0), (0, 1))),))


def test_compile_eq1(eq1):
    p = eq1_zc()
    assert [(a.prob, a.alice_set) for a in p.atoms] == [(F(1, 2), 1), (F(1, 2), 2)]
    assert p.declared_eff == F(1, 2)
    st_ = exact_stats(p, eq1)
    assert st_.eff == F(1, 2) and st_.worst_err == 0


def test_compile_constant(const2):
    sol = PrimalSolution({3: F(1)}, {(3, 0, 0): F(1), (3, 1, 0): F(1)})
    p = compile_protocol(sol, const2, AccuracyParams(F(1, 4)))
    assert len(p.atoms) == 1 and p.atoms[0].prob == 1 and p.declared_eff == 1


def test_compile_rejects_infeasible(eq1):
    with pytest.raises(ValueError):
        compile_protocol(PrimalSolution({3: F(1)}, {(3, 0, 1): F(1), (3, 1, 1): F(1)}), eq1, ZERO_EPS)


def test_protocol_invariants_enforced():
    row = ((F(1), F(0)),)
    with pytest.raises(ValueError):
        ZeroCommProtocol(1, 1, 2, (Atom(F(1, 2), 1, row),), F(1))
    with pytest.raises(ValueError):
        ZeroCommProtocol(1, 1, 2, (Atom(F(1), 1, ((F(1, 2), F(1, 3)),)),), F(1))
    with pytest.raises(ValueError):
        OneWayProtocol(2, 1, 2, 0, (Strategy(F(1), (0, 1), ((0,),)),))


def test_extract_examples():
    two = ZeroCommProtocol(2, 1, 2, (Atom(F(1, 2), 1, (POINT[1],)), Atom(F(1, 2), 2, (POINT[0],))), F(1, 2))
    w = extract_weights(two)
    assert w.set_weights == {1: F(1), 2: F(1)} and w.value == 2
    assert w.cell_weights == {(1, 0, 1): F(1), (2, 0, 0): F(1)}
    one = ZeroCommProtocol(2, 1, 2, (Atom(F(1), 3, (POINT[0],)),), F(1))
    assert extract_weights(one).set_weights == {3: F(1)}


def test_extract_rejects_bad_protocols():
    empty = ZeroCommProtocol(1, 1, 2, (Atom(F(1, 2), 0, (POINT[0],)), Atom(F(1, 2), 1, (POINT[0],))), F(1, 2))
    with pytest.raises(ValueError, match="empty"):
        extract_weights(empty)
    skew = ZeroCommProtocol(2, 1, 2, (Atom(F(1, 2), 1, (POINT[0],)), Atom(F(1, 2), 3, (POINT[0],))), F(1, 2))
    with pytest.raises(ValueError, match="uniform"):
        extract_weights(skew)


def test_merge_atoms_mixes_bob():
    p = ZeroCommProtocol(1, 1, 2, (Atom(F(1, 4), 1, (POINT[0],)), Atom(F(3, 4), 1, (POINT[1],))), F(1))
    m = merge_atoms(p)
    assert m.atoms == (Atom(F(1), 1, ((F(1, 4), F(3, 4)),)),)
    assert exact_stats(m, generate("const", 1)) == exact_stats(p, generate("const", 1))


@pytest.mark.parametrize("name,f", corpus()[:5], ids=[n for n, _ in corpus()[:5]])
@pytest.mark.parametrize("eps", EPS, ids=str)
def test_compile_extract_roundtrip(name, f, eps):
    acc = AccuracyParams(eps)
    res = compute_prt(f, acc)
    p = compile_protocol(res.solution, f, acc)
    s = exact_stats(p, f)
    assert s.eff * res.value == 1 and s.worst_err <= eps
    back = extract_weights(p)
    assert verify_solution(f, acc, back).ok and back.value == res.value
    assert exact_stats(compile_protocol(back, f, acc), f) == s


def test_oneway_to_zerocomm_examples(eq1):
    p = oneway_to_zerocomm(send_x_eq1())
    assert p.declared_eff == F(1, 2) and len(p.atoms) == 2
    s = exact_stats(p, eq1)
    assert s.eff == F(1, 2) and all(v == 0 for v in s.per_input_err.values())
    c0 = OneWayProtocol(2, 2, 2, 0, (Strategy(F(1), (0, 0), ((1, 1),)),))
    assert oneway_to_zerocomm(c0).declared_eff == 1


@st.composite
def oneway_protocols(draw, f):
    c = draw(st.integers(0, 2))
    K = 1 << c
    n = draw(st.integers(1, 3))
    weights = [draw(st.integers(1, 5)) for _ in range(n)]
    total = sum(weights)
    strategies = []
    for w in weights:
        msg = tuple(draw(st.integers(0, K - 1)) for _ in range(f.nx))
        out = tuple(tuple(draw(st.integers(0, f.nz - 1)) for _ in range(f.ny)) for _ in range(K))
        strategies.append(Strategy(F(w, total), msg, out))
    return OneWayProtocol(f.nx, f.ny, f.nz, c, tuple(strategies))


@settings(max_examples=50)
@given(st.data())
def test_oneway_to_zerocomm_property(data):
    f = data.draw(partial_functions(max_nx=3, max_ny=3, max_nz=3))
    p = data.draw(oneway_protocols(f))
    a, b = exact_stats(p, f), exact_stats(oneway_to_zerocomm(p), f)
    assert b.eff == F(1, 2**p.c)
    assert a.per_input_err == b.per_input_err and a.worst_err == b.worst_err


def test_rounds_needed():
    assert rounds_needed(F(1, 2), F(1, 4)) == 2
    assert rounds_needed(F(1, 2), F(1, 8)) == 3
    assert rounds_needed(F(1), F(1, 8)) == 1
    assert (2).bit_length() == 2 and (3).bit_length() == 2
    with pytest.raises(CapExceeded):
        rounds_needed(F(1, 10**9), F(1, 4), cap=2**20)


@given(st.fractions(F(1, 50), F(1)), st.fractions(F(1, 1000), F(49, 100)))
def test_rounds_least_and_bounded(eff, delta):
    T = rounds_needed(eff, delta)
    q = 1 - eff
    assert q**T <= delta
    assert T == 1 or q ** (T - 1) > delta
    assert T <= math.ceil(math.log(1 / delta) / eff)
    c = T.bit_length()
    assert c == math.ceil(math.log2(T + 1))
    assert c <= math.ceil(math.log2(1 / eff)) + math.ceil(math.log2(math.log(1 / delta))) + 2


def test_boost_eff_one(const2):
    p = ZeroCommProtocol(2, 2, 2, (Atom(F(1), 3, (POINT[0], POINT[0])),), F(1))
    bp = boost(p, const2, AccuracyParams(F(1, 4), F(1, 8)))
    assert bp.rounds == 1
    assert exact_stats(bp, const2).worst_err == 0


def test_boost_requires_delta(eq1):
    with pytest.raises(ValueError):
        boost(eq1_zc(), eq1, ZERO_EPS)


@pytest.mark.parametrize("delta,T", [(F(1, 4), 2), (F(1, 8), 3)])
def test_boost_eq1(eq1, delta, T):
    bp = boost(eq1_zc(), eq1, AccuracyParams(F(0), delta))
    assert bp.rounds == T and bp.c == 2
    s = exact_stats(bp, eq1)
    assert s.worst_err == F(1, 2) * F(1, 2**T)
    assert s.worst_err <= delta


@pytest.mark.parametrize("name,f", [c for c in corpus() if c[1].nx <= 2 or c[0].startswith("random")][:4])
def test_boost_analytic_matches_enumeration(name, f):
    acc = AccuracyParams(F(1, 4), F(1, 4))
    p = compile_protocol(compute_prt(f, acc).solution, f, acc)
    bp = boost(p, f, acc)
    explicit = materialize(bp, Caps(max_atoms=10**5))
    assert exact_stats(explicit, f).per_input_err == exact_stats(bp, f).per_input_err


def test_materialize_cap(eq1):
    with pytest.raises(CapExceeded):
        materialize(BoostedProtocol(eq1_zc(), 30))


def test_exact_stats_uniform_bob():
    f = generate("const", 2)
    half = (F(1, 2), F(1, 2))
    p = ZeroCommProtocol(2, 2, 2, (Atom(F(1), 3, (half, half)),), F(1))
    assert exact_stats(p, f).worst_err == F(1, 2)


def test_exact_stats_flags_nonuniform_and_undefined(eq1):
    p = ZeroCommProtocol(2, 2, 2, (Atom(F(1), 1, (POINT[1], POINT[0])),), F(1))
    s = exact_stats(p, eq1)
    assert s.eff is None and not s.uniform
    assert s.undefined == ((1, 0), (1, 1)) and s.worst_err is None
    assert p.uniformity_violations() == [(1, F(0))]


def test_coupled_pieces_preserve_marginals():
    rows = ((F(1, 3), F(2, 3), F(0)), (F(1, 2), F(1, 4), F(1, 4)))
    p = ZeroCommProtocol(1, 2, 3, (Atom(F(1), 1, rows),), F(1))
    pieces = coupled_pieces(p)
    assert sum(q for q, _, _ in pieces) == 1
    for y in range(2):
        for z in range(3):
            assert sum(q for q, _, zv in pieces if zv[y] == z) == rows[y][z]


def test_serialization_roundtrip(eq1):
    zc = eq1_zc()
    bp = boost(zc, eq1, AccuracyParams(F(0), F(1, 8)))
    for p in (zc, send_x_eq1(), bp, materialize(bp)):
        assert parse_protocol(format_protocol(p)) == p
    assert format_protocol(zc).splitlines()[1] == "1/2 1 0:1=1/1;1:0=1/1"
    with pytest.raises(ValueError):
        parse_protocol("protocol v1 zerocomm 2 2 2 1/2\n1/2 1\n")


# Monte-Carlo ---------------------------------------------------------------


def test_simulate_deterministic(eq1):
    a = simulate(eq1_zc(), eq1, 5000, 11)
    b = simulate(eq1_zc(), eq1, 5000, 11)
    assert a == b
    assert simulate(eq1_zc(), eq1, 5000, 12) != a


def test_simulate_single_sample(eq1):
    s = simulate(eq1_zc(), eq1, 1, 0)
    assert set(s.eff_halfwidth.values()) == {1.0}
    assert set(s.err_halfwidth.values()) == {1.0}


def test_simulate_eff_half(eq1):
    s = simulate(eq1_zc(), eq1, 10**5, 2024)
    tol = 3 * math.sqrt(0.25 / 10**5)
    assert all(abs(float(v) - 0.5) <= tol for v in s.eff.values())
    assert all(v == 0 for v in s.err.values())


def test_simulate_samples_validation(eq1):
    with pytest.raises(ValueError):
        simulate(eq1_zc(), eq1, 0, 1)


def test_simulate_coverage_aggregate():
    f = generate("random", 3, density=F(2, 3), seed=1)
    acc = AccuracyParams(F(1, 4))
    p = compile_protocol(compute_prt(f, acc).solution, f, acc)
    exact = exact_stats(p, f)
    quantities = misses = 0
    for seed in range(60):
        sim = simulate(p, f, 400, seed)
        quantities += len(exact.per_input_eff) + len(exact.per_input_err)
        misses += len(sim.disagreements(exact))
    assert misses <= 0.01 * quantities


def test_simulate_big_denominators():
    f = generate("const", 1)
    big = F(1, 2**70)
    p = ZeroCommProtocol(1, 1, 2, (Atom(big, 1, (POINT[1],)), Atom(1 - big, 1, (POINT[0],))), F(1))
    s = simulate(p, f, 200, 5)
    assert s.err[(0, 0)] == 0  # the error branch has probability 2^-70


def test_hoeffding():
    assert hoeffding_halfwidth(1) == 1.0
    assert hoeffding_halfwidth(0) == 1.0
    assert abs(hoeffding_halfwidth(10**5) - math.sqrt(math.log(200) / 2e5)) < 1e-15


@pytest.fixture(params=["numpy", "numba"])
def kernel_backend(request):
    old = _kernels.backend()
    if request.param == "numba" and not _kernels.HAVE_NUMBA:
        pytest.skip("numba unavailable")
    _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(old)


def test_backends_agree_on_simulation(kernel_backend):
    f = generate("gt", 2)
    acc = AccuracyParams(F(1, 8), F(1, 8))
    p = compile_protocol(compute_prt(f, acc).solution, f, acc)
    bp = boost(p, f, acc)
    got = (simulate(p, f, 3000, 9), simulate(bp, f, 3000, 9), simulate(send_x_eq1(), generate("eq", 1), 100, 9))
    _kernels.set_backend("numpy" if kernel_backend == "numba" else "numba")
    assert got == (simulate(p, f, 3000, 9), simulate(bp, f, 3000, 9), simulate(send_x_eq1(), generate("eq", 1), 100, 9))


@settings(max_examples=30)
@given(st.integers(1, 60), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_kernels_agree(n, L, seed):
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba unavailable")
    rng = np.random.default_rng(seed)
    E = rng.integers(0, 2, size=(n, L))
    masks = rng.integers(0, 8, size=5)
    outz = rng.integers(0, 2, size=(5, 3, 2))
    fvals = rng.integers(-1, 2, size=(3, 2))
    idx = rng.integers(0, 5, size=n)
    draws = rng.integers(0, 5, size=(n, 3))
    fb = rng.integers(0, 2, size=n)
    res = {}
    old = _kernels.backend()
    for b in ("numpy", "numba"):
        _kernels.set_backend(b)
        res[b] = (
            _kernels.pareto_keep(E),
            _kernels.tally(idx, masks, outz, fvals),
            _kernels.boost_tally(draws, fb, masks, outz, fvals),
        )
    _kernels.set_backend(old)
    a, b = res["numpy"], res["numba"]
    assert np.array_equal(a[0], b[0])
    for x, y in zip(a[1] + a[2], b[1] + b[2]):
        assert np.array_equal(x, y)


def test_pareto_keep_oracle():
    E = np.array([[1, 0], [0, 1], [1, 1], [0, 1], [1, 0]])
    # brute force: keep i unless some j is <= pointwise and (different, or equal with j < i)
    want = [
        not any((E[j] <= E[i]).all() and ((E[j] != E[i]).any() or j < i) for j in range(len(E)) if j != i)
        for i in range(len(E))
    ]
    assert list(_kernels.pareto_keep(E)) == want == [True, True, False, False, False]
