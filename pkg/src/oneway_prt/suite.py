"""Corpus-wide verification of every cross-module property, used by ``oneway-prt suite``."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

from . import exactrcc, protocols
from ._config import DEFAULT_CAPS, Caps, format_rational
from .fnspec import PartialFunction, generate, parse_function, serialize_function
from .prtlp import AccuracyParams, compute_prt, compute_prt_dual, verify_solution, verify_witness

EPSILONS = (Fraction(0), Fraction(1, 8), Fraction(1, 4), Fraction(1, 3))
RANDOM_SEEDS = (1, 2, 3, 4, 5)
RANDOM_DENSITY = Fraction(2, 3)


def corpus() -> list[tuple[str, PartialFunction]]:
    items = [(f"{k}({n})", generate(k, n)) for k, n in (("eq", 1), ("eq", 2), ("gt", 1), ("gt", 2), ("index", 2))]
    items += [
        (f"random(3,2/3,{s})", generate("random", 3, density=RANDOM_DENSITY, seed=s)) for s in RANDOM_SEEDS
    ]
    return items


def random_corpus() -> list[tuple[str, PartialFunction]]:
    return [(name, f) for name, f in corpus() if name.startswith("random")]


def constant_2x2() -> PartialFunction:
    return generate("const", 2)


@dataclass(frozen=True)
class Result:
    group: str
    case: str
    ok: bool
    detail: str = ""

    def __str__(self):
        return f"{'PASS' if self.ok else 'FAIL'} {self.group} {self.case}" + (f" {self.detail}" if self.detail else "")


def check_duality(f, eps, caps=DEFAULT_CAPS) -> tuple[bool, str]:
    acc = AccuracyParams(eps)
    res = compute_prt(f, acc, caps)
    dual_val, dual_wit = compute_prt_dual(f, acc, caps)
    ok = (
        res.value == dual_val
        and verify_witness(f, acc, res.witness).ok
        and verify_witness(f, acc, dual_wit).ok
        and dual_wit.value == res.value
    )
    return ok, f"primal={format_rational(res.value)} dual={format_rational(dual_val)}"


def check_compile_extract(f, eps, caps=DEFAULT_CAPS) -> tuple[bool, str]:
    acc = AccuracyParams(eps)
    res = compute_prt(f, acc, caps)
    zc = protocols.compile_protocol(res.solution, f, acc)
    st = protocols.exact_stats(zc, f)
    back = protocols.extract_weights(zc)
    again = protocols.compile_protocol(back, f, acc)
    ok = (
        st.eff is not None
        and st.eff * res.value == 1
        and st.worst_err <= eps
        and verify_solution(f, acc, back).ok
        and back.value == res.value
        and protocols.exact_stats(again, f) == st
    )
    return ok, f"eff={format_rational(st.eff) if st.eff is not None else 'non-uniform'} worst_err={st.worst_err}"


def check_oneway_conversion(f, eps, caps=DEFAULT_CAPS) -> tuple[bool, str]:
    rcc = exactrcc.exact_rcc(f, eps, caps=caps)
    mix = rcc.optimal_mix
    zc = protocols.oneway_to_zerocomm(mix)
    a, b = protocols.exact_stats(mix, f), protocols.exact_stats(zc, f)
    prt = compute_prt(f, AccuracyParams(eps), caps).value
    ok = b.eff == Fraction(1, 2**mix.c) and a.per_input_err == b.per_input_err and prt <= 2**rcc.c_star
    return ok, f"c={mix.c} eff={format_rational(b.eff)} prt={format_rational(prt)}"


def check_boosting(f, eps, delta, caps=DEFAULT_CAPS) -> tuple[bool, str]:
    acc = AccuracyParams(eps, delta)
    res = compute_prt(f, acc, caps)
    zc = protocols.compile_protocol(res.solution, f, acc)
    bp = protocols.boost(zc, f, acc, caps)
    T = bp.rounds
    q = 1 - zc.declared_eff
    least = q**T <= delta and (T == 1 or q ** (T - 1) > delta)
    st = protocols.exact_stats(bp, f)
    ok = least and bp.c == T.bit_length() and st.worst_err <= eps + delta
    return ok, f"T={T} c={bp.c} err={format_rational(st.worst_err)}"


def check_sandwich(f, eps, delta, caps=DEFAULT_CAPS) -> tuple[bool, str]:
    rep = exactrcc.verify_sandwich(f, AccuracyParams(eps, delta), caps)
    return rep.ok, "; ".join(str(line) for line in rep.lines if not line.ok) or f"c_boosted={rep.c_boosted}"


def check_properties(f: PartialFunction, caps=DEFAULT_CAPS) -> Iterator[tuple[str, bool, str]]:
    prts = [compute_prt(f, AccuracyParams(e), caps).value for e in EPSILONS]
    yield "prt>=1", all(v >= 1 for v in prts), ""
    yield "prt-monotone", all(a >= b for a, b in zip(prts, prts[1:])), " ".join(map(format_rational, prts))
    eps = Fraction(1, 4)
    base = exactrcc.exact_rcc(f, eps, caps=caps)
    gv = [exactrcc.min_error_at_cost(f, c, caps=caps)[0] for c in range(exactrcc.sufficient_cost(f) + 1)]
    yield "game-monotone", all(a >= b for a, b in zip(gv, gv[1:])) and gv[-1] == 0, " ".join(map(format_rational, gv))
    rp = list(range(f.nx))[::-1]
    cp = list(range(1, f.ny)) + [0]
    g = f.permute(rp, cp)
    gp = compute_prt(g, AccuracyParams(eps), caps).value
    gr = exactrcc.exact_rcc(g, eps, caps=caps)
    yield "permutation", gp == prts[2] and gr.game_values == base.game_values and gr.c_star == base.c_star, ""
    if f.domain:
        h = f.restrict([f.domain[0]])
        yield "shrink-domain", compute_prt(h, AccuracyParams(eps), caps).value <= prts[2], ""
    if f.nx * f.ny <= 9:
        same = all(
            exactrcc.min_error_at_cost(f, c, True, caps)[0] == exactrcc.min_error_at_cost(f, c, False, caps)[0]
            for c in range(exactrcc.sufficient_cost(f) + 1)
        )
        yield "pruning-complete", same, ""
    yield "pfn-roundtrip", parse_function(serialize_function(f)) == f, ""


def run_suite(caps: Caps = DEFAULT_CAPS, fail_fast: bool = True, emit: Callable[[Result], None] = print) -> bool:
    all_ok = True

    def record(group, case, ok, detail=""):
        nonlocal all_ok
        r = Result(group, case, ok, detail)
        emit(r)
        all_ok &= ok
        return ok or not fail_fast

    cases = corpus() + [("const(2)", constant_2x2())]
    for (name, f), eps in itertools.product(cases, EPSILONS):
        tag = f"{name} eps={format_rational(eps)}"
        if not record("duality", tag, *check_duality(f, eps, caps)):
            return False
        if not record("compile-extract", tag, *check_compile_extract(f, eps, caps)):
            return False
    eps = Fraction(1, 4)
    for name, f in [("eq(1)", generate("eq", 1))] + random_corpus():
        if not record("oneway-to-zerocomm", name, *check_oneway_conversion(f, eps, caps)):
            return False
    for delta in (Fraction(1, 4), Fraction(1, 8)):
        for name, f in cases:
            if not record("boosting", f"{name} delta={format_rational(delta)}", *check_boosting(f, eps, delta, caps)):
                return False
    for name, f in cases:
        if not record("sandwich", name, *check_sandwich(f, eps, Fraction(1, 8), caps)):
            return False
    for name, f in cases:
        for prop, ok, detail in check_properties(f, caps):
            if not record(prop, name, ok, detail):
                return False
    return all_ok
