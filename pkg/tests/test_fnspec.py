from fractions import Fraction

import pytest
from hypothesis import given

from oneway_prt._config import CapExceeded
from oneway_prt.fnspec import PartialFunction, PfnParseError, generate, parse_function, serialize_function

from conftest import partial_functions


def test_parse_eq1():
    f = parse_function("pfn v1\n2 2 2\n1 0\n0 1\n")
    assert f == generate("eq", 1)
    assert f.table == ((1, 0), (0, 1))


def test_parse_undefined_diagonal():
    f = parse_function("pfn v1\n2 2 2\n1 *\n* 1\n")
    assert f.domain == ((0, 0), (1, 1))
    assert f(0, 1) is None


def test_parse_comments_and_no_trailing_newline():
    f = parse_function("# header comment\npfn v1\n# dims\n2 1 3\n2\n*")
    assert f.table == ((2,), (None,))


@pytest.mark.parametrize(
    "text, lineno, fragment",
    [
        ("pfn v1\n2 2 2\n1 3\n0 1\n", 3, "out of range"),
        ("pfn v2\n2 2 2\n1 0\n0 1\n", 1, "header"),
        ("pfn v1\n2 2\n1 0\n0 1\n", 2, "3 integers"),
        ("pfn v1\n2 2 2\n1 0\n", 3, "expected 2 grid rows"),
        ("pfn v1\n2 2 2\n1 0\n0 1\n1 1\n", 5, "expected 2 grid rows"),
        ("pfn v1\n2 2 2\n1 0 1\n0 1\n", 3, "expected 2 tokens"),
        ("pfn v1\n2 2 2\n1 x\n0 1\n", 3, "neither"),
        ("pfn v1\n2 2 2\n1 -1\n0 1\n", 3, "neither"),
    ],
)
def test_parse_errors_carry_line_numbers(text, lineno, fragment):
    with pytest.raises(PfnParseError) as exc:
        parse_function(text)
    assert exc.value.lineno == lineno
    assert fragment in str(exc.value)


def test_parse_rejects_wide_x():
    text = "pfn v1\n21 1 2\n" + "0\n" * 21
    with pytest.raises(CapExceeded):
        parse_function(text)


def test_generators():
    assert generate("eq", 1).table == ((1, 0), (0, 1))
    idx = generate("index", 2)
    assert (idx.nx, idx.ny, idx.nz) == (4, 2, 2)
    assert idx.table == ((0, 0), (1, 0), (0, 1), (1, 1))
    gt = generate("gt", 2)
    assert all(gt(x, y) == int(x > y) for x in range(4) for y in range(4))
    for f in (generate("eq", 2), gt, idx):
        assert len(f.domain) == f.nx * f.ny


def test_random_is_deterministic():
    a = generate("random", 3, density=Fraction(1, 2), seed=7)
    b = generate("random", 3, density=Fraction(1, 2), seed=7)
    assert a == b
    assert all(v in (0, 1) for row in a.table for v in row if v is not None)
    assert generate("random", 6, density=Fraction(1), seed=1).is_total()


def test_generator_errors():
    with pytest.raises(ValueError):
        generate("parity", 2)
    with pytest.raises(CapExceeded):
        generate("eq", 5)
    with pytest.raises(ValueError):
        generate("random", 3, density=Fraction(0), seed=1)


def test_constructor_validates():
    with pytest.raises(ValueError):
        PartialFunction(1, 1, 2, ((2,),))
    with pytest.raises(ValueError):
        PartialFunction(2, 1, 2, ((0,),))


@given(partial_functions(max_nx=5, max_ny=5, max_nz=4))
def test_roundtrip(f):
    assert parse_function(serialize_function(f)) == f


@given(partial_functions())
def test_preimages_partition_domain(f):
    parts = [set(f.preimage(z)) for z in range(f.nz)]
    assert sum(map(len, parts)) == len(f.domain)
    assert set().union(*parts) == set(f.domain)
