from fractions import Fraction

import pytest
from hypothesis import settings, strategies as st

from oneway_prt.fnspec import PartialFunction, generate

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@st.composite
def partial_functions(draw, max_nx=3, max_ny=3, max_nz=3, min_nz=1):
    nx = draw(st.integers(1, max_nx))
    ny = draw(st.integers(1, max_ny))
    nz = draw(st.integers(min_nz, max_nz))
    cell = st.one_of(st.none(), st.integers(0, nz - 1))
    rows = draw(st.lists(st.lists(cell, min_size=ny, max_size=ny), min_size=nx, max_size=nx))
    return PartialFunction(nx, ny, nz, tuple(map(tuple, rows)))


@pytest.fixture
def eq1():
    return generate("eq", 1)


@pytest.fixture
def const2():
    return generate("const", 2)


EPS = (Fraction(0), Fraction(1, 8), Fraction(1, 4), Fraction(1, 3))
