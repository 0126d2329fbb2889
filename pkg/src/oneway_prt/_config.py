"""Resource caps, rational parsing helpers, and the shared error types."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from fractions import Fraction


class CapExceeded(RuntimeError):
    """A configured resource limit was hit; the computation was not attempted."""


class PivotLimitExceeded(CapExceeded):
    """The simplex pivot cap tripped before the solve finished."""


@dataclass(frozen=True)
class Caps:
    max_nx: int = 20
    max_lp_vars: int = 2**20
    max_pivots: int = 10**7
    max_boost_rounds: int = 2**20
    max_raw_msg_fns: int = 10**6
    max_rcc_cells: int = 36
    max_rcc_cost: int = 4
    max_atoms: int = 10**6

    @classmethod
    def from_env(cls, environ=None) -> "Caps":
        """Read overrides such as ``ONEWAY_PRT_MAX_PIVOTS=5000`` from the environment."""
        environ = os.environ if environ is None else environ
        overrides = {}
        for f in fields(cls):
            key = "ONEWAY_PRT_" + f.name.upper()
            if key in environ:
                overrides[f.name] = int(environ[key])
        return replace(cls(), **overrides)


DEFAULT_CAPS = Caps()


def parse_rational(text: str) -> Fraction:
    """Parse ``p/q`` or a bare integer. Decimal notation is refused."""
    s = text.strip()
    if not s or "." in s or "e" in s.lower():
        raise ValueError(f"expected a rational 'p/q' or integer, got {text!r}")
    num, slash, den = s.partition("/")
    try:
        p = int(num)
        q = int(den) if slash else 1
    except ValueError:
        raise ValueError(f"expected a rational 'p/q' or integer, got {text!r}") from None
    if q == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Fraction(p, q)


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"
