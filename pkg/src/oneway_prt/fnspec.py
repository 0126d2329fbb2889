"""Partial functions ``f: X x Y -> Z`` on integer ranges, the ``.pfn`` format, and generators.

A table cell holds either an output value in ``range(nz)`` or ``None`` (undefined).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from ._config import DEFAULT_CAPS, Caps, CapExceeded

Cell = tuple[int, int]

MAGIC = "pfn v1"
UNDEFINED_TOKEN = "*"


class PfnParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class PartialFunction:
    nx: int
    ny: int
    nz: int
    table: tuple[tuple[int | None, ...], ...]

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError("nx, ny, nz must all be >= 1")
        table = tuple(tuple(row) for row in self.table)
        if len(table) != self.nx or any(len(row) != self.ny for row in table):
            raise ValueError(f"table shape does not match {self.nx}x{self.ny}")
        for x, row in enumerate(table):
            for y, v in enumerate(row):
                if v is None:
                    continue
                if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or not 0 <= v < self.nz:
                    raise ValueError(f"value {v!r} at ({x},{y}) outside range(nz={self.nz})")
        object.__setattr__(self, "table", tuple(tuple(None if v is None else int(v) for v in row) for row in table))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int | None]], nz: int | None = None) -> "PartialFunction":
        """Build from a nested list, inferring ``nz`` as ``max value + 1`` (at least 2) when unset."""
        rows = [list(r) for r in rows]
        if nz is None:
            vals = [v for r in rows for v in r if v is not None]
            nz = max(2, max(vals) + 1) if vals else 2
        return cls(len(rows), len(rows[0]) if rows else 0, nz, tuple(map(tuple, rows)))

    def __call__(self, x: int, y: int) -> int | None:
        return self.table[x][y]

    @cached_property
    def domain(self) -> tuple[Cell, ...]:
        """The defined cells, in row-major order."""
        return tuple((x, y) for x in range(self.nx) for y in range(self.ny) if self.table[x][y] is not None)

    def preimage(self, z: int) -> tuple[Cell, ...]:
        return tuple(c for c in self.domain if self.table[c[0]][c[1]] == z)

    def is_total(self) -> bool:
        return len(self.domain) == self.nx * self.ny

    def as_array(self) -> np.ndarray:
        """Integer array of shape ``(nx, ny)`` with ``-1`` marking undefined cells."""
        return np.array([[-1 if v is None else v for v in row] for row in self.table], dtype=np.int64).reshape(
            self.nx, self.ny
        )

    def permute(self, row_perm: Sequence[int] | None = None, col_perm: Sequence[int] | None = None) -> "PartialFunction":
        """Relabel inputs: the result maps ``(row_perm[x], col_perm[y])`` to ``f(x, y)``."""
        rp = list(range(self.nx)) if row_perm is None else list(row_perm)
        cp = list(range(self.ny)) if col_perm is None else list(col_perm)
        if sorted(rp) != list(range(self.nx)) or sorted(cp) != list(range(self.ny)):
            raise ValueError("row_perm/col_perm must be permutations")
        out = [[None] * self.ny for _ in range(self.nx)]
        for x in range(self.nx):
            for y in range(self.ny):
                out[rp[x]][cp[y]] = self.table[x][y]
        return PartialFunction(self.nx, self.ny, self.nz, tuple(map(tuple, out)))

    def restrict(self, drop: Sequence[Cell]) -> "PartialFunction":
        """Copy with the given cells made undefined."""
        dropped = set(drop)
        return PartialFunction(
            self.nx,
            self.ny,
            self.nz,
            tuple(tuple(None if (x, y) in dropped else v for y, v in enumerate(row)) for x, row in enumerate(self.table)),
        )


def serialize_function(f: PartialFunction) -> str:
    lines = [MAGIC, f"{f.nx} {f.ny} {f.nz}"]
    for row in f.table:
        lines.append(" ".join(UNDEFINED_TOKEN if v is None else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _content_lines(text: str) -> Iterator[tuple[int, list[str]]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, stripped.split()


def parse_function(text: str, caps: Caps = DEFAULT_CAPS) -> PartialFunction:
    lines = list(_content_lines(text))
    if not lines or lines[0][1] != MAGIC.split():
        raise PfnParseError(lines[0][0] if lines else 1, f"expected header {MAGIC!r}")
    if len(lines) < 2:
        raise PfnParseError(lines[0][0], "missing dimension line '<nx> <ny> <nz>'")
    lineno, dims = lines[1]
    if len(dims) != 3:
        raise PfnParseError(lineno, f"dimension line needs 3 integers, got {len(dims)}")
    try:
        nx, ny, nz = (int(t) for t in dims)
    except ValueError:
        raise PfnParseError(lineno, f"non-integer dimension in {' '.join(dims)!r}") from None
    if min(nx, ny, nz) < 1:
        raise PfnParseError(lineno, "dimensions must be positive")
    if nx > caps.max_nx:
        raise CapExceeded(f"nx={nx} exceeds the cap of {caps.max_nx} rows (2^nx subsets are enumerated downstream)")
    grid = lines[2:]
    if len(grid) != nx:
        where = grid[nx][0] if len(grid) > nx else (grid[-1][0] if grid else lineno)
        raise PfnParseError(where, f"expected {nx} grid rows, found {len(grid)}")
    rows = []
    for lineno, tokens in grid:
        if len(tokens) != ny:
            raise PfnParseError(lineno, f"expected {ny} tokens, found {len(tokens)}")
        row = []
        for tok in tokens:
            if tok == UNDEFINED_TOKEN:
                row.append(None)
                continue
            if not tok.isdigit():
                raise PfnParseError(lineno, f"token {tok!r} is neither a value nor '*'")
            v = int(tok)
            if v >= nz:
                raise PfnParseError(lineno, f"value {v} out of range for nz={nz}")
            row.append(v)
        rows.append(tuple(row))
    return PartialFunction(nx, ny, nz, tuple(rows))


GENERATORS = ("eq", "gt", "index", "random", "const")


def generate(
    kind: str,
    n: int,
    *,
    density: Fraction | None = None,
    seed: int | None = None,
    caps: Caps = DEFAULT_CAPS,
) -> PartialFunction:
    """Standard test functions.

    ``eq``/``gt`` act on ``n``-bit strings, ``index`` on an ``n``-bit string and a bit
    position, ``random`` on an ``n x n`` grid with each cell defined with probability
    ``density``. ``const`` is the all-zero ``n x n`` function.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if kind in ("eq", "gt", "index"):
        if 2**n > caps.max_nx:
            raise CapExceeded(f"{kind}({n}) has 2^{n} rows, cap is {caps.max_nx}")
        N = 2**n
        if kind == "eq":
            rows = [[int(x == y) for y in range(N)] for x in range(N)]
        elif kind == "gt":
            rows = [[int(x > y) for y in range(N)] for x in range(N)]
        else:
            rows = [[(x >> i) & 1 for i in range(n)] for x in range(N)]
        return PartialFunction.from_rows(rows, nz=2)
    if kind == "const":
        if n > caps.max_nx:
            raise CapExceeded(f"const({n}) exceeds the cap of {caps.max_nx} rows")
        return PartialFunction.from_rows([[0] * n for _ in range(n)], nz=2)
    if kind == "random":
        if density is None or seed is None:
            raise ValueError("random requires density and seed")
        density = Fraction(density)
        if not 0 < density <= 1:
            raise ValueError("density must lie in (0, 1]")
        if n > caps.max_nx:
            raise CapExceeded(f"random({n}) exceeds the cap of {caps.max_nx} rows")
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        rng = np.random.Generator(np.random.PCG64(seed))
        p, q = density.numerator, density.denominator
        rows = []
        for _ in range(n):
            row = []
            for _ in range(n):
                keep = int(rng.integers(0, q)) < p
                value = int(rng.integers(0, 2))
                row.append(value if keep else None)
            rows.append(row)
        return PartialFunction.from_rows(rows, nz=2)
    raise ValueError(f"unknown generator {kind!r}; choose from {', '.join(GENERATORS)}")
