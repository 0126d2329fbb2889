"""Integer kernels for strategy pruning and Monte-Carlo tallying.

Each kernel has a numba ``@njit`` body and a pure-numpy body with identical integer
results. The numba path is used when numba imports and ``ONEWAY_PRT_NO_NUMBA`` is unset
(or ``0``); ``set_backend`` switches at runtime for benchmarks and equivalence tests.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

_use_numba = HAVE_NUMBA and os.environ.get("ONEWAY_PRT_NO_NUMBA", "") in ("", "0")

#: bound on temporaries built by the numpy fallbacks (elements)
_CHUNK_ELEMS = 1 << 22


def backend() -> str:
    return "numba" if _use_numba else "numpy"


def set_backend(name: str) -> None:
    global _use_numba
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    if name not in ("numba", "numpy"):
        raise ValueError(name)
    _use_numba = name == "numba"


# Pareto dominance ----------------------------------------------------------

def _pareto_keep_np(E: np.ndarray) -> np.ndarray:
    n, L = E.shape
    keep = np.ones(n, dtype=np.bool_)
    if n == 0:
        return keep
    step = max(1, _CHUNK_ELEMS // max(1, n * max(L, 1)))
    idx = np.arange(n)
    for lo in range(0, n, step):
        blk = E[lo : lo + step]
        le = (E[None, :, :] <= blk[:, None, :]).all(axis=2)  # le[i, j]: E[j] <= E[lo+i]
        eq = (E[None, :, :] == blk[:, None, :]).all(axis=2)
        rows = idx[lo : lo + step]
        # strictly dominated, or an exact duplicate of an earlier row
        dom = (le & ~eq) | (eq & (idx[None, :] < rows[:, None]))
        keep[lo : lo + step] = ~dom.any(axis=1)
    return keep


def _pareto_keep_nb_impl(E):
    n, L = E.shape
    keep = np.ones(n, dtype=np.bool_)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            le = True
            same = True
            for k in range(L):
                if E[j, k] > E[i, k]:
                    le = False
                    break
                if E[j, k] != E[i, k]:
                    same = False
            if le and (not same or j < i):
                keep[i] = False
                break
    return keep


# zero-communication / one-way tallies --------------------------------------

def _tally_np(idx, masks, outz, fvals):
    """``nonabort[x]`` and ``errs[x, y]`` over the sampled piece indices ``idx``."""
    R, nx, ny = outz.shape
    counts = np.bincount(idx, minlength=R).astype(np.int64)
    member = ((masks[:, None] >> np.arange(nx)[None, :]) & 1).astype(np.int64)  # (R, nx)
    nonabort = counts @ member
    wrong = (outz != fvals[None, :, :]) & (fvals[None, :, :] >= 0)
    errs = np.einsum("r,rx,rxy->xy", counts, member, wrong.astype(np.int64))
    return nonabort, errs


def _tally_nb_impl(idx, masks, outz, fvals):
    R, nx, ny = outz.shape
    counts = np.zeros(R, dtype=np.int64)
    for s in range(idx.shape[0]):
        counts[idx[s]] += 1
    nonabort = np.zeros(nx, dtype=np.int64)
    errs = np.zeros((nx, ny), dtype=np.int64)
    for r in range(R):
        k = counts[r]
        if k == 0:
            continue
        m = masks[r]
        for x in range(nx):
            if (m >> x) & 1:
                nonabort[x] += k
                for y in range(ny):
                    v = fvals[x, y]
                    if v >= 0 and outz[r, x, y] != v:
                        errs[x, y] += k
    return nonabort, errs


def _boost_tally_np(draws, fallback, masks, outz, fvals):
    """Error counts for the repeat-until-non-abort protocol.

    ``draws[s, j]`` is the piece used in round ``j`` of sample ``s`` and ``fallback[s]``
    the output used when every round aborts.
    """
    N, T = draws.shape
    R, nx, ny = outz.shape
    errs = np.zeros((nx, ny), dtype=np.int64)
    failures = np.zeros(nx, dtype=np.int64)
    step = max(1, _CHUNK_ELEMS // max(1, T * nx))
    bits = np.arange(nx)
    for lo in range(0, N, step):
        d = draws[lo : lo + step]
        fb = fallback[lo : lo + step]
        hit = ((masks[d][:, :, None] >> bits[None, None, :]) & 1).astype(bool)  # (n, T, nx)
        any_hit = hit.any(axis=1)
        first = hit.argmax(axis=1)  # (n, nx)
        r = np.take_along_axis(d, first, axis=1)  # (n, nx)
        z = outz[r, bits[None, :], :]  # (n, nx, ny)
        z = np.where(any_hit[:, :, None], z, fb[:, None, None])
        wrong = (z != fvals[None]) & (fvals[None] >= 0)
        errs += wrong.sum(axis=0)
        failures += (~any_hit).sum(axis=0)
    return failures, errs


def _boost_tally_nb_impl(draws, fallback, masks, outz, fvals):
    N, T = draws.shape
    R, nx, ny = outz.shape
    errs = np.zeros((nx, ny), dtype=np.int64)
    failures = np.zeros(nx, dtype=np.int64)
    for s in range(N):
        for x in range(nx):
            r = -1
            for j in range(T):
                if (masks[draws[s, j]] >> x) & 1:
                    r = draws[s, j]
                    break
            if r < 0:
                failures[x] += 1
            for y in range(ny):
                v = fvals[x, y]
                if v < 0:
                    continue
                z = outz[r, x, y] if r >= 0 else fallback[s]
                if z != v:
                    errs[x, y] += 1
    return failures, errs


if HAVE_NUMBA:
    _pareto_keep_nb = numba.njit(cache=True)(_pareto_keep_nb_impl)
    _tally_nb = numba.njit(cache=True)(_tally_nb_impl)
    _boost_tally_nb = numba.njit(cache=True)(_boost_tally_nb_impl)


def pareto_keep(E: np.ndarray) -> np.ndarray:
    """Mask of rows not weakly dominated by another row (first copy of duplicates kept)."""
    E = np.ascontiguousarray(E, dtype=np.int64)
    if _use_numba:
        return _pareto_keep_nb(E)
    return _pareto_keep_np(E)


def tally(idx, masks, outz, fvals):
    args = (
        np.ascontiguousarray(idx, dtype=np.int64),
        np.ascontiguousarray(masks, dtype=np.int64),
        np.ascontiguousarray(outz, dtype=np.int64),
        np.ascontiguousarray(fvals, dtype=np.int64),
    )
    return _tally_nb(*args) if _use_numba else _tally_np(*args)


def boost_tally(draws, fallback, masks, outz, fvals):
    args = (
        np.ascontiguousarray(draws, dtype=np.int64),
        np.ascontiguousarray(fallback, dtype=np.int64),
        np.ascontiguousarray(masks, dtype=np.int64),
        np.ascontiguousarray(outz, dtype=np.int64),
        np.ascontiguousarray(fvals, dtype=np.int64),
    )
    return _boost_tally_nb(*args) if _use_numba else _boost_tally_np(*args)
