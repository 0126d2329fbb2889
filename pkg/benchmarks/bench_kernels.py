"""Time the numba and numpy backends of the integer kernels on identical inputs.

    python benchmarks/bench_kernels.py [--repeat N] [--seed S]
"""

import argparse
import time

import numpy as np

from oneway_prt import _kernels as K


def _cases(rng):
    E = rng.integers(0, 6, size=(1500, 9))
    R, nx, ny = 64, 6, 6
    masks = rng.integers(0, 1 << nx, size=R)
    outz = rng.integers(0, 2, size=(R, nx, ny))
    fvals = rng.integers(-1, 2, size=(nx, ny))
    idx = rng.integers(0, R, size=200_000)
    draws = rng.integers(0, R, size=(100_000, 4))
    fallback = rng.integers(0, 2, size=100_000)
    return {
        "pareto_keep 1500x9": (K.pareto_keep, (E,)),
        "tally 2e5 samples": (K.tally, (idx, masks, outz, fvals)),
        "boost_tally 1e5x4": (K.boost_tally, (draws, fallback, masks, outz, fvals)),
    }


def _best(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cases = _cases(np.random.default_rng(args.seed))
    backends = ["numpy"] + (["numba"] if K.HAVE_NUMBA else [])
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, (fn, fargs) in cases.items():
        row, results = [], []
        for b in backends:
            K.set_backend(b)
            fn(*fargs)  # warm-up / JIT compile
            t, out = _best(fn, fargs, args.repeat)
            row.append(t)
            results.append(out)
        if len(results) == 2:
            a, b = (r if isinstance(r, tuple) else (r,) for r in results)
            if not all(np.array_equal(u, v) for u, v in zip(a, b)):
                raise SystemExit(f"{name}: backends disagree")
        speed = f"{row[0] / row[-1]:>9.1f}x" if len(row) == 2 else ""
        print(f"{name:<22}" + "".join(f"{t * 1e3:>10.2f}ms" for t in row) + speed)


if __name__ == "__main__":
    main()
