"""Compare the compiled kernels with the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--number 200]

Times ``expm`` and ``magnus_trial`` on random Lindblad-sized matrices
(``d^2 x d^2`` for d = 2..5) and one full propagator over a periodic
generator, reporting the best-of-repeat time per call for each backend.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from qme import _kernels_py

try:
    from qme import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def _matrices(n, rng):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A / np.linalg.norm(A, 2)


def _time(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_kernels(repeat, number, seed=0):
    rng = np.random.default_rng(seed)
    backends = {"python": _kernels_py}
    if _compiled is not None:
        backends["compiled"] = _compiled
    rows = []
    for d in (2, 3, 4, 5):
        n = d * d
        A = _matrices(n, rng)
        La, Lm, Lb = (_matrices(n, rng) for _ in range(3))
        for name, mod in backends.items():
            t_expm = _time(lambda: mod.expm(A), repeat, number)
            t_trial = _time(lambda: mod.magnus_trial(La, Lm, Lb, 0.05), repeat, number)
            rows.append((d, name, t_expm, t_trial))
    return rows


def bench_propagator(repeat, seed=0):
    """Wall time of one full propagation, forcing each backend in turn."""
    from qme import kernels
    from qme.sampling import random_periodic_lgks_spec
    from qme.vectorized import Propagator

    spec = random_periodic_lgks_spec(3, np.random.default_rng(seed))
    saved = kernels.expm, kernels.magnus_trial
    out = {}
    mods = {"python": _kernels_py}
    if _compiled is not None:
        mods["compiled"] = _compiled
    try:
        for name, mod in mods.items():
            kernels.expm, kernels.magnus_trial = mod.expm, mod.magnus_trial
            out[name] = min(timeit.repeat(lambda: Propagator(spec, tol=1e-10).step(0.0, 5.0),
                                          repeat=repeat, number=1))
    finally:
        kernels.expm, kernels.magnus_trial = saved
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--number", type=int, default=200)
    args = parser.parse_args(argv)

    if _compiled is None:
        print("compiled extension not importable; timing the fallback only")
    print(f"{'d':>2} {'backend':>9} {'expm [us]':>11} {'magnus_trial [us]':>18}")
    rows = bench_kernels(args.repeat, args.number)
    for d, name, t_expm, t_trial in rows:
        print(f"{d:>2} {name:>9} {t_expm * 1e6:>11.1f} {t_trial * 1e6:>18.1f}")
    if _compiled is not None:
        by = {(d, name): (a, b) for d, name, a, b in rows}
        for d in sorted({r[0] for r in rows}):
            (pa, pb), (ca, cb) = by[d, "python"], by[d, "compiled"]
            print(f"d={d}: speedup expm x{pa / ca:.2f}, magnus_trial x{pb / cb:.2f}")
    print("full propagator, d=3 periodic, T=5, tol=1e-10:")
    for name, t in bench_propagator(max(1, args.repeat // 2)).items():
        print(f"  {name:>9}: {t * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
