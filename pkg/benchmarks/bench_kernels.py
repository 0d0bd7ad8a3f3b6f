"""Compare the compiled and pure-numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 500 2000 5000]

Prints best-of-``repeat`` wall times and the speedup of the compiled
backend, after checking that both backends return the same numbers.
"""

import argparse
import timeit

import numpy as np

from burgers_relax import kernels


def cases(n, rng):
    modes = 12
    times = np.linspace(0.0, 5.0, n + 1)
    lam = -np.geomspace(0.1, 10.0, modes)
    rates = rng.standard_normal((n, modes))
    decay = np.exp(np.outer(np.diff(times), lam))
    drive = rng.standard_normal((n, modes))
    ne = 2 * n
    mats = rng.standard_normal((4, 6, 6))
    group = rng.integers(0, 4, ne)
    vecs = rng.standard_normal((ne, 6))
    return {
        "hereditary_sum": (times, lam, rates),
        "diag_recurrence": (decay, drive, np.zeros(modes)),
        "grouped_matvec": (group, mats, vecs),
    }


def best(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 5000])
    args = ap.parse_args()
    py, cy = kernels.python_backend, kernels.compiled_backend
    if cy is None:
        raise SystemExit("compiled backend unavailable: build with `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16} {'size':>6} {'python [s]':>12} {'cython [s]':>12} {'speedup':>8}")
    for n in args.sizes:
        for name, inputs in cases(n, rng).items():
            f_py, f_cy = getattr(py, name), getattr(cy, name)
            if not np.allclose(f_py(*inputs), f_cy(*inputs), rtol=1e-12, atol=1e-12):
                raise SystemExit(f"{name}: backends disagree at size {n}")
            # the quadratic kernel in pure numpy is slow; fewer repeats at large n
            rep = args.repeat if name != "hereditary_sum" or n <= 2000 else 1
            t_py, t_cy = best(f_py, inputs, rep), best(f_cy, inputs, rep)
            print(f"{name:<16} {n:>6} {t_py:>12.4g} {t_cy:>12.4g} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
