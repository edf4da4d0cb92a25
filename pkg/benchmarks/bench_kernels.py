"""Time the compiled kernels against the pure-numpy fallback.

Run with ``python benchmarks/bench_kernels.py``. Both backends are imported
directly, so the environment switch does not matter here.
"""

import argparse
import timeit

import numpy as np

from fogmimo import _pykernels

try:
    from fogmimo import _ckernels
except ImportError:
    _ckernels = None


def workloads(rng):
    darts = rng.random((2048, 2)) - 0.5
    counts = rng.poisson(60, size=50)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    centers = rng.random((offsets[-1], 2)) * 2.0 - 1.0
    rrh = rng.random((400, 2)) * 6.0
    users = rng.random((1500, 2)) * 6.0
    return {
        "uncovered_counts": lambda k: k.uncovered_counts(darts, centers, offsets, 0.3),
        "distance_matrix": lambda k: k.distance_matrix(rrh, users, 6.0),
        "gain_matrix": lambda k: k.gain_matrix(rrh, users, 6.0, 3.75, 0.001),
    }


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--number", type=int, default=3)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}  agree")
    for name, call in workloads(rng).items():
        t_py = best_of(lambda: call(_pykernels), args.repeat, args.number)
        if _ckernels is None:
            print(f"{name:<18}{t_py * 1e3:>14.2f}{'n/a':>16}{'':>10}  -")
            continue
        t_c = best_of(lambda: call(_ckernels), args.repeat, args.number)
        agree = np.allclose(call(_pykernels), call(_ckernels), rtol=1e-12, atol=0)
        print(f"{name:<18}{t_py * 1e3:>14.2f}{t_c * 1e3:>16.2f}{t_py / t_c:>9.1f}x  {agree}")


if __name__ == "__main__":
    main()
