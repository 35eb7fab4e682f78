"""Compare the compiled RK4 kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--steps 2000] [--repeat 5]

Also checks that both backends return the same trajectory endpoint.
"""
import argparse
import time

import numpy as np

from identikit import _kernels

X = np.array([1.0, 1.0, 2.0, 0.4, 0.8])


def cases(steps):
    return {
        "operon": lambda k, sens: k.operon(X, 1.0, 0.0, 2.0, 1.0, steps, 1e12, sens),
        "nine_state": lambda k, sens: k.nine_state(1.0, 2.0, 0.0, 1.0, 1.0, steps, 1e12, sens, False),
    }


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels.compiled is None:
        print("compiled extension not available; only the fallback can be timed")
    print(f"{'kernel':<12} {'sens':<5} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8} {'max diff':>10}")
    for name, call in cases(args.steps).items():
        for sens in (False, True):
            tp = best_time(lambda: call(_kernels.fallback, sens), args.repeat)
            if _kernels.compiled is None:
                print(f"{name:<12} {str(sens):<5} {tp * 1e3:12.2f}")
                continue
            tc = best_time(lambda: call(_kernels.compiled, sens), args.repeat)
            yp = np.asarray(call(_kernels.fallback, sens)[2])[-1]
            yc = np.asarray(call(_kernels.compiled, sens)[2])[-1]
            diff = float(np.max(np.abs(yp - yc)))
            print(f"{name:<12} {str(sens):<5} {tp * 1e3:12.2f} {tc * 1e3:12.3f} {tp / tc:8.0f}x {diff:10.1e}")


if __name__ == "__main__":
    main()
