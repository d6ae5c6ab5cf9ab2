"""Time the compiled shift kernel against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--nodes 251 2000 20000] [--repeat 20]

Each case shifts a batch of node-major signals over a symmetric kNN graph
(``k = 10``) with ``F = 3`` features, i.e. one ``S kron I_F`` product per
signal, and one PGVAR one-step prediction (``P = 3, K = 3``).
"""

import argparse
import time

import numpy as np

from pgvar import _backend
from pgvar.graph import build_knn_graph, complete_graph, make_product, normalize_shift
from pgvar.models import pgvar_model, predict_one_step
from pgvar.shift import shift_nodes


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, nargs="+", default=[251, 2000, 20000])
    ap.add_argument("--batch", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    if "cython" not in _backend.KERNELS:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'N':>7} {'case':>10} " + " ".join(f"{name:>12}" for name in _backend.KERNELS) + "  speedup")
    for n in args.nodes:
        g = normalize_shift(build_knn_graph(rng.normal(size=(n, 3)), 10))
        x = rng.normal(size=(args.batch, 3 * n))
        m = pgvar_model(make_product(g, normalize_shift(complete_graph(3))), rng.normal(size=(3, 4)) * 0.1)
        hist = rng.normal(size=(3, 3 * n))
        cases = {
            "shift": lambda: shift_nodes(g, x, 3),
            "predict": lambda: predict_one_step(m, hist),
        }
        for case, fn in cases.items():
            timings = {}
            for name, kernel in _backend.KERNELS.items():
                _backend.shift_axis1 = kernel
                timings[name] = best_of(fn, args.repeat)
            _backend.shift_axis1 = _backend.KERNELS[_backend.BACKEND]
            speed = timings["python"] / timings["cython"] if "cython" in timings else float("nan")
            row = " ".join(f"{timings[k] * 1e3:10.3f}ms" for k in _backend.KERNELS)
            print(f"{n:>7} {case:>10} {row}  {speed:6.2f}x")


if __name__ == "__main__":
    main()
