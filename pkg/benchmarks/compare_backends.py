"""Wall-clock comparison of the compiled extension vs the pure-python
fallback on the benchmark workloads.

Usage: python benchmarks/compare_backends.py [--paths N] [--runs N]
"""

import argparse
import time

import numpy as np

from hestonmc import _batch_py, backend
from hestonmc.model import DEFAULT_PARAMS, HestonParams
from hestonmc.rng import derive_key, root_key


def bench(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=2048)
    ap.add_argument("--runs", type=int, default=3)
    args = ap.parse_args()

    try:
        from hestonmc import _core
    except ImportError:
        raise SystemExit("compiled extension not built; "
                         "run pip install -e . --no-build-isolation")

    params = HestonParams(**DEFAULT_PARAMS)
    kr = int(derive_key(root_key(42), 0))
    n = args.paths
    avg = np.array([32, 64, 96, 128], dtype=np.int64)
    times = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    flags = np.array([1, 1, 1, 1], dtype=np.int64)

    workloads = {
        f"milstein {n} paths x 128 steps": lambda be: be.discretised_batch(
            params, 100.0, 1.0, 128, True, 0, n, kr, None, avg),
        f"exact asian {n} paths x 4 steps": lambda be: be.exact_batch(
            params, 100.0, times, flags, 0, n, kr, None),
    }

    print(f"{'workload':38s} {'compiled':>12s} {'python':>12s} {'speedup':>9s}")
    for name, work in workloads.items():
        t_c = bench(lambda: work(_core), args.runs)
        t_p = bench(lambda: work(_batch_py), max(1, args.runs // 3))
        print(f"{name:38s} {t_c:10.1f} ms {t_p:10.1f} ms {t_p / t_c:8.1f}x")

    a = _core.exact_batch(params, 100.0, times, flags, 0, min(n, 256), kr, None)
    b = _batch_py.exact_batch(params, 100.0, times, flags, 0, min(n, 256), kr, None)
    print(f"\nmax relative disagreement (first {min(n, 256)} paths): "
          f"{np.max(np.abs(a - b) / np.abs(b)):.2e}")
    print(f"active backend at import: {backend.BACKEND_NAME}")


if __name__ == "__main__":
    main()
