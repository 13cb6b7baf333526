"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from edgeverify import kernels


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--contracts", type=int, default=20_000)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        print("numba not installed; nothing to compare")
        return

    n = args.contracts
    rng = np.random.default_rng(0)
    grid = (rng.random((64, 64)) < 0.45).astype(np.uint8)
    cases = [
        (f"detection MC, {n} contracts x 8800 inputs",
         lambda: kernels.detect_numpy(0.1, 44, 200, n, 0),
         lambda: kernels.detect_numba(0.1, 44, 200, n, 0)),
        ("component boxes, 64x64 grid x 50",
         lambda: [kernels.boxes_numpy(grid) for _ in range(50)],
         lambda: [kernels.boxes_numba(grid) for _ in range(50)]),
    ]
    print(f"{'kernel':44s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}")
    for name, np_fn, nb_fn in cases:
        t_np = best_of(np_fn, args.repeat)
        t_nb = best_of(nb_fn, args.repeat)
        print(f"{name:44s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
