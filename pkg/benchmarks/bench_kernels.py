"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Workloads are sized like one day of the full panel: a 20-chain snapshot,
a bridge window of ~1,400 daily summaries, and a chain-day panel of
20 x 1,400 rows with two fixed-effect dimensions.
"""
import argparse
import timeit

import numpy as np

from interop_lens import _kernels


def workloads(rng):
    n = 20
    c = np.triu(rng.uniform(0.3, 1.0, (n, n)), 1)
    c = c + c.T
    c[rng.random((n, n)) < 0.4] = np.inf
    c = np.minimum(c, c.T)
    np.fill_diagonal(c, np.inf)

    days = 1400
    vals = np.sort(rng.lognormal(4, 1, (days, 5)), axis=1)
    w = rng.integers(1, 5000, days).astype(float)
    probs = np.array([0.25, 0.5, 0.75])

    g1 = np.repeat(np.arange(20), days)
    g2 = np.tile(np.arange(days), 20)
    x = rng.normal(size=(g1.size, 3)) + g1[:, None] * 0.1

    return {
        "all_pairs_dijkstra (20 chains)": lambda k: k.all_pairs_dijkstra(c),
        "mixture_quantiles (1400 days)": lambda k: k.mixture_quantiles(vals, w, probs, 1e-9),
        "demean_two_way (28000 rows x 3)": lambda k: k.demean_two_way(x, g1, 20, g2, days, 1e-10, 10_000),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {"python": _kernels.python_backend}
    if _kernels.compiled_backend is not None:
        backends["cython"] = _kernels.compiled_backend
    else:
        print("compiled extension not built; timing the fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} " + " ".join(f"{b:>12s}" for b in backends) + "   speedup")
    for name, fn in workloads(rng).items():
        times = {}
        for b, mod in backends.items():
            number = 1 if b == "python" else 10
            times[b] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
        cols = " ".join(f"{times[b] * 1e3:10.2f}ms" for b in backends)
        speed = f"{times['python'] / times['cython']:8.1f}x" if "cython" in times else ""
        print(f"{name:34s} {cols} {speed}")


if __name__ == "__main__":
    main()
