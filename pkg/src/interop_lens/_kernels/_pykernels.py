"""Pure-Python/numpy reference versions of the compiled kernels.

Every function here mirrors a routine in ``_ckernels.pyx`` operation for
operation so both backends produce bit-identical results.
"""
import math

import numpy as np

BACKEND = "python"


def all_pairs_dijkstra(weights):
    """Shortest-path distances from every source over a dense weight matrix.

    ``weights[u, v]`` is the edge cost, ``inf`` where no edge exists. The
    diagonal is ignored. Returns an ``(n, n)`` array with ``inf`` for
    unreachable pairs.
    """
    w = np.ascontiguousarray(weights, dtype=np.float64)
    n = w.shape[0]
    wl = w.tolist()
    out = np.full((n, n), np.inf)
    inf = math.inf
    for src in range(n):
        dist = [inf] * n
        done = [False] * n
        dist[src] = 0.0
        for _ in range(n):
            u = -1
            best = inf
            for v in range(n):
                if not done[v] and dist[v] < best:
                    best = dist[v]
                    u = v
            if u < 0:
                break
            done[u] = True
            row = wl[u]
            du = dist[u]
            for v in range(n):
                if v == u or done[v]:
                    continue
                wv = row[v]
                if wv == inf:
                    continue
                alt = du + wv
                if alt < dist[v]:
                    dist[v] = alt
        out[src] = dist
    return out


def _component_cdf(vals, x):
    if x < vals[0]:
        return 0.0
    if x >= vals[4]:
        return 1.0
    k = 3
    while vals[k] > x:
        k -= 1
    return 0.25 * k + 0.25 * (x - vals[k]) / (vals[k + 1] - vals[k])


def mixture_cdf(values, weights, x):
    """Count-weighted mixture CDF of piecewise-linear five-knot components."""
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    acc = 0.0
    total = 0.0
    for i in range(values.shape[0]):
        acc += weights[i] * _component_cdf(values[i], x)
        total += weights[i]
    return acc / total


def _mixture_mass(vl, wl, x):
    acc = 0.0
    for vals, w in zip(vl, wl):
        acc += w * _component_cdf(vals, x)
    return acc


def mixture_quantiles(values, weights, probs, rtol=1e-9):
    """Generalized inverse ``inf{x : F(x) >= p}`` for each ``p`` by bisection."""
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    vl = values.tolist()
    wl = weights.tolist()
    total = 0.0
    for w in wl:
        total += w
    lo_bound = float(values[:, 0].min())
    hi_bound = float(values[:, 4].max())
    out = np.empty(len(probs))
    for idx, p in enumerate(probs):
        p = float(p)
        if p <= 0.0:
            out[idx] = lo_bound
            continue
        if p >= 1.0:
            out[idx] = hi_bound
            continue
        target = p * total
        if _mixture_mass(vl, wl, lo_bound) >= target:
            out[idx] = lo_bound
            continue
        lo, hi = lo_bound, hi_bound
        floor = 1e-300
        while hi - lo > max(rtol * max(abs(lo), abs(hi)), floor):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _mixture_mass(vl, wl, mid) >= target:
                hi = mid
            else:
                lo = mid
        out[idx] = hi
    return out


def demean_two_way(x, g1, n1, g2, n2, tol=1e-10, maxiter=100000):
    """Alternating-projection removal of two sets of group means.

    ``x`` is ``(n, k)``; ``g1``/``g2`` are integer codes in ``[0, n1)`` and
    ``[0, n2)``. Pass ``n2 == 0`` for one-way demeaning. Iterates until the
    largest absolute cell change in a sweep drops below ``tol``. Returns the
    demeaned copy and the number of sweeps used by the slowest column.
    """
    x = np.array(x, dtype=np.float64, order="F", copy=True)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    g1 = np.asarray(g1, dtype=np.int64)
    cnt1 = np.bincount(g1, minlength=n1).astype(np.float64)
    if n2:
        g2 = np.asarray(g2, dtype=np.int64)
        cnt2 = np.bincount(g2, minlength=n2).astype(np.float64)
    sweeps = 0
    for j in range(x.shape[1]):
        col = x[:, j]
        for it in range(1, maxiter + 1):
            before = col.copy()
            col -= (np.bincount(g1, weights=col, minlength=n1) / cnt1)[g1]
            if not n2:
                it = 1
                break
            col -= (np.bincount(g2, weights=col, minlength=n2) / cnt2)[g2]
            if np.max(np.abs(col - before)) < tol:
                break
        x[:, j] = col
        sweeps = max(sweeps, it)
    return x, sweeps
