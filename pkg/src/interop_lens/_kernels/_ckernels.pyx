# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: dense Dijkstra, mixture-CDF inversion, FE demeaning."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()

BACKEND = "cython"


def all_pairs_dijkstra(weights):
    cdef double[:, ::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0]
    out_arr = np.full((n, n), np.inf)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] dist = np.empty(n)
    cdef char[::1] done = np.zeros(n, dtype=np.int8)
    cdef Py_ssize_t src, step, u, v
    cdef double best, du, wv, alt
    for src in range(n):
        for v in range(n):
            dist[v] = INFINITY
            done[v] = 0
        dist[src] = 0.0
        for step in range(n):
            u = -1
            best = INFINITY
            for v in range(n):
                if not done[v] and dist[v] < best:
                    best = dist[v]
                    u = v
            if u < 0:
                break
            done[u] = 1
            du = dist[u]
            for v in range(n):
                if v == u or done[v]:
                    continue
                wv = w[u, v]
                if wv == INFINITY:
                    continue
                alt = du + wv
                if alt < dist[v]:
                    dist[v] = alt
        for v in range(n):
            out[src, v] = dist[v]
    return out_arr


cdef inline double _component_cdf(double[:, ::1] vals, Py_ssize_t i, double x) nogil:
    cdef int k
    if x < vals[i, 0]:
        return 0.0
    if x >= vals[i, 4]:
        return 1.0
    k = 3
    while vals[i, k] > x:
        k -= 1
    return 0.25 * k + 0.25 * (x - vals[i, k]) / (vals[i, k + 1] - vals[i, k])


cdef double _mixture_mass(double[:, ::1] vals, double[::1] w, double x) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(vals.shape[0]):
        acc += w[i] * _component_cdf(vals, i, x)
    return acc


def mixture_cdf(values, weights, double x):
    cdef double[:, ::1] vals = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double total = 0.0
    cdef Py_ssize_t i
    for i in range(w.shape[0]):
        total += w[i]
    return _mixture_mass(vals, w, x) / total


def mixture_quantiles(values, weights, probs, double rtol=1e-9):
    cdef double[:, ::1] vals = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[::1] ps = np.ascontiguousarray(probs, dtype=np.float64)
    out_arr = np.empty(ps.shape[0])
    cdef double[::1] out = out_arr
    cdef double total = 0.0, lo_bound, hi_bound, lo, hi, mid, target, p, tolv
    cdef Py_ssize_t i, idx
    for i in range(w.shape[0]):
        total += w[i]
    lo_bound = vals[0, 0]
    hi_bound = vals[0, 4]
    for i in range(vals.shape[0]):
        if vals[i, 0] < lo_bound:
            lo_bound = vals[i, 0]
        if vals[i, 4] > hi_bound:
            hi_bound = vals[i, 4]
    for idx in range(ps.shape[0]):
        p = ps[idx]
        if p <= 0.0:
            out[idx] = lo_bound
            continue
        if p >= 1.0:
            out[idx] = hi_bound
            continue
        target = p * total
        if _mixture_mass(vals, w, lo_bound) >= target:
            out[idx] = lo_bound
            continue
        lo = lo_bound
        hi = hi_bound
        while True:
            tolv = rtol * max(fabs(lo), fabs(hi))
            if tolv < 1e-300:
                tolv = 1e-300
            if not (hi - lo > tolv):
                break
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _mixture_mass(vals, w, mid) >= target:
                hi = mid
            else:
                lo = mid
        out[idx] = hi
    return out_arr


def demean_two_way(x, g1, Py_ssize_t n1, g2, Py_ssize_t n2, double tol=1e-10,
                   long maxiter=100000):
    arr = np.array(x, dtype=np.float64, order="F", copy=True)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    arr = np.asfortranarray(arr)
    cdef double[::1, :] xv = arr
    cdef cnp.int64_t[::1] c1 = np.ascontiguousarray(g1, dtype=np.int64)
    cdef cnp.int64_t[::1] c2
    cdef double[::1] cnt1 = np.bincount(np.asarray(c1), minlength=n1).astype(np.float64)
    cdef double[::1] cnt2
    cdef double[::1] sums1 = np.zeros(n1)
    cdef double[::1] sums2
    if n2:
        c2 = np.ascontiguousarray(g2, dtype=np.int64)
        cnt2 = np.bincount(np.asarray(c2), minlength=n2).astype(np.float64)
        sums2 = np.zeros(n2)
    cdef Py_ssize_t n = xv.shape[0], k = xv.shape[1], j, r, g
    cdef long it, sweeps = 0
    cdef double[::1] before = np.empty(n)
    cdef double change, dv
    for j in range(k):
        it = 0
        while it < maxiter:
            it += 1
            for r in range(n):
                before[r] = xv[r, j]
            for g in range(n1):
                sums1[g] = 0.0
            for r in range(n):
                sums1[c1[r]] += xv[r, j]
            for g in range(n1):
                sums1[g] = sums1[g] / cnt1[g]
            for r in range(n):
                xv[r, j] = xv[r, j] - sums1[c1[r]]
            if not n2:
                it = 1
                break
            for g in range(n2):
                sums2[g] = 0.0
            for r in range(n):
                sums2[c2[r]] += xv[r, j]
            for g in range(n2):
                sums2[g] = sums2[g] / cnt2[g]
            change = 0.0
            for r in range(n):
                xv[r, j] = xv[r, j] - sums2[c2[r]]
                dv = fabs(xv[r, j] - before[r])
                if dv > change:
                    change = dv
            if change < tol:
                break
        if it > sweeps:
            sweeps = it
    return arr, sweeps
