# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scoring/selection kernels: sequential-dot cosine plus a
bounded-heap top-k with explicit tie handling. Same contract as _kernels."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND = "cython"

cdef double DEGENERATE_NORM = 1e-12


def cosine_scores(double[:, ::1] matrix, double[::1] norms, double[::1] query):
    cdef Py_ssize_t n = matrix.shape[0]
    cdef Py_ssize_t d = matrix.shape[1]
    cdef Py_ssize_t i, j
    cdef double qnorm = 0.0
    cdef double acc
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr

    for j in range(d):
        qnorm += query[j] * query[j]
    qnorm = sqrt(qnorm)
    if qnorm < DEGENERATE_NORM:
        return out_arr

    with nogil:
        for i in range(n):
            if norms[i] < DEGENERATE_NORM:
                out[i] = 0.0
                continue
            acc = 0.0
            for j in range(d):
                acc += matrix[i, j] * query[j]
            out[i] = acc / (norms[i] * qnorm)
    return out_arr


cdef inline bint _worse(double sa, cnp.int64_t ta, double sb, cnp.int64_t tb) nogil:
    # strictly worse: lower score, or same score with higher tie rank
    if sa != sb:
        return sa < sb
    return ta > tb


def topk(double[::1] scores, cnp.int64_t[::1] tie_rank, Py_ssize_t k):
    """Indices of the top k scores, ties broken by ascending tie_rank.

    Keeps a min-heap of the current best k (root = worst kept), then pops
    into the output back to front.
    """
    cdef Py_ssize_t n = scores.shape[0]
    if k > n:
        k = n
    out_arr = np.empty(k, dtype=np.int64)
    if k <= 0:
        return out_arr
    cdef cnp.int64_t[::1] out = out_arr

    hs_arr = np.empty(k, dtype=np.float64)
    ht_arr = np.empty(k, dtype=np.int64)
    hi_arr = np.empty(k, dtype=np.int64)
    cdef double[::1] hs = hs_arr
    cdef cnp.int64_t[::1] ht = ht_arr
    cdef cnp.int64_t[::1] hi = hi_arr

    cdef Py_ssize_t m = 0, i, pos, parent, child, left, right
    cdef double s, ts
    cdef cnp.int64_t t, tt, ti

    with nogil:
        for i in range(n):
            s = scores[i]
            t = tie_rank[i]
            if m < k:
                # sift up from the new leaf
                pos = m
                hs[pos] = s
                ht[pos] = t
                hi[pos] = i
                m += 1
                while pos > 0:
                    parent = (pos - 1) >> 1
                    if _worse(hs[pos], ht[pos], hs[parent], ht[parent]):
                        ts = hs[pos]; hs[pos] = hs[parent]; hs[parent] = ts
                        tt = ht[pos]; ht[pos] = ht[parent]; ht[parent] = tt
                        ti = hi[pos]; hi[pos] = hi[parent]; hi[parent] = ti
                        pos = parent
                    else:
                        break
            elif _worse(hs[0], ht[0], s, t):
                # candidate beats the worst kept: replace root, sift down
                hs[0] = s
                ht[0] = t
                hi[0] = i
                pos = 0
                while True:
                    left = 2 * pos + 1
                    right = left + 1
                    child = pos
                    if left < m and _worse(hs[left], ht[left], hs[child], ht[child]):
                        child = left
                    if right < m and _worse(hs[right], ht[right], hs[child], ht[child]):
                        child = right
                    if child == pos:
                        break
                    ts = hs[pos]; hs[pos] = hs[child]; hs[child] = ts
                    tt = ht[pos]; ht[pos] = ht[child]; ht[child] = tt
                    ti = hi[pos]; hi[pos] = hi[child]; hi[child] = ti
                    pos = child

        # pop worst-first into the tail of the output
        while m > 0:
            m -= 1
            out[m] = hi[0]
            hs[0] = hs[m]
            ht[0] = ht[m]
            hi[0] = hi[m]
            pos = 0
            while True:
                left = 2 * pos + 1
                right = left + 1
                child = pos
                if left < m and _worse(hs[left], ht[left], hs[child], ht[child]):
                    child = left
                if right < m and _worse(hs[right], ht[right], hs[child], ht[child]):
                    child = right
                if child == pos:
                    break
                ts = hs[pos]; hs[pos] = hs[child]; hs[child] = ts
                tt = ht[pos]; ht[pos] = ht[child]; ht[child] = tt
                ti = hi[pos]; hi[pos] = hi[child]; hi[child] = ti
                pos = child

    return out_arr
