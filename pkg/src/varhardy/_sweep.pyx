# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Hot kernel: weighted decaying max sweep over all lattice offsets.

out[i] = max_k g[k] * w[|i-k|] for a nonincreasing weight table w.  A dyadic
sparse table of range maxima lets each output prune offset blocks whose best
possible contribution cannot beat the running maximum.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def decaying_max_sweep(double[::1] g, double[::1] w):
    cdef Py_ssize_t n = g.shape[0]
    if w.shape[0] < n:
        raise ValueError("weight table shorter than the value array")
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    if n == 0:
        return out_arr

    cdef int levels = 1
    while (1 << levels) < n:
        levels += 1
    levels += 1

    # table[l, i] = max g[i .. min(i + 2^l, n))
    table_arr = np.empty((levels, n), dtype=np.float64)
    cdef double[:, ::1] table = table_arr
    cdef Py_ssize_t i, l, half
    for i in range(n):
        table[0, i] = g[i]
    for l in range(1, levels):
        half = 1 << (l - 1)
        for i in range(n):
            if i + half < n:
                table[l, i] = max(table[l - 1, i], table[l - 1, i + half])
            else:
                table[l, i] = table[l - 1, i]

    # pref[i] = max g[0..i], suf[i] = max g[i..n-1]
    pref_arr = np.empty(n, dtype=np.float64)
    suf_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] pref = pref_arr
    cdef double[::1] suf = suf_arr
    pref[0] = g[0]
    for i in range(1, n):
        pref[i] = max(pref[i - 1], g[i])
    suf[n - 1] = g[n - 1]
    for i in range(n - 2, -1, -1):
        suf[i] = max(suf[i + 1], g[i])

    cdef Py_ssize_t d, dd, stop, lo, hi, ln
    cdef double m, tail, blk, lb, rb
    cdef int lev
    for i in range(n):
        m = g[i] * w[0]
        d = 1
        while d < n:
            # best possible from any offset >= d
            tail = 0.0
            if i - d >= 0:
                tail = pref[i - d]
            if i + d < n and suf[i + d] > tail:
                tail = suf[i + d]
            if tail * w[d] <= m:
                break
            # block of offsets [d, 2d): bound via range maxima at level of size d
            lev = 0
            while (1 << (lev + 1)) <= d:
                lev += 1
            # left side indices [i-2d+1, i-d]
            blk = 0.0
            lo = i - 2 * d + 1
            hi = i - d
            if hi >= 0:
                if lo < 0:
                    lo = 0
                ln = hi - lo + 1
                lb = table[lev, lo]
                if lo + ln - (1 << lev) > lo:
                    lb = max(lb, table[lev, lo + ln - (1 << lev)])
                blk = lb
            lo = i + d
            hi = i + 2 * d - 1
            if lo < n:
                if hi > n - 1:
                    hi = n - 1
                ln = hi - lo + 1
                rb = table[lev, lo]
                if lo + ln - (1 << lev) > lo:
                    rb = max(rb, table[lev, lo + ln - (1 << lev)])
                if rb > blk:
                    blk = rb
            if blk * w[d] > m:
                stop = 2 * d
                if stop > n:
                    stop = n
                for dd in range(d, stop):
                    if i - dd >= 0 and g[i - dd] * w[dd] > m:
                        m = g[i - dd] * w[dd]
                    if i + dd < n and g[i + dd] * w[dd] > m:
                        m = g[i + dd] * w[dd]
            d *= 2
        out[i] = m
    return out_arr
