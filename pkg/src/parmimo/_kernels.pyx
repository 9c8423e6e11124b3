# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Each kernel has a pure-Python twin in ``_fallback``:

linf_threshold
    Truncation level of the l-infinity proximal map, via a linear-time
    pivot scan on the magnitudes (no sort).
truncation_step
    Gradient step, truncation and momentum update fused into one pass.
fitra_dense
    The full truncation iteration for small dense real matrices; used for
    long reference runs where per-iteration interpreter overhead dominates.
viterbi_decode
    Add-compare-select over the 64-state trellis of the K=7 code, batched
    over independent codewords.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, isfinite, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef double _threshold(const double* w, Py_ssize_t n, double r,
                       double* v, double* vt) noexcept nogil:
    """Level a >= 0 with sum((|w| - a)_+) == r.

    Pivot scan for projection onto the l1 ball (Condat's ordering); v and
    vt are scratch buffers of length n.
    """
    cdef Py_ssize_t i, j, k, nv, nvt
    cdef double y, rho, total, peak

    total = 0.0
    peak = 0.0
    for i in range(n):
        y = fabs(w[i])
        total += y
        if y > peak:
            peak = y
    if r <= 0.0:
        return peak
    if r >= total:
        return 0.0

    v[0] = fabs(w[0])
    nv = 1
    nvt = 0
    rho = v[0] - r
    for i in range(1, n):
        y = fabs(w[i])
        if y > rho:
            rho += (y - rho) / (nv + 1)
            if rho > y - r:
                v[nv] = y
                nv += 1
            else:
                for j in range(nv):
                    vt[nvt + j] = v[j]
                nvt += nv
                v[0] = y
                nv = 1
                rho = y - r
    for j in range(nvt):
        y = vt[j]
        if y > rho:
            v[nv] = y
            nv += 1
            rho += (y - rho) / nv
    while True:
        k = 0
        j = nv
        for i in range(j):
            y = v[i]
            # ties with the level contribute nothing either way; keeping them
            # avoids emptying the set when r is below rounding
            if y >= rho or nv == 1:
                v[k] = y
                k += 1
            else:
                nv -= 1
                rho += (rho - y) / nv
        nv = k
        if k == j:
            break
    # recompute from the active set to shed accumulated rounding
    total = 0.0
    for i in range(nv):
        total += v[i]
    rho = (total - r) / nv
    return rho if rho > 0.0 else 0.0


def linf_threshold(const double[::1] w, double r):
    """Return a >= 0 solving sum((|w_i| - a)_+) = r (0 if r >= sum|w|)."""
    cdef Py_ssize_t n = w.shape[0]
    if n == 0:
        return 0.0
    cdef double* v = <double*> malloc(n * sizeof(double))
    cdef double* vt = <double*> malloc(n * sizeof(double))
    if v == NULL or vt == NULL:
        free(v)
        free(vt)
        raise MemoryError()
    cdef double out
    with nogil:
        out = _threshold(&w[0], n, r, v, vt)
    free(v)
    free(vt)
    return out


def fitra_dense(const double[:, ::1] A, const double[::1] s, double lam,
                double L, long K, const double[::1] x0, bint accelerated=True):
    """Run K truncation iterations on min lam*||x||_inf + ||s - A x||^2.

    Returns the final iterate. Raises FloatingPointError on a non-finite
    gradient step.
    """
    cdef Py_ssize_t m = A.shape[0], n = A.shape[1]
    cdef Py_ssize_t i, j
    cdef long k, bad = 0
    cdef double acc, alpha, t = 1.0, t_next, beta, step = 2.0 / L, r = lam / L

    x_out = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] x = x_out
    cdef double[::1] x_prev = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] y = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] w = np.empty(n)
    cdef double[::1] res = np.empty(m)
    cdef double[::1] v = np.empty(n)
    cdef double[::1] vt = np.empty(n)

    with nogil:
        for k in range(1, K + 1):
            for i in range(m):
                acc = -s[i]
                for j in range(n):
                    acc += A[i, j] * y[j]
                res[i] = acc
            for j in range(n):
                acc = 0.0
                for i in range(m):
                    acc += A[i, j] * res[i]
                w[j] = y[j] - step * acc
                if not isfinite(w[j]):
                    bad = k
            if bad:
                break
            alpha = _threshold(&w[0], n, r, &v[0], &vt[0])
            for j in range(n):
                x_prev[j] = x[j]
                if w[j] > alpha:
                    x[j] = alpha
                elif w[j] < -alpha:
                    x[j] = -alpha
                else:
                    x[j] = w[j]
            if accelerated:
                t_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
                beta = (t - 1.0) / t_next
                t = t_next
                for j in range(n):
                    y[j] = x[j] + beta * (x[j] - x_prev[j])
            else:
                for j in range(n):
                    y[j] = x[j]
    if bad:
        raise FloatingPointError(f"non-finite gradient step at iteration {bad}")
    return x_out


# generator taps as 7-bit masks over (current input, u[t-1], ..., u[t-6])
cdef int _G0 = 0o133
cdef int _G1 = 0o171


cdef inline int _parity(int v) noexcept nogil:
    v ^= v >> 4
    v ^= v >> 2
    v ^= v >> 1
    return v & 1


def viterbi_decode(const double[:, ::1] llr):
    """Max-metric decode of a batch of unterminated K=7 codewords.

    ``llr`` has shape (batch, 2*n); positive values favour bit 0. Returns a
    uint8 array of shape (batch, n). Start state is 0, traceback starts
    from the best final state, and ties go to the lower-index state.
    """
    cdef Py_ssize_t batch = llr.shape[0], n = llr.shape[1] // 2
    cdef Py_ssize_t b, t, st, p0, p1, u, best
    cdef double m0, m1, l0, l1, bm0, bm1
    cdef double NEG = -INFINITY
    cdef int c[128][2]
    cdef int reg

    out = np.zeros((batch, n), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] bits = out
    cdef cnp.uint8_t[:, ::1] dec = np.zeros((n, 64), dtype=np.uint8)
    cdef double[::1] pm = np.empty(64)
    cdef double[::1] nm = np.empty(64)

    for reg in range(128):
        c[reg][0] = _parity(reg & _G0)
        c[reg][1] = _parity(reg & _G1)

    with nogil:
        for b in range(batch):
            for st in range(64):
                pm[st] = NEG
            pm[0] = 0.0
            for t in range(n):
                l0 = llr[b, 2 * t]
                l1 = llr[b, 2 * t + 1]
                for st in range(64):
                    u = st >> 5
                    p0 = (st & 31) << 1
                    p1 = p0 | 1
                    reg = (u << 6) | p0
                    bm0 = (1 - 2 * c[reg][0]) * l0 + (1 - 2 * c[reg][1]) * l1
                    reg = (u << 6) | p1
                    bm1 = (1 - 2 * c[reg][0]) * l0 + (1 - 2 * c[reg][1]) * l1
                    m0 = pm[p0] + bm0
                    m1 = pm[p1] + bm1
                    if m1 > m0:
                        nm[st] = m1
                        dec[t, st] = 1
                    else:
                        nm[st] = m0
                        dec[t, st] = 0
                for st in range(64):
                    pm[st] = nm[st]
            best = 0
            for st in range(1, 64):
                if pm[st] > pm[best]:
                    best = st
            st = best
            for t in range(n - 1, -1, -1):
                bits[b, t] = st >> 5
                st = ((st & 31) << 1) | dec[t, st]
    return out


def truncation_step(const double[::1] y, const double[::1] g, double step,
                    double r, double[::1] x, double beta, double[::1] y_out):
    """One fused iteration in place.

    w = y - step*g; a = level for r; x_new = clip(w, a);
    y_out = x_new + beta*(x_new - x); x <- x_new. Returns a, or -1.0 if w
    contained a non-finite entry (x and y_out are then left undefined).
    """
    cdef Py_ssize_t j, n = y.shape[0]
    cdef double alpha, xn, wj
    cdef bint bad = False
    cdef double* w = <double*> malloc(3 * n * sizeof(double))
    if w == NULL:
        raise MemoryError()
    with nogil:
        for j in range(n):
            wj = y[j] - step * g[j]
            if not isfinite(wj):
                bad = True
            w[j] = wj
        if not bad:
            alpha = _threshold(w, n, r, w + n, w + 2 * n)
            for j in range(n):
                wj = w[j]
                if wj > alpha:
                    xn = alpha
                elif wj < -alpha:
                    xn = -alpha
                else:
                    xn = wj
                y_out[j] = xn + beta * (xn - x[j])
                x[j] = xn
    free(w)
    return -1.0 if bad else alpha
