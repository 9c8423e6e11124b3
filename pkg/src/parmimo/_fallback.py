"""Pure-Python/NumPy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and semantics; selected automatically when the extension
is not built (or when ``PARMIMO_PURE_PYTHON`` is set).
"""

import numpy as np

G0 = 0o133
G1 = 0o171


def linf_threshold(w, r):
    """Return a >= 0 solving sum((|w_i| - a)_+) = r (0 if r >= sum|w|).

    Sort-based closed form: with magnitudes sorted descending, the level
    is (sum of the k largest - r) / k for the largest k whose k-th
    magnitude is at least that candidate.
    """
    u = np.abs(np.asarray(w, dtype=np.float64))
    if u.size == 0:
        return 0.0
    if r <= 0.0:
        return float(u.max())
    if r >= u.sum():
        return 0.0
    u = np.sort(u)[::-1]
    cand = (np.cumsum(u) - r) / np.arange(1, u.size + 1)
    # k = 0 always qualifies; ties (u == cand) give the same level
    k = np.flatnonzero(u >= cand)[-1]
    return max(float(cand[k]), 0.0)


def fitra_dense(A, s, lam, L, K, x0, accelerated=True):
    A = np.ascontiguousarray(A, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    x = np.array(x0, dtype=np.float64, copy=True)
    y = x.copy()
    t = 1.0
    step = 2.0 / L
    r = lam / L
    At = A.T.copy()
    for k in range(1, K + 1):
        w = y - step * (At @ (A @ y - s))
        if not np.all(np.isfinite(w)):
            raise FloatingPointError(f"non-finite gradient step at iteration {k}")
        alpha = linf_threshold(w, r)
        x_new = np.clip(w, -alpha, alpha)
        if accelerated:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_next) * (x_new - x)
            t = t_next
        else:
            y = x_new
        x = x_new
    return x


def _trellis():
    """Predecessor table and expected code bits for the 64-state trellis."""
    states = np.arange(64)
    u = states >> 5
    p0 = (states & 31) << 1
    p1 = p0 | 1

    def code_bits(prev):
        reg = (u << 6) | prev
        c0 = np.array([bin(v & G0).count("1") & 1 for v in reg])
        c1 = np.array([bin(v & G1).count("1") & 1 for v in reg])
        return 1.0 - 2.0 * c0, 1.0 - 2.0 * c1

    return p0, p1, code_bits(p0), code_bits(p1)


_P0, _P1, _S0, _S1 = _trellis()


def viterbi_decode(llr):
    llr = np.asarray(llr, dtype=np.float64)
    batch, n = llr.shape[0], llr.shape[1] // 2
    pm = np.full((batch, 64), -np.inf)
    pm[:, 0] = 0.0
    dec = np.zeros((n, batch, 64), dtype=np.uint8)
    for t in range(n):
        l0 = llr[:, 2 * t, None]
        l1 = llr[:, 2 * t + 1, None]
        # branch metric first, then the path metric: same rounding as the compiled loop
        m0 = pm[:, _P0] + (_S0[0] * l0 + _S0[1] * l1)
        m1 = pm[:, _P1] + (_S1[0] * l0 + _S1[1] * l1)
        take1 = m1 > m0
        dec[t] = take1
        pm = np.where(take1, m1, m0)
    st = np.argmax(pm, axis=1)
    rows = np.arange(batch)
    bits = np.zeros((batch, n), dtype=np.uint8)
    for t in range(n - 1, -1, -1):
        bits[:, t] = st >> 5
        st = ((st & 31) << 1) | dec[t, rows, st]
    return bits


def truncation_step(y, g, step, r, x, beta, y_out):
    w = y - step * g
    if not np.all(np.isfinite(w)):
        return -1.0
    alpha = linf_threshold(w, r)
    xn = np.clip(w, -alpha, alpha)
    y_out[:] = xn + beta * (xn - x)
    x[:] = xn
    return alpha
