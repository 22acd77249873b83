# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batched kernels for small dense complex matrices.

Every routine takes a C-contiguous ``complex128`` stack of shape
``(batch, m, n)`` and loops over the batch without the GIL. Results are raw:
phase and ordering conventions are applied by :mod:`bdprecode.numkernel`.
"""
import numpy as np

from libc.math cimport sqrt, floor, fabs

cdef double EPS = 2.220446049250313e-16


cdef inline double _abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double _abs(double complex z) nogil:
    return sqrt(z.real * z.real + z.imag * z.imag)


cdef inline double complex _conj(double complex z) nogil:
    return z.real - 1j * z.imag


cdef void _house_qr(double complex[:, ::1] R, double complex[:, ::1] Q,
                    double complex[::1] v) noexcept nogil:
    """In-place Householder QR: R <- upper triangular, Q <- full m x m."""
    cdef Py_ssize_t m = R.shape[0], n = R.shape[1]
    cdef Py_ssize_t i, j, c, r, steps
    cdef double xnorm2, x0abs, vnorm2, scale
    cdef double complex x0, phase, alpha, s

    for i in range(m):
        for j in range(m):
            Q[i, j] = 1.0 if i == j else 0.0
    steps = n if n < m - 1 else m - 1
    for j in range(steps):
        xnorm2 = 0.0
        for i in range(j, m):
            xnorm2 = xnorm2 + _abs2(R[i, j])
        if xnorm2 == 0.0:
            continue
        x0 = R[j, j]
        x0abs = _abs(x0)
        if x0abs > 0.0:
            phase = x0 / x0abs
        else:
            phase = 1.0
        alpha = -phase * sqrt(xnorm2)
        v[j] = x0 - alpha
        for i in range(j + 1, m):
            v[i] = R[i, j]
        vnorm2 = xnorm2 - x0abs * x0abs + _abs2(v[j])
        if vnorm2 == 0.0:
            continue
        scale = 2.0 / vnorm2
        for c in range(j + 1, n):
            s = 0.0
            for i in range(j, m):
                s = s + _conj(v[i]) * R[i, c]
            s = s * scale
            for i in range(j, m):
                R[i, c] = R[i, c] - v[i] * s
        R[j, j] = alpha
        for i in range(j + 1, m):
            R[i, j] = 0.0
        for r in range(m):
            s = 0.0
            for i in range(j, m):
                s = s + Q[r, i] * v[i]
            s = s * scale
            for i in range(j, m):
                Q[r, i] = Q[r, i] - s * _conj(v[i])


def qr_batch(a):
    """Householder QR of every matrix in the stack; returns full ``(Q, R)``."""
    cdef double complex[:, :, ::1] R = np.array(a, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t nb = R.shape[0], m = R.shape[1]
    Q_arr = np.empty((nb, m, m), dtype=np.complex128)
    cdef double complex[:, :, ::1] Q = Q_arr
    cdef double complex[::1] v = np.empty(m, dtype=np.complex128)
    cdef Py_ssize_t b
    with nogil:
        for b in range(nb):
            _house_qr(R[b], Q[b], v)
    return Q_arr, np.asarray(R)


cdef int _jacobi_columns(double complex[:, ::1] W, double complex[:, ::1] V,
                         int max_sweeps) noexcept nogil:
    """One-sided Hestenes-Jacobi: orthogonalize the columns of W (m >= n).

    V accumulates the right rotations. Returns the number of sweeps, or -1 when
    the sweep cap is reached.
    """
    cdef Py_ssize_t m = W.shape[0], n = W.shape[1]
    cdef Py_ssize_t i, p, q
    cdef int sweep, rotated
    cdef double a, bb, g, zeta, t, c, s, tol, small
    cdef double complex gamma, ph, wp, wq

    for i in range(n):
        for p in range(n):
            V[i, p] = 1.0 if i == p else 0.0
    tol = <double>m * EPS
    # columns below m * eps * ||A||_F are numerically zero and left alone
    small = 0.0
    for i in range(m):
        for p in range(n):
            small = small + _abs2(W[i, p])
    small = small * tol * tol
    for sweep in range(max_sweeps):
        rotated = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                a = 0.0
                bb = 0.0
                gamma = 0.0
                for i in range(m):
                    a = a + _abs2(W[i, p])
                    bb = bb + _abs2(W[i, q])
                    gamma = gamma + _conj(W[i, p]) * W[i, q]
                g = _abs(gamma)
                if g == 0.0 or a <= small or bb <= small or g <= tol * sqrt(a * bb):
                    continue
                rotated = 1
                ph = gamma / g
                zeta = (bb - a) / (2.0 * g)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                ph = _conj(ph)
                for i in range(m):
                    wp = W[i, p]
                    wq = W[i, q] * ph
                    W[i, p] = c * wp - s * wq
                    W[i, q] = s * wp + c * wq
                for i in range(n):
                    wp = V[i, p]
                    wq = V[i, q] * ph
                    V[i, p] = c * wp - s * wq
                    V[i, q] = s * wp + c * wq
        if not rotated:
            return sweep + 1
    return -1


cdef int _svd_tall(double complex[:, ::1] W, double complex[:, ::1] U,
                   double[::1] S, double complex[:, ::1] V,
                   double complex[:, ::1] work_r, double complex[:, ::1] work_q,
                   double complex[::1] v, Py_ssize_t[::1] order,
                   double complex[:, ::1] Wsorted, double complex[:, ::1] Vsorted,
                   double[::1] stmp, int max_sweeps) noexcept nogil:
    """Full SVD of a tall matrix (m >= n) held in W; W is destroyed."""
    cdef Py_ssize_t m = W.shape[0], n = W.shape[1]
    cdef Py_ssize_t i, j, k, best, tmp, r
    cdef int status
    cdef double nrm, zero_tol

    zero_tol = 0.0
    for i in range(m):
        for j in range(n):
            zero_tol = zero_tol + _abs2(W[i, j])
    zero_tol = sqrt(zero_tol) * <double>m * EPS
    status = _jacobi_columns(W, V, max_sweeps)
    for j in range(n):
        nrm = 0.0
        for i in range(m):
            nrm = nrm + _abs2(W[i, j])
        S[j] = sqrt(nrm)
        order[j] = j
    # selection sort, descending, stable on ties
    for j in range(n):
        best = j
        for k in range(j + 1, n):
            if S[order[k]] > S[order[best]]:
                best = k
        tmp = order[best]
        for k in range(best, j, -1):
            order[k] = order[k - 1]
        order[j] = tmp
    for j in range(n):
        stmp[j] = S[order[j]]
        for i in range(m):
            Wsorted[i, j] = W[i, order[j]]
    for j in range(n):
        for i in range(n):
            Vsorted[i, j] = V[i, order[j]]
    r = 0
    for j in range(n):
        S[j] = stmp[j]
        for i in range(n):
            V[i, j] = Vsorted[i, j]
        if S[j] > zero_tol:
            r = r + 1
    # thin left vectors from the orthogonalized columns
    for j in range(r):
        for i in range(m):
            U[i, j] = Wsorted[i, j] / S[j]
    if r < m:
        # complete to a unitary basis from a QR of the known columns
        for i in range(m):
            for j in range(m):
                work_r[i, j] = 0.0
        for j in range(r):
            for i in range(m):
                work_r[i, j] = U[i, j]
        _house_qr(work_r[:, :r] if r > 0 else work_r[:, :1], work_q, v)
        for j in range(r, m):
            for i in range(m):
                U[i, j] = work_q[i, j]
    return status


def svd_batch(a, int max_sweeps):
    """Full SVD of every matrix in the stack; returns ``(U, S, V, status)``.

    ``status[b]`` is the number of Jacobi sweeps used, or -1 on non-convergence.
    """
    arr = np.asarray(a, dtype=np.complex128)
    cdef bint wide = arr.shape[2] > arr.shape[1]
    if wide:
        arr = np.conj(np.swapaxes(arr, 1, 2))
    cdef double complex[:, :, ::1] W = np.array(arr, order="C", copy=True)
    cdef Py_ssize_t nb = W.shape[0], m = W.shape[1], n = W.shape[2]
    U_arr = np.zeros((nb, m, m), dtype=np.complex128)
    S_arr = np.zeros((nb, n), dtype=np.float64)
    V_arr = np.zeros((nb, n, n), dtype=np.complex128)
    status_arr = np.zeros(nb, dtype=np.intc)
    cdef double complex[:, :, ::1] U = U_arr
    cdef double[:, ::1] S = S_arr
    cdef double complex[:, :, ::1] V = V_arr
    cdef int[::1] status = status_arr
    cdef Py_ssize_t big = m if m > n else n
    cdef double complex[:, ::1] work_r = np.zeros((big, big), dtype=np.complex128)
    cdef double complex[:, ::1] work_q = np.zeros((m, m), dtype=np.complex128)
    cdef double complex[::1] v = np.zeros(m, dtype=np.complex128)
    cdef Py_ssize_t[::1] order = np.zeros(n, dtype=np.intp)
    cdef double complex[:, ::1] Ws = np.zeros((m, n), dtype=np.complex128)
    cdef double complex[:, ::1] Vs = np.zeros((n, n), dtype=np.complex128)
    cdef double[::1] stmp = np.zeros(n, dtype=np.float64)
    cdef Py_ssize_t b
    with nogil:
        for b in range(nb):
            status[b] = _svd_tall(W[b], U[b], S[b], V[b], work_r[:m, :m], work_q,
                                  v, order, Ws, Vs, stmp, max_sweeps)
    if wide:
        return V_arr, S_arr, U_arr, status_arr
    return U_arr, S_arr, V_arr, status_arr


cdef int _jacobi_herm(double complex[:, ::1] A, double complex[:, ::1] V,
                      int max_sweeps) noexcept nogil:
    """Cyclic two-sided Jacobi for a Hermitian matrix; A becomes diagonal."""
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t i, p, q
    cdef int sweep
    cdef double off, total, g, zeta, t, c, s
    cdef double complex ph, x, y

    for i in range(n):
        for p in range(n):
            V[i, p] = 1.0 if i == p else 0.0
    total = 0.0
    for i in range(n):
        for p in range(n):
            total = total + _abs2(A[i, p])
    total = sqrt(total)
    if total == 0.0:
        return 0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off = off + _abs2(A[p, q])
        if sqrt(off) <= 1e-15 * total:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                g = _abs(A[p, q])
                if g <= 1e-18 * total:
                    continue
                ph = A[p, q] / g
                zeta = (A[q, q].real - A[p, p].real) / (2.0 * g)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                # columns: G = [[c, s], [-s conj(ph), c conj(ph)]]
                for i in range(n):
                    x = A[i, p]
                    y = A[i, q] * _conj(ph)
                    A[i, p] = c * x - s * y
                    A[i, q] = s * x + c * y
                for i in range(n):
                    x = V[i, p]
                    y = V[i, q] * _conj(ph)
                    V[i, p] = c * x - s * y
                    V[i, q] = s * x + c * y
                # rows: G^H from the left
                for i in range(n):
                    x = A[p, i]
                    y = A[q, i] * ph
                    A[p, i] = c * x - s * y
                    A[q, i] = s * x + c * y
                A[p, q] = 0.0
                A[q, p] = 0.0
                A[p, p] = A[p, p].real
                A[q, q] = A[q, q].real
    return -1


def eigh_batch(a, int max_sweeps):
    """Hermitian eigendecomposition of a stack; returns ``(w, V, status)``."""
    cdef double complex[:, :, ::1] A = np.array(a, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t nb = A.shape[0], n = A.shape[1]
    V_arr = np.zeros((nb, n, n), dtype=np.complex128)
    w_arr = np.zeros((nb, n), dtype=np.float64)
    status_arr = np.zeros(nb, dtype=np.intc)
    cdef double complex[:, :, ::1] V = V_arr
    cdef double[:, ::1] w = w_arr
    cdef int[::1] status = status_arr
    cdef Py_ssize_t b, i
    with nogil:
        for b in range(nb):
            status[b] = _jacobi_herm(A[b], V[b], max_sweeps)
            for i in range(n):
                w[b, i] = A[b, i, i].real
    return w_arr, V_arr, status_arr


cdef inline double _round_half_up(double x) noexcept nogil:
    return floor(x + 0.5)


cdef int _clll(double complex[:, ::1] B, double complex[:, ::1] R,
               double complex[:, ::1] T, double complex[:, ::1] Q,
               double complex[::1] v, double delta, long max_iter) noexcept nogil:
    """Complex LLL on the columns of B (m x n, m >= n).

    R must hold a copy of B on entry; T receives the unimodular transform with
    B_reduced = B T. Returns 0 on success, 1 on iteration cap, 2 if singular.
    """
    cdef Py_ssize_t m = B.shape[0], n = B.shape[1]
    cdef Py_ssize_t i, j, k, c
    cdef long it
    cdef double rmax, lhs, rhs, rabs
    cdef double complex mu, q, a, bb, g00, g01, g10, g11, x, y, tmp

    _house_qr(R, Q, v)
    rmax = 0.0
    for j in range(n):
        if _abs(R[j, j]) > rmax:
            rmax = _abs(R[j, j])
    for j in range(n):
        if _abs(R[j, j]) <= 1e-12 * rmax or rmax == 0.0:
            return 2
    for i in range(n):
        for j in range(n):
            T[i, j] = 1.0 if i == j else 0.0
    k = 1
    it = 0
    while k < n:
        it = it + 1
        if it > max_iter:
            return 1
        for j in range(k - 1, -1, -1):
            mu = R[j, k] / R[j, j]
            q = _round_half_up(mu.real) + 1j * _round_half_up(mu.imag)
            if q.real != 0.0 or q.imag != 0.0:
                for i in range(j + 1):
                    R[i, k] = R[i, k] - q * R[i, j]
                for i in range(m):
                    B[i, k] = B[i, k] - q * B[i, j]
                for i in range(n):
                    T[i, k] = T[i, k] - q * T[i, j]
        lhs = delta * _abs2(R[k - 1, k - 1])
        rhs = _abs2(R[k - 1, k]) + _abs2(R[k, k])
        if lhs > rhs:
            # swap columns k-1 and k of B, T, R
            for i in range(m):
                tmp = B[i, k - 1]
                B[i, k - 1] = B[i, k]
                B[i, k] = tmp
            for i in range(n):
                tmp = T[i, k - 1]
                T[i, k - 1] = T[i, k]
                T[i, k] = tmp
            for i in range(k + 1):
                tmp = R[i, k - 1]
                R[i, k - 1] = R[i, k]
                R[i, k] = tmp
            # Givens rotation on rows k-1, k to restore triangularity
            a = R[k - 1, k - 1]
            bb = R[k, k - 1]
            rabs = sqrt(_abs2(a) + _abs2(bb))
            g00 = _conj(a) / rabs
            g01 = _conj(bb) / rabs
            g10 = -bb / rabs
            g11 = a / rabs
            for c in range(k - 1, n):
                x = R[k - 1, c]
                y = R[k, c]
                R[k - 1, c] = g00 * x + g01 * y
                R[k, c] = g10 * x + g11 * y
            R[k, k - 1] = 0.0
            k = k - 1 if k > 1 else 1
        else:
            k = k + 1
    return 0


def clll_batch(b, double delta, long max_iter):
    """CLLL on the columns of every basis in the stack; returns ``(T, status)``."""
    cdef double complex[:, :, ::1] B = np.array(b, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t nb = B.shape[0], m = B.shape[1], n = B.shape[2]
    cdef double complex[:, :, ::1] R = np.array(B, copy=True)
    T_arr = np.zeros((nb, n, n), dtype=np.complex128)
    status_arr = np.zeros(nb, dtype=np.intc)
    cdef double complex[:, :, ::1] T = T_arr
    cdef int[::1] status = status_arr
    cdef double complex[:, ::1] Q = np.zeros((m, m), dtype=np.complex128)
    cdef double complex[::1] v = np.zeros(m, dtype=np.complex128)
    cdef Py_ssize_t i
    with nogil:
        for i in range(nb):
            status[i] = _clll(B[i], R[i], T[i], Q, v, delta, max_iter)
    return T_arr, status_arr
