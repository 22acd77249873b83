"""Pure-Python kernel backend.

Same batch interface as the compiled ``_core`` extension. QR, SVD and the
Hermitian eigenproblem delegate to LAPACK through numpy; complex LLL is a
direct Python transcription of the compiled loop.
"""
import math

import numpy as np


def qr_batch(a):
    q, r = np.linalg.qr(a, mode="complete")
    return np.ascontiguousarray(q), np.ascontiguousarray(r)


def svd_batch(a, max_sweeps):
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=True)
    except np.linalg.LinAlgError:
        nb = a.shape[0]
        return None, None, None, np.full(nb, -1, dtype=np.intc)
    v = np.conj(np.swapaxes(vh, -1, -2))
    return u, s, v, np.ones(a.shape[0], dtype=np.intc)


def eigh_batch(a, max_sweeps):
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError:
        return None, None, np.full(a.shape[0], -1, dtype=np.intc)
    return w, v, np.zeros(a.shape[0], dtype=np.intc)


def _round_half_up(x):
    return math.floor(x + 0.5)


def _clll_one(basis, delta, max_iter):
    b = basis.copy()
    m, n = b.shape
    _, r = np.linalg.qr(b, mode="reduced")
    r = r.copy()
    diag = np.abs(np.diag(r))
    if diag.max() == 0.0 or np.any(diag <= 1e-12 * diag.max()):
        return None, 2
    t = np.eye(n, dtype=np.complex128)
    k = 1
    it = 0
    while k < n:
        it += 1
        if it > max_iter:
            return t, 1
        for j in range(k - 1, -1, -1):
            mu = r[j, k] / r[j, j]
            q = complex(_round_half_up(mu.real), _round_half_up(mu.imag))
            if q != 0:
                r[: j + 1, k] -= q * r[: j + 1, j]
                b[:, k] -= q * b[:, j]
                t[:, k] -= q * t[:, j]
        lhs = delta * abs(r[k - 1, k - 1]) ** 2
        rhs = abs(r[k - 1, k]) ** 2 + abs(r[k, k]) ** 2
        if lhs > rhs:
            b[:, [k - 1, k]] = b[:, [k, k - 1]]
            t[:, [k - 1, k]] = t[:, [k, k - 1]]
            r[: k + 1, [k - 1, k]] = r[: k + 1, [k, k - 1]]
            a0, b0 = r[k - 1, k - 1], r[k, k - 1]
            rabs = math.hypot(abs(a0), abs(b0))
            g = np.array([[np.conj(a0), np.conj(b0)], [-b0, a0]]) / rabs
            r[k - 1 : k + 1, k - 1 :] = g @ r[k - 1 : k + 1, k - 1 :]
            r[k, k - 1] = 0.0
            k = max(k - 1, 1)
        else:
            k += 1
    return t, 0


def clll_batch(b, delta, max_iter):
    nb, _, n = b.shape
    t_all = np.zeros((nb, n, n), dtype=np.complex128)
    status = np.zeros(nb, dtype=np.intc)
    for i in range(nb):
        t, st = _clll_one(b[i], delta, max_iter)
        status[i] = st
        if t is not None:
            t_all[i] = t
    return t_all, status
