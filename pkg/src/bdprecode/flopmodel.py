"""Analytic complex-FLOP model of the seven precoders.

Convention: one complex multiply-add counts as 8 real FLOPs, so every
dense-kernel count below is a real multiply-add count scaled by 8.

========== ============================================ =====================
kernel     count                                        notes
========== ============================================ =====================
matmul     8 m n p                                      (m x n) @ (n x p)
qr         16 (m^2 n - m n^2 + n^3/3)                   Householder, m >= n
svd        8 (4 m^2 n + 8 m n^2 + 9 n^3)                full U and V, m >= n
evd        96 n^3                                       8 * (4/3) n^3 * 9
inverse    8 n^3
scale      8 m n                                        diagonal scaling
clll_bound qr(m, n) + 8 n^2 * n^2 ceil(log2(1/(1-delta)))  worst-case bound
========== ============================================ =====================

Wide inputs to ``qr`` and ``svd`` are counted through their transpose. The
CLLL term uses the polynomial bound on size-reduction iterations rather than
measured counts, so every report is deterministic.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from bdprecode.errors import ConfigError, PreconditionError
from bdprecode.numkernel import DEFAULT_DELTA
from bdprecode.precoders import ALL_ALGORITHMS, AlgorithmId

KERNELS = ("svd", "qr", "evd", "matmul", "inverse", "scale", "clll_bound")


def clll_iteration_bound(n, delta=DEFAULT_DELTA):
    """Size-reduction iteration bound ``n^2 ceil(log2(1/(1-delta)))``."""
    return n * n * math.ceil(math.log2(1.0 / (1.0 - delta)))


def kernel_flops(kernel, m, n, p=None, delta=DEFAULT_DELTA):
    """FLOPs of one dense complex kernel call; see the module table."""
    if m < 1 or n < 1 or (p is not None and p < 1):
        raise PreconditionError(f"kernel dimensions must be >= 1, got {(m, n, p)}")
    if kernel == "matmul":
        return 8.0 * m * n * (n if p is None else p)
    if kernel == "qr":
        m, n = max(m, n), min(m, n)
        return 16.0 * (m * m * n - m * n * n + n**3 / 3.0)
    if kernel == "svd":
        m, n = max(m, n), min(m, n)
        return 8.0 * (4 * m * m * n + 8 * m * n * n + 9 * n**3)
    if kernel == "evd":
        return 96.0 * n**3
    if kernel == "inverse":
        return 8.0 * n**3
    if kernel == "scale":
        return 8.0 * m * n
    if kernel == "clll_bound":
        return kernel_flops("qr", m, n) + 8.0 * n * n * clll_iteration_bound(n, delta)
    raise ConfigError(f"unknown kernel {kernel!r}; expected one of {KERNELS}", key="kernel")


@dataclass
class FlopReport:
    algorithm: AlgorithmId
    K: int
    per_user_rx: tuple
    num_tx: int
    breakdown: list = field(default_factory=list)

    @property
    def total_flops(self):
        return float(sum(f for _, _, f in self.breakdown))


class _Tally:
    def __init__(self):
        self.items = []

    def add(self, kernel, *dims, times=1):
        f = kernel_flops(kernel, *dims)
        self.items.append((kernel, tuple(dims), times * f))


def _zf(t, m, n, times):
    # right inverse of an m x n wide matrix: A A^H, its inverse, A^H times that
    t.add("matmul", m, n, m, times=times)
    t.add("inverse", m, m, times=times)
    t.add("matmul", n, m, m, times=times)


def algorithm_flops(alg, K, n_k, n_tx):
    """Itemized FLOP count of one precoder design for ``K`` users of ``n_k`` antennas."""
    alg = AlgorithmId.parse(alg)
    if K < 1 or n_k < 1 or n_tx < K * n_k:
        raise PreconditionError(f"need K, N_k >= 1 and N_T >= K N_k, got K={K}, N_k={n_k}, N_T={n_tx}")
    n_r = K * n_k
    nbar = n_r - n_k
    null = n_tx - nbar
    d = n_k
    t = _Tally()
    if alg is AlgorithmId.BD:
        if nbar:
            t.add("svd", nbar, n_tx, times=K)
        t.add("matmul", n_k, n_tx, null, times=K)
        t.add("svd", n_k, null, times=K)
        t.add("matmul", n_tx, null, d, times=K)
    elif alg is AlgorithmId.RBD:
        if nbar:
            t.add("svd", nbar, n_tx, times=K)
        t.add("scale", n_tx, n_tx, times=K)
        t.add("matmul", n_k, n_tx, n_tx, times=K)
        t.add("svd", n_k, n_tx, times=K)
        t.add("matmul", n_tx, n_tx, d, times=K)
    elif alg is AlgorithmId.GZI:
        _zf(t, n_r, n_tx, 1)
        _gmi_users(t, K, n_k, n_tx, d)
    elif alg is AlgorithmId.SGMI:
        _mmse(t, n_r, n_tx)
        _gmi_users(t, K, n_k, n_tx, d)
    elif alg is AlgorithmId.LC_RBD_LR:
        if nbar:
            t.add("qr", nbar + n_tx, nbar, times=K)
        t.add("matmul", n_k, n_tx, n_tx, times=K)
        t.add("clll_bound", n_tx, n_k, times=K)
        _zf(t, n_k, n_tx, K)
        t.add("matmul", n_tx, n_k, n_k, times=K)
        t.add("matmul", n_tx, n_tx, n_k, times=K)
    elif alg is AlgorithmId.LR_SGMI:
        _mmse(t, n_r, n_tx)
        t.add("qr", n_tx, n_k, times=K)
        t.add("matmul", n_k, n_tx, n_k, times=K)
        t.add("clll_bound", n_k, n_k, times=K)
        _zf(t, n_k, n_k, K)
        # composite P^a (P^b U): the small product first
        t.add("matmul", n_k, n_k, n_k, times=K)
        t.add("matmul", n_tx, n_k, n_k, times=K)
    elif alg is AlgorithmId.QR_EVD:
        if nbar:
            t.add("qr", n_tx, nbar, times=K)
        t.add("matmul", n_k, n_tx, null, times=K)
        t.add("matmul", null, n_k, null, times=K)
        t.add("matmul", n_k, null, n_k, times=K)
        t.add("evd", null, null, times=K)
        t.add("evd", n_k, n_k, times=K)
        t.add("matmul", n_tx, null, d, times=K)
    return FlopReport(alg, K, (n_k,) * K, n_tx, t.items)


def _mmse(t, n_r, n_tx):
    t.add("matmul", n_r, n_tx, n_r)
    t.add("scale", n_r, 1)
    t.add("inverse", n_r, n_r)
    t.add("matmul", n_tx, n_r, n_r)


def _gmi_users(t, K, n_k, n_tx, d):
    t.add("qr", n_tx, n_k, times=K)
    t.add("matmul", n_k, n_tx, n_k, times=K)
    t.add("svd", n_k, n_k, times=K)
    t.add("matmul", n_tx, n_k, d, times=K)


def flop_sweep(algs=ALL_ALGORITHMS, ks=range(2, 9), n_k=2, tx_per_user=None):
    """Reports over a K sweep with ``N_T = K * tx_per_user`` (default ``n_k``)."""
    per = n_k if tx_per_user is None else tx_per_user
    return {AlgorithmId.parse(a): [algorithm_flops(a, K, n_k, K * per) for K in ks] for a in algs}


@dataclass
class GrowthReport:
    slopes: dict
    ordering_holds: bool
    fastest: list


def flops_growth_check(algs=ALL_ALGORITHMS, ks=range(2, 7), n_k=2):
    """Fit ``log(flops)`` against ``log(K)`` per algorithm.

    ``ordering_holds`` is true when BD and RBD (whichever are present) have
    slopes at least as large as every other algorithm's.
    """
    ks = list(ks)
    if len(set(ks)) < 3:
        raise PreconditionError(f"growth fit needs >= 3 distinct K values, got {sorted(set(ks))}")
    sweep = flop_sweep(algs, ks, n_k)
    x = np.log(np.asarray(ks, dtype=float))
    slopes = {}
    for alg, reports in sweep.items():
        y = np.log([r.total_flops for r in reports])
        slopes[alg] = float(np.polyfit(x, y, 1)[0])
    leaders = [a for a in (AlgorithmId.BD, AlgorithmId.RBD) if a in slopes]
    others = [s for a, s in slopes.items() if a not in leaders]
    holds = all(slopes[a] >= max(others, default=-np.inf) for a in leaders)
    fastest = sorted(slopes, key=lambda a: -slopes[a])
    return GrowthReport(slopes, holds, fastest)


__all__ = [
    "FlopReport",
    "GrowthReport",
    "KERNELS",
    "algorithm_flops",
    "clll_iteration_bound",
    "flop_sweep",
    "flops_growth_check",
    "kernel_flops",
]
