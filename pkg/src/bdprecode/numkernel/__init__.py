"""Dense complex linear-algebra kernels used by every precoder.

All operations accept a single matrix of shape ``(m, n)`` or a stack of
matrices of shape ``(..., m, n)`` and return results with the same leading
axes. Decompositions are canonicalized so that identical inputs give
identical outputs:

* QR: the diagonal of ``R`` is real and nonnegative.
* SVD: singular values descend; the largest-magnitude entry of each column
  of ``V`` is real positive (``U`` is rotated along with it).
* Hermitian EVD: eigenvalues descend; the largest-magnitude entry of each
  eigenvector is real positive.

The heavy lifting is done by a backend chosen at import time through
``BDPRECODE_KERNELS``:

* ``compiled``: every kernel from the compiled extension ``_core``.
* ``python``: every kernel from the numpy fallback.
* ``auto`` (default): ``hybrid`` when ``_core`` is importable, which takes
  CLLL from ``_core`` and the dense factorizations from the LAPACK-backed
  fallback (the faster source of each); otherwise ``python``.
"""
import os
from typing import NamedTuple

import numpy as np

from bdprecode.errors import (
    DecompositionError,
    PreconditionError,
    SingularityError,
)

from . import _fallback

RANK_TOL = 1e-12
DEFAULT_DELTA = 0.99


class _Hybrid:
    def __init__(self, core):
        self.svd_batch = _fallback.svd_batch
        self.qr_batch = _fallback.qr_batch
        self.eigh_batch = _fallback.eigh_batch
        self.clll_batch = core.clll_batch


def _select_backend(choice):
    if choice not in ("auto", "hybrid", "compiled", "python"):
        raise PreconditionError(f"unknown kernel backend {choice!r}")
    if choice == "python":
        return _fallback, "python"
    try:
        from . import _core
    except ImportError:
        if choice in ("compiled", "hybrid"):
            raise
        return _fallback, "python"
    if choice == "compiled":
        return _core, "compiled"
    return _Hybrid(_core), "hybrid"


_backend, BACKEND = _select_backend(os.environ.get("BDPRECODE_KERNELS", "auto").lower())


def use_backend(name):
    """Switch the kernel backend at runtime (``"auto"``, ``"hybrid"``, ``"compiled"`` or ``"python"``).

    Returns the name of the backend that was active before the call.
    """
    global _backend, BACKEND
    previous = BACKEND
    _backend, BACKEND = _select_backend(name)
    return previous


class SvdResult(NamedTuple):
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


class QrResult(NamedTuple):
    Q: np.ndarray
    R: np.ndarray


class EvdResult(NamedTuple):
    eigvecs: np.ndarray
    eigvals: np.ndarray


class ClllResult(NamedTuple):
    reduced: np.ndarray
    transform: np.ndarray
    delta: float


def as_matrix(a, name="matrix"):
    """Validate and convert ``a`` to a complex128 (stack of) matrix.

    Raises :class:`PreconditionError` for fewer than two dimensions, an empty
    row or column axis, or non-finite entries.
    """
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim < 2:
        raise PreconditionError(f"{name} must have at least 2 dimensions, got {arr.ndim}")
    if arr.shape[-1] < 1 or arr.shape[-2] < 1:
        raise PreconditionError(f"{name} must have rows >= 1 and cols >= 1, got {arr.shape[-2:]}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(f"{name} has non-finite entries")
    return arr


def hermitian(a):
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def _flat(arr):
    m, n = arr.shape[-2:]
    return np.ascontiguousarray(arr.reshape((-1, m, n))), arr.shape[:-2]


def _unit_phase(z):
    # rescale first so subnormal entries do not underflow in the division
    z = np.asarray(z)
    big = np.maximum(np.abs(z.real), np.abs(z.imag))
    out = np.ones_like(z)
    nz = big > 0
    re, im = z.real[nz] / big[nz], z.imag[nz] / big[nz]
    mag = np.hypot(re, im)
    out[nz] = (re - 1j * im) / mag
    return out


def _column_phases(M):
    """Phases that make the largest-magnitude entry of each column real positive."""
    idx = np.argmax(np.abs(M), axis=-2)[..., None, :]
    peak = np.take_along_axis(M, idx, axis=-2)[..., 0, :]
    return _unit_phase(peak)


def svd(a):
    """Full singular value decomposition ``a = U @ diag(S) @ V^H``.

    ``U`` is ``m x m``, ``V`` is ``n x n`` and ``S`` has length ``min(m, n)``.
    """
    arr = as_matrix(a)
    flat, lead = _flat(arr)
    m, n = flat.shape[-2:]
    k = min(m, n)
    u, s, v, status = _backend.svd_batch(flat, 100 * k)
    if np.any(status < 0):
        raise DecompositionError(f"SVD did not converge for a {m}x{n} matrix", shape=(m, n))
    order = np.argsort(-s, axis=-1, kind="stable")
    s = np.take_along_axis(s, order, axis=-1)
    u = u.copy()
    v = v.copy()
    u[..., :k] = np.take_along_axis(u[..., :k], order[:, None, :], axis=-1)
    v[..., :k] = np.take_along_axis(v[..., :k], order[:, None, :], axis=-1)

    ph = _column_phases(v)
    v = v * ph[:, None, :]
    u[..., :k] *= ph[:, None, :k]
    if m > k:
        u[..., k:] *= _column_phases(u[..., k:])[:, None, :]
    return SvdResult(
        u.reshape(lead + (m, m)), s.reshape(lead + (k,)), v.reshape(lead + (n, n))
    )


def qr(a, mode="full"):
    """Householder QR with a real nonnegative ``R`` diagonal.

    ``mode="full"`` returns square ``Q`` (``m x m``) and ``R`` (``m x n``);
    ``mode="thin"`` requires ``m >= n`` and returns ``Q`` (``m x n``) and
    ``R`` (``n x n``).
    """
    if mode not in ("full", "thin"):
        raise PreconditionError(f"unknown QR mode {mode!r}")
    arr = as_matrix(a)
    m, n = arr.shape[-2:]
    if mode == "thin" and m < n:
        raise PreconditionError(f"thin QR needs rows >= cols, got {m}x{n}")
    flat, lead = _flat(arr)
    q, r = _backend.qr_batch(flat)
    k = min(m, n)
    ph = _unit_phase(np.diagonal(r[:, :k, :k], axis1=-2, axis2=-1))
    q = q.copy()
    r = np.triu(r)
    r[:, :k, :] *= ph[:, :, None]
    q[:, :, :k] *= np.conj(ph)[:, None, :]
    diag = np.arange(k)
    r[:, diag, diag] = r[:, diag, diag].real
    if mode == "thin":
        q, r = q[:, :, :n], r[:, :n, :]
    return QrResult(q.reshape(lead + q.shape[1:]), r.reshape(lead + r.shape[1:]))


def herm_evd(a):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    arr = as_matrix(a)
    m, n = arr.shape[-2:]
    if m != n:
        raise PreconditionError(f"herm_evd needs a square matrix, got {m}x{n}")
    skew = np.linalg.norm(arr - hermitian(arr), axis=(-2, -1))
    scale = np.linalg.norm(arr, axis=(-2, -1))
    if np.any(skew > 1e-10 * scale):
        raise PreconditionError("herm_evd input is not Hermitian")
    flat, lead = _flat(0.5 * (arr + hermitian(arr)))
    w, v, status = _backend.eigh_batch(flat, 100 * n)
    if np.any(status < 0):
        raise DecompositionError(f"Hermitian EVD did not converge for a {n}x{n} matrix", shape=(n, n))
    order = np.argsort(-w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    v = v * _column_phases(v)[:, None, :]
    return EvdResult(v.reshape(lead + (n, n)), w.reshape(lead + (n,)))


def _check_full_row_rank(s, what):
    smax = s[..., 0]
    smin = s[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(smax > 0, smin / np.where(smax > 0, smax, 1.0), 0.0)
    if np.any(ratio <= RANK_TOL):
        worst = float(np.min(ratio))
        raise SingularityError(
            f"{what} is rank deficient (sigma_min/sigma_max = {worst:.3e})", ratio=worst
        )


def pinv(a):
    """Right inverse ``A^H (A A^H)^{-1}`` of a full-row-rank matrix."""
    arr = as_matrix(a)
    m, n = arr.shape[-2:]
    if m > n:
        raise PreconditionError(f"pinv needs rows <= cols, got {m}x{n}")
    u, s, v = svd(arr)
    _check_full_row_rank(s, "pinv input")
    return (v[..., :m] / s[..., None, :]) @ hermitian(u)


def reg_inv_sqrt(s, n, alpha):
    """Diagonal of ``(diag(s^2, zero padded to n) + alpha I)^{-1/2}``."""
    s = np.asarray(s, dtype=np.float64)
    if alpha < 0:
        raise PreconditionError(f"alpha must be >= 0, got {alpha}")
    if np.any(s < 0):
        raise PreconditionError("singular values must be nonnegative")
    k = s.shape[-1]
    if k > n:
        raise PreconditionError(f"{k} singular values do not fit a length-{n} diagonal")
    d = np.zeros(s.shape[:-1] + (n,))
    d[..., :k] = s**2
    d = d + alpha
    if np.any(d == 0.0):
        raise SingularityError("regularized diagonal has a zero entry (alpha = 0)", ratio=0.0)
    return 1.0 / np.sqrt(d)


def clll(h, delta=DEFAULT_DELTA, max_iter=100_000):
    """Complex LLL reduction of the lattice spanned by the rows of ``h``.

    Returns the reduced basis ``T @ h`` and the Gaussian-integer unimodular
    ``T``. The reduced basis is recomputed from the rounded transform, so the
    relation holds to machine precision.
    """
    if not 0.5 < delta <= 1.0:
        raise PreconditionError(f"delta must lie in (0.5, 1], got {delta}")
    arr = as_matrix(h)
    m, n = arr.shape[-2:]
    if m > n:
        raise SingularityError(f"{m} basis vectors in dimension {n} cannot be independent", ratio=0.0)
    _check_full_row_rank(svd(arr).S, "CLLL basis")
    flat, lead = _flat(np.swapaxes(arr, -1, -2))
    t, status = _backend.clll_batch(flat, float(delta), int(max_iter))
    if np.any(status == 2):
        raise SingularityError("CLLL basis is rank deficient", ratio=0.0)
    if np.any(status == 1):
        raise DecompositionError(f"CLLL hit the iteration cap for a {m}x{n} basis", shape=(m, n))
    t = np.round(t.real) + 1j * np.round(t.imag)
    transform = np.swapaxes(t, -1, -2).reshape(lead + (m, m))
    return ClllResult(transform @ arr, transform, float(delta))


def lll_conditions(basis, delta, tol=1e-9):
    """Check size reduction and the Lovasz condition for the rows of ``basis``.

    Returns ``(size_reduced, lovasz)`` as booleans (all-true over a stack).
    """
    r = qr(np.swapaxes(as_matrix(basis), -1, -2), mode="thin").R
    n = r.shape[-1]
    size_ok = True
    lovasz_ok = True
    for k in range(1, n):
        for j in range(k):
            mu = r[..., j, k] / r[..., j, j]
            size_ok &= bool(np.all(np.abs(mu.real) <= 0.5 + tol) and np.all(np.abs(mu.imag) <= 0.5 + tol))
        lhs = delta * np.abs(r[..., k - 1, k - 1]) ** 2
        rhs = np.abs(r[..., k - 1, k]) ** 2 + np.abs(r[..., k, k]) ** 2
        lovasz_ok &= bool(np.all(lhs <= rhs * (1 + tol)))
    return size_ok, lovasz_ok


def orthogonality_defect(basis):
    """Product of row norms over the lattice volume (1 for orthogonal rows)."""
    arr = as_matrix(basis)
    norms = np.prod(np.linalg.norm(arr, axis=-1), axis=-1)
    vol = np.prod(svd(arr).S, axis=-1)
    return norms / vol


__all__ = [
    "BACKEND",
    "ClllResult",
    "EvdResult",
    "QrResult",
    "SvdResult",
    "as_matrix",
    "clll",
    "herm_evd",
    "hermitian",
    "lll_conditions",
    "orthogonality_defect",
    "pinv",
    "qr",
    "reg_inv_sqrt",
    "svd",
    "use_backend",
]
