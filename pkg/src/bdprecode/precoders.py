"""Block-diagonalization-type linear precoders for the MU-MIMO downlink.

Every precoder works on a :class:`~bdprecode.channel.UserChannelSet` whose
``joint`` matrix may carry leading tone axes; all per-tone problems are solved
in one batched pass. Users are indexed from 0.

Each algorithm builds a first filter ``P_k^a`` that suppresses (or, for the
regularized variants, trades off) interference towards the other users, and a
second filter ``P_k^b`` that handles the resulting single-user channel
``H_eff,k = H_k P_k^a``:

========== ================================= =================================
algorithm  first filter                      second stage
========== ================================= =================================
BD         null space of H̄_k (SVD)          SVD of H_eff,k, decoder U^H
RBD        V̄_k (Σ̄_k^T Σ̄_k + αI)^{-1/2}      SVD of H_eff,k, decoder U^H
GZI        thin QR of the ZF-inverse block   as BD
LC-RBD-LR  block of Q from QR of [αI | H̄_k]^H CLLL + ZF of the reduced channel
S-GMI      thin QR of the MMSE-inverse block as BD
LR-S-GMI   as S-GMI                          as LC-RBD-LR
QR-EVD     null space of H̄_k (full QR)      EVDs of the two Gram matrices
========== ================================= =================================

The joint precoder is scaled by a single per-tone factor ``beta`` so that
``trace(P^H P)`` equals the total transmit power.
"""
import enum
from dataclasses import dataclass, field

import numpy as np

from bdprecode import numkernel as nk
from bdprecode.errors import ConfigError, DimensionError, PreconditionError, SingularityError


class AlgorithmId(enum.Enum):
    BD = "bd"
    RBD = "rbd"
    GZI = "gzi"
    LC_RBD_LR = "lc-rbd-lr"
    SGMI = "sgmi"
    LR_SGMI = "lr-sgmi"
    QR_EVD = "qr-evd"

    @property
    def uses_lattice_reduction(self):
        return self in (AlgorithmId.LC_RBD_LR, AlgorithmId.LR_SGMI)

    @property
    def label(self):
        return _LABELS[self]

    @classmethod
    def parse(cls, name):
        """Look up an algorithm by id (``"lc-rbd-lr"``), enum name or label."""
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        for alg in cls:
            if key in (alg.value, alg.label.lower()):
                return alg
        raise ConfigError(f"unknown algorithm {name!r}; expected one of {[a.value for a in cls]}", key="algorithms")


_LABELS = {
    AlgorithmId.BD: "BD",
    AlgorithmId.RBD: "RBD",
    AlgorithmId.GZI: "GZI",
    AlgorithmId.LC_RBD_LR: "LC-RBD-LR",
    AlgorithmId.SGMI: "S-GMI",
    AlgorithmId.LR_SGMI: "LR-S-GMI",
    AlgorithmId.QR_EVD: "QR-EVD",
}

ALL_ALGORITHMS = tuple(AlgorithmId)


def derive_alpha(ant, xi, sigma2):
    """Regularization factor ``sqrt(N_R sigma2 / xi)``.

    ``ant`` is anything with a ``num_rx`` attribute, or the count itself.
    """
    if xi <= 0:
        raise PreconditionError(f"total transmit power must be > 0, got {xi}")
    if sigma2 < 0:
        raise PreconditionError(f"noise variance must be >= 0, got {sigma2}")
    n_rx = getattr(ant, "num_rx", ant)
    return float(np.sqrt(n_rx * sigma2 / xi))


@dataclass(frozen=True)
class PrecodeParams:
    """Transmit power, noise variance and regularization for one design.

    Parameters
    ----------
    total_tx_power : float
        ``xi``, the trace the joint precoder is normalized to.
    noise_variance : float
        Per-antenna receiver noise variance.
    alpha : float
        Regularization factor. Use :meth:`derived` for the usual
        ``sqrt(N_R sigma2 / xi)``.
    streams_per_user : tuple, optional
        ``d_k``; defaults to the receive antenna counts.
    """

    total_tx_power: float
    noise_variance: float
    alpha: float = 0.0
    streams_per_user: tuple = None

    def __post_init__(self):
        if not self.total_tx_power > 0:
            raise PreconditionError(f"total_tx_power must be > 0, got {self.total_tx_power}")
        if self.noise_variance < 0:
            raise PreconditionError(f"noise_variance must be >= 0, got {self.noise_variance}")
        if self.alpha < 0:
            raise PreconditionError(f"alpha must be >= 0, got {self.alpha}")

    @classmethod
    def derived(cls, ant, xi, sigma2, streams_per_user=None):
        streams = streams_per_user if streams_per_user is not None else getattr(ant, "streams_per_user", None)
        return cls(xi, sigma2, derive_alpha(ant, xi, sigma2), streams)

    def streams(self, chs):
        d = chs.per_user_rx if self.streams_per_user is None else tuple(self.streams_per_user)
        if len(d) != chs.num_users:
            raise DimensionError(f"{len(d)} stream counts for {chs.num_users} users")
        for dk, nk_ in zip(d, chs.per_user_rx):
            if not 1 <= dk <= nk_:
                raise DimensionError(f"need 1 <= d_k <= N_k, got d_k={dk} for N_k={nk_}")
        return tuple(int(x) for x in d)


@dataclass
class PrecodeSolution:
    """Per-user filters, the power-normalized joint precoder and receivers.

    Arrays carry the same leading tone axes as the channel. For the lattice
    reduction algorithms ``per_user_pb`` holds the ZF inverse of the reduced
    channel and the transmitted block is ``beta P_k^a P_k^b U_k``; those
    algorithms have no decoder.
    """

    algorithm: AlgorithmId
    per_user_pa: list
    per_user_pb: list
    joint_p: np.ndarray
    power_scale: np.ndarray
    streams_per_user: tuple
    total_tx_power: float
    per_user_heff: list = field(default_factory=list, repr=False)
    per_user_d: list = None
    lattice_transforms: list = None

    @property
    def num_users(self):
        return len(self.streams_per_user)

    @property
    def stream_slices(self):
        edges = np.concatenate([[0], np.cumsum(self.streams_per_user)])
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    @property
    def per_user_p(self):
        """Column blocks of the joint precoder, one per user."""
        return [self.joint_p[..., sl] for sl in self.stream_slices]

    def decoder(self):
        """Block-diagonal ``D`` (``d x N_R``) or ``None`` for the LR algorithms."""
        if self.per_user_d is None:
            return None
        lead = self.joint_p.shape[:-2]
        rx = [dk.shape[-1] for dk in self.per_user_d]
        out = np.zeros(lead + (sum(self.streams_per_user), sum(rx)), dtype=np.complex128)
        r0 = 0
        for sl, dk, n in zip(self.stream_slices, self.per_user_d, rx):
            out[..., sl, r0 : r0 + n] = dk
            r0 += n
        return out


def exclusion_channel(chs, k):
    """Rows of every user except ``k`` (0-based), in user order."""
    if not 0 <= k < chs.num_users:
        raise PreconditionError(f"user index {k} out of range for {chs.num_users} users")
    parts = [h for j, h in enumerate(chs.per_user) if j != k]
    if not parts:
        return np.zeros(chs.joint.shape[:-2] + (0, chs.num_tx), dtype=np.complex128)
    return np.concatenate(parts, axis=-2)


def _eye_like(lead, n):
    return np.broadcast_to(np.eye(n, dtype=np.complex128), tuple(lead) + (n, n)).copy()


def _check_ratio(s, d, what):
    """Raise when the d-th singular value is numerically zero."""
    top = s[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(top > 0, s[..., d - 1] / np.where(top > 0, top, 1.0), 0.0)
    if np.any(ratio <= nk.RANK_TOL):
        worst = float(np.min(ratio))
        raise SingularityError(f"{what} is rank deficient (sigma ratio {worst:.3e})", ratio=worst)


def _null_space_svd(hbar, n_tx, d):
    lead = hbar.shape[:-2]
    nbar = hbar.shape[-2]
    if nbar == 0:
        return _eye_like(lead, n_tx)
    if n_tx - nbar < d:
        raise DimensionError(f"null space of dimension {n_tx - nbar} cannot carry {d} streams")
    res = nk.svd(hbar)
    _check_ratio(res.S, nbar, "interference channel")
    return res.V[..., :, nbar:]


def _null_space_qr(hbar, n_tx, d):
    lead = hbar.shape[:-2]
    nbar = hbar.shape[-2]
    if nbar == 0:
        return _eye_like(lead, n_tx)
    if n_tx - nbar < d:
        raise DimensionError(f"null space of dimension {n_tx - nbar} cannot carry {d} streams")
    res = nk.qr(nk.hermitian(hbar), mode="full")
    _check_ratio(np.diagonal(res.R, axis1=-2, axis2=-1).real.copy(), nbar, "interference channel")
    return res.Q[..., :, nbar:]


def _phase_align(pa, pb, dmat=None):
    """Rotate stream columns so the largest entry of each ``P_k^a P_k^b`` column is real positive."""
    comp = pa @ pb
    ph = nk._column_phases(comp)
    pb = pb * ph[..., None, :]
    if dmat is not None:
        dmat = dmat * np.conj(ph)[..., :, None]
    return pb, dmat


def _svd_stage(pa, heff, d):
    res = nk.svd(heff)
    _check_ratio(res.S, d, "effective channel")
    pb = res.V[..., :, :d]
    dmat = nk.hermitian(res.U[..., :, :d])
    return _phase_align(pa, pb, dmat)


def _lr_stage(pa, heff, delta):
    red = nk.clll(heff, delta=delta)
    pb = nk.pinv(red.reduced)
    return pb, red.transform


def _mmse_inverse(h, alpha):
    """``H^H (H H^H + alpha I)^{-1}`` through the SVD of ``H``."""
    m = h.shape[-2]
    res = nk.svd(h)
    s = res.S
    if alpha == 0.0:
        _check_ratio(s, m, "joint channel")
        return (res.V[..., :m] / s[..., None, :]) @ nk.hermitian(res.U)
    return (res.V[..., :m] * (s / (s**2 + alpha))[..., None, :]) @ nk.hermitian(res.U)


def _assemble(alg, chs, params, d, pas, pbs, heffs, ds=None, us=None):
    blocks = []
    for k in range(len(pas)):
        pb = pbs[k] if us is None else pbs[k] @ us[k]
        blocks.append(pas[k] @ pb)
    raw = np.concatenate(blocks, axis=-1)
    energy = np.sum(np.abs(raw) ** 2, axis=(-2, -1))
    if np.any(energy <= 0) or not np.all(np.isfinite(energy)):
        raise SingularityError("joint precoder has zero or non-finite energy", ratio=0.0)
    beta = np.sqrt(params.total_tx_power / energy)
    return PrecodeSolution(
        algorithm=alg,
        per_user_pa=pas,
        per_user_pb=pbs,
        joint_p=raw * beta[..., None, None],
        power_scale=beta,
        streams_per_user=d,
        total_tx_power=params.total_tx_power,
        per_user_heff=heffs,
        per_user_d=ds,
        lattice_transforms=us,
    )


def _two_stage(alg, chs, params, first):
    """Shared pipeline for algorithms with an SVD second stage."""
    d = params.streams(chs)
    pas, pbs, heffs, ds = [], [], [], []
    for k, hk in enumerate(chs.per_user):
        pa = first(k)
        heff = hk @ pa
        pb, dk = _svd_stage(pa, heff, d[k])
        pas.append(pa)
        pbs.append(pb)
        heffs.append(heff)
        ds.append(dk)
    return _assemble(alg, chs, params, d, pas, pbs, heffs, ds=ds)


def _check_feasible(chs):
    if chs.num_rx > chs.num_tx:
        raise DimensionError(f"need N_R <= N_T, got N_R={chs.num_rx}, N_T={chs.num_tx}")


def precode_bd(chs, params):
    """Block diagonalization: exact nulling through the SVD null space of H̄_k."""
    _check_feasible(chs)
    d = params.streams(chs)
    return _two_stage(
        AlgorithmId.BD, chs, params, lambda k: _null_space_svd(exclusion_channel(chs, k), chs.num_tx, d[k])
    )


def precode_rbd(chs, params):
    """Regularized BD: ``P_k^a = V̄_k (Σ̄_k^T Σ̄_k + alpha I)^{-1/2}``."""
    lead = chs.joint.shape[:-2]
    n_tx = chs.num_tx

    def first(k):
        hbar = exclusion_channel(chs, k)
        if hbar.shape[-2] == 0:
            vbar = _eye_like(lead, n_tx)
            s = np.zeros(lead + (0,))
        else:
            res = nk.svd(hbar)
            vbar, s = res.V, res.S
        return vbar * nk.reg_inv_sqrt(s, n_tx, params.alpha)[..., None, :]

    return _two_stage(AlgorithmId.RBD, chs, params, first)


def _inverse_blocks(chs, inv):
    cols = chs.user_slices
    return [inv[..., :, sl] for sl in cols]


def precode_gzi(chs, params):
    """Generalized ZF inversion: thin QR of each user's block of ``pinv(H)``."""
    _check_feasible(chs)
    blocks = _inverse_blocks(chs, nk.pinv(chs.joint))
    return _two_stage(AlgorithmId.GZI, chs, params, lambda k: nk.qr(blocks[k], mode="thin").Q)


def precode_sgmi(chs, params):
    """Successive GMI: thin QR of each user's block of the MMSE inverse."""
    _check_feasible(chs)
    blocks = _inverse_blocks(chs, _mmse_inverse(chs.joint, params.alpha))
    return _two_stage(AlgorithmId.SGMI, chs, params, lambda k: nk.qr(blocks[k], mode="thin").Q)


def _lc_first(chs, k, alpha):
    hbar = exclusion_channel(chs, k)
    nbar = hbar.shape[-2]
    n_tx = chs.num_tx
    lead = hbar.shape[:-2]
    if nbar == 0:
        return _eye_like(lead, n_tx)
    ext = np.concatenate([alpha * _eye_like(lead, nbar), hbar], axis=-1)
    q = nk.qr(nk.hermitian(ext), mode="full").Q
    return q[..., nbar:, nbar:]


def _lr_pipeline(alg, chs, params, first, delta):
    d = params.streams(chs)
    if d != chs.per_user_rx:
        raise DimensionError("lattice-reduction precoders transmit N_k streams per user (d_k = N_k)")
    pas, pbs, heffs, us = [], [], [], []
    for k, hk in enumerate(chs.per_user):
        pa = first(k)
        heff = hk @ pa
        pb, u = _lr_stage(pa, heff, delta)
        pas.append(pa)
        pbs.append(pb)
        heffs.append(heff)
        us.append(u)
    return _assemble(alg, chs, params, d, pas, pbs, heffs, us=us)


def precode_lc_rbd_lr(chs, params, delta=nk.DEFAULT_DELTA):
    """Low-complexity RBD with lattice reduction.

    The first filter is the lower-right ``N_T x N_T`` block of ``Q`` from the
    full QR of ``[alpha I | H̄_k]^H``; the second is the ZF inverse of the
    CLLL-reduced effective channel.
    """
    if params.alpha <= 0:
        raise PreconditionError("LC-RBD-LR needs alpha > 0; the channel extension degenerates at alpha = 0")
    return _lr_pipeline(AlgorithmId.LC_RBD_LR, chs, params, lambda k: _lc_first(chs, k, params.alpha), delta)


def precode_lr_sgmi(chs, params, delta=nk.DEFAULT_DELTA):
    """S-GMI first filter followed by the lattice-reduction second stage."""
    _check_feasible(chs)
    blocks = _inverse_blocks(chs, _mmse_inverse(chs.joint, params.alpha))
    return _lr_pipeline(AlgorithmId.LR_SGMI, chs, params, lambda k: nk.qr(blocks[k], mode="thin").Q, delta)


def precode_qr_evd(chs, params):
    """QR null space followed by eigendecompositions of the effective Gram matrices."""
    _check_feasible(chs)
    d = params.streams(chs)
    pas, pbs, heffs, ds = [], [], [], []
    for k, hk in enumerate(chs.per_user):
        pa = _null_space_qr(exclusion_channel(chs, k), chs.num_tx, d[k])
        heff = hk @ pa
        right = nk.herm_evd(nk.hermitian(heff) @ heff)
        left = nk.herm_evd(heff @ nk.hermitian(heff))
        top = left.eigvals[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(top > 0, left.eigvals[..., d[k] - 1] / np.where(top > 0, top, 1.0), 0.0)
        if np.any(ratio <= nk.RANK_TOL**2):
            worst = float(np.sqrt(max(np.min(ratio), 0.0)))
            raise SingularityError(f"effective channel is rank deficient (sigma ratio {worst:.3e})", ratio=worst)
        pb = right.eigvecs[..., :, : d[k]]
        dk = nk.hermitian(left.eigvecs[..., :, : d[k]])
        # the two EVDs fix phases independently; rotate D so the stream gains are real positive
        gain = np.diagonal(dk @ heff @ pb, axis1=-2, axis2=-1)
        dk = dk * nk._unit_phase(gain)[..., :, None]
        pb, dk = _phase_align(pa, pb, dk)
        pas.append(pa)
        pbs.append(pb)
        heffs.append(heff)
        ds.append(dk)
    return _assemble(AlgorithmId.QR_EVD, chs, params, d, pas, pbs, heffs, ds=ds)


_DISPATCH = {
    AlgorithmId.BD: precode_bd,
    AlgorithmId.RBD: precode_rbd,
    AlgorithmId.GZI: precode_gzi,
    AlgorithmId.LC_RBD_LR: precode_lc_rbd_lr,
    AlgorithmId.SGMI: precode_sgmi,
    AlgorithmId.LR_SGMI: precode_lr_sgmi,
    AlgorithmId.QR_EVD: precode_qr_evd,
}


def precode(alg, chs, params):
    """Run algorithm ``alg`` (an :class:`AlgorithmId` or its id string)."""
    return _DISPATCH[AlgorithmId.parse(alg)](chs, params)


def stream_gains(sol, chs):
    """Complex per-stream gains ``diag(D H P)`` for the decoder-based algorithms."""
    if sol.per_user_d is None:
        raise PreconditionError(f"{sol.algorithm.label} has no decoder")
    gains = []
    for hk, dk, pk in zip(chs.per_user, sol.per_user_d, sol.per_user_p):
        gains.append(np.diagonal(dk @ hk @ pk, axis1=-2, axis2=-1))
    return np.concatenate(gains, axis=-1)


__all__ = [
    "ALL_ALGORITHMS",
    "AlgorithmId",
    "PrecodeParams",
    "PrecodeSolution",
    "derive_alpha",
    "exclusion_channel",
    "precode",
    "precode_bd",
    "precode_gzi",
    "precode_lc_rbd_lr",
    "precode_lr_sgmi",
    "precode_qr_evd",
    "precode_rbd",
    "precode_sgmi",
    "stream_gains",
]
