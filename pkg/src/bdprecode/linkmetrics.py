"""QPSK link model, receivers, BER counting, sum-rate and eigen-structure statistics.

Receivers follow two conventions:

* decoder-based algorithms (BD, RBD, GZI, S-GMI, QR-EVD) apply the block
  diagonal ``D`` and divide every stream by its complex gain ``diag(D H P)``;
  residual inter-user and inter-stream leakage is treated as noise.
* lattice-reduction algorithms transmit ``beta P_k^a P_k^b U_k x_k`` so the
  end-to-end map of user ``k`` is ``beta I``; the receiver only removes
  ``beta``.
"""
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from bdprecode import numkernel as nk
from bdprecode.errors import NumericalError, PreconditionError
from bdprecode.precoders import AlgorithmId, PrecodeParams, precode, stream_gains

BITS_PER_SYMBOL = 2
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def noise_variance(ant, xi, bits_per_symbol, ebn0_db):
    """``N_R xi / (N_T M Eb/N0)`` with Eb/N0 given in dB."""
    if xi <= 0 or bits_per_symbol <= 0:
        raise PreconditionError("xi and bits_per_symbol must be positive")
    ebn0 = 10.0 ** (ebn0_db / 10.0)
    return ant.num_rx * xi / (ant.num_tx * bits_per_symbol * ebn0)


def qpsk_modulate(bits):
    """Gray-mapped unit-energy QPSK; the last axis holds bit pairs.

    ``00 -> (1+j)/sqrt2``, ``01 -> (-1+j)/sqrt2``, ``11 -> (-1-j)/sqrt2``,
    ``10 -> (1-j)/sqrt2``.
    """
    b = np.asarray(bits)
    if b.shape[-1] % 2:
        raise PreconditionError(f"QPSK needs an even number of bits, got {b.shape[-1]}")
    b = b.astype(np.int8).reshape(b.shape[:-1] + (-1, 2))
    re = 1 - 2 * b[..., 1]
    im = 1 - 2 * b[..., 0]
    return (re + 1j * im) * _INV_SQRT2


def qpsk_demodulate(symbols):
    """Per-component sign decisions, inverse of :func:`qpsk_modulate`."""
    z = np.asarray(symbols)
    out = np.empty(z.shape + (2,), dtype=np.int8)
    out[..., 0] = z.imag < 0
    out[..., 1] = z.real < 0
    return out.reshape(z.shape[:-1] + (-1,)) if z.ndim else out


def complex_noise(rng, shape, sigma2):
    """Circularly-symmetric Gaussian samples with variance ``sigma2``."""
    scale = math.sqrt(sigma2 / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def receive(sol, chs, x, noise):
    """Noisy reception and per-stream equalization.

    Parameters
    ----------
    sol : PrecodeSolution
    chs : UserChannelSet
        Channel with leading tone axes ``T``.
    x : ndarray, shape ``T + (S, d)``
        Stacked transmit symbols, ``S`` symbol vectors per tone.
    noise : ndarray, shape ``T + (S, N_R)``

    Returns
    -------
    ndarray, shape ``T + (S, d)``
        Soft symbol estimates ready for the QPSK decision.
    """
    hp = chs.joint @ sol.joint_p
    rx = np.einsum("...ij,...sj->...si", hp, x) + noise
    if sol.per_user_d is None:
        return rx / sol.power_scale[..., None, None]
    y = np.einsum("...ij,...sj->...si", sol.decoder(), rx)
    return y / stream_gains(sol, chs)[..., None, :]


def transmit_receive(sol, chs, x, sigma2, rng):
    """Draw channel noise and return the equalized per-stream estimates."""
    lead = x.shape[:-1]
    return receive(sol, chs, x, complex_noise(rng, lead + (chs.num_rx,), sigma2))


class BerCount(NamedTuple):
    errors: int
    bits: int

    @property
    def ber(self):
        return self.errors / self.bits if self.bits else float("nan")

    @property
    def standard_error(self):
        p = self.ber
        return math.sqrt(p * (1 - p) / self.bits) if self.bits else float("nan")

    def __add__(self, other):
        return BerCount(self.errors + other.errors, self.bits + other.bits)


def count_errors(sol, chs, bits, noise):
    """Transmit ``bits`` (shape ``T + (S, 2d)``) and count bit errors."""
    est = receive(sol, chs, qpsk_modulate(bits), noise)
    errors = int(np.count_nonzero(qpsk_demodulate(est) != bits))
    return BerCount(errors, int(bits.size))


def measure_ber(alg, channels, ant, ebn0_db, symbols_per_tone=1, rng=None, xi=None):
    """Monte Carlo BER of ``alg`` over an iterable of channel sets.

    Each element of ``channels`` is a (tone-batched) :class:`UserChannelSet`.
    The precoder is designed at the noise variance implied by ``ebn0_db``.
    """
    if symbols_per_tone < 1:
        raise PreconditionError("symbols_per_tone must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    xi = float(ant.num_tx) if xi is None else xi
    sigma2 = noise_variance(ant, xi, BITS_PER_SYMBOL, ebn0_db)
    params = PrecodeParams.derived(ant, xi, sigma2)
    total = BerCount(0, 0)
    for chs in channels:
        sol = precode(alg, chs, params)
        lead = chs.joint.shape[:-2] + (symbols_per_tone,)
        bits = rng.integers(0, 2, size=lead + (BITS_PER_SYMBOL * ant.num_streams,), dtype=np.int8)
        noise = complex_noise(rng, lead + (chs.num_rx,), sigma2)
        total = total + count_errors(sol, chs, bits, noise)
    return total


def q_function(x):
    """Gaussian tail probability ``Q(x)``."""
    return 0.5 * np.vectorize(math.erfc)(np.asarray(x, dtype=np.float64) / math.sqrt(2.0))


def qpsk_ber_awgn(gain, n0):
    """Bit error probability of unit-energy Gray QPSK through gain ``gain``: ``Q(|g| / sqrt(N0))``."""
    return q_function(np.abs(gain) / math.sqrt(n0))


def sum_rate(chs, sol, sigma2):
    """``log2 det(I + H P P^H H^H / sigma2)`` per tone, via Cholesky."""
    if not sigma2 > 0:
        raise PreconditionError(f"sum rate needs sigma2 > 0, got {sigma2}")
    g = chs.joint @ sol.joint_p
    return _logdet_rate(g, sigma2)


def _logdet_rate(g, sigma2):
    n = g.shape[-2]
    a = np.eye(n) + (g @ nk.hermitian(g)) / sigma2
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"sum-rate matrix is not positive definite: {exc}") from exc
    rate = 2.0 * np.sum(np.log2(np.abs(np.diagonal(chol, axis1=-2, axis2=-1))), axis=-1)
    if not np.all(np.isfinite(rate)):
        raise NumericalError("sum rate is not finite")
    return rate


def sum_rate_singular(s, sigma2):
    """Eigen-sum form ``sum_k log2(1 + s_k^2 / sigma2)``."""
    s = np.asarray(s, dtype=np.float64)
    return np.sum(np.log2(1.0 + s**2 / sigma2), axis=-1)


def jensen_gap(s, sigma2, total_power=None, num_tx=None):
    """Bound minus average rate for the per-channel-use Jensen inequality.

    With ``P_T`` and ``N_T`` defaulting so that ``P_T / N_T = 1``, returns
    ``log2(1 + P_T mean(s^2) / (N_T sigma2)) - mean(log2(1 + P_T s^2 / (N_T sigma2)))``,
    which is never negative.
    """
    s = np.asarray(s, dtype=np.float64)
    snr = 1.0 / sigma2 if total_power is None else total_power / (num_tx * sigma2)
    avg = np.mean(np.log2(1.0 + snr * s**2), axis=-1)
    bound = np.log2(1.0 + snr * np.mean(s**2, axis=-1))
    return bound - avg


class EigenStats(NamedTuple):
    singular_values: np.ndarray
    condition_number: np.ndarray
    max_eig: np.ndarray
    min_eig: np.ndarray


def eigen_stats(sol, chs):
    """Singular values, condition number and extreme eigenvalues of ``H P``.

    A smallest singular value below the rank tolerance gives an infinite
    condition number.
    """
    s = nk.svd(chs.joint @ sol.joint_p).S
    top, low = s[..., 0], s[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(low > nk.RANK_TOL * top, top / np.where(low > 0, low, 1.0), np.inf)
    return EigenStats(s, cond, top**2, low**2)


@dataclass
class EigenSamples:
    """Per-tone eigen statistics pooled over realizations for one algorithm."""

    singular_values: np.ndarray
    condition: np.ndarray
    max_eig: np.ndarray
    min_eig: np.ndarray

    @classmethod
    def concat(cls, stats):
        stats = list(stats)
        return cls(
            np.concatenate([np.reshape(s.singular_values, (-1, s.singular_values.shape[-1])) for s in stats]),
            np.concatenate([np.ravel(s.condition_number if hasattr(s, "condition_number") else s.condition) for s in stats]),
            np.concatenate([np.ravel(s.max_eig) for s in stats]),
            np.concatenate([np.ravel(s.min_eig) for s in stats]),
        )


@dataclass
class MetricsRecord:
    algorithm: AlgorithmId
    ebn0_db: float
    ber: float
    sum_rate_bits_per_hz: float
    bit_count: int = 0
    error_count: int = 0
    eff_singular_values: np.ndarray = field(default=None, repr=False)
    condition_numbers: np.ndarray = field(default=None, repr=False)
    max_eig: np.ndarray = field(default=None, repr=False)
    min_eig: np.ndarray = field(default=None, repr=False)
    flops: float = float("nan")

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise PreconditionError(f"ber must lie in [0, 1], got {self.ber}")
        if self.sum_rate_bits_per_hz < 0:
            raise PreconditionError(f"sum rate must be >= 0, got {self.sum_rate_bits_per_hz}")


def _condition_arrays(records):
    if hasattr(records, "items"):
        return {alg: np.asarray(getattr(v, "condition", v)) for alg, v in records.items()}
    out = {}
    for rec in records:
        if rec.condition_numbers is None:
            continue
        out.setdefault(rec.algorithm, []).append(np.ravel(rec.condition_numbers))
    return {alg: np.concatenate(v) for alg, v in out.items()}


def classify_ill_conditioned(records, threshold=10.0, cap=200.0):
    """Count matrices with ``threshold < cond <= cap`` per algorithm.

    ``records`` is a mapping ``algorithm -> condition numbers`` (or
    :class:`EigenSamples`), or an iterable of :class:`MetricsRecord`.
    """
    arrays = _condition_arrays(records)
    if not arrays:
        raise PreconditionError("no condition-number samples")
    return {alg: int(np.count_nonzero((c > threshold) & (c <= cap))) for alg, c in arrays.items()}


def eigen_cdf_width(samples, quantile=0.5, window=None):
    """Gap between the ``quantile`` points of the max- and min-eigenvalue empirical CDFs.

    Parameters
    ----------
    samples : mapping
        ``algorithm -> EigenSamples``.
    quantile : float
    window : tuple, optional
        ``(threshold, cap)``; when given only matrices with
        ``threshold < cond <= cap`` enter the CDFs.
    """
    out = {}
    for alg, smp in samples.items():
        mx, mn = np.asarray(smp.max_eig), np.asarray(smp.min_eig)
        if window is not None:
            c = np.asarray(smp.condition)
            keep = (c > window[0]) & (c <= window[1])
            mx, mn = mx[keep], mn[keep]
        if mx.size < 2:
            raise PreconditionError(f"{getattr(alg, 'label', alg)}: need >= 2 samples, got {mx.size}")
        out[alg] = float(
            np.quantile(mx, quantile, method="inverted_cdf") - np.quantile(mn, quantile, method="inverted_cdf")
        )
    return out


__all__ = [
    "BITS_PER_SYMBOL",
    "BerCount",
    "EigenSamples",
    "EigenStats",
    "MetricsRecord",
    "classify_ill_conditioned",
    "complex_noise",
    "count_errors",
    "eigen_cdf_width",
    "eigen_stats",
    "jensen_gap",
    "measure_ber",
    "noise_variance",
    "q_function",
    "qpsk_ber_awgn",
    "qpsk_demodulate",
    "qpsk_modulate",
    "receive",
    "sum_rate",
    "sum_rate_singular",
    "transmit_receive",
]
