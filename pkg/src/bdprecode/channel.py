"""Frequency-selective MU-MIMO channel realizations for an 802.11ac-like OFDM grid.

Each transmit/receive antenna pair gets an independent tapped delay line with
an exponential power-delay profile whose maximum excess delay follows from an
indoor range. The per-subcarrier channel matrices are the DFT of the taps at
the data-subcarrier bins.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from bdprecode.errors import ConfigError, DimensionError

SPEED_OF_LIGHT = 2.99792458e8


@dataclass(frozen=True)
class OfdmConfig:
    fft_size: int = 512
    data_subcarriers: int = 484
    subcarrier_spacing_hz: float = 312_500.0
    bandwidth_hz: float = 160e6
    carrier_hz: float = 5.21e9
    indoor_range_m: float = 35.0

    def __post_init__(self):
        for name in ("fft_size", "data_subcarriers", "subcarrier_spacing_hz", "bandwidth_hz", "carrier_hz"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0", key=name)
        if self.indoor_range_m < 0:
            raise ConfigError("indoor_range_m must be >= 0", key="indoor_range_m")
        if self.data_subcarriers >= self.fft_size:
            raise ConfigError(
                f"data_subcarriers ({self.data_subcarriers}) must be < fft_size ({self.fft_size})",
                key="data_subcarriers",
            )
        span = self.subcarrier_spacing_hz * self.fft_size
        if abs(span - self.bandwidth_hz) > 1e-6 * self.bandwidth_hz:
            raise ConfigError(
                f"subcarrier_spacing_hz * fft_size = {span:g} Hz does not match bandwidth_hz = {self.bandwidth_hz:g} Hz",
                key="bandwidth_hz",
            )


@dataclass(frozen=True)
class AntennaConfig:
    """Transmit antenna count and per-user receive antennas / streams.

    ``streams_per_user`` defaults to ``per_user_rx`` (full multiplexing).
    """

    num_tx: int = 8
    per_user_rx: tuple = (2, 2, 2, 2)
    streams_per_user: tuple = None

    def __post_init__(self):
        rx = tuple(int(n) for n in self.per_user_rx)
        object.__setattr__(self, "per_user_rx", rx)
        streams = rx if self.streams_per_user is None else tuple(int(d) for d in self.streams_per_user)
        object.__setattr__(self, "streams_per_user", streams)
        if self.num_tx < 1:
            raise ConfigError("num_tx must be >= 1", key="num_tx")
        if not rx or min(rx) < 1:
            raise ConfigError("per_user_rx needs at least one user with >= 1 antenna", key="per_user_rx")
        if len(streams) != len(rx):
            raise ConfigError(
                f"streams_per_user has {len(streams)} entries but per_user_rx has {len(rx)} users",
                key="streams_per_user",
            )
        if sum(rx) > self.num_tx:
            raise ConfigError(
                f"per_user_rx: total receive antennas {sum(rx)} exceed num_tx {self.num_tx} (need N_R <= N_T)",
                key="per_user_rx",
            )
        for d, n in zip(streams, rx):
            if not 1 <= d <= n:
                raise ConfigError(
                    f"streams_per_user: need 1 <= d_k <= N_k, got d_k={d} for N_k={n}",
                    key="streams_per_user",
                )

    @property
    def num_users(self):
        return len(self.per_user_rx)

    @property
    def num_rx(self):
        return sum(self.per_user_rx)

    @property
    def num_streams(self):
        return sum(self.streams_per_user)


@dataclass
class UserChannelSet:
    """Joint channel ``H`` (rows stacked user by user) for one or many tones.

    ``joint`` has shape ``(..., N_R, N_T)``; any leading axes index tones.
    """

    joint: np.ndarray
    per_user_rx: tuple
    subcarrier_index: object = None

    def __post_init__(self):
        self.joint = np.asarray(self.joint, dtype=np.complex128)
        self.per_user_rx = tuple(int(n) for n in self.per_user_rx)
        if self.joint.ndim < 2 or self.joint.shape[-2] != sum(self.per_user_rx):
            raise DimensionError(
                f"joint channel has shape {self.joint.shape}, expected {sum(self.per_user_rx)} rows"
            )

    @classmethod
    def from_users(cls, users, subcarrier_index=None):
        users = [np.asarray(h, dtype=np.complex128) for h in users]
        ntx = {h.shape[-1] for h in users}
        if len(ntx) != 1:
            raise DimensionError("user channels disagree on the number of transmit antennas")
        return cls(np.concatenate(users, axis=-2), tuple(h.shape[-2] for h in users), subcarrier_index)

    @property
    def num_users(self):
        return len(self.per_user_rx)

    @property
    def num_tx(self):
        return self.joint.shape[-1]

    @property
    def num_rx(self):
        return self.joint.shape[-2]

    @property
    def user_slices(self):
        edges = np.concatenate([[0], np.cumsum(self.per_user_rx)])
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    @property
    def per_user(self):
        return [self.joint[..., sl, :] for sl in self.user_slices]

    def tone(self, i):
        """The single-tone channel set at position ``i`` of the leading axis."""
        idx = None if self.subcarrier_index is None else np.asarray(self.subcarrier_index)[i]
        return UserChannelSet(self.joint[i], self.per_user_rx, idx)


@dataclass
class ChannelRealization:
    """Tap gains for every antenna pair and the resulting per-tone channels."""

    taps: np.ndarray  # (N_R, N_T, L)
    bins: np.ndarray
    per_subcarrier: UserChannelSet = field(repr=False)


def derive_tap_count(cfg):
    """Number of taps spanning the maximum excess delay of the indoor range."""
    tau_max = cfg.indoor_range_m / SPEED_OF_LIGHT
    ts = 1.0 / cfg.bandwidth_hz
    return math.ceil(tau_max / ts) + 1


def power_delay_profile(cfg):
    """Exponential power-delay profile normalized to unit total power."""
    n_taps = derive_tap_count(cfg)
    tau_max = cfg.indoor_range_m / SPEED_OF_LIGHT
    if n_taps == 1 or tau_max == 0.0:
        return np.ones(1)
    tau_rms = tau_max / 3.0
    ts = 1.0 / cfg.bandwidth_hz
    p = np.exp(-np.arange(n_taps) * ts / tau_rms)
    return p / p.sum()


def data_subcarrier_bins(cfg):
    """FFT bin indices of the data tones, DC excluded, guards split at the band edges.

    Half the tones sit at ``+1 .. +n/2`` above DC and the rest mirror them
    below DC (bin ``fft_size - k``); an odd count puts the extra tone below DC.
    """
    if cfg.data_subcarriers >= cfg.fft_size:
        raise ConfigError("data_subcarriers must be < fft_size", key="data_subcarriers")
    n_pos = cfg.data_subcarriers // 2
    n_neg = cfg.data_subcarriers - n_pos
    pos = np.arange(1, n_pos + 1)
    neg = cfg.fft_size - np.arange(1, n_neg + 1)
    return np.sort(np.concatenate([pos, neg]))


def frequency_response(taps, fft_size, bins=None):
    """DFT of tap vectors (last axis) on a ``fft_size`` grid, optionally at ``bins``."""
    resp = np.fft.fft(taps, n=fft_size, axis=-1)
    return resp if bins is None else resp[..., bins]


def realization_rng(master_seed, index, attempt=0):
    """Generator for the channel of realization ``index`` (independent of worker layout)."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(0, index, attempt)))


def generate_realization(cfg, ant, rng):
    """Draw one frequency-selective realization for all antenna pairs."""
    pdp = power_delay_profile(cfg)
    shape = (ant.num_rx, ant.num_tx, pdp.size)
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    taps = g * np.sqrt(pdp / 2.0)
    bins = data_subcarrier_bins(cfg)
    resp = frequency_response(taps, cfg.fft_size, bins)
    joint = np.ascontiguousarray(np.moveaxis(resp, -1, 0))
    return ChannelRealization(taps, bins, UserChannelSet(joint, ant.per_user_rx, bins))
