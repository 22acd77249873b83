import math

import numpy as np
import pytest

from bdprecode.channel import (
    SPEED_OF_LIGHT,
    AntennaConfig,
    OfdmConfig,
    UserChannelSet,
    data_subcarrier_bins,
    derive_tap_count,
    frequency_response,
    generate_realization,
    power_delay_profile,
    realization_rng,
)
from bdprecode.errors import ConfigError, DimensionError


class TestConfigs:
    def test_defaults(self):
        cfg = OfdmConfig()
        assert cfg.fft_size == 512 and cfg.data_subcarriers == 484
        ant = AntennaConfig()
        assert ant.num_tx == 8 and ant.per_user_rx == (2, 2, 2, 2)
        assert ant.streams_per_user == (2, 2, 2, 2)
        assert ant.num_rx == 8 and ant.num_users == 4

    def test_bandwidth_mismatch(self):
        with pytest.raises(ConfigError) as exc:
            OfdmConfig(bandwidth_hz=20e6)
        assert exc.value.key == "bandwidth_hz"

    def test_too_many_receivers(self):
        with pytest.raises(ConfigError) as exc:
            AntennaConfig(num_tx=4, per_user_rx=(2, 2, 2))
        assert exc.value.key == "per_user_rx"

    def test_streams_exceed_antennas(self):
        with pytest.raises(ConfigError) as exc:
            AntennaConfig(num_tx=8, per_user_rx=(2, 2), streams_per_user=(3, 1))
        assert "d_k <= N_k" in str(exc.value)

    def test_negative_range(self):
        with pytest.raises(ConfigError):
            OfdmConfig(indoor_range_m=-1.0)


class TestTapCount:
    def test_default(self):
        cfg = OfdmConfig()
        tau = 35.0 / SPEED_OF_LIGHT
        assert tau == pytest.approx(116.75e-9, rel=1e-3)
        assert derive_tap_count(cfg) == 20

    def test_20mhz(self):
        cfg = OfdmConfig(bandwidth_hz=20e6, subcarrier_spacing_hz=20e6 / 512)
        assert derive_tap_count(cfg) == 4

    def test_zero_range_is_flat(self):
        cfg = OfdmConfig(indoor_range_m=0.0)
        assert derive_tap_count(cfg) == 1
        np.testing.assert_array_equal(power_delay_profile(cfg), [1.0])

    def test_pdp_normalized_and_decaying(self):
        p = power_delay_profile(OfdmConfig())
        assert p.size == 20
        assert p.sum() == pytest.approx(1.0, abs=1e-15)
        assert np.all(np.diff(p) < 0)


class TestBins:
    def test_default_layout(self):
        bins = data_subcarrier_bins(OfdmConfig())
        assert bins.size == 484 and np.unique(bins).size == 484
        assert 0 not in bins
        expected = np.concatenate([np.arange(1, 243), np.arange(270, 512)])
        np.testing.assert_array_equal(bins, expected)
        # 14 low guards (243..256) and 13 high (257..269) on the signed axis, plus DC
        assert 512 - 484 == 28

    def test_small(self):
        cfg = OfdmConfig(fft_size=8, data_subcarriers=4, subcarrier_spacing_hz=20e6, bandwidth_hz=160e6)
        np.testing.assert_array_equal(data_subcarrier_bins(cfg), [1, 2, 6, 7])

    def test_all_but_dc(self):
        cfg = OfdmConfig(fft_size=8, data_subcarriers=7, subcarrier_spacing_hz=20e6, bandwidth_hz=160e6)
        np.testing.assert_array_equal(data_subcarrier_bins(cfg), np.arange(1, 8))

    def test_full_grid_rejected(self):
        with pytest.raises(ConfigError):
            OfdmConfig(fft_size=8, data_subcarriers=8, subcarrier_spacing_hz=20e6, bandwidth_hz=160e6)


class TestUserChannelSet:
    def test_stacking(self, rng):
        a = rng.standard_normal((2, 8)) + 0j
        b = rng.standard_normal((3, 8)) + 0j
        chs = UserChannelSet.from_users([a, b])
        assert chs.per_user_rx == (2, 3)
        np.testing.assert_array_equal(chs.joint, np.vstack([a, b]))
        np.testing.assert_array_equal(chs.per_user[1], b)

    def test_row_mismatch(self):
        with pytest.raises(DimensionError):
            UserChannelSet(np.zeros((3, 4)), (2, 2))

    def test_tone_view(self):
        chs = UserChannelSet(np.arange(2 * 2 * 3).reshape(2, 2, 3), (1, 1), np.array([5, 9]))
        t = chs.tone(1)
        assert t.subcarrier_index == 9
        assert t.joint.shape == (2, 3)


class TestRealization:
    def test_shapes(self):
        cfg, ant = OfdmConfig(), AntennaConfig()
        real = generate_realization(cfg, ant, realization_rng(1, 0))
        assert real.taps.shape == (8, 8, 20)
        assert real.per_subcarrier.joint.shape == (484, 8, 8)
        np.testing.assert_array_equal(real.bins, data_subcarrier_bins(cfg))

    def test_determinism(self):
        cfg, ant = OfdmConfig(), AntennaConfig()
        a = generate_realization(cfg, ant, realization_rng(7, 3))
        b = generate_realization(cfg, ant, realization_rng(7, 3))
        assert np.array_equal(a.per_subcarrier.joint, b.per_subcarrier.joint)
        c = generate_realization(cfg, ant, realization_rng(7, 4))
        assert not np.array_equal(a.taps, c.taps)

    def test_flat_fading_identical_tones(self):
        cfg = OfdmConfig(indoor_range_m=0.0)
        real = generate_realization(cfg, AntennaConfig(), realization_rng(1, 0))
        joint = real.per_subcarrier.joint
        assert np.array_equal(joint, np.broadcast_to(joint[0], joint.shape))

    def test_parseval(self):
        cfg = OfdmConfig()
        real = generate_realization(cfg, AntennaConfig(), realization_rng(2, 0))
        full = frequency_response(real.taps, cfg.fft_size)
        lhs = np.mean(np.abs(full) ** 2, axis=-1)
        rhs = np.sum(np.abs(real.taps) ** 2, axis=-1)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=0)

    def test_unit_variance(self):
        cfg = OfdmConfig()
        ant = AntennaConfig(num_tx=1, per_user_rx=(1,))
        samples = np.array(
            [generate_realization(cfg, ant, realization_rng(11, r)).per_subcarrier.joint[100, 0, 0] for r in range(10_000)]
        )
        assert abs(np.var(samples) - 1.0) <= 0.05
        assert abs(np.mean(samples)) < 0.05

    def test_frequency_correlation_matches_pdp(self):
        # E[H(f) H(f + d)^*] = sum_l p_l exp(2j pi l d / N); beyond 1/tau_max it is below one half
        cfg = OfdmConfig()
        ant = AntennaConfig(num_tx=1, per_user_rx=(1,))
        tau = cfg.indoor_range_m / SPEED_OF_LIGHT
        sep = math.ceil((1.0 / tau) / cfg.subcarrier_spacing_hz) + 1
        h = np.array(
            [generate_realization(cfg, ant, realization_rng(13, r)).per_subcarrier.joint[:, 0, 0] for r in range(10_000)]
        )
        a, b = h[:, 10], h[:, 10 + sep]
        corr = np.mean(a * np.conj(b)) / np.sqrt(np.mean(np.abs(a) ** 2) * np.mean(np.abs(b) ** 2))
        p = power_delay_profile(cfg)
        d = data_subcarrier_bins(cfg)[10 + sep] - data_subcarrier_bins(cfg)[10]
        expected = np.sum(p * np.exp(2j * np.pi * np.arange(p.size) * d / cfg.fft_size))
        assert abs(corr - expected) < 0.05
        assert abs(corr) < 0.5
