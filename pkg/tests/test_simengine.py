import numpy as np
import pytest

from bdprecode.channel import AntennaConfig, OfdmConfig
from bdprecode.errors import ConfigError
from bdprecode.precoders import AlgorithmId as A
from bdprecode.simengine import ScenarioConfig, average_singular_profile, run, run_realization

SMALL = dict(num_realizations=3, ebn0_grid_db=(10.0, 20.0), eigen_ebn0_db=20.0)


@pytest.fixture(scope="module")
def small_run():
    return run(ScenarioConfig(**SMALL))


class TestScenarioConfig:
    def test_defaults(self):
        cfg = ScenarioConfig()
        assert cfg.antennas.per_user_rx == (2, 2, 2, 2) and cfg.antennas.num_tx == 8
        assert cfg.ofdm.fft_size == 512 and cfg.ofdm.data_subcarriers == 484
        assert cfg.master_seed == 1 and cfg.ebn0_grid_db == (0.0, 5.0, 10.0, 15.0, 20.0)
        assert cfg.total_tx_power == 8.0

    def test_algorithm_names_parsed(self):
        assert ScenarioConfig(algorithms=("bd", "lr-sgmi")).algorithms == (A.BD, A.LR_SGMI)

    @pytest.mark.parametrize(
        "kw, key",
        [
            (dict(algorithms=()), "algorithms"),
            (dict(algorithms=("bd", "bd")), "algorithms"),
            (dict(algorithms=("zf",)), "algorithms"),
            (dict(ebn0_grid_db=(10.0, 5.0)), "eb_n0"),
            (dict(num_realizations=0), "num_realizations"),
            (dict(symbols_per_tone=0), "symbols_per_tone"),
            (dict(workers=0), "workers"),
            (dict(master_seed=-1), "seed"),
            (dict(delta=0.4), "delta"),
            (dict(antennas=AntennaConfig(8, (2, 2, 2, 2), (1, 1, 1, 1))), "streams_per_user"),
        ],
    )
    def test_rejects(self, kw, key):
        with pytest.raises(ConfigError) as info:
            ScenarioConfig(**kw)
        assert info.value.key == key

    def test_reduced_streams_without_lr(self):
        ant = AntennaConfig(8, (2, 2, 2, 2), (1, 1, 1, 1))
        res = run(ScenarioConfig(antennas=ant, algorithms=("bd", "rbd"), num_realizations=1, ebn0_grid_db=(10.0,)))
        assert res.record("bd", 10).bit_count == 484 * 4 * 2


class TestRun:
    def test_single_record(self):
        res = run(ScenarioConfig(algorithms=("sgmi",), ebn0_grid_db=(15.0,), num_realizations=1))
        assert len(res.records) == 1
        assert res.records[0].algorithm is A.SGMI

    def test_one_record_per_pair(self, small_run):
        pairs = [(r.algorithm, r.ebn0_db) for r in small_run.records]
        assert len(pairs) == len(set(pairs)) == 7 * 2

    def test_sample_counts(self, small_run):
        for rec in small_run.records:
            assert rec.bit_count == 3 * 484 * 16
            assert 0 <= rec.error_count <= rec.bit_count
        assert small_run.resample_events == 0

    def test_symbols_per_tone(self):
        res = run(ScenarioConfig(algorithms=("bd",), ebn0_grid_db=(5.0,), num_realizations=1, symbols_per_tone=3))
        assert res.records[0].bit_count == 484 * 16 * 3

    def test_ber_falls_with_snr(self, small_run):
        for alg in small_run.config.algorithms:
            lo, hi = small_run.record(alg, 10), small_run.record(alg, 20)
            assert hi.ber < lo.ber
            assert hi.sum_rate_bits_per_hz > lo.sum_rate_bits_per_hz

    def test_equivalent_designs_paired(self, small_run):
        # identical precoders see identical data and noise
        for ebn0 in (10, 20):
            bd = small_run.record("bd", ebn0)
            for alg in ("gzi", "qr-evd"):
                assert small_run.record(alg, ebn0).error_count == bd.error_count

    def test_eigen_attached_at_eigen_snr(self, small_run):
        assert small_run.record("rbd", 20).condition_numbers.shape == (3 * 484,)
        assert small_run.record("rbd", 10).condition_numbers is None
        smp = small_run.eigen_samples[A.RBD]
        assert smp.singular_values.shape == (3 * 484, 8)
        np.testing.assert_allclose(smp.max_eig, smp.singular_values[:, 0] ** 2)

    def test_eigen_snr_outside_grid(self):
        res = run(ScenarioConfig(algorithms=("bd", "rbd"), ebn0_grid_db=(5.0,), num_realizations=1, eigen_ebn0_db=15.0))
        assert res.eigen_samples[A.RBD].condition.shape == (484,)

    def test_reproducible(self):
        cfg = ScenarioConfig(algorithms=("rbd", "lr-sgmi"), num_realizations=2, ebn0_grid_db=(10.0,))
        a, b = run(cfg), run(cfg)
        np.testing.assert_array_equal(a.per_realization_errors, b.per_realization_errors)
        np.testing.assert_array_equal(a.per_realization_sum_rate, b.per_realization_sum_rate)

    def test_workers_do_not_change_result(self):
        base = dict(algorithms=("bd", "sgmi"), num_realizations=3, ebn0_grid_db=(10.0,))
        a = run(ScenarioConfig(**base, workers=1))
        b = run(ScenarioConfig(**base, workers=2))
        np.testing.assert_array_equal(a.per_realization_errors, b.per_realization_errors)
        np.testing.assert_array_equal(a.per_realization_sum_rate, b.per_realization_sum_rate)
        for alg in (A.BD, A.SGMI):
            np.testing.assert_array_equal(a.eigen_samples[alg].condition, b.eigen_samples[alg].condition)

    def test_realization_independent_of_others(self):
        cfg = ScenarioConfig(algorithms=("bd",), num_realizations=5, ebn0_grid_db=(10.0,))
        full = run(cfg)
        alone = run_realization(cfg, 3)
        np.testing.assert_array_equal(full.per_realization_errors[3], alone.errors)

    def test_seed_changes_result(self):
        base = dict(algorithms=("bd",), num_realizations=1, ebn0_grid_db=(5.0,))
        a = run(ScenarioConfig(**base, master_seed=1))
        b = run(ScenarioConfig(**base, master_seed=2))
        assert a.per_realization_sum_rate[0, 0, 0] != b.per_realization_sum_rate[0, 0, 0]

    def test_small_ofdm(self):
        ofdm = OfdmConfig(fft_size=64, data_subcarriers=52, subcarrier_spacing_hz=312500, bandwidth_hz=20e6)
        res = run(ScenarioConfig(ofdm=ofdm, algorithms=("gzi",), num_realizations=2, ebn0_grid_db=(10.0,)))
        assert res.records[0].bit_count == 2 * 52 * 16


class TestSingularProfile:
    def test_descending(self, small_run):
        for alg in small_run.config.algorithms:
            prof = average_singular_profile(small_run, alg)
            assert prof.shape == (8,)
            assert np.all(np.diff(prof) <= 1e-12)

    def test_bd_equals_gzi(self, small_run):
        np.testing.assert_allclose(
            average_singular_profile(small_run, "bd"), average_singular_profile(small_run, "gzi"), atol=1e-8
        )

    def test_missing_samples(self):
        res = run(ScenarioConfig(algorithms=("bd",), num_realizations=1, ebn0_grid_db=(5.0,), eigen_ebn0_db=None))
        with pytest.raises(KeyError):
            average_singular_profile(res, "bd")
