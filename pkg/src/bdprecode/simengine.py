"""Monte Carlo sweeps over algorithms, Eb/N0 points, realizations and tones.

Every realization is an independent work unit computed by a pure function of
``(ScenarioConfig, index)``; partial results are merged in index order, so the
outcome does not depend on the number of workers. Channel, data and noise
streams are derived from the master seed:

* channel of realization ``r`` (resample attempt ``a``): ``spawn_key=(0, r, a)``
* data bits and noise at Eb/N0 index ``i``: ``spawn_key=(1, r, i)``, shared by
  all algorithms so their BERs are paired.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from bdprecode.channel import AntennaConfig, OfdmConfig, generate_realization, realization_rng
from bdprecode.errors import ConfigError, DecompositionError, NumericalError, SingularityError
from bdprecode.flopmodel import algorithm_flops
from bdprecode.linkmetrics import (
    BITS_PER_SYMBOL,
    EigenSamples,
    MetricsRecord,
    complex_noise,
    count_errors,
    eigen_stats,
    noise_variance,
    sum_rate,
)
from bdprecode.numkernel import DEFAULT_DELTA
from bdprecode.precoders import (
    ALL_ALGORITHMS,
    AlgorithmId,
    PrecodeParams,
    precode,
    precode_lc_rbd_lr,
    precode_lr_sgmi,
)

log = logging.getLogger(__name__)

MAX_RESAMPLES = 10
DEFAULT_EBN0_GRID = (0.0, 5.0, 10.0, 15.0, 20.0)
# designs that do not depend on the noise level, computed once per realization
_ALPHA_FREE = frozenset({AlgorithmId.BD, AlgorithmId.GZI, AlgorithmId.QR_EVD})


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a run depends on; a run is a pure function of this object."""

    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    antennas: AntennaConfig = field(default_factory=AntennaConfig)
    algorithms: tuple = ALL_ALGORITHMS
    ebn0_grid_db: tuple = DEFAULT_EBN0_GRID
    num_realizations: int = 100
    symbols_per_tone: int = 1
    master_seed: int = 1
    workers: int = 1
    eigen_ebn0_db: float = 15.0
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        algs = tuple(AlgorithmId.parse(a) for a in self.algorithms)
        object.__setattr__(self, "algorithms", algs)
        grid = tuple(float(x) for x in self.ebn0_grid_db)
        object.__setattr__(self, "ebn0_grid_db", grid)
        if not algs:
            raise ConfigError("at least one algorithm is required", key="algorithms")
        if len(set(algs)) != len(algs):
            raise ConfigError("algorithms must not repeat", key="algorithms")
        if not grid:
            raise ConfigError("Eb/N0 grid must be nonempty", key="eb_n0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("Eb/N0 grid must be strictly increasing", key="eb_n0")
        if self.num_realizations < 1:
            raise ConfigError("num_realizations must be >= 1", key="num_realizations")
        if self.symbols_per_tone < 1:
            raise ConfigError("symbols_per_tone must be >= 1", key="symbols_per_tone")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1", key="workers")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", key="seed")
        if not 0.5 < self.delta <= 1.0:
            raise ConfigError("delta must lie in (0.5, 1]", key="delta")
        ant = self.antennas
        if any(a.uses_lattice_reduction for a in algs) and ant.streams_per_user != ant.per_user_rx:
            raise ConfigError(
                "lattice-reduction algorithms need streams_per_user equal to per_user_rx", key="streams_per_user"
            )

    @property
    def total_tx_power(self):
        return float(self.antennas.num_tx)


@dataclass
class RealizationResult:
    index: int
    attempts: int
    errors: np.ndarray  # (algs, snrs)
    bits: np.ndarray
    sum_rate: np.ndarray  # mean over tones, (algs, snrs)
    eigen: list  # per algorithm EigenStats at the eigen SNR, or None


@dataclass
class RunResult:
    """Aggregated records plus the raw material for the figure tables."""

    config: ScenarioConfig
    records: list
    eigen_samples: dict = None
    resample_events: int = 0
    per_realization_errors: np.ndarray = field(default=None, repr=False)
    per_realization_bits: np.ndarray = field(default=None, repr=False)
    per_realization_sum_rate: np.ndarray = field(default=None, repr=False)

    def record(self, alg, ebn0_db):
        alg = AlgorithmId.parse(alg)
        for rec in self.records:
            if rec.algorithm is alg and rec.ebn0_db == float(ebn0_db):
                return rec
        raise KeyError((alg, ebn0_db))


def _design_params(cfg, ebn0_db):
    sigma2 = noise_variance(cfg.antennas, cfg.total_tx_power, BITS_PER_SYMBOL, ebn0_db)
    return sigma2, PrecodeParams.derived(cfg.antennas, cfg.total_tx_power, sigma2)


def _precode(cfg, alg, chs, params):
    if alg is AlgorithmId.LC_RBD_LR:
        return precode_lc_rbd_lr(chs, params, delta=cfg.delta)
    if alg is AlgorithmId.LR_SGMI:
        return precode_lr_sgmi(chs, params, delta=cfg.delta)
    return precode(alg, chs, params)


def _evaluate(cfg, r, chs):
    ant = cfg.antennas
    n_alg, n_snr = len(cfg.algorithms), len(cfg.ebn0_grid_db)
    errors = np.zeros((n_alg, n_snr), dtype=np.int64)
    bits_out = np.zeros((n_alg, n_snr), dtype=np.int64)
    rates = np.zeros((n_alg, n_snr))
    eigen = [None] * n_alg
    n_tones = chs.joint.shape[0]
    cache = {}
    eig_idx = None
    if cfg.eigen_ebn0_db is not None and cfg.eigen_ebn0_db in cfg.ebn0_grid_db:
        eig_idx = cfg.ebn0_grid_db.index(cfg.eigen_ebn0_db)

    for i, ebn0 in enumerate(cfg.ebn0_grid_db):
        sigma2, params = _design_params(cfg, ebn0)
        rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed, spawn_key=(1, r, i)))
        shape = (n_tones, cfg.symbols_per_tone)
        bits = rng.integers(0, 2, size=shape + (BITS_PER_SYMBOL * ant.num_streams,), dtype=np.int8)
        noise = complex_noise(rng, shape + (ant.num_rx,), sigma2)
        for a, alg in enumerate(cfg.algorithms):
            if alg in _ALPHA_FREE:
                if alg not in cache:
                    cache[alg] = _precode(cfg, alg, chs, params)
                sol = cache[alg]
            else:
                sol = _precode(cfg, alg, chs, params)
            cnt = count_errors(sol, chs, bits, noise)
            errors[a, i], bits_out[a, i] = cnt.errors, cnt.bits
            rates[a, i] = float(np.mean(sum_rate(chs, sol, sigma2)))
            if i == eig_idx:
                eigen[a] = eigen_stats(sol, chs)

    if cfg.eigen_ebn0_db is not None and eig_idx is None:
        _, params = _design_params(cfg, cfg.eigen_ebn0_db)
        for a, alg in enumerate(cfg.algorithms):
            sol = cache[alg] if alg in cache else _precode(cfg, alg, chs, params)
            eigen[a] = eigen_stats(sol, chs)
    return errors, bits_out, rates, eigen


def run_realization(cfg, r):
    """Evaluate realization ``r``, resampling its channel on rank failures."""
    last = None
    for attempt in range(MAX_RESAMPLES + 1):
        chs = generate_realization(cfg.ofdm, cfg.antennas, realization_rng(cfg.master_seed, r, attempt)).per_subcarrier
        try:
            errors, bits, rates, eigen = _evaluate(cfg, r, chs)
        except (SingularityError, DecompositionError) as exc:
            last = exc
            log.warning("realization %d attempt %d resampled: %s", r, attempt, exc)
            continue
        return RealizationResult(r, attempt, errors, bits, rates, eigen)
    raise NumericalError(f"realization {r} failed after {MAX_RESAMPLES} resamples; last error: {last}")


def _run_pair(args):
    return run_realization(*args)


def run(cfg):
    """Run the full sweep described by ``cfg``."""
    jobs = [(cfg, r) for r in range(cfg.num_realizations)]
    if cfg.workers > 1 and cfg.num_realizations > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, cfg.num_realizations)) as pool:
            parts = list(pool.map(_run_pair, jobs))
    else:
        parts = [run_realization(*job) for job in jobs]
    return _merge(cfg, parts)


def _merge(cfg, parts):
    parts = sorted(parts, key=lambda p: p.index)
    errors = np.stack([p.errors for p in parts])
    bits = np.stack([p.bits for p in parts])
    rates = np.stack([p.sum_rate for p in parts])
    resamples = int(sum(p.attempts for p in parts))

    eigen = None
    if cfg.eigen_ebn0_db is not None:
        eigen = {alg: EigenSamples.concat(p.eigen[a] for p in parts) for a, alg in enumerate(cfg.algorithms)}

    ant = cfg.antennas
    uniform = len(set(ant.per_user_rx)) == 1
    records = []
    for a, alg in enumerate(cfg.algorithms):
        flops = (
            algorithm_flops(alg, ant.num_users, ant.per_user_rx[0], ant.num_tx).total_flops if uniform else float("nan")
        )
        for i, ebn0 in enumerate(cfg.ebn0_grid_db):
            err, nb = int(errors[:, a, i].sum()), int(bits[:, a, i].sum())
            rec = MetricsRecord(
                algorithm=alg,
                ebn0_db=ebn0,
                ber=err / nb,
                sum_rate_bits_per_hz=float(np.mean(rates[:, a, i])),
                bit_count=nb,
                error_count=err,
                flops=flops,
            )
            if eigen is not None and ebn0 == cfg.eigen_ebn0_db:
                smp = eigen[alg]
                rec.eff_singular_values = np.mean(smp.singular_values, axis=0)
                rec.condition_numbers = smp.condition
                rec.max_eig = smp.max_eig
                rec.min_eig = smp.min_eig
            records.append(rec)
    if resamples:
        log.info("%d realization resamples", resamples)
    return RunResult(cfg, records, eigen, resamples, errors, bits, rates)


def average_singular_profile(result, alg):
    """Mean of the i-th largest singular value of ``H P`` over all collected tones."""
    alg = AlgorithmId.parse(alg)
    if not result.eigen_samples or alg not in result.eigen_samples:
        raise KeyError(f"no eigen samples for {alg.label}")
    return np.mean(result.eigen_samples[alg].singular_values, axis=0)


__all__ = [
    "DEFAULT_EBN0_GRID",
    "MAX_RESAMPLES",
    "RunResult",
    "ScenarioConfig",
    "average_singular_profile",
    "run",
    "run_realization",
]
