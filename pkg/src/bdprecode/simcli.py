"""Command-line front end: ``bdprecode {simulate,flops,eigen,validate}``.

Configuration is a UTF-8 text file of ``key = value`` lines (``#`` starts a
comment) merged with command-line flags; every key also exists as a flag with
dashes (``num_realizations`` -> ``--num-realizations``). Results land in
``--out`` (default ``$BDPRECODE_OUT`` or ``./bdprecode_out``) as six CSV
tables plus ``manifest.cfg``, which is itself a valid config file.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""
import argparse
import csv
import datetime
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from bdprecode import __version__
from bdprecode.channel import AntennaConfig, OfdmConfig
from bdprecode.errors import (
    ConfigError,
    DecompositionError,
    NumericalError,
    PreconditionError,
    SingularityError,
)
from bdprecode.flopmodel import flop_sweep
from bdprecode.precoders import ALL_ALGORITHMS, AlgorithmId
from bdprecode.simengine import DEFAULT_EBN0_GRID, ScenarioConfig, average_singular_profile, run

log = logging.getLogger("bdprecode")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
OUT_ENV = "BDPRECODE_OUT"
ILL_THRESHOLD, ILL_CAP = 10.0, 200.0
FLOP_KS = tuple(range(2, 9))

HEADERS = {
    "ber.csv": ("algorithm", "ebN0_db", "ber", "bit_count", "error_count"),
    "sumrate.csv": ("algorithm", "ebN0_db", "sumrate_bits_per_hz"),
    "singular.csv": ("algorithm", "dim_index", "mean_singular_value"),
    "cond_scatter.csv": ("algorithm", "sample_index", "condition_number"),
    "eigen_cdf.csv": ("algorithm", "which", "eigenvalue"),
    "flops.csv": ("algorithm", "K", "total_flops"),
}


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _algs(text):
    return tuple(AlgorithmId.parse(x) for x in text.split(",") if x.strip())


def _opt_float(text):
    return None if text.strip().lower() in ("none", "off", "") else float(text)


# key -> (parser, help)
KEYS = {
    "num_tx": (int, "transmit antennas N_T"),
    "per_user_rx": (_ints, "receive antennas per user, comma separated"),
    "streams_per_user": (_ints, "streams per user (default: per_user_rx)"),
    "fft_size": (int, "FFT size"),
    "data_subcarriers": (int, "data subcarriers"),
    "subcarrier_spacing_hz": (float, "subcarrier spacing in Hz"),
    "bandwidth_hz": (float, "bandwidth in Hz"),
    "carrier_hz": (float, "carrier frequency in Hz (reporting only)"),
    "indoor_range_m": (float, "indoor range defining the delay spread, m"),
    "algorithms": (_algs, "comma separated subset of " + ",".join(a.value for a in ALL_ALGORITHMS)),
    "eb_n0": (_floats, "Eb/N0 grid in dB, comma separated"),
    "num_realizations": (int, "channel realizations"),
    "symbols_per_tone": (int, "QPSK vectors per tone and realization"),
    "seed": (int, "master seed"),
    "workers": (int, "worker processes"),
    "eigen_eb_n0": (_opt_float, "Eb/N0 (dB) for eigen statistics, or none"),
    "delta": (float, "CLLL Lovasz parameter"),
}


def _read_config_file(path):
    entries = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}", key=None)
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key] = value
    return entries


def build_config(values):
    """ScenarioConfig from a ``key -> text`` mapping (unknown keys rejected)."""
    parsed = {}
    for key, text in values.items():
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}", key=key)
        parser = KEYS[key][0]
        try:
            parsed[key] = parser(text) if isinstance(text, str) else text
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: cannot parse {text!r} ({exc})", key=key) from None

    ofdm_defaults = OfdmConfig()
    ofdm_kw = {
        k: parsed.get(k, getattr(ofdm_defaults, k))
        for k in ("fft_size", "data_subcarriers", "subcarrier_spacing_hz", "bandwidth_hz", "carrier_hz", "indoor_range_m")
    }
    ant_defaults = AntennaConfig()
    ofdm = OfdmConfig(**ofdm_kw)
    ant = AntennaConfig(
        num_tx=parsed.get("num_tx", ant_defaults.num_tx),
        per_user_rx=parsed.get("per_user_rx", ant_defaults.per_user_rx),
        streams_per_user=parsed.get("streams_per_user"),
    )
    defaults = ScenarioConfig()
    return ScenarioConfig(
        ofdm=ofdm,
        antennas=ant,
        algorithms=parsed.get("algorithms", defaults.algorithms),
        ebn0_grid_db=parsed.get("eb_n0", DEFAULT_EBN0_GRID),
        num_realizations=parsed.get("num_realizations", defaults.num_realizations),
        symbols_per_tone=parsed.get("symbols_per_tone", defaults.symbols_per_tone),
        master_seed=parsed.get("seed", defaults.master_seed),
        workers=parsed.get("workers", defaults.workers),
        eigen_ebn0_db=parsed.get("eigen_eb_n0", defaults.eigen_ebn0_db),
        delta=parsed.get("delta", defaults.delta),
    )


def parse_config(path=None, overrides=None):
    """Merge an optional config file with ``overrides`` (flags win)."""
    values = {}
    if path is not None:
        values.update(_read_config_file(path))
    values.update(overrides or {})
    return build_config(values)


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def _exact(x):
    return repr(float(x))


def config_lines(cfg):
    """``key = value`` lines that :func:`parse_config` maps back to ``cfg``."""
    o, a = cfg.ofdm, cfg.antennas
    return [
        f"num_tx = {a.num_tx}",
        f"per_user_rx = {','.join(map(str, a.per_user_rx))}",
        f"streams_per_user = {','.join(map(str, a.streams_per_user))}",
        f"fft_size = {o.fft_size}",
        f"data_subcarriers = {o.data_subcarriers}",
        f"subcarrier_spacing_hz = {_exact(o.subcarrier_spacing_hz)}",
        f"bandwidth_hz = {_exact(o.bandwidth_hz)}",
        f"carrier_hz = {_exact(o.carrier_hz)}",
        f"indoor_range_m = {_exact(o.indoor_range_m)}",
        f"algorithms = {','.join(alg.value for alg in cfg.algorithms)}",
        f"eb_n0 = {','.join(_exact(x) for x in cfg.ebn0_grid_db)}",
        f"num_realizations = {cfg.num_realizations}",
        f"symbols_per_tone = {cfg.symbols_per_tone}",
        f"seed = {cfg.master_seed}",
        f"workers = {cfg.workers}",
        f"eigen_eb_n0 = {'none' if cfg.eigen_ebn0_db is None else _exact(cfg.eigen_ebn0_db)}",
        f"delta = {_exact(cfg.delta)}",
    ]


def write_manifest(cfg, out_dir, command):
    path = Path(out_dir) / "manifest.cfg"
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    head = [
        f"# bdprecode {__version__} manifest",
        f"# command: {command}",
        f"# created: {stamp}",
        "# re-run with: bdprecode <command> --config manifest.cfg",
    ]
    path.write_text("\n".join(head + config_lines(cfg)) + "\n", encoding="utf-8")
    return path


@dataclass
class OutputBundle:
    out_dir: Path
    tables: dict = field(default_factory=dict)
    manifest: Path = None


def _write_table(out_dir, name, rows):
    path = Path(out_dir) / name
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADERS[name])
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (int, float, np.integer, np.floating)) else v for v in row])
    return path


def flop_rows(cfg, ks=FLOP_KS):
    n_k = cfg.antennas.per_user_rx[0]
    sweep = flop_sweep(cfg.algorithms, ks, n_k)
    return [(alg.value, rep.K, rep.total_flops) for alg, reps in sweep.items() for rep in reps]


def eigen_rows(result, threshold=ILL_THRESHOLD, cap=ILL_CAP):
    """Rows of the singular profile, condition scatter and eigenvalue CDF tables.

    The scatter lists every ill-conditioned tone (``cond > threshold``); the CDF
    table lists sorted extreme eigenvalues of tones with ``threshold < cond <= cap``.
    """
    singular, scatter, cdf = [], [], []
    if not result.eigen_samples:
        return singular, scatter, cdf
    for alg, smp in result.eigen_samples.items():
        for i, v in enumerate(average_singular_profile(result, alg), 1):
            singular.append((alg.value, i, float(v)))
        ill = smp.condition[smp.condition > threshold]
        for i, c in enumerate(ill, 1):
            scatter.append((alg.value, i, float(c)))
        keep = (smp.condition > threshold) & (smp.condition <= cap)
        for which, vals in (("max", smp.max_eig[keep]), ("min", smp.min_eig[keep])):
            for v in np.sort(vals):
                cdf.append((alg.value, which, float(v)))
    return singular, scatter, cdf


def emit_outputs(result, out_dir, command="simulate"):
    """Write the six CSV tables and the manifest into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = OutputBundle(out)
    ber = [(r.algorithm.value, r.ebn0_db, r.ber, r.bit_count, r.error_count) for r in result.records]
    rate = [(r.algorithm.value, r.ebn0_db, r.sum_rate_bits_per_hz) for r in result.records]
    singular, scatter, cdf = eigen_rows(result)
    for name, rows in (
        ("ber.csv", ber),
        ("sumrate.csv", rate),
        ("singular.csv", singular),
        ("cond_scatter.csv", scatter),
        ("eigen_cdf.csv", cdf),
        ("flops.csv", flop_rows(result.config)),
    ):
        bundle.tables[name] = _write_table(out, name, rows)
    bundle.manifest = write_manifest(result.config, out, command)
    return bundle


def validation_checks(seed=2024):
    """Built-in property checks on a seeded default-scenario realization.

    Returns a list of ``(name, passed, detail)``.
    """
    from bdprecode import numkernel as nk
    from bdprecode.channel import generate_realization, realization_rng
    from bdprecode.flopmodel import algorithm_flops, flops_growth_check
    from bdprecode.linkmetrics import jensen_gap, sum_rate, sum_rate_singular
    from bdprecode.precoders import PrecodeParams, precode

    ant = AntennaConfig()
    chs = generate_realization(OfdmConfig(), ant, realization_rng(seed, 0)).per_subcarrier
    sigma2 = 0.2
    params = PrecodeParams.derived(ant, 8.0, sigma2)
    sols = {alg: precode(alg, chs, params) for alg in ALL_ALGORITHMS}
    checks = []

    def add(name, value, limit):
        checks.append((name, bool(value <= limit), f"{value:.3e} <= {limit:.0e}"))

    for alg, sol in sols.items():
        tr = np.einsum("...ij,...ij->...", sol.joint_p.conj(), sol.joint_p).real
        add(f"power normalization {alg.label}", float(np.max(np.abs(tr - 8.0))), 1e-9)
    for alg in (AlgorithmId.BD, AlgorithmId.GZI, AlgorithmId.QR_EVD):
        sol, worst = sols[alg], 0.0
        for j, hj in enumerate(chs.per_user):
            for k, pk in enumerate(sol.per_user_p):
                if j != k:
                    r = np.linalg.norm(hj @ pk, axis=(-2, -1)) / (
                        np.linalg.norm(hj, axis=(-2, -1)) * np.linalg.norm(pk, axis=(-2, -1))
                    )
                    worst = max(worst, float(r.max()))
        add(f"exact nulling {alg.label}", worst, 1e-10)
    for alg in (AlgorithmId.LC_RBD_LR, AlgorithmId.LR_SGMI):
        sol, worst, det_err, lll_ok = sols[alg], 0.0, 0.0, True
        for heff, pb, u in zip(sol.per_user_heff, sol.per_user_pb, sol.lattice_transforms):
            worst = max(worst, float(np.max(np.linalg.norm(heff @ pb @ u - np.eye(u.shape[-1]), axis=(-2, -1)))))
            det_err = max(det_err, float(np.max(np.abs(np.abs(np.linalg.det(u)) - 1))))
            lll_ok &= all(nk.lll_conditions(u @ heff, 0.99))
        add(f"lattice identity {alg.label}", worst, 1e-8)
        add(f"unimodular transforms {alg.label}", det_err, 1e-8)
        checks.append((f"CLLL conditions {alg.label}", lll_ok, "size reduction and Lovasz"))
    s0 = precode(AlgorithmId.SGMI, chs, PrecodeParams(8.0, 0.0, 0.0)).joint_p
    add("S-GMI(alpha=0) equals GZI", float(np.max(np.linalg.norm(s0 - sols[AlgorithmId.GZI].joint_p, axis=(-2, -1)))), 1e-8)
    for alg, sol in sols.items():
        s = nk.svd(chs.joint @ sol.joint_p).S
        add(f"sum-rate eigen identity {alg.label}", float(np.max(np.abs(sum_rate(chs, sol, sigma2) - sum_rate_singular(s, sigma2)))), 1e-9)
        add(f"Jensen bound {alg.label}", float(max(0.0, -np.min(jensen_gap(s, sigma2)))), 0.0)
    f = {a: algorithm_flops(a, 4, 2, 8).total_flops for a in ALL_ALGORITHMS}
    checks.append((
        "FLOP ordering",
        min(f[AlgorithmId.BD], f[AlgorithmId.RBD]) > f[AlgorithmId.LC_RBD_LR] > f[AlgorithmId.SGMI] > f[AlgorithmId.LR_SGMI],
        "BD,RBD > LC-RBD-LR > S-GMI > LR-S-GMI at K=4",
    ))
    checks.append(("FLOP growth", flops_growth_check().ordering_holds, "BD/RBD slopes maximal"))
    return checks


def _add_config_flags(p):
    p.add_argument("--config", help="key = value configuration file")
    for key, (_, helptext) in KEYS.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, metavar="VALUE", help=helptext)
    p.add_argument("--realizations", dest="num_realizations", metavar="N", help="alias of --num-realizations")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./bdprecode_out)")


def build_parser():
    parser = argparse.ArgumentParser(prog="bdprecode", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("simulate", "BER and sum-rate sweep over the Eb/N0 grid"),
        ("eigen", "eigen-structure collection at eigen_eb_n0"),
        ("flops", "FLOP model sweep over K = 2..8"),
    ):
        _add_config_flags(sub.add_parser(name, help=helptext))
    v = sub.add_parser("validate", help="run the built-in property checks")
    v.add_argument("--seed", type=int, default=2024)
    return parser


def _overrides(args):
    return {k: getattr(args, k) for k in KEYS if getattr(args, k, None) is not None}


def _out_dir(args):
    return Path(args.out or os.environ.get(OUT_ENV) or "bdprecode_out")


def _cmd_run(args):
    cfg = parse_config(args.config, _overrides(args))
    if args.command == "eigen":
        if cfg.eigen_ebn0_db is None:
            raise ConfigError("eigen needs eigen_eb_n0", key="eigen_eb_n0")
        cfg = ScenarioConfig(**{**cfg.__dict__, "ebn0_grid_db": (cfg.eigen_ebn0_db,)})
    result = run(cfg)
    bundle = emit_outputs(result, _out_dir(args), args.command)
    for rec in result.records:
        print(f"{rec.algorithm.label:10s} {rec.ebn0_db:6.1f} dB  BER {rec.ber:.4e}  sum-rate {rec.sum_rate_bits_per_hz:.4f}")
    if result.resample_events:
        print(f"resampled realizations: {result.resample_events}")
    print(f"wrote {len(bundle.tables)} tables to {bundle.out_dir}")
    return EXIT_OK


def _cmd_flops(args):
    cfg = parse_config(args.config, _overrides(args))
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    rows = flop_rows(cfg)
    path = _write_table(out, "flops.csv", rows)
    write_manifest(cfg, out, "flops")
    for alg, K, total in rows:
        print(f"{alg:10s} K={K}  {total:.0f}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_validate(args):
    checks = validation_checks(args.seed)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    failed = sum(not ok for _, ok, _ in checks)
    print(f"{len(checks) - failed}/{len(checks)} property checks passed")
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "flops":
            return _cmd_flops(args)
        return _cmd_run(args)
    except (ConfigError, PreconditionError) as exc:
        key = getattr(exc, "key", None)
        print(f"config error{f' [{key}]' if key else ''}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, SingularityError, DecompositionError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc.filename or ''} {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
