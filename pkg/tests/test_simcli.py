import csv

import numpy as np
import pytest

from bdprecode import simcli
from bdprecode.errors import ConfigError
from bdprecode.precoders import ALL_ALGORITHMS, AlgorithmId as A
from bdprecode.simcli import HEADERS, build_config, config_lines, emit_outputs, main, parse_config
from bdprecode.simengine import ScenarioConfig, run

GOLDEN_HEADERS = {
    "ber.csv": "algorithm,ebN0_db,ber,bit_count,error_count",
    "sumrate.csv": "algorithm,ebN0_db,sumrate_bits_per_hz",
    "singular.csv": "algorithm,dim_index,mean_singular_value",
    "cond_scatter.csv": "algorithm,sample_index,condition_number",
    "eigen_cdf.csv": "algorithm,which,eigenvalue",
    "flops.csv": "algorithm,K,total_flops",
}


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def tiny_result():
    return run(ScenarioConfig(algorithms=("bd", "rbd"), num_realizations=1, ebn0_grid_db=(15.0,)))


class TestParseConfig:
    def test_empty_gives_defaults(self, tmp_path):
        p = tmp_path / "empty.cfg"
        p.write_text("# nothing here\n\n", encoding="utf-8")
        assert parse_config(p) == ScenarioConfig()
        assert parse_config() == ScenarioConfig()

    def test_file_values_and_comments(self, tmp_path):
        p = tmp_path / "a.cfg"
        p.write_text("num_realizations = 10  # fewer\nalgorithms = bd, sgmi\neb_n0 = 5,15\n", encoding="utf-8")
        cfg = parse_config(p)
        assert cfg.num_realizations == 10
        assert cfg.algorithms == (A.BD, A.SGMI)
        assert cfg.ebn0_grid_db == (5.0, 15.0)

    def test_overrides_win(self, tmp_path):
        p = tmp_path / "a.cfg"
        p.write_text("num_realizations = 10\n", encoding="utf-8")
        assert parse_config(p, {"num_realizations": "3"}).num_realizations == 3

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            build_config({"num_users": "4"})
        assert info.value.key == "num_users"

    def test_type_mismatch(self):
        with pytest.raises(ConfigError) as info:
            build_config({"num_tx": "eight"})
        assert info.value.key == "num_tx"

    def test_constraint_names_key(self):
        with pytest.raises(ConfigError) as info:
            build_config({"per_user_rx": "2,2,2", "num_tx": "4"})
        assert info.value.key == "per_user_rx"

    def test_missing_equals(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("num_tx 8\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="bad.cfg:1"):
            parse_config(p)

    def test_eigen_off(self):
        assert build_config({"eigen_eb_n0": "none"}).eigen_ebn0_db is None

    @pytest.mark.parametrize(
        "cfg",
        [
            ScenarioConfig(),
            ScenarioConfig(algorithms=("qr-evd", "bd"), ebn0_grid_db=(-3.5, 1 / 3), master_seed=2**63 + 5, delta=0.75),
            ScenarioConfig(eigen_ebn0_db=None, workers=4, symbols_per_tone=2),
        ],
    )
    def test_manifest_round_trip(self, cfg, tmp_path):
        p = tmp_path / "m.cfg"
        p.write_text("\n".join(config_lines(cfg)) + "\n", encoding="utf-8")
        assert parse_config(p) == cfg


class TestEmitOutputs:
    def test_golden_headers(self, tiny_result, tmp_path):
        bundle = emit_outputs(tiny_result, tmp_path)
        assert set(bundle.tables) == set(GOLDEN_HEADERS)
        for name, header in GOLDEN_HEADERS.items():
            assert ",".join(HEADERS[name]) == header
            assert (tmp_path / name).read_text().splitlines()[0] == header

    def test_one_algorithm_one_snr(self, tmp_path):
        res = run(ScenarioConfig(algorithms=("gzi",), num_realizations=1, ebn0_grid_db=(10.0,)))
        emit_outputs(res, tmp_path)
        assert len((tmp_path / "ber.csv").read_text().splitlines()) == 2

    def test_values_match_records(self, tiny_result, tmp_path):
        emit_outputs(tiny_result, tmp_path)
        rows = _rows(tmp_path / "ber.csv")[1:]
        for row, rec in zip(rows, tiny_result.records):
            assert row[0] == rec.algorithm.value
            assert float(row[2]) == pytest.approx(rec.ber, rel=1e-11)
            assert int(row[3]) == rec.bit_count and int(row[4]) == rec.error_count

    def test_twelve_significant_digits(self, tiny_result, tmp_path):
        emit_outputs(tiny_result, tmp_path)
        value = _rows(tmp_path / "sumrate.csv")[1][2]
        assert len(value.replace(".", "").lstrip("0")) <= 12
        assert float(value) == pytest.approx(tiny_result.records[0].sum_rate_bits_per_hz, rel=1e-11)

    def test_figure_tables(self, tiny_result, tmp_path):
        emit_outputs(tiny_result, tmp_path)
        singular = _rows(tmp_path / "singular.csv")[1:]
        assert [r[1] for r in singular if r[0] == "bd"] == [str(i) for i in range(1, 9)]
        scatter = _rows(tmp_path / "cond_scatter.csv")[1:]
        assert all(float(r[2]) > 10 for r in scatter)
        cdf = _rows(tmp_path / "eigen_cdf.csv")[1:]
        assert {r[1] for r in cdf} <= {"max", "min"}
        maxes = [float(r[2]) for r in cdf if r[:2] == ["rbd", "max"]]
        assert maxes == sorted(maxes)

    def test_flops_rows(self, tiny_result, tmp_path):
        emit_outputs(tiny_result, tmp_path)
        rows = _rows(tmp_path / "flops.csv")[1:]
        assert [int(r[1]) for r in rows if r[0] == "rbd"] == list(range(2, 9))

    def test_rerun_manifest_byte_identical(self, tmp_path):
        cfg = ScenarioConfig(algorithms=("bd", "lc-rbd-lr"), num_realizations=2, ebn0_grid_db=(15.0,))
        first = emit_outputs(run(cfg), tmp_path / "a")
        again = emit_outputs(run(parse_config(first.manifest)), tmp_path / "b")
        for name in GOLDEN_HEADERS:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert parse_config(again.manifest) == cfg

    def test_unwritable(self, tiny_result, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError):
            emit_outputs(tiny_result, blocker / "out")


class TestMain:
    def test_validate(self, capsys):
        assert main(["validate"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert "property checks passed" in out

    def test_validate_failure_exit(self, monkeypatch, capsys):
        monkeypatch.setattr(simcli, "validation_checks", lambda seed: [("broken", False, "x")])
        assert main(["validate"]) == 3

    def test_flops(self, tmp_path):
        assert main(["flops", "--out", str(tmp_path)]) == 0
        rows = _rows(tmp_path / "flops.csv")
        assert len(rows) == 1 + 7 * 7
        assert (tmp_path / "manifest.cfg").exists()

    def test_simulate(self, tmp_path, capsys):
        code = main(["simulate", "--eb-n0", "15", "--realizations", "1", "--algorithms", "bd,sgmi", "--out", str(tmp_path)])
        assert code == 0
        assert len(_rows(tmp_path / "ber.csv")) == 3
        cfg = parse_config(tmp_path / "manifest.cfg")
        assert cfg.num_realizations == 1 and cfg.algorithms == (A.BD, A.SGMI)

    def test_eigen(self, tmp_path):
        assert main(["eigen", "--realizations", "1", "--algorithms", "rbd", "--out", str(tmp_path)]) == 0
        assert [r[1] for r in _rows(tmp_path / "ber.csv")[1:]] == ["15"]
        assert len(_rows(tmp_path / "singular.csv")) == 9

    def test_env_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BDPRECODE_OUT", str(tmp_path / "env"))
        assert main(["flops"]) == 0
        assert (tmp_path / "env" / "flops.csv").exists()

    def test_config_error_exit(self, tmp_path, capsys):
        assert main(["simulate", "--num-tx", "4", "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "[per_user_rx]" in err and "num_tx 4" in err

    def test_unknown_key_in_file(self, tmp_path, capsys):
        p = tmp_path / "c.cfg"
        p.write_text("colour = blue\n")
        assert main(["flops", "--config", str(p), "--out", str(tmp_path)]) == 2
        assert "colour" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["flops", "--config", str(tmp_path / "nope.cfg")]) == 4

    def test_io_error_exit(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["flops", "--out", str(blocker / "out")]) == 4

    def test_numerical_error_exit(self, monkeypatch, tmp_path):
        from bdprecode.errors import NumericalError

        def boom(cfg):
            raise NumericalError("realization 0 failed")

        monkeypatch.setattr(simcli, "run", boom)
        assert main(["simulate", "--realizations", "1", "--out", str(tmp_path)]) == 3

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["bogus"])
        assert info.value.code == 2

    def test_flags_mirror_keys(self):
        parser = simcli.build_parser()
        sub = parser._subparsers._group_actions[0].choices["simulate"]
        flags = {s for a in sub._actions for s in a.option_strings}
        for key in simcli.KEYS:
            assert "--" + key.replace("_", "-") in flags
        assert {"--out", "--config", "--realizations"} <= flags


def test_all_algorithms_in_default_manifest():
    lines = dict(line.split(" = ") for line in config_lines(ScenarioConfig()))
    assert lines["algorithms"].split(",") == [a.value for a in ALL_ALGORITHMS]
    assert np.isclose(float(lines["eigen_eb_n0"]), 15.0)
