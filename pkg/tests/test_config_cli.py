import json

import pytest

from spincim import ConfigError
from spincim.cli import main
from spincim.config import (
    DEFAULT_CONFIG,
    build_cost_table,
    build_model,
    build_sense,
    config_hash,
    load_config,
)

class TestConfig:
    def test_defaults_build_shipped_model(self):
        config = load_config()
        model = build_model(config)
        assert model.margins() == {"read": 5.5, "pair_lower": 3.2, "pair_upper": 2.5}
        sense = build_sense(config)
        sense.validate_against(model)

    def test_unknown_top_level_key_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"devize": {}}')
        with pytest.raises(ConfigError, match="devize"):
            load_config(path)

    def test_unknown_nested_key_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"device": {"sigmaa": 0.4}}')
        with pytest.raises(ConfigError, match="device.sigmaa"):
            load_config(path)

    def test_scalar_object_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"device": 3}')
        with pytest.raises(ConfigError):
            load_config(path)
        path.write_text('{"seed": {"x": 1}}')
        with pytest.raises(ConfigError):
            load_config(path)

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_override_merges(self, tmp_path):
        path = tmp_path / "ok.json"
        path.write_text('{"device": {"sigma": 0.25}, "trials": 50}')
        config = load_config(path)
        assert config["device"]["sigma"] == 0.25
        assert config["trials"] == 50
        assert config["array"]["rows_per_bank"] == 64  # untouched default

    def test_bad_cost_row_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"cost": {"enhanced": {"CimFOO": [1, 2]}}}')
        with pytest.raises(ConfigError):
            build_cost_table(load_config(path))

    def test_hash_ignores_runtime_keys(self):
        base = load_config()
        noisy = load_config()
        noisy["threads"] = 8
        noisy["out_dir"] = "elsewhere"
        assert config_hash(base) == config_hash(noisy)
        changed = load_config()
        changed["seed"] = 1
        assert config_hash(changed) != config_hash(base)


def run_cli(capsys, *argv) -> tuple[int, dict | None]:
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


class TestCli:
    def test_margins_exact(self, capsys, tmp_path):
        code, report = run_cli(capsys, "margins", "--out", str(tmp_path))
        assert code == 0
        assert report["report"]["margins_ua"] == {
            "read": 5.5, "pair_lower": 3.2, "pair_upper": 2.5,
        }
        assert report["seed"] == DEFAULT_CONFIG["seed"]
        assert len(report["config_hash"]) == 64

    @pytest.mark.parametrize(
        "op,expected", [("CimAND", [0, 0, 0, 1]), ("CimOR", [0, 1, 1, 1]),
                        ("CimXOR", [0, 1, 1, 0]), ("CimNOR", [1, 0, 0, 0])]
    )
    def test_truth_table_zero_noise(self, capsys, tmp_path, op, expected):
        code, report = run_cli(
            capsys, "truth-table", "--op", op, "--noise", "0", "--out", str(tmp_path)
        )
        assert code == 0
        rows = report["report"]["rows"]
        assert [r["output"] for r in rows] == expected
        assert [r["states"] for r in rows] == ["AP,AP", "AP,P", "P,AP", "P,P"]
        assert [r["nominal_current_ua"] for r in rows] == [17.0, 20.2, 20.2, 22.7]

    def test_mc_failure_matches_reference_rate(self, capsys, tmp_path):
        code, report = run_cli(
            capsys, "mc-failure", "--pair", "AP,P", "--temp", "100",
            "--trials", "3000", "--out", str(tmp_path),
        )
        assert code == 0
        payload = report["report"]
        assert payload["analytic_rate"] == pytest.approx(0.044, abs=0.002)
        assert abs(payload["rate"] - payload["analytic_rate"]) < 0.012

    def test_reports_byte_identical_across_runs_and_threads(self, capsys, tmp_path):
        args = ["mc-failure", "--pair", "AP,P", "--temp", "100",
                "--trials", "2000", "--out", str(tmp_path)]
        assert main(args) == 0
        capsys.readouterr()
        first = (tmp_path / "mc-failure.json").read_bytes()
        assert main(args) == 0
        capsys.readouterr()
        assert (tmp_path / "mc-failure.json").read_bytes() == first
        assert main(args + ["--threads", "4"]) == 0
        capsys.readouterr()
        assert (tmp_path / "mc-failure.json").read_bytes() == first

    def test_isa_run_compare_lowered(self, capsys, tmp_path):
        program = tmp_path / "add.cim"
        program.write_text("CimADD @0, @1, @2\n")
        init = tmp_path / "init.hex"
        words = ["0007", "0009"] + ["0000"] * 62
        init.write_text("\n".join(words) + "\n")
        code, report = run_cli(
            capsys, "isa-run", "--program", str(program), "--init-hex", str(init),
            "--compare-lowered", "--zero-noise", "--out", str(tmp_path),
        )
        assert code == 0
        payload = report["report"]
        assert payload["direct"]["memory_access_count"] == 1
        assert payload["lowered"]["memory_access_count"] == 3
        assert payload["memory_access_delta"] == 2
        assert payload["final_memory_equal"] is True
        assert (tmp_path / "isa-run-trace.csv").exists()
        assert (tmp_path / "isa-run-lowered-trace.csv").exists()

    def test_calibrate_matches_shipped_defaults(self, capsys, tmp_path):
        code, report = run_cli(capsys, "calibrate", "--out", str(tmp_path))
        assert code == 0
        deltas = report["report"]["relative_delta"]
        assert all(delta < 0.01 for delta in deltas.values())

    def test_sca_sweep(self, capsys, tmp_path):
        config = tmp_path / "small.json"
        config.write_text(
            '{"sca": {"samples_per_class": 400, "sweep_sigma_energy": [1.0, 5.0]}}'
        )
        code, report = run_cli(
            capsys, "sca", "--config", str(config), "--out", str(tmp_path)
        )
        assert code == 0
        rows = report["report"]["rows"]
        assert len(rows) == 2
        for row in rows:
            assert row["enhanced_11_class"] <= row["standard_4_class"]
        assert (tmp_path / "sca.csv").exists()

    def test_auth_attack_smoke(self, capsys, tmp_path):
        code, report = run_cli(
            capsys, "auth-attack", "--variant", "XnorLevel", "--temp", "100",
            "--trials", "300", "--out", str(tmp_path),
        )
        assert code == 0
        assert report["report"]["trials"] == 300

    def test_mitigate_smoke(self, capsys, tmp_path):
        code, report = run_cli(
            capsys, "mitigate", "--family", "collapse", "--trials", "2000",
            "--out", str(tmp_path),
        )
        assert code == 0
        payload = report["report"]
        assert payload["after"]["rate"] < payload["before"]["rate"]

    def test_usage_error_exits_one(self, capsys):
        assert main(["mc-failure", "--no-such-flag"]) == 1
        assert main([]) == 1

    def test_config_error_exits_one(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"devize": 1}')
        assert main(["margins", "--config", str(bad)]) == 1

    def test_experiment_error_exits_two(self, capsys, tmp_path):
        assert main(
            ["isa-run", "--program", str(tmp_path / "absent.cim"),
             "--out", str(tmp_path)]
        ) == 2
