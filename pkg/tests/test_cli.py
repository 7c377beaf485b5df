import json
import os
from collections import Counter

import pytest

from mdiqss import cli
from mdiqss.cli import (
    CampaignSpec,
    ConfigError,
    attack_sweep_rows,
    build_attack,
    cmd_run,
    cmd_table1,
    correlation_table,
    load_spec,
    main,
)
from mdiqss.protocol import ProtocolConfig

HONEST_TOML = """
[protocol]
ghz_prob = 0.8
rounds = 2000
qber_threshold = 0.05
seed = 97

[campaign]
repetitions = 2
emit = ["transcript", "stats", "keys"]
secret_bits = 16
"""

ATTACK_TOML = """
[protocol]
ghz_prob = 0.8
rounds = 500
qber_threshold = 0.05
seed = 11

[attack]
kind = "intercept_resend"
policy = "random"

[campaign]
repetitions = 100
emit = ["stats"]
"""


def write_config(tmp_path, text):
    path = tmp_path / "campaign.toml"
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestConfigLoading:
    def test_load_and_overrides(self, tmp_path):
        path = write_config(tmp_path, HONEST_TOML)
        spec = load_spec(path, seed=123, out=str(tmp_path / "o"), emit=["stats"])
        assert spec.protocol.seed == 123
        assert spec.protocol.rounds == 2000
        assert spec.output_dir == str(tmp_path / "o")
        assert spec.emit == ("stats",)
        assert spec.repetitions == 2

    def test_noise_tables(self, tmp_path):
        text = HONEST_TOML + "\n[protocol.noise_bob_david]\np_x = 0.1\n"
        spec = load_spec(write_config(tmp_path, text))
        assert spec.protocol.noise_bob_david.p_x == 0.1
        assert spec.protocol.noise_alice_david.total == 0.0

    def test_invalid_values_rejected(self, tmp_path):
        text = HONEST_TOML.replace('ghz_prob = 0.8', 'ghz_prob = 1.7')
        with pytest.raises(ConfigError):
            load_spec(write_config(tmp_path, text))

    def test_bad_emit_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_spec(write_config(tmp_path, HONEST_TOML), emit=["plots"])

    def test_unknown_attack_rejected(self):
        with pytest.raises(ConfigError):
            build_attack({"kind": "laser"})

    def test_main_reports_config_errors(self, tmp_path, capsys):
        code = main(["run", "--config", str(tmp_path / "missing.toml")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestCorrelationTable:
    def test_structure(self):
        rows = correlation_table()
        # Impossible announcement pairs are suppressed: Z/Z preparations
        # admit only 8 of the 16 Bell pairs each.
        assert len(rows) == 224
        keys = {(r["bob"], r["charlie"], r["bsm_david"], r["bsm_ethan"]) for r in rows}
        assert len(keys) == len(rows)  # exactly one collapse per announcement

    def test_xx_probabilities_exact(self):
        x_states = {"PLUS", "MINUS"}
        rows = [
            r
            for r in correlation_table()
            if r["bob"] in x_states and r["charlie"] in x_states
        ]
        assert len(rows) == 64
        assert all(abs(r["probability"] - 0.0625) <= 1e-12 for r in rows)

    def test_zz_probabilities_exact(self):
        z_states = {"ZERO", "ONE"}
        rows = [
            r
            for r in correlation_table()
            if r["bob"] in z_states and r["charlie"] in z_states
        ]
        assert len(rows) == 32
        assert all(abs(r["probability"] - 0.125) <= 1e-12 for r in rows)

    def test_cmd_writes_csv(self, tmp_path):
        assert cmd_table1(str(tmp_path)) == 0
        text = (tmp_path / "table1.csv").read_text()
        lines = text.strip().splitlines()
        assert lines[0] == "bob,charlie,bsm_david,bsm_ethan,alice,probability"
        assert len(lines) == 225

    def test_stdout_mode(self, capsys):
        assert cmd_table1(None) == 0
        out = capsys.readouterr().out
        assert out.startswith("bob,charlie,")


class TestCmdRun:
    def test_honest_run_outputs(self, tmp_path):
        spec = load_spec(write_config(tmp_path, HONEST_TOML), out=str(tmp_path / "out"))
        assert cmd_run(spec) == 0
        out = tmp_path / "out"
        stats = json.loads((out / "stats.json").read_text())
        assert set(stats) == {"config", "qber", "decision", "key", "attack"}
        assert stats["decision"]["abort_rate"] == 0.0
        assert stats["decision"]["total"] == 2
        assert stats["key"]["recovered_count"] == 2
        assert stats["attack"]["strategy"] == "none"
        lines = (out / "transcript.jsonl").read_text().splitlines()
        assert len(lines) == 4000  # two repetitions logged back to back
        keys = json.loads((out / "keys.json").read_text())
        assert len(keys) == 2
        assert keys[0]["status"] == "ok"

    def test_byte_identical_reruns(self, tmp_path):
        path = write_config(tmp_path, HONEST_TOML)
        spec_a = load_spec(path, out=str(tmp_path / "a"))
        spec_b = load_spec(path, out=str(tmp_path / "b"))
        assert cmd_run(spec_a) == 0
        assert cmd_run(spec_b) == 0
        for name in ("transcript.jsonl", "stats.json", "keys.json"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_intercept_attack_abort_rate(self, tmp_path):
        spec = load_spec(write_config(tmp_path, ATTACK_TOML), out=str(tmp_path / "out"))
        code = cmd_run(spec)
        stats = json.loads((tmp_path / "out" / "stats.json").read_text())
        assert stats["decision"]["abort_rate"] >= 0.99
        assert code == 2  # every campaign aborted with this seed
        detection = stats["attack"]["detection"]
        assert detection["campaigns_aborted"] >= 99
        assert detection["checked_rounds"] > 0

    def test_thread_env_does_not_change_output(self, tmp_path, monkeypatch):
        path = write_config(tmp_path, HONEST_TOML)
        spec_a = load_spec(path, out=str(tmp_path / "serial"))
        assert cmd_run(spec_a) == 0
        monkeypatch.setenv(cli.THREADS_ENV, "4")
        spec_b = load_spec(path, out=str(tmp_path / "parallel"))
        assert cmd_run(spec_b) == 0
        assert (tmp_path / "serial" / "stats.json").read_bytes() == (
            tmp_path / "parallel" / "stats.json"
        ).read_bytes()
        assert (tmp_path / "serial" / "transcript.jsonl").read_bytes() == (
            tmp_path / "parallel" / "transcript.jsonl"
        ).read_bytes()

    def test_emit_table1_from_run(self, tmp_path):
        spec = load_spec(
            write_config(tmp_path, HONEST_TOML), out=str(tmp_path / "out"), emit=["table1"]
        )
        assert cmd_run(spec) == 0
        assert (tmp_path / "out" / "table1.csv").exists()
        assert not (tmp_path / "out" / "stats.json").exists()


class TestAttackSweep:
    def test_intercept_theory_column(self):
        rows = attack_sweep_rows("intercept", [1, 2, 3], campaigns=1500, seed=5)
        assert [r["theoretical_escape"] for r in rows] == [0.25, 0.0625, 0.015625]
        for row in rows:
            assert row["strategy"] == "intercept_resend"
            assert 0.0 <= row["escape_rate"] <= 1.0

    def test_ancilla_residual_column(self):
        rows = attack_sweep_rows("ancilla", [0.0, 0.1, 0.2])
        residuals = [r["residual_error"] for r in rows]
        assert residuals[0] == pytest.approx(0.0, abs=1e-12)
        assert residuals[1] == pytest.approx(0.01, abs=1e-9)
        assert residuals[2] == pytest.approx(0.04, abs=1e-9)

    def test_no_attack_columns_zero(self):
        rows = attack_sweep_rows("none", [], campaigns=300, rounds=120, seed=6)
        assert len(rows) == 1
        row = rows[0]
        assert row["escape_rate"] == 0.0
        assert row["abort_rate"] == 0.0
        assert row["residual_error"] == 0.0
        assert row["checked_rounds"] > 0

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            attack_sweep_rows("phase", [1])

    def test_cli_writes_csv(self, tmp_path):
        code = main(
            [
                "attack-sweep",
                "--family",
                "ancilla",
                "--grid",
                "0,0.1",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 0
        lines = (tmp_path / "attack_sweep.csv").read_text().strip().splitlines()
        assert lines[0].split(",") == list(cli._SWEEP_FIELDS)
        assert len(lines) == 3

    def test_grid_required(self, capsys):
        assert main(["attack-sweep", "--family", "intercept", "--grid", ""]) == 1
        assert "grid" in capsys.readouterr().err


class TestSpecValidation:
    def test_repetitions_bound(self):
        with pytest.raises(ConfigError):
            CampaignSpec(protocol=ProtocolConfig(), repetitions=0)
