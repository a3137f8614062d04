"""Command-line interface: exit codes, artifacts, config precedence,
reproducibility."""

import json

import pytest

from toalab.cli import (EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION,
                        main)


def run(tmp_path, *argv):
    out = tmp_path / "out"
    out.mkdir(exist_ok=True)
    code = main([*argv, "--output-dir", str(out)])
    return code, out


class TestExitCodes:
    def test_unknown_experiment_is_config_error(self, capsys):
        assert main(["no-such-experiment"]) == EXIT_CONFIG
        assert "invalid choice" in capsys.readouterr().err

    def test_bad_flag_value_is_config_error(self, capsys):
        assert main(["kijowski-wave", "--m", "not-a-number"]) == EXIT_CONFIG

    def test_missing_required_parameter_is_config_error(self, tmp_path, capsys):
        code, _ = run(tmp_path, "ms-evolve", "--steps", "10")
        assert code == EXIT_CONFIG
        assert "lambda" in capsys.readouterr().err

    def test_invalid_physics_parameter_is_config_error(self, tmp_path, capsys):
        code, _ = run(tmp_path, "kijowski-bullet", "--p0", "-1")
        assert code == EXIT_CONFIG

    def test_excessive_ms_coupling_is_numerical_error(self, tmp_path, capsys):
        code, _ = run(tmp_path, "ms-evolve", "--lambda", "1e15",
                      "--epsilon", "0.5", "--steps", "5")
        assert code == EXIT_NUMERICAL


class TestArtifacts:
    def test_wave_norm_summary(self, tmp_path):
        code, out = run(tmp_path, "kijowski-wave")
        assert code == EXIT_OK
        summary = json.loads((out / "kijowski-wave_summary.json").read_text())
        assert summary["norm"] == pytest.approx(0.25, abs=1e-4)
        manifest = json.loads(
            (out / "kijowski-wave_manifest.json").read_text())
        assert manifest["experiment"] == "kijowski-wave"
        assert "parameters" in manifest and "seed" in manifest

    def test_walk_validate_passes(self, tmp_path):
        code, out = run(tmp_path, "walk-validate", "--d", "2", "--n-max", "40")
        assert code == EXIT_OK
        assert (out / "walk-validate_summary.json").exists()

    def test_slit_sweep_table(self, tmp_path):
        code, out = run(tmp_path, "slit-sweep", "--W", "10,0.1")
        assert code == EXIT_OK
        lines = (out / "slit-sweep_table.csv").read_text().strip().splitlines()
        assert len(lines) == 3                      # header + 2 widths
        header = lines[0].split(",")
        assert header[0] == "W"

    def test_ms_evolve_budget(self, tmp_path):
        code, out = run(tmp_path, "ms-evolve", "--lambda", "1",
                        "--steps", "400")
        assert code == EXIT_OK
        summary = json.loads((out / "ms-evolve_summary.json").read_text())
        assert summary["budget"] == pytest.approx(1.0, abs=1e-4)
        assert summary["cumulative_detected"] + summary["final_norm"] == (
            pytest.approx(summary["budget"]))


class TestConfigFile:
    def test_file_values_used_and_flags_win(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# sweep parameters\nW = 10,0.1\nsigma_x = 100\n")
        code, out = run(tmp_path, "slit-sweep", "--config", str(cfg),
                        "--W", "5,0.5")
        assert code == EXIT_OK
        manifest = json.loads((out / "slit-sweep_manifest.json").read_text())
        assert manifest["parameters"]["W"] == "5,0.5"       # flag beats file
        assert manifest["parameters"]["sigma-x"] == 100.0   # file beats default

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("nonsense = 1\n")
        code, _ = run(tmp_path, "slit-sweep", "--config", str(cfg))
        assert code == EXIT_CONFIG
        assert "nonsense" in capsys.readouterr().err

    def test_missing_config_file_rejected(self, tmp_path):
        code, _ = run(tmp_path, "slit-sweep", "--config",
                      str(tmp_path / "absent.cfg"))
        assert code == EXIT_CONFIG


class TestReproducibility:
    def test_identical_invocations_yield_identical_bytes(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            out.mkdir()
            code = main(["sqm-detect", "--output-dir", str(out)])
            assert code == EXIT_OK
            outs.append((out / "sqm-detect_curve.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_seed_recorded_in_manifest(self, tmp_path):
        code, out = run(tmp_path, "walk-validate", "--seed", "123")
        assert code == EXIT_OK
        manifest = json.loads(
            (out / "walk-validate_manifest.json").read_text())
        assert manifest["seed"] == 123
