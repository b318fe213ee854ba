"""Command-line interface: configs, exit codes, artifacts, determinism."""

import json

import numpy as np
import pytest

from sasc import cli


def du_system(kappa_a=1.0, delta_a=0.0, magnitude=0.1, phase=0.0):
    return {
        "topology": "du",
        "modes": [
            {"label": "a", "kappa": kappa_a, "detuning": delta_a,
             "absolute_frequency": 2.0 * np.pi * 10e9},
            {"label": "b", "kappa": 1e-4, "detuning": 1.0,
             "absolute_frequency": 2.0 * np.pi * 10e6},
        ],
        "couplings": [{"magnitude": magnitude, "phase": phase}],
        "temperature": 0.01,
    }


def write_config(path, config):
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


def run_cli(tmp_path, command, config, extra=()):
    path = write_config(tmp_path / "config.json", config)
    return cli.main([command, "--config", path, "--out", str(tmp_path), *extra])


class TestConfigValidation:
    def test_invalid_kappa_names_the_key(self, tmp_path, caplog):
        config = {"system": du_system(kappa_a=-1.0),
                  "task": {"kind": "spectrum"}}
        code = run_cli(tmp_path, "spectrum", config)
        assert code == cli.EXIT_CONFIG
        assert "kappa" in caplog.text

    def test_unknown_keys_rejected(self, tmp_path):
        config = {"system": du_system(), "task": {"kind": "spectrum"},
                  "surprise": 1}
        assert run_cli(tmp_path, "spectrum", config) == cli.EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        code = cli.main(["spectrum", "--config", str(tmp_path / "absent.json"),
                         "--out", str(tmp_path)])
        assert code == cli.EXIT_CONFIG

    def test_task_kind_must_match_subcommand(self, tmp_path):
        config = {"system": du_system(), "task": {"kind": "snr"}}
        assert run_cli(tmp_path, "spectrum", config) == cli.EXIT_CONFIG

    def test_config_hash_is_canonical(self):
        a = {"x": 1, "y": [1, 2]}
        b = {"y": [1, 2], "x": 1}
        assert cli.canonical_hash(a) == cli.canonical_hash(b)


class TestStabilityGate:
    def test_unstable_system_exits_3_without_artifacts(self, tmp_path):
        config = {"system": du_system(kappa_a=0.1, delta_a=-1.0, magnitude=0.5),
                  "task": {"kind": "spectrum"},
                  "grid": {"min": -2.0, "max": 2.0, "points": 11}}
        code = run_cli(tmp_path, "spectrum", config)
        assert code == cli.EXIT_INSTABILITY
        assert not list(tmp_path.glob("*.csv"))
        assert not list(tmp_path.glob("spectrum*"))


class TestSpectrumRuns:
    def test_writes_csv_with_metadata_and_hash(self, tmp_path):
        config = {"system": du_system(), "task": {"kind": "spectrum"},
                  "grid": {"min": -2.0, "max": 2.0, "points": 21}}
        assert run_cli(tmp_path, "spectrum", config) == cli.EXIT_OK
        text = (tmp_path / "spectrum.csv").read_text(encoding="utf-8")
        assert f"# config_hash: {cli.canonical_hash(config)}" in text
        header = next(l for l in text.splitlines() if l.startswith("omega"))
        assert header.split(",")[:3] == ["omega", "T_a", "T_b"]
        assert "R_ab" in header

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        config = {"system": du_system(), "task": {"kind": "spectrum"},
                  "grid": {"min": -1.0, "max": 1.0, "points": 11}}
        (tmp_path / "x").mkdir()
        (tmp_path / "y").mkdir()
        for sub in ("x", "y"):
            path = write_config(tmp_path / sub / "config.json", config)
            assert cli.main(["spectrum", "--config", path,
                             "--out", str(tmp_path / sub)]) == cli.EXIT_OK
        assert ((tmp_path / "x" / "spectrum.csv").read_bytes()
                == (tmp_path / "y" / "spectrum.csv").read_bytes())

    def test_set_override_changes_output_and_hash(self, tmp_path):
        config = {"system": du_system(), "task": {"kind": "spectrum"},
                  "grid": {"min": -1.0, "max": 1.0, "points": 11}}
        assert run_cli(tmp_path, "spectrum", config,
                       ("--set", "system.modes.0.kappa=2.0")) == cli.EXIT_OK
        text = (tmp_path / "spectrum.csv").read_text(encoding="utf-8")
        assert f"# config_hash: {cli.canonical_hash(config)}" not in text
        assert '"kappa": 2.0' in text

    def test_json_format(self, tmp_path):
        config = {"system": du_system(), "task": {"kind": "spectrum"},
                  "grid": {"min": -1.0, "max": 1.0, "points": 5}}
        assert run_cli(tmp_path, "spectrum", config,
                       ("--format", "json")) == cli.EXIT_OK
        payload = json.loads((tmp_path / "spectrum.json").read_text())
        assert payload["metadata"]["config_hash"] == cli.canonical_hash(config)
        assert len(payload["data"]["omega"]) == 5


class TestOtherTasks:
    def test_asymmetry_task(self, tmp_path):
        config = {"system": du_system(), "task": {"kind": "asymmetry"},
                  "grid": {"min": 0.0, "max": 6.283, "points": 25}}
        assert run_cli(tmp_path, "asymmetry", config) == cli.EXIT_OK
        lines = (tmp_path / "asymmetry.csv").read_text().splitlines()
        header = next(l for l in lines if l.startswith("theta"))
        assert header == "theta,R_ab"

    def test_snr_task(self, tmp_path):
        config = {"system": du_system(), "task": {"kind": "snr"},
                  "grid": {"min": -2.0, "max": 2.0, "points": 31}}
        assert run_cli(tmp_path, "snr", config) == cli.EXIT_OK
        header = next(l for l in (tmp_path / "snr.csv").read_text().splitlines()
                      if l.startswith("omega"))
        assert header == "omega,S_AP,S_SNR"

    def test_chain_task(self, tmp_path):
        config = {
            "system": du_system(),
            "task": {"kind": "chain", "chain": {
                "n_values": [2, 3, 4], "coupling": {"magnitude": 0.05},
                "detuning": -0.8, "detuning_alt": 1.2,
                "kappa_high": 0.5, "kappa_low": 0.4, "omega": 0.3,
            }},
        }
        assert run_cli(tmp_path, "chain", config) == cli.EXIT_OK
        fit = json.loads((tmp_path / "chain_fit.json").read_text())["fit"]
        assert fit["n_values"] == [2, 3, 4]
        assert fit["r_squared"] > 0.9

    def test_optimize_task(self, tmp_path):
        system = {
            "topology": "three",
            "modes": [
                {"label": "m", "kappa": 1.0, "detuning": 0.0},
                {"label": "b", "kappa": 1e-4, "detuning": 1.0},
                {"label": "c", "kappa": 1.0, "detuning": 0.0},
            ],
            "couplings": [{"magnitude": 0.1}, {"magnitude": 0.1}],
            "temperature": 0.01,
        }
        config = {"system": system,
                  "task": {"kind": "optimize", "which": "mb", "target": -1.0}}
        assert run_cli(tmp_path, "optimize", config) == cli.EXIT_OK
        payload = json.loads((tmp_path / "optimize.json").read_text())
        assert payload["hit_extreme"] is True
        assert abs(payload["achieved"] + 1.0) < 1e-2

    def test_fmap_task_small_grid(self, tmp_path):
        system = {
            "topology": "three",
            "modes": [
                {"label": "m", "kappa": 1.0, "detuning": 0.0},
                {"label": "b", "kappa": 1e-4, "detuning": 1.0},
                {"label": "c", "kappa": 0.1, "detuning": 0.0},
            ],
            "couplings": [{"magnitude": 0.2, "phase": 1.0471975511965976},
                          {"magnitude": 0.1, "phase": 2.0943951023931953}],
            "temperature": 0.01,
        }
        ics = {
            "topology": "three",
            "modes": [
                {"label": "m", "kappa": 0.1, "detuning": 1.0},
                {"label": "b", "kappa": 1e-4, "detuning": 1.0},
                {"label": "c", "kappa": 0.1, "detuning": 1.0},
            ],
            "couplings": [{"magnitude": 0.2}, {"magnitude": 0.1}],
            "temperature": 0.01,
        }
        config = {"system": system,
                  "task": {"kind": "fmap", "ics": ics,
                           "delta_min": -0.5, "delta_max": 0.5,
                           "delta_points": 3}}
        assert run_cli(tmp_path, "fmap", config) == cli.EXIT_OK
        lines = (tmp_path / "fmap.csv").read_text().splitlines()
        header = next(l for l in lines if not l.startswith("#"))
        assert header == "delta_c,delta_m,lg_f"
        data = [l for l in lines if not l.startswith(("#", "delta"))]
        assert len(data) == 9


class TestOracleTask:
    def config(self, seed):
        return {
            "system": du_system(),
            "seed": seed,
            "task": {"kind": "oracle", "oracle": {
                "n_steps": 8192, "ensemble": 4, "segment_length": 1024,
            }},
        }

    def test_oracle_requires_seed(self, tmp_path):
        config = self.config(0)
        del config["seed"]
        assert run_cli(tmp_path, "oracle", config) == cli.EXIT_CONFIG

    def test_oversized_step_is_a_numerical_failure(self, tmp_path):
        config = self.config(1)
        config["task"]["oracle"]["dt"] = 0.5
        assert run_cli(tmp_path, "oracle", config) == cli.EXIT_NUMERICAL

    def test_short_noisy_run_fails_comparison(self, tmp_path):
        # Deterministic: with this seed the short run leaves >1% of bins
        # outside three standard errors.
        assert run_cli(tmp_path, "oracle", self.config(33)) == cli.EXIT_ORACLE
        report = json.loads((tmp_path / "oracle.json").read_text())
        assert report["fraction_within"] < 0.99


class TestFigures:
    def test_fig2_artifacts(self, tmp_path):
        assert cli.main(["figures", "fig2", "--out", str(tmp_path)]) == cli.EXIT_OK
        for name in ("fig2_a.csv", "fig2_b.csv", "fig2_c.csv", "fig2_d.csv",
                     "fig2.gp"):
            assert (tmp_path / name).exists()
