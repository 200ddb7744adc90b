"""Tests for the command-line interface."""

import json

import numpy as np
import pandas as pd
import pytest

from cocarry.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, run
from cocarry.context import MANIFEST_NAME
from cocarry.metrics.report import CSV_COLUMNS


def _json_tail(text):
    """The trailing JSON document of a command's stdout."""
    return json.loads(text[text.index("\n{") + 1 :] if not text.startswith("{") else text)


def _metrics_csv(path):
    t = np.linspace(0.0, 10.0, 501)
    human = np.stack([t / 10.0, np.zeros_like(t), np.zeros_like(t)], axis=1)
    robot = human + np.array([0.0, 0.1, 0.0])
    forces = np.tile([3.0, 4.0, 0.0], (t.size, 1))
    pd.DataFrame(np.column_stack([t, human, robot, forces, forces]), columns=CSV_COLUMNS).to_csv(path, index=False)
    return path


@pytest.fixture
def gen_data(tmp_path, tiny_overrides):
    """Run gen-data once into ``tmp_path / run`` and return that directory."""
    out = tmp_path / "run"
    assert run(["--seed", "7", "--out", str(out), "gen-data", *tiny_overrides]) == EXIT_OK
    return out


class TestUsage:
    def test_version(self, capsys):
        assert run(["--version"]) == EXIT_OK
        assert "cocarry" in capsys.readouterr().out

    def test_unknown_command(self):
        assert run(["fly"]) == EXIT_USAGE

    def test_missing_required_option(self, tmp_path):
        assert run(["--out", str(tmp_path), "infer"]) == EXIT_USAGE

    def test_unknown_override(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert run(["--out", str(out), "gen-data", "foo=1"]) == EXIT_USAGE
        assert "foo" in capsys.readouterr().err
        assert not (out / "dataset.ccry").exists()

    def test_intent_follower_needs_checkpoint(self, tmp_path, tiny_overrides):
        assert run(["--out", str(tmp_path), "rollout", "--follower", "intent", *tiny_overrides]) == EXIT_USAGE


class TestGenData:
    def test_artifacts_and_manifest(self, capsys, gen_data):
        summary = _json_tail(capsys.readouterr().out)
        assert summary["trials"] == 8
        assert summary["samples"] > 0
        manifest = json.loads((gen_data / MANIFEST_NAME).read_text())
        assert manifest["command"] == "gen-data"
        assert manifest["seed"] == 7
        paths = {entry["path"] for entry in manifest["files"]}
        assert {"dataset.ccry", "config.resolved.json"} <= paths
        assert sum(p.startswith("logs/admittance/") for p in paths) == 8

    def test_rerun_is_byte_identical(self, gen_data, tiny_overrides):
        first = (gen_data / MANIFEST_NAME).read_bytes()
        dataset = (gen_data / "dataset.ccry").read_bytes()
        assert run(["--seed", "7", "--out", str(gen_data), "gen-data", *tiny_overrides]) == EXIT_OK
        assert (gen_data / MANIFEST_NAME).read_bytes() == first
        assert (gen_data / "dataset.ccry").read_bytes() == dataset

    def test_workers_do_not_change_output(self, gen_data, tiny_overrides):
        dataset = (gen_data / "dataset.ccry").read_bytes()
        assert run(["--seed", "7", "--out", str(gen_data), "gen-data", "--workers", "3", *tiny_overrides]) == EXIT_OK
        assert (gen_data / "dataset.ccry").read_bytes() == dataset

    def test_seed_changes_output(self, gen_data, tiny_overrides):
        dataset = (gen_data / "dataset.ccry").read_bytes()
        assert run(["--seed", "8", "--out", str(gen_data), "gen-data", *tiny_overrides]) == EXIT_OK
        assert (gen_data / "dataset.ccry").read_bytes() != dataset


class TestIntentCommands:
    def test_train_then_infer(self, gen_data, tiny_overrides, capsys):
        assert run(["--seed", "7", "--out", str(gen_data), "train-intent", *tiny_overrides]) == EXIT_OK
        assert (gen_data / "intent.ckpt").is_file()
        assert (gen_data / "intent_loss.csv").is_file()
        capsys.readouterr()

        log = sorted((gen_data / "logs" / "admittance").glob("*.jsonl"))[0]
        args = ["--seed", "7", "--out", str(gen_data), "infer", "--checkpoint", str(gen_data / "intent.ckpt"), "--log", str(log)]
        assert run([*args, *tiny_overrides]) == EXIT_OK
        result = _json_tail(capsys.readouterr().out)
        assert len(result["command"]) == 3
        assert all(np.isfinite(result["command"]))

        assert run([*args, *tiny_overrides]) == EXIT_OK
        assert _json_tail(capsys.readouterr().out)["command"] == result["command"]

    def test_infer_too_early_in_log(self, gen_data, tiny_overrides):
        assert run(["--seed", "7", "--out", str(gen_data), "train-intent", *tiny_overrides]) == EXIT_OK
        log = sorted((gen_data / "logs" / "admittance").glob("*.jsonl"))[0]
        args = ["--out", str(gen_data), "infer", "--checkpoint", str(gen_data / "intent.ckpt"), "--log", str(log), "--frame", "1"]
        assert run([*args, *tiny_overrides]) == EXIT_RUNTIME


class TestMetricsCommand:
    def test_csv_input(self, tmp_path, capsys):
        csv = _metrics_csv(tmp_path / "trial.csv")
        out = tmp_path / "report"
        assert run(["--out", str(out), "metrics", "--input", str(csv)]) == EXIT_OK
        text = capsys.readouterr().out
        for value in ("23.78", "0.1109", "0.165", "17.355"):
            assert value in text
        report = json.loads((out / "report.json").read_text())
        assert report["columns"]["measured"]["completion_time"]["mean"] == pytest.approx(9.0)
        assert report["columns"]["measured"]["avg_follower_force"]["mean"] == pytest.approx(10.0)

    def test_bad_csv_leaves_nothing(self, tmp_path):
        csv = tmp_path / "bad.csv"
        pd.DataFrame({"t": [0.0, 1.0]}).to_csv(csv, index=False)
        out = tmp_path / "report"
        assert run(["--out", str(out), "metrics", "--input", str(csv)]) == EXIT_RUNTIME
        assert not (out / "report.json").exists()
        assert not (out / MANIFEST_NAME).exists()

    def test_rollout_log_input(self, tmp_path, tiny_overrides):
        out = tmp_path / "run"
        overrides = [*tiny_overrides, "dyad.rest_after=2.0"]
        assert run(["--out", str(out), "rollout", "--follower", "admittance", *overrides]) == EXIT_OK
        log = out / "rollouts" / "admittance" / "trial_000_forward_0kg.jsonl"
        assert log.is_file()
        assert run(["--out", str(out), "metrics", "--input", str(log), *overrides]) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["columns"]["measured"]["completion_time"]["mean"] > 0


class TestPPOCommands:
    def test_train_then_evaluate(self, tmp_path, tiny_overrides, capsys):
        out = tmp_path / "run"
        assert run(["--seed", "3", "--out", str(out), "train-ppo", *tiny_overrides]) == EXIT_OK
        assert (out / "policy_adaptive.ckpt").is_file()
        assert (out / "policy_baseline.ckpt").is_file()
        assert len(pd.read_csv(out / "ppo_curve_adaptive.csv")) == 1
        capsys.readouterr()

        assert run(["--seed", "3", "--out", str(out), "eval-ppo", *tiny_overrides]) == EXIT_OK
        text = capsys.readouterr().out
        assert "Velocity tracking" in text
        summary = json.loads((out / "eval_ppo.json").read_text())
        assert set(summary["policies"]) == {"adaptive", "baseline"}
        assert "relative_reduction" in summary

    def test_named_checkpoint(self, tmp_path, tiny_overrides):
        out = tmp_path / "run"
        assert run(["--out", str(out), "train-ppo", "--mode", "adaptive", *tiny_overrides]) == EXIT_OK
        assert not (out / "policy_baseline.ckpt").exists()
        checkpoint = f"mine={out / 'policy_adaptive.ckpt'}"
        assert run(["--out", str(out), "eval-ppo", "--checkpoint", checkpoint, *tiny_overrides]) == EXIT_OK
        summary = json.loads((out / "eval_ppo.json").read_text())
        assert list(summary["policies"]) == ["mine"]

    def test_missing_checkpoint(self, tmp_path, tiny_overrides):
        assert run(["--out", str(tmp_path), "eval-ppo", "--checkpoint", "x=nowhere.ckpt", *tiny_overrides]) == EXIT_USAGE


@pytest.mark.slow
@pytest.mark.integration
def test_reproduce_end_to_end(tmp_path, tiny_overrides, capsys):
    manifests = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert run(["--seed", "1", "--out", str(out), "reproduce", *tiny_overrides, "dyad.rest_after=2.0"]) == EXIT_OK
        manifests.append(json.loads((out / MANIFEST_NAME).read_text()))
    out = tmp_path / "first"
    report = json.loads((out / "report.json").read_text())
    assert "Admittance follower" in report["columns"]
    assert set(report["metrics"]) == {"completion_time", "trajectory_deviation", "velocity_difference", "avg_follower_force"}
    assert (out / "eval_ppo.json").is_file()
    assert "23.78" in capsys.readouterr().out

    # config.resolved.json records the output directory itself
    digests = [
        {entry["path"]: entry["sha256"] for entry in manifest["files"] if entry["path"] != "config.resolved.json"}
        for manifest in manifests
    ]
    assert {"dataset.ccry", "intent.ckpt", "report.json", "report.csv", "eval_ppo.json"} <= set(digests[0])
    assert digests[0] == digests[1]
    assert manifests[0]["config_hash"] == manifests[1]["config_hash"]
