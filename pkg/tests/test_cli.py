"""Command-line interface: pipeline, exit codes, reproducibility."""

import hashlib
import json
import re

import pytest

from dualmem import load_model, parse_metrics
from dualmem.cli import main

SYNTH_SMALL = ["synth", "--categories", "3", "--instances", "2",
               "--sequences", "4", "--frames", "5", "--dim", "6",
               "--seed", "0"]


def synth(tmp_path, name="data.gdmf", extra=()):
    path = tmp_path / name
    assert main(SYNTH_SMALL + ["--out", str(path)] + list(extra)) == 0
    return path


def train(tmp_path, data, name="run", extra=()):
    out = tmp_path / name
    args = ["train", "--data", str(data), "--out", str(out),
            "--epochs", "2", "--trials", "1", "--seeds", "0",
            "--test-sessions", "3"] + list(extra)
    assert main(args) == 0
    return out


def test_synth_train_eval_pipeline(tmp_path, capsys):
    data = synth(tmp_path)
    out = train(tmp_path, data)
    for artifact in ("config.resolved", "metrics_seed0.txt",
                     "metrics_seed0.json", "summary.json", "model.gdmm"):
        assert (out / artifact).exists(), artifact
    capsys.readouterr()
    code = main(["eval", "--model", str(out / "model.gdmm"),
                 "--data", str(data), "--test-sessions", "3"])
    assert code == 0
    printed = capsys.readouterr().out
    # The eval command reproduces the final training metrics exactly.
    log = parse_metrics(out / "metrics_seed0.txt")
    match = re.search(r"instance_acc=([0-9.]+) category_acc=([0-9.]+)", printed)
    assert float(match.group(1)) == log.final.instance_acc
    assert float(match.group(2)) == log.final.category_acc


def test_metrics_formats_agree(tmp_path):
    data = synth(tmp_path)
    out = train(tmp_path, data)
    text_log = parse_metrics(out / "metrics_seed0.txt")
    json_log = parse_metrics(out / "metrics_seed0.json")
    assert text_log.records == json_log.records


def test_config_echo_reruns_bit_identical(tmp_path):
    data = synth(tmp_path)
    out1 = train(tmp_path, data, "run1")
    out2 = tmp_path / "run2"
    # Rerun purely from the echoed configuration file.
    assert main(["train", "--data", str(data), "--out", str(out2),
                 "--config", str(out1 / "config.resolved")]) == 0
    assert (out1 / "model.gdmm").read_bytes() == (out2 / "model.gdmm").read_bytes()
    assert (out1 / "metrics_seed0.txt").read_bytes() == \
        (out2 / "metrics_seed0.txt").read_bytes()


def test_tc_none_saves_depth_zero_model(tmp_path):
    data = synth(tmp_path)
    out = train(tmp_path, data, extra=["--tc", "none"])
    model = load_model(out / "model.gdmm")
    assert model.episodic.params.depth == 0
    assert model.semantic.params.depth == 0
    assert "tc = none" in (out / "config.resolved").read_text()


def test_synth_reproducible_bytes(tmp_path):
    a = synth(tmp_path, "a.gdmf")
    b = synth(tmp_path, "b.gdmf")
    assert hashlib.sha256(a.read_bytes()).hexdigest() == \
        hashlib.sha256(b.read_bytes()).hexdigest()
    c = synth(tmp_path, "c.gdmf", extra=["--seed", "1"])
    assert a.read_bytes() != c.read_bytes()


def test_replay_ablation_outputs(tmp_path):
    data = synth(tmp_path)
    out = tmp_path / "abl"
    code = main(["replay-ablation", "--data", str(data), "--out", str(out),
                 "--scenario", "incremental", "--trials", "1", "--seeds", "0",
                 "--test-sessions", "3"])
    assert code == 0
    doc = json.loads((out / "ablation.json").read_text())
    assert set(doc["arms"]) == {"with_replay", "without_replay"}
    assert "category_acc" in doc["replay_delta"]
    assert (out / "metrics_with_replay_seed0.txt").exists()
    assert (out / "metrics_without_replay_seed0.txt").exists()


def test_replay_ablation_rejects_batch(tmp_path):
    data = synth(tmp_path)
    code = main(["replay-ablation", "--data", str(data),
                 "--out", str(tmp_path / "abl"), "--scenario", "batch"])
    assert code == 3


# ----------------------------------------------------------------------
# exit codes

def test_usage_error_exit_1(capsys):
    assert main(["train"]) == 1  # missing required flags
    assert main(["bogus-command"]) == 1
    assert "usage" in capsys.readouterr().err


def test_missing_data_exit_2(tmp_path, capsys):
    code = main(["train", "--data", str(tmp_path / "nope.gdmf"),
                 "--out", str(tmp_path / "out")])
    assert code == 2
    assert "data error" in capsys.readouterr().err


def test_corrupt_data_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.gdmf"
    bad.write_bytes(b"GDMF" + b"\x01\x00\x00\x00" + b"\xff" * 4)
    code = main(["train", "--data", str(bad), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "data error" in capsys.readouterr().err


def test_corrupt_model_exit_2(tmp_path, capsys):
    data = synth(tmp_path)
    bad = tmp_path / "bad.gdmm"
    bad.write_bytes(b"XXXX")
    assert main(["eval", "--model", str(bad), "--data", str(data)]) == 2
    assert "data error" in capsys.readouterr().err


def test_invariant_violation_exit_3(tmp_path, capsys):
    data = synth(tmp_path)
    # Held-out sessions that leave no training frames.
    code = main(["train", "--data", str(data), "--out", str(tmp_path / "out"),
                 "--test-sessions", "1,2,3,4"])
    assert code == 3
    assert "invariant violation" in capsys.readouterr().err


def test_bad_synth_spec_exit_3(tmp_path):
    code = main(["synth", "--out", str(tmp_path / "x.gdmf"),
                 "--categories", "0"])
    assert code == 3


def test_bad_config_key_value_exit_2(tmp_path):
    data = synth(tmp_path)
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("epochs = not-a-number\n")
    code = main(["train", "--data", str(data), "--out", str(tmp_path / "out"),
                 "--config", str(cfg)])
    assert code == 2
