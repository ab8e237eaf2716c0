import json
from pathlib import Path

import pytest

from homeseq.cli import main


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sim_log(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "log.txt"
    assert run(["simulate", "--days", "3", "--seed", "7", "-o", path]) == 0
    return path


def test_unknown_flag_is_usage_error(capsys):
    assert run(["simulate", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand_is_usage_error():
    assert run(["teleport"]) == 1


def test_missing_file_is_data_error(tmp_path, capsys):
    assert run(["ingest", tmp_path / "nope.txt", "-o", tmp_path / "o.txt"]) == 2


def test_simulate_writes_log_registry_manifest(sim_log):
    assert sim_log.exists()
    assert Path(str(sim_log) + ".registry.ini").exists()
    assert Path(str(sim_log) + ".routine.ini").exists()
    manifest = json.loads(Path(str(sim_log) + ".manifest.json").read_text())
    assert manifest["subcommand"] == "simulate"
    assert manifest["args"]["seed"] == 7
    assert str(sim_log) in manifest["outputs"]


def test_ingest_validates_and_canonicalizes(sim_log, tmp_path):
    out = tmp_path / "canonical.txt"
    assert run(["ingest", sim_log, "-o", out]) == 0
    assert out.read_text() == sim_log.read_text()
    assert "no issues" in Path(str(out) + ".validation.txt").read_text()


def test_correct_on_clean_log_is_identity(sim_log, tmp_path):
    out = tmp_path / "corrected.txt"
    assert run(["correct", sim_log, "-o", out]) == 0
    assert out.read_text() == sim_log.read_text()
    assert "inserted events: 0" in Path(str(out) + ".summary.txt").read_text()


def test_encode_speed_and_alz(sim_log, tmp_path):
    out = tmp_path / "speed.txt"
    assert run(["encode", sim_log, "-o", out]) == 0
    text = out.read_text().strip()
    assert text and all(c.isalpha() for c in text)
    out2 = tmp_path / "alz.txt"
    assert run(["encode", sim_log, "--frontend", "alz", "-o", out2]) == 0
    assert len(out2.read_text().strip()) == sum(
        line.endswith(",1") for line in sim_log.read_text().splitlines())


def test_encode_with_time_mode(sim_log, tmp_path):
    out = tmp_path / "timed.txt"
    assert run(["encode", sim_log, "--time-mode", "bucket4", "-o", out]) == 0
    first = out.read_text().split()[0]
    assert first.endswith("|start")


def test_cluster_then_kcluster_encode(sim_log, tmp_path):
    clusters = tmp_path / "clusters.ini"
    assert run(["cluster", sim_log, "--seed", "3", "-o", clusters]) == 0
    assert clusters.read_text().startswith("[")
    out = tmp_path / "kc.txt"
    assert run(["encode", sim_log, "--time-mode", "kcluster",
                "--clusters", clusters, "-o", out]) == 0
    assert "|k" in out.read_text()


def test_train_ppm_dump(sim_log, tmp_path):
    out = tmp_path / "trie.txt"
    assert run(["train-ppm", sim_log, "--frontend", "speed", "-o", out]) == 0
    assert ":" in out.read_text()
    stats = Path(str(out) + ".stats.txt").read_text()
    assert "depth:" in stats


def test_train_lstm_checkpoint(sim_log, tmp_path):
    out = tmp_path / "model.npz"
    assert run(["train-lstm", sim_log, "-o", out, "--epochs", "3",
                "--hidden", "8", "--memory", "4", "--batch-size", "256"]) == 0
    from homeseq.lstm import RecurrentModel
    model = RecurrentModel.load(out)
    assert len(model.in_vocab) == 30
    history = Path(str(out) + ".history.csv").read_text()
    assert history.splitlines()[0] == "epoch,train_loss,val_loss"


def test_evaluate_and_rerun_check(sim_log, tmp_path):
    report = tmp_path / "report.csv"
    assert run(["evaluate", sim_log, "--method", "speed-ppm",
                "--jobs", "1", "-o", report]) == 0
    body = report.read_text()
    assert body.startswith("fold,accuracy,n_test")
    assert Path(str(report) + ".confusion.csv").exists()
    manifest = json.loads(Path(str(report) + ".manifest.json").read_text())
    assert str(report) + ".timings.txt" in manifest["volatile_outputs"]
    assert run(["rerun", str(report) + ".manifest.json",
                "--out-dir", tmp_path / "redo", "--check"]) == 0


def test_rerun_detects_divergence(sim_log, tmp_path, capsys):
    report = tmp_path / "r.csv"
    assert run(["evaluate", sim_log, "--method", "speed-ppm",
                "--jobs", "1", "-o", report]) == 0
    manifest_path = Path(str(report) + ".manifest.json")
    manifest = json.loads(manifest_path.read_text())
    manifest["outputs"][str(report)] = "0" * 64
    manifest_path.write_text(json.dumps(manifest))
    assert run(["rerun", manifest_path, "--out-dir", tmp_path / "redo2",
                "--check"]) == 2


def test_sweep_grid_rows(sim_log, tmp_path):
    curve = tmp_path / "curve.csv"
    assert run(["sweep", sim_log, "--method", "speed-ppm", "--jobs", "1",
                "--grid", "200,400,800", "-o", curve]) == 0
    lines = curve.read_text().splitlines()
    assert lines[0] == "n_tokens,mean_accuracy"
    assert len(lines) == 4


def test_config_file_overrides_flags(sim_log, tmp_path):
    config = tmp_path / "conf.ini"
    config.write_text("[homeseq]\nseed = 99\n")
    out = tmp_path / "log2.txt"
    assert run(["simulate", "--days", "1", "--seed", "7",
                "--config", config, "-o", out]) == 0
    manifest = json.loads(Path(str(out) + ".manifest.json").read_text())
    assert manifest["args"]["seed"] == 99


def test_transfer_cli_smoke(tmp_path):
    logs = []
    for apt in (1, 2, 3, 4, 5):
        log = tmp_path / f"apt{apt}.txt"
        assert run(["simulate", "--days", "8", "--seed", 50 + apt,
                    "--preset", apt, "-o", log]) == 0
        logs.append(log)
    out = tmp_path / "transfer.csv"
    assert run(["transfer", "--sources", ",".join(str(p) for p in logs[:4]),
                "--target", logs[4], "--budgets", "0", "--repetitions", "1",
                "--epochs", "3", "--hidden", "16", "--memory", "6",
                "--batch-size", "512", "-o", out]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("finetune_events")
    assert len(lines) == 2
    assert Path(str(out) + ".map.ini").exists()
