import json

import pytest

from ecgsynth.cli import build_parser, main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--classes", "N:60,L:60", "--seed", "1", "--out", str(root / "beats.csv")]) == 0
    assert main(["ingest", "--input", str(root / "beats.csv"), "--out", str(root / "cache")]) == 0
    assert main(["ingest", "--input", str(root / "beats.csv"), "--class", "N", "--out", str(root / "n")]) == 0
    for run in ("run_a", "run_b"):
        argv = ["train", "--data", str(root / "n"), "--epochs", "3", "--snapshots", "4", "--seed", "2",
                "--checkpoint-every", "2", "--out", str(root / run)]  # fmt: skip
        assert main(argv) == 0
    return root


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["train", "--help"])
    text = capsys.readouterr().out
    for flag in ("--epochs", "--batch-size", "--lr", "--latent", "--clip", "--n-critic"):
        assert flag in text
    assert "(default: 30)" in text and "(default: 9)" in text and "(default: 0.0002)" in text


def test_ingest_cache(workspace):
    manifest = (workspace / "cache" / "manifest.txt").read_text()
    assert "256" in manifest
    assert (workspace / "n" / "beats.npz").is_file()


def test_train_outputs(workspace):
    run = workspace / "run_a"
    for name in ("config.json", "loss.csv", "initial.ckpt", "final.ckpt", "checkpoints/epoch_002.ckpt"):
        assert (run / name).is_file(), name
    assert sorted(p.name for p in (run / "snapshots").iterdir()) == [f"epoch_00{e}.csv" for e in (1, 2, 3)]
    loss = (run / "loss.csv").read_text().splitlines()
    assert loss[0].startswith("# seed=2 config_hash=") and len(loss) == 5
    conf = json.loads((run / "config.json").read_text())
    assert conf["config"]["epochs"] == 3 and len(conf["config_hash"]) == 16


def test_reruns_are_byte_identical(workspace):
    a, b = workspace / "run_a", workspace / "run_b"
    for name in ("initial.ckpt", "final.ckpt", "checkpoints/epoch_002.ckpt", "loss.csv", "snapshots/epoch_003.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_run_directories_are_append_only(workspace, capsys):
    argv = ["train", "--data", str(workspace / "n"), "--epochs", "1", "--out", str(workspace / "run_a")]
    assert main(argv) == 2
    assert "error[RunDirectoryExists]" in capsys.readouterr().err


def test_default_run_root(workspace, monkeypatch):
    monkeypatch.setenv("ECGSYNTH_RUN_ROOT", str(workspace / "runs"))
    assert main(["train", "--data", str(workspace / "n"), "--epochs", "1", "--seed", "7"]) == 0
    assert (workspace / "runs" / "classic_seed7" / "final.ckpt").is_file()


def test_generate_and_evaluate(workspace):
    gen = workspace / "gen.csv"
    assert main(["generate", "--ckpt", str(workspace / "run_a" / "final.ckpt"), "--n", "20", "--out", str(gen)]) == 0
    outs = []
    for rep in ("rep1", "rep2"):
        for method in ("1", "2", "3", "4"):
            argv = ["evaluate", "--real", str(workspace / "n"), "--gen", str(gen), "--method", method,
                    "--metric", "euclid", "--sample", "10", "--out", str(workspace / rep)]  # fmt: skip
            assert main(argv) == 0
        outs.append(workspace / rep)
    for name in ("method1_euclid.json", "method2_euclid.json", "method3_euclid.json", "method4_euclid.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    m4 = json.loads((outs[0] / "method4_euclid.json").read_text())
    assert 0 < m4["score"] <= 100 and m4["n_gen"] == 20
    assert (outs[0] / "method3_euclid_best.csv").is_file()


def test_evaluate_from_checkpoint_and_fixed_threshold(workspace):
    argv = ["evaluate", "--real", str(workspace / "n"), "--gen", str(workspace / "run_a" / "final.ckpt"),
            "--n-gen", "15", "--threshold", "0.0", "--out", str(workspace / "fixed")]  # fmt: skip
    assert main(argv) == 0
    rep = json.loads((workspace / "fixed" / "method4_dtw.json").read_text())
    assert rep["threshold_value"] == 0.0 and rep["n_gen"] == 15


def test_curves_and_plots(workspace):
    argv = ["evaluate", "--real", str(workspace / "n"), "--curves", str(workspace / "run_a"),
            "--template", "sab", "--out", str(workspace / "curves")]  # fmt: skip
    assert main(argv) == 0
    text = (workspace / "curves" / "curves.csv").read_text().splitlines()
    assert text[0].startswith("# seed=2") and len([r for r in text if r[0].isdigit()]) == 3
    assert main(["plot", "curve", "--input", str(workspace / "curves" / "curves.csv"), "--out", str(workspace / "fig")]) == 0
    assert (workspace / "fig" / "curves.svg").is_file()
    snap = workspace / "run_a" / "snapshots" / "epoch_001.csv"
    assert main(["plot", "beat", "--input", str(snap), "--index", "0", "--out", str(workspace / "fig")]) == 0
    assert (workspace / "fig" / "beat_0000.svg").is_file()
    argv = ["plot", "best", "--real", str(workspace / "n"), "--gen", str(snap), "--out", str(workspace / "fig")]
    assert main(argv) == 0
    assert {p.name for p in (workspace / "fig").glob("best_*.svg")} == {"best_dtw.svg", "best_frechet.svg", "best_euclid.svg"}


def test_experiment(workspace):
    argv = ["experiment", "--data", str(workspace / "cache"), "--gen-ckpt", str(workspace / "run_a" / "final.ckpt"),
            "--balanced-count", "30", "--minority-count", "5", "--test-per-class", "20", "--epochs", "2",
            "--out", str(workspace / "exp")]  # fmt: skip
    assert main(argv) == 0
    rep = json.loads((workspace / "exp" / "experiment.json").read_text())
    assert rep["generated_count"] == 25
    assert rep["train_counts"]["augmented"] == {"L": 30, "N": 30}
    assert "(ii) imbalanced real" in (workspace / "exp" / "experiment.txt").read_text()


def test_error_reporting(workspace, capsys):
    assert main(["evaluate", "--real", str(workspace / "missing.csv"), "--gen", "x.csv"]) == 2
    assert "error[FileNotFound]" in capsys.readouterr().err
    bad = workspace / "bad.ckpt"
    bad.write_bytes(b"garbage bytes that are not a checkpoint")
    assert main(["generate", "--ckpt", str(bad), "--out", str(workspace / "g.csv")]) == 2
    assert "error[CorruptCheckpoint]" in capsys.readouterr().err
    assert main(["synth", "--classes", "X:3", "--out", str(workspace / "x.csv")]) == 2
    assert "error[BadConfig]" in capsys.readouterr().err
