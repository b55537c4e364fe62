"""Tests for the command-line interface."""

import json

import pytest

from chaosid.cli import main
from chaosid.datagen import load_dataset

# Small but non-trivial run: 12 simulations of experiment 1 resolve in
# seconds while exercising every pipeline stage the full grid uses.
_SMALL_CONFIG = {
    "n_sims": 12,
    "holdout_sims": 4,
    "n_keep": 1400,
    "n_discard": 50,
    "gp": {"refine_evals": 40},
    "mlp": {"epochs": 30},
}


def _write_config(tmp_path, **extra):
    cfg = dict(_SMALL_CONFIG, **extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_simulate_row_count_and_header(tmp_path):
    """simulate writes a header plus one row per retained step."""
    out = tmp_path / "traj.csv"
    code = main(
        ["simulate", "--K", "4", "--J", "4", "--steps", "40", "--out", str(out)]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "time,x1,x2,x3,x4"
    assert len(lines) == 41
    assert lines[1].startswith("0.0,")


def test_simulate_same_seed_byte_identical(tmp_path):
    """Repeating simulate with one seed reproduces the file exactly."""
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["simulate", "--steps", "30", "--seed", "5", "--out"]
    assert main(argv + [str(a)]) == 0
    assert main(argv + [str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_coupling_flag_changes_trajectory(tmp_path):
    """The --coupling flag feeds through to the integrated dynamics."""
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["simulate", "--steps", "30", "--seed", "5"]
    assert main(argv + ["--coupling", "0.2", "--out", str(a)]) == 0
    assert main(argv + ["--coupling", "1.2", "--out", str(b)]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_gen_data_writes_loadable_dataset(tmp_path):
    """gen-data produces train/test CSVs plus a manifest that round-trips."""
    cfg = _write_config(tmp_path)
    out = tmp_path / "ds"
    code = main(
        ["gen-data", "--experiment", "1", "--seed", "3",
         "--out-dir", str(out), "--config", cfg]
    )
    assert code == 0
    assert (out / "train.csv").is_file()
    assert (out / "test.csv").is_file()
    assert (out / "manifest.json").is_file()
    ds = load_dataset(out)
    assert ds.train_features.shape == (40, 10)
    assert ds.test_features.shape == (20, 10)
    assert ds.manifest["master_seed"] == 3


def test_gen_data_same_seed_identical_files(tmp_path):
    """Two gen-data runs with one seed write byte-identical splits."""
    cfg = _write_config(tmp_path)
    dirs = (tmp_path / "d1", tmp_path / "d2")
    for d in dirs:
        argv = ["gen-data", "--experiment", "1", "--seed", "3",
                "--out-dir", str(d), "--config", cfg]
        assert main(argv) == 0
    for name in ("train.csv", "test.csv"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


def test_gen_data_rejects_out_of_range_experiment(tmp_path):
    """Experiment ids outside 1..8 are usage errors (exit code 2)."""
    with pytest.raises(SystemExit) as excinfo:
        main(["gen-data", "--experiment", "9", "--out-dir", str(tmp_path)])
    assert excinfo.value.code == 2


def test_out_dir_flag_beats_environment(tmp_path, monkeypatch):
    """--out-dir wins over CHAOSID_OUT, which wins over the default."""
    cfg = _write_config(tmp_path)
    env_dir = tmp_path / "from-env"
    flag_dir = tmp_path / "from-flag"
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("CHAOSID_OUT", str(env_dir))
    argv = ["gen-data", "--experiment", "1", "--seed", "3", "--config", cfg]
    assert main(argv) == 0
    assert (env_dir / "train.csv").is_file()
    assert main(argv + ["--out-dir", str(flag_dir)]) == 0
    assert (flag_dir / "train.csv").is_file()
    assert not (tmp_path / "chaosid-out").exists()


def test_run_single_model_outputs(tmp_path):
    """run --models gp writes metrics, pdf, growth, and uncertainty CSVs."""
    cfg = _write_config(tmp_path)
    out = tmp_path / "out"
    code = main(
        ["run", "--experiment", "1", "--seed", "3", "--models", "gp",
         "--out-dir", str(out), "--config", cfg]
    )
    assert code == 0
    exp = out / "exp1"
    lines = (exp / "metrics.csv").read_text().splitlines()
    assert lines[0] == "model,mse,mae,r2,bhattacharyya,pearson"
    assert len(lines) == 2
    assert lines[1].startswith("gp,")
    assert (exp / "pdf.csv").is_file()
    assert (exp / "error_growth.csv").is_file()
    assert (exp / "uncertainty.csv").is_file()
    manifest = json.loads((exp / "manifest.json").read_text())
    assert manifest["models"] == ["gp"]
    assert manifest["gp_hyperparameters"] is not None


def test_run_rerun_byte_identical_metrics(tmp_path):
    """Re-running an experiment with one seed reproduces metrics.csv exactly."""
    cfg = _write_config(tmp_path)
    out = tmp_path / "out"
    argv = ["run", "--experiment", "1", "--seed", "3", "--models", "lr",
            "--out-dir", str(out), "--config", cfg]
    assert main(argv) == 0
    first = (out / "exp1" / "metrics.csv").read_bytes()
    assert main(argv) == 0
    assert (out / "exp1" / "metrics.csv").read_bytes() == first


def test_run_rejects_unknown_model(tmp_path):
    """--models outside gp,mlp,lr is a usage error (exit code 2)."""
    with pytest.raises(SystemExit) as excinfo:
        main(["run", "--experiment", "1", "--models", "svm",
              "--out-dir", str(tmp_path)])
    assert excinfo.value.code == 2


def test_config_with_unknown_key_fails(tmp_path, capsys):
    """Unrecognized config keys are reported as runtime errors (exit 1)."""
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus": 1}))
    code = main(
        ["gen-data", "--experiment", "1", "--out-dir", str(tmp_path / "o"),
         "--config", str(bad)]
    )
    assert code == 1
    assert "bogus" in capsys.readouterr().err


def test_reproduce_all_writes_summary(tmp_path):
    """reproduce-all covers all 8 experiments and tabulates one summary."""
    # LATE-regime windows need the full n_keep=4000, so only shrink the
    # simulation count here.
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"n_sims": 12, "holdout_sims": 4, "n_jobs": 4}))
    cfg = str(cfg)
    out = tmp_path / "out"
    code = main(
        ["reproduce-all", "--seed", "3", "--models", "lr",
         "--out-dir", str(out), "--config", cfg]
    )
    assert code == 0
    lines = (out / "summary.csv").read_text().splitlines()
    assert lines[0] == "experiment,model,mse,mae,r2,bhattacharyya,pearson"
    assert len(lines) == 9
    assert [row.split(",")[0] for row in lines[1:]] == [
        str(i) for i in range(1, 9)
    ]
    for i in range(1, 9):
        assert (out / f"exp{i}" / "metrics.csv").is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["failures"] == []


def test_version_flag():
    """--version exits cleanly through argparse."""
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
