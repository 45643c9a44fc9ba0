import argparse
import csv

import pytest

from cganeb.cli import main, parse_replications


def test_parse_replications():
    assert parse_replications("3") == (3, 3)
    assert parse_replications("2x4") == (2, 4)
    for bad in ("0", "a", "1x2x3"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_replications(bad)


def test_grid_lists_all(capsys):
    assert main(["grid"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 17
    assert lines[-2].split("\t") == ["F7", "1.5", "0.5", "1000", "LogNonlinear"]


def test_simulate_writes_histogram(tmp_path, capsys):
    path = tmp_path / "e9.svg"
    assert main(["simulate", "--experiment", "E9", "--histogram", str(path)]) == 0
    assert path.exists()
    assert "500 sites" in capsys.readouterr().out


def test_run_with_overrides(tmp_path):
    out = tmp_path / "run"
    args = ["run", "--experiment", "E9", "--out", str(out), "--seed", "4", "--replications-override", "1x2",
            "--epochs", "1", "--m-samples", "10", "--mape-set", "true"]
    assert main(args) == 0
    with open(out / "replications.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 2 * 4
    assert {(r["train_idx"], r["test_idx"]) for r in rows} == {("0", "0"), ("0", "1")}


def test_run_from_config(tmp_path):
    cfg = tmp_path / "spec.json"
    cfg.write_text('{"base": "E12", "id": "mini", "n_sites": 100, "n_train_sets": 1, "n_test_sets_per_train": 2,'
                   ' "m_samples": 5, "cgan_config": {"epochs": 1}}')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "tests.csv").read_text().startswith("experiment_id,cutoff")


def test_unknown_experiment_exits():
    with pytest.raises(SystemExit):
        main(["run", "--experiment", "Z1"])
