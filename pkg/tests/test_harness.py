import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from cganeb import harness
from cganeb.cgan import CganConfig
from cganeb.harness import (
    ExperimentSpec,
    builtin_grid,
    dump_spec,
    get_experiment,
    load_spec,
    run_experiment,
    subseed,
)
from cganeb.report import (
    REPLICATION_COLUMNS,
    SUMMARY_COLUMNS,
    TEST_COLUMNS,
    emit_histogram,
    emit_report,
)
from cganeb.simulate import FunctionalForm, SimConfig, simulate_dataset


def tiny_spec(**kw):
    base = dict(
        id="T1",
        alpha=0.5,
        beta0=0.5,
        n_sites=200,
        n_train_sets=2,
        n_test_sets_per_train=2,
        cgan_config=CganConfig(epochs=2),
        m_samples=20,
        master_seed=3,
    )
    base.update(kw)
    return ExperimentSpec(**base)


@pytest.fixture(scope="module")
def tiny_report():
    return run_experiment(tiny_spec())


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_grid_has_sixteen_experiments():
    grid = builtin_grid()
    assert [s.id for s in grid] == [f"E{k}" for k in range(1, 13)] + ["F5", "F6", "F7", "F8"]
    assert all(s.n_replications == 25 and s.m_samples == 500 for s in grid)


@pytest.mark.parametrize(
    "exp_id, expected",
    [
        ("E1", (0.5, 0.5, 2000, FunctionalForm.LOG_LINEAR)),
        ("E6", (0.5, 2.5, 1000, FunctionalForm.LOG_LINEAR)),
        ("E12", (1.5, 2.5, 500, FunctionalForm.LOG_LINEAR)),
        ("F7", (1.5, 0.5, 1000, FunctionalForm.LOG_NONLINEAR)),
    ],
)
def test_grid_entries(exp_id, expected):
    s = get_experiment(exp_id)
    assert (s.alpha, s.beta0, s.n_sites, s.functional_form) == expected


def test_f_experiments_clone_e5_to_e8():
    for k in range(5, 9):
        e, f = get_experiment(f"E{k}"), get_experiment(f"F{k}")
        assert replace(e, id=f.id, functional_form=FunctionalForm.LOG_NONLINEAR) == f


def test_unknown_experiment():
    with pytest.raises(KeyError):
        get_experiment("E13")


def test_subseeds_are_distinct_and_stable():
    seeds = {subseed(0, "E1", i, j, p) for i in range(5) for j in range(-1, 5) for p in ("a", "b")}
    assert len(seeds) == 60
    assert subseed(0, "E1", 0, 0, "test-data") == subseed(0, "E1", 0, 0, "test-data")
    assert subseed(0, "E1", 0, 0, "test-data") != subseed(1, "E1", 0, 0, "test-data")


def test_spec_json_round_trip(tmp_path):
    spec = tiny_spec(functional_form=FunctionalForm.LOG_NONLINEAR)
    dump_spec(spec, tmp_path / "spec.json")
    assert load_spec(tmp_path / "spec.json") == spec


def test_spec_toml_with_base(tmp_path):
    path = tmp_path / "spec.toml"
    path.write_text('base = "F7"\nid = "F7-small"\nn_sites = 300\nmaster_seed = 9\n\n[cgan_config]\nepochs = 10\n')
    spec = load_spec(path)
    assert spec.id == "F7-small" and spec.n_sites == 300 and spec.master_seed == 9
    assert spec.functional_form is FunctionalForm.LOG_NONLINEAR and spec.alpha == 1.5
    assert spec.cgan_config.epochs == 10 and spec.cgan_config.batch_size == 100


def test_spec_validation():
    with pytest.raises(ValueError):
        tiny_spec(n_train_sets=0)
    with pytest.raises(ValueError):
        tiny_spec(cutoffs=(0.0, 0.1))
    with pytest.raises(ValueError):
        tiny_spec(m_samples=1)


def test_row_count_and_ranges(tiny_report):
    assert len(tiny_report.rows) == 2 * 4 * 4
    assert not tiny_report.partial
    for r in tiny_report.rows:
        assert 0 <= r.fi <= 1 and 0 <= r.pmd <= 1 and r.mape >= 0


def test_single_replication_protocol():
    report = run_experiment(tiny_spec(n_train_sets=1, n_test_sets_per_train=1))
    assert len(report.rows) == 2 * 4
    assert report.tests == []
    assert all(np.isnan(s["ci_low"]) and s["n"] == 1 for s in report.summaries)


def test_results_independent_of_parallelism(tiny_report):
    other = run_experiment(tiny_spec(), parallel=2)
    assert other.rows == tiny_report.rows
    assert other.tests == tiny_report.tests


def test_replication_unaffected_by_other_train_sets(tiny_report):
    wider = run_experiment(tiny_spec(n_train_sets=3))
    shared = [r for r in wider.rows if r.replication_id[0] < 2]
    assert shared == tiny_report.rows


def test_failure_marks_report_partial(monkeypatch):
    real_train = harness.train

    def flaky(data, config):
        if data.config.seed == subseed(3, "T1", 1, -1, "train-data"):
            raise FloatingPointError("diverged")
        return real_train(data, config)

    monkeypatch.setattr(harness, "train", flaky)
    report = run_experiment(tiny_spec())
    assert report.partial
    assert len(report.replication_ids) == 2
    assert [f[:2] for f in report.failures] == [(1, 0), (1, 1)]


def test_emit_report_schemas(tmp_path, tiny_report):
    emit_report(tiny_report, tmp_path)
    reps = read_csv(tmp_path / "replications.csv")
    assert tuple(reps[0].keys()) == REPLICATION_COLUMNS and len(reps) == 32
    summary = read_csv(tmp_path / "summary.csv")
    assert tuple(summary[0].keys()) == SUMMARY_COLUMNS and len(summary) == 2 * 4 * 3
    tests = read_csv(tmp_path / "tests.csv")
    assert tuple(tests[0].keys()) == TEST_COLUMNS and len(tests) == 4 * 3
    assert {t["significant"] for t in tests} <= {"true", "false"}
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["T1"]["replications_completed"] == 4
    for metric in ("fi", "pmd", "mape"):
        assert (tmp_path / f"ci_plot_{metric}.svg").read_text().startswith("<?xml")


def test_significance_markers_match_tests_csv(tmp_path, tiny_report):
    emit_report(tiny_report, tmp_path)
    tests = read_csv(tmp_path / "tests.csv")
    for metric in ("fi", "pmd", "mape"):
        svg = (tmp_path / f"ci_plot_{metric}.svg").read_text()
        for t in tests:
            if t["metric"] == metric:
                marker = f'id="sig-T1-{metric}-{float(t["cutoff"])}"'
                assert (marker in svg) == (t["significant"] == "true")


def test_empty_report_gives_header_only_csvs(tmp_path):
    report = harness.ExperimentReport(tiny_spec())
    emit_report(report, tmp_path)
    for name, cols in (("replications.csv", REPLICATION_COLUMNS), ("summary.csv", SUMMARY_COLUMNS), ("tests.csv", TEST_COLUMNS)):
        assert (tmp_path / name).read_text() == ",".join(cols) + "\n"


def test_report_files_are_byte_identical(tmp_path, tiny_report):
    emit_report(tiny_report, tmp_path / "a")
    emit_report(run_experiment(tiny_spec()), tmp_path / "b")
    for name in ("replications.csv", "summary.csv", "tests.csv", "ci_plot_fi.svg", "ci_plot_pmd.svg", "ci_plot_mape.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_histogram_conserves_counts(tmp_path):
    data = simulate_dataset(SimConfig(0.5, 0.5, n_sites=2000, seed=1))
    counts = emit_histogram(data, tmp_path / "h.svg")
    assert counts.sum() == 2000 and counts.size == data.y.max() + 1
    assert counts[:4].sum() > 0.8 * 2000
    assert (tmp_path / "h.svg").exists()


def test_histogram_all_zero(tmp_path):
    data = simulate_dataset(SimConfig(0.5, -30.0, n_sites=50, seed=1))
    counts = emit_histogram(data, tmp_path / "h.svg")
    assert counts.tolist() == [50]


def test_unwritable_path_raises(tmp_path):
    data = simulate_dataset(SimConfig(0.5, 0.5, n_sites=10, seed=1))
    with pytest.raises(OSError):
        emit_histogram(data, tmp_path / "missing" / "h.svg")
