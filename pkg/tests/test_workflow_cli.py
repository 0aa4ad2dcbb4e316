import csv
import json
import tracemalloc

import numpy as np
import pytest

from liouvlearn import cli, learner
from liouvlearn import measurement as ms
from liouvlearn.liouvillian import build_xy_model, restrict_to_pair
from liouvlearn.workflow import (TaskConfig, TaskError, derive_seed, lambda_groups, learn_dataset,
                                 make_dataset, make_settings, n_coefficients, study_errors,
                                 summarize)


def _task(tmp_path, name="task.json", **overrides):
    doc = {"n_qubits": 3, "R": 60, "N_M": 10, "N_T": 12, "t_f": 0.06, "substeps": 4,
           "master_seed": 1, "cv": {"candidate_degrees": [1, 2]}}
    doc.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


# -- task validation ---------------------------------------------------------

@pytest.mark.parametrize("bad", [
    {"R": 0}, {"N_T": -1}, {"n_qubits": 1.5}, {"dt": 0.01}, {"t_f": None},
    {"mode": "fast"}, {"colour": "red"}, {"rank_scan": {"grid": [1]}},
    {"study": {"tf": [0.1]}}, {"cv": {"k_folds": 1}}, {"cv": {"folds": 3}}, {"t_f": -0.1},
])
def test_task_validation(bad):
    doc = {"n_qubits": 2, "R": 10, "N_M": 1, "N_T": 5, "t_f": 0.1}
    doc.update(bad)
    doc = {k: v for k, v in doc.items() if v is not None}
    with pytest.raises(TaskError):
        TaskConfig.from_dict(doc)


def test_task_defaults_and_grid():
    task = TaskConfig.from_dict({"n_qubits": 2, "R": 10, "N_M": 1, "N_T": 40, "t_f": 0.1,
                                 "mode": "exact"})
    assert task.mode == "exact_expectation"
    assert task.grid().dt == pytest.approx(0.0025)
    assert task.grid(0.4).t_final == pytest.approx(0.4)
    assert TaskConfig(2, 10, 1, 5, dt=0.02).grid().t_final == pytest.approx(0.1)
    with pytest.raises(TaskError):
        TaskConfig(2, 10, 1, 5, dt=0.02, model={"builder": "ising"}).build_model()
    with pytest.raises(TaskError):
        TaskConfig(2, 10, 1, 5, dt=0.02, model={"builder": "xy_powerlaw",
                                                   "params": {"K": 1}}).build_model()


def test_explicit_model_builder():
    model = build_xy_model(3, gamma=0.2)
    task = TaskConfig(3, 10, 1, 5, dt=0.02, model={"builder": "explicit", "model": model.to_dict()})
    assert np.array_equal(task.build_model().hamiltonian.pair, model.hamiltonian.pair)


def test_derive_seed_stable():
    assert derive_seed(1, 0) == derive_seed(1, 0)
    assert len({derive_seed(1, 0), derive_seed(1, 1), derive_seed(2, 0)}) == 3


def test_n_coefficients():
    assert n_coefficients(10) == 1335
    assert n_coefficients(2) == 51


def test_lambda_groups_xy():
    lam = lambda_groups(build_xy_model(4, J=4, B=1, alpha=1.5, gamma=0.5))
    assert lam.shape == (39,)
    nz = {k + 1: v for k, v in enumerate(lam) if v != 0}
    assert nz == {3: 1.0, 12: 0.5, 13: 2.0, 17: 2.0}


def test_settings_match_paper_budget():
    task = TaskConfig(10, 800, 200, 40, t_f=0.1, master_seed=1)
    s = make_settings(task)
    assert s.prep.shape == (800, 10) and s.meas.shape == (800, 10)
    # total records 40 x 800 x 200 = 6.4 million
    assert task.N_T * task.R * task.N_M == 6_400_000


# -- pipeline ---------------------------------------------------------------

def test_learn_dataset_report():
    task = TaskConfig(3, 80, 20, 12, t_f=0.06, substeps=4, master_seed=2, bootstrap=3,
                      cv={"candidate_degrees": [1, 2]})
    model = task.build_model()
    data = make_dataset(task, model, make_settings(task))
    report = learn_dataset(data, task, truth=model, threads=2)
    assert set(report.errors) == {(0, 1), (0, 2), (1, 2)}
    assert report.lambda_se.shape == (39,)
    doc = report.results_dict()
    assert doc["n_coefficients"] == n_coefficients(3)
    assert len(doc["pairs"]) == 3 and len(doc["pairs"][0]["bootstrap_se"]) == 51
    diag = report.diagnostics
    assert diag["total_shots"] == 20 * 80 * 12
    times = task.grid().times
    assert diag["total_evolution_time"] == pytest.approx(20 * 80 * times.sum())
    json.dumps(doc)


def test_threads_do_not_change_results():
    task = TaskConfig(3, 60, 10, 12, t_f=0.06, substeps=4, cv={"candidate_degrees": [1, 2]})
    data = make_dataset(task, task.build_model(), make_settings(task))
    a = learn_dataset(data, task)
    b = learn_dataset(data, task, threads=3)
    for pair in a.learned.per_pair:
        assert np.array_equal(a.learned.per_pair[pair].x_hat, b.learned.per_pair[pair].x_hat)


def test_evolution_time_accounting_paper_budget():
    # 200 shots x 800 settings summed over 40 times of a t_f = 0.1 grid
    times = TaskConfig(10, 800, 200, 40, t_f=0.1).grid().times
    assert 200 * 800 * times.sum() == pytest.approx(328_000)


def test_study_errors_rows():
    task = TaskConfig(2, 60, 20, 12, t_f=0.06, substeps=4, repeats=2)
    rows = study_errors(task, "t_f", [0.03, 0.06], [1, 2])
    assert len(rows) == 2 * 2 * 2
    assert all(r[4] > 0 for r in rows)
    summary = summarize(rows)
    assert len(summary) == 4 and all(s[5] == 2 for s in summary)
    again = study_errors(task, "t_f", [0.03, 0.06], [1, 2])
    assert rows == again
    with pytest.raises(ValueError):
        study_errors(task, "R", [10], [1])


def test_per_pair_memory_independent_of_n():
    peaks = {}
    for n in (4, 8):
        task = TaskConfig(n, 200, 5, 12, t_f=0.06, substeps=1, mode="exact")
        settings = ms.draw_settings(n, 200, 1)
        # shot-free stand-in: random signs give the same array shapes as a dataset
        rng = np.random.default_rng(0)
        z1 = rng.uniform(-1, 1, (12, 200, n))
        z2 = rng.uniform(-1, 1, (12, 200, n, n))
        exp = ms.SettingExpectations(settings, task.grid(), z1, z2)
        cv = learner.CrossValidationConfig(candidate_degrees=(1, 2))
        learner.learn_pair(exp, (0, 1), cv)  # warm caches
        tracemalloc.start()
        learner.learn_pair(exp, (0, 1), cv)
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        peaks[n] = peak
    assert peaks[8] < 2 * peaks[4]


# -- command line -------------------------------------------------------------

def test_cli_end_to_end(tmp_path, capsys):
    task = _task(tmp_path, bootstrap=2)
    out = tmp_path / "run"
    assert cli.main(["settings", str(task), "--out", str(out)]) == 0
    first = (out / "settings.json").read_bytes()
    assert cli.main(["settings", str(task), "--out", str(out)]) == 0
    assert (out / "settings.json").read_bytes() == first
    assert cli.main(["simulate", str(task), "--out", str(out)]) == 0
    lines = (out / "dataset.ndjson").read_text().splitlines()
    assert len(lines) == 1 + 12 * 60
    assert len(json.loads(lines[1])["shots"]) == 10
    assert cli.main(["learn", str(task), "--out", str(out), "--threads", "2"]) == 0
    results = json.loads((out / "results.json").read_text())
    assert all("l1_error" in p for p in results["pairs"])
    traces = _rows(out / "y_traces.csv")
    assert traces[0] == ["seed", "i", "j", "ell", "t", "y"] and len(traces) == 1 + 3 * 51 * 12
    bars = _rows(out / "lambda_bars.csv")
    assert len(bars) == 40 and bars[1][0] == "1"
    report = json.loads((out / "report.json").read_text())
    assert report["mean_l1_error"] > 0


def test_cli_reproducible_results(tmp_path):
    task = _task(tmp_path)
    docs = []
    for name in ("a", "b"):
        out = tmp_path / name
        for cmd in ("settings", "simulate", "learn"):
            assert cli.main([cmd, str(task), "--out", str(out)]) == 0
        docs.append(((out / "dataset.ndjson").read_bytes(), (out / "results.json").read_text()))
    assert docs[0][0] == docs[1][0]
    strip = [json.loads(d[1]) for d in docs]
    for d in strip:
        d["diagnostics"].pop("learn_seconds")
        d["diagnostics"].pop("peak_rss_mb")
    assert strip[0] == strip[1]


def test_cli_seed_env(tmp_path, monkeypatch):
    task = _task(tmp_path)
    cli.main(["settings", str(task), "--out", str(tmp_path / "a")])
    monkeypatch.setenv("LIOUVLEARN_SEED", "99")
    cli.main(["settings", str(task), "--out", str(tmp_path / "b")])
    a = json.loads((tmp_path / "a" / "settings.json").read_text())
    b = json.loads((tmp_path / "b" / "settings.json").read_text())
    assert a["prep"] != b["prep"]
    monkeypatch.setenv("LIOUVLEARN_SEED", "x")
    assert cli.main(["settings", str(task), "--out", str(tmp_path / "c")]) == 2


def test_cli_exact_mode(tmp_path):
    task = _task(tmp_path, n_qubits=2)
    out = tmp_path / "run"
    assert cli.main(["settings", str(task), "--out", str(out)]) == 0
    assert cli.main(["simulate", str(task), "--out", str(out), "--mode", "exact"]) == 0
    assert (out / "dataset_exact.ndjson").exists() and not (out / "dataset.ndjson").exists()
    assert cli.main(["learn", str(task), "--out", str(out), "--mode", "exact"]) == 0


def test_cli_zero_model_constant_series(tmp_path):
    zero = {"builder": "xy_powerlaw", "params": {"J": 0, "B": 0, "gamma": 0}}
    task = _task(tmp_path, model=zero, n_qubits=2, mode="exact")
    out = tmp_path / "run"
    cli.main(["settings", str(task), "--out", str(out)])
    assert cli.main(["simulate", str(task), "--out", str(out)]) == 0
    probs = ms.read_dataset(out / "dataset_exact.ndjson").probs
    assert np.allclose(probs, probs[:1])


def test_cli_exit_codes(tmp_path):
    assert cli.main(["settings", str(_task(tmp_path, "bad.json", R=0))]) == 2
    assert cli.main(["settings", str(tmp_path / "missing.json")]) == 4
    task = _task(tmp_path)
    assert cli.main(["simulate", str(task), "--out", str(tmp_path / "empty")]) == 4
    assert cli.main(["learn", str(task), "--out", str(tmp_path / "empty")]) == 4
    assert cli.main(["settings", str(task), "--threads", "0"]) == 2
    (tmp_path / "junk.json").write_text("{not json")
    assert cli.main(["settings", str(tmp_path / "junk.json")]) == 2
    # degenerate rank scan: no interior points is reported inside the fit file, not as a crash
    scan = _task(tmp_path, "scan.json", rank_scan={"r_grid": [1, 2], "n_samples": 3})
    assert cli.main(["rank-scan", str(scan), "--out", str(tmp_path / "scan")]) == 0
    assert "fit_error" in json.loads((tmp_path / "scan" / "rank_fit.json").read_text())


def test_cli_rank_scan(tmp_path):
    task = _task(tmp_path, rank_scan={"r_grid": [40, 60, 80, 100, 120], "n_grid": [2, 3, 4],
                                      "n_samples": 1})
    out = tmp_path / "scan"
    assert cli.main(["rank-scan", str(task), "--out", str(out)]) == 0
    rows = _rows(out / "rank_scan.csv")
    assert rows[0] == ["R", "N", "p_hat", "n_samples"] and len(rows) == 1 + 5 * 3
    assert {float(r[2]) for r in rows[1:]} <= {0.0, 1.0}


def test_cli_study(tmp_path):
    task = _task(tmp_path, n_qubits=2, repeats=2, study={"t_f_values": [0.03, 0.06],
                                                         "n_values": [2, 3], "degrees": [1]})
    out = tmp_path / "study"
    assert cli.main(["study", str(task), "--out", str(out)]) == 0
    tf = _rows(out / "error_vs_tf.csv")
    assert tf[0] == ["variable", "value", "degree", "mean", "std", "n"] and len(tf) == 3
    assert len(_rows(out / "error_vs_n_raw.csv")) == 1 + 2 * 2
    one = _task(tmp_path, "one.json", repeats=1, study={"t_f_values": [0.03]})
    assert cli.main(["study", str(one), "--out", str(out)]) == 2
    none = _task(tmp_path, "none.json", repeats=2)
    assert cli.main(["study", str(none), "--out", str(out)]) == 2


def test_truth_restriction_in_errors(tmp_path):
    task = TaskConfig(2, 400, 1, 12, t_f=0.03, mode="exact", cv={"candidate_degrees": [2]})
    model = task.build_model()
    report = learn_dataset(make_dataset(task, model, make_settings(task)), task, truth=model)
    sol = report.learned.per_pair[(0, 1)]
    assert report.errors[(0, 1)] == pytest.approx(
        learner.reconstruction_error(sol.x_hat, restrict_to_pair(model, 0, 1)))
