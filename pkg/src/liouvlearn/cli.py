"""Command line front end: ``liouvlearn <command> task.json``.

Commands write into ``--out`` (default: the task file's directory):

  settings   settings.json
  simulate   model.json plus dataset.ndjson (or dataset_exact.ndjson)
  learn      results.json, report.json, y_traces.csv, lambda_bars.csv
  rank-scan  rank_scan.csv, rank_fit.json
  study      error_vs_tf.csv, error_vs_n.csv (raw and summary tables)

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import learner, rank_analysis
from .exceptions import (DegenerateData, InvalidProbabilities, NoConvergence, NonFiniteState,
                         NonPositiveValue)
from .liouvillian import LiouvillianModel
from .measurement import SettingsTable, read_dataset
from .workflow import (TaskConfig, TaskError, ensure_dir, learn_dataset, make_dataset,
                       make_settings, study_errors, summarize, write_csv, y_traces)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
NUMERICAL = (NonFiniteState, NoConvergence, DegenerateData, NonPositiveValue,
             InvalidProbabilities, np.linalg.LinAlgError, ArithmeticError)

SETTINGS_FILE = "settings.json"
MODEL_FILE = "model.json"


class DataFileError(OSError):
    """An input artifact is missing or unreadable."""


def _dataset_name(task: TaskConfig) -> str:
    return "dataset_exact.ndjson" if task.mode == "exact_expectation" else "dataset.ndjson"


def _dump(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def cmd_settings(task: TaskConfig, out: str, threads: int = 1) -> str:
    settings = make_settings(task)
    path = os.path.join(out, SETTINGS_FILE)
    _dump(path, settings.to_dict())
    return path


def _load_settings(out: str) -> SettingsTable:
    path = os.path.join(out, SETTINGS_FILE)
    try:
        with open(path) as fh:
            return SettingsTable.from_dict(json.load(fh))
    except (OSError, ValueError, KeyError) as exc:
        raise DataFileError(f"cannot read settings {path}: {exc}") from exc


def cmd_simulate(task: TaskConfig, out: str, threads: int = 1) -> str:
    settings = _load_settings(out)
    if settings.n_qubits != task.n_qubits or settings.n_settings != task.R:
        raise TaskError("settings file does not match the task (n_qubits, R)")
    model = task.build_model()
    model.to_json(os.path.join(out, MODEL_FILE))
    data = make_dataset(task, model, settings)
    path = os.path.join(out, _dataset_name(task))
    data.write(path)
    return path


def cmd_learn(task: TaskConfig, out: str, threads: int = 1) -> str:
    path = os.path.join(out, _dataset_name(task))
    try:
        data = read_dataset(path)
    except (OSError, ValueError, KeyError) as exc:
        raise DataFileError(f"cannot read dataset {path}: {exc}") from exc
    truth_path = os.path.join(out, MODEL_FILE)
    truth = LiouvillianModel.from_json(truth_path) if os.path.exists(truth_path) else None
    report = learn_dataset(data, task, truth=truth, threads=threads)
    results = report.results_dict()
    _dump(os.path.join(out, "results.json"), results)
    _dump(os.path.join(out, "report.json"), {
        "diagnostics": report.diagnostics,
        "mean_l1_error": float(np.mean(list(report.errors.values()))) if report.errors else None,
        "min_dissipator_eigenvalue": report.learned.min_dissipator_eigenvalue,
    })
    exp = data.expectations()
    pairs = learner.all_pairs(exp.settings.n_qubits)
    write_csv(os.path.join(out, "y_traces.csv"), ["seed", "i", "j", "ell", "t", "y"],
              y_traces(exp, pairs, task.master_seed))
    se = report.lambda_se if report.lambda_se is not None else np.full(len(report.lambdas), np.nan)
    write_csv(os.path.join(out, "lambda_bars.csv"), ["seed", "lambda", "value", "se"],
              [(task.master_seed, k + 1, float(v), float(s))
               for k, (v, s) in enumerate(zip(report.lambdas, se))])
    return os.path.join(out, "results.json")


def cmd_rank_scan(task: TaskConfig, out: str, threads: int = 1) -> str:
    cfg = task.rank_scan
    r_grid = cfg.get("r_grid", list(range(20, 221, 10)))
    n_grid = cfg.get("n_grid", [2])
    n_samples = int(cfg.get("n_samples", 1000))
    rows = []
    fit_doc = {}
    single = rank_analysis.single_pair_rank_probability(r_grid, n_samples, task.master_seed)
    rows += [(int(r), 2, float(p), n_samples) for r, p in zip(single.r_values, single.probabilities)]
    fit_doc["threshold"] = single.threshold
    try:
        fit = rank_analysis.fit_gumbel(single)
        fit_doc.update({"r0": fit.r0, "mu": fit.mu, "residual": fit.residual,
                        "r0_se": fit.r0_se, "mu_se": fit.mu_se})
    except (DegenerateData, NoConvergence) as exc:
        fit_doc["fit_error"] = str(exc)
    larger = [int(n) for n in n_grid if int(n) > 2]
    if larger:
        multi = rank_analysis.multi_pair_rank_probability(r_grid, larger, n_samples,
                                                          task.master_seed)
        for b, n in enumerate(multi.n_values):
            rows += [(int(r), int(n), float(p), n_samples)
                     for r, p in zip(multi.r_values, multi.probabilities[:, b])]
        contour = dict(multi.contour)
        contour.update(rank_analysis.half_contour(single.r_values, [2],
                                                  single.probabilities[:, None]))
        fit_doc["contour"] = {str(k): v for k, v in sorted(contour.items())}
        if len(contour) >= 2:
            ns = np.array(sorted(contour))
            slope, intercept = np.polyfit(np.log(ns), [contour[n] for n in ns], 1)
            fit_doc.update({"r0_tilde": float(intercept), "mu_tilde": float(slope)})
    write_csv(os.path.join(out, "rank_scan.csv"), ["R", "N", "p_hat", "n_samples"], rows)
    _dump(os.path.join(out, "rank_fit.json"), fit_doc)
    return os.path.join(out, "rank_fit.json")


def cmd_study(task: TaskConfig, out: str, threads: int = 1) -> str:
    if task.repeats < 2:
        raise TaskError("a study needs repeats >= 2")
    cfg = task.study
    degrees = cfg.get("degrees", [1, 2, 3, 4])
    header_raw = ["variable", "value", "degree", "repeat", "error"]
    header_sum = ["variable", "value", "degree", "mean", "std", "n"]
    written = []
    tf_values = cfg.get("t_f_values")
    if tf_values:
        rows = study_errors(task, "t_f", tf_values, degrees)
        write_csv(os.path.join(out, "error_vs_tf_raw.csv"), header_raw, rows)
        write_csv(os.path.join(out, "error_vs_tf.csv"), header_sum, summarize(rows))
        written.append("error_vs_tf.csv")
    n_values = cfg.get("n_values")
    if n_values:
        rows = study_errors(task, "N", n_values, degrees)
        write_csv(os.path.join(out, "error_vs_n_raw.csv"), header_raw, rows)
        write_csv(os.path.join(out, "error_vs_n.csv"), header_sum, summarize(rows))
        written.append("error_vs_n.csv")
    if not written:
        raise TaskError("study block needs t_f_values and/or n_values")
    return os.path.join(out, written[-1])


COMMANDS = {
    "settings": cmd_settings,
    "simulate": cmd_simulate,
    "learn": cmd_learn,
    "rank-scan": cmd_rank_scan,
    "study": cmd_study,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liouvlearn",
                                description="Pairwise Liouvillian learning from randomized measurements.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("task", help="task JSON file")
    p.add_argument("--out", default=None, help="output directory (default: next to the task)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--mode", choices=("sampled", "exact"), default=None,
                   help="override the task's simulation mode")
    return p


def load_task(path, mode=None) -> TaskConfig:
    task = TaskConfig.load(path)
    env = os.environ.get("LIOUVLEARN_SEED")
    if env is not None:
        try:
            task.master_seed = int(env)
        except ValueError as exc:
            raise TaskError(f"LIOUVLEARN_SEED must be an integer, got {env!r}") from exc
    if mode is not None:
        task.mode = "exact_expectation" if mode == "exact" else mode
    return task


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise TaskError("--threads must be >= 1")
        try:
            task = load_task(args.task, args.mode)
        except FileNotFoundError as exc:
            raise DataFileError(str(exc)) from exc
        out = ensure_dir(args.out or os.path.dirname(os.path.abspath(args.task)))
        t0 = time.perf_counter()
        path = COMMANDS[args.command](task, out, args.threads)
        print(f"{args.command}: wrote {path} in {time.perf_counter() - t0:.1f}s")
        return EXIT_OK
    except NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
