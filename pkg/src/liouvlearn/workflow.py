"""Task files and the draw / simulate / learn / report pipeline."""
from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import learner, pauli_core
from .learner import CrossValidationConfig, LearnedLiouvillian
from .liouvillian import LiouvillianModel, build_xy_model, restrict_to_pair
from .measurement import (SettingExpectations, SettingsTable, draw_settings,
                          series_from_expectations, simulate_dataset, simulate_exact)
from .simulator import TimeGrid

MODES = ("sampled", "exact_expectation")
N_LAMBDA = 39


class TaskError(ValueError):
    """Invalid task file."""


@dataclass
class TaskConfig:
    n_qubits: int
    R: int
    N_M: int
    N_T: int
    model: dict = field(default_factory=lambda: {"builder": "xy_powerlaw"})
    dt: Optional[float] = None
    t_f: Optional[float] = None
    substeps: int = 32
    master_seed: int = 0
    cv: dict = field(default_factory=dict)
    mode: str = "sampled"
    repeats: int = 1
    bootstrap: int = 0
    rank_scan: dict = field(default_factory=dict)
    study: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("n_qubits", "R", "N_M", "N_T", "substeps", "repeats"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise TaskError(f"{name} must be a positive integer")
        if self.bootstrap < 0:
            raise TaskError("bootstrap must be >= 0")
        if (self.dt is None) == (self.t_f is None):
            raise TaskError("give exactly one of dt and t_f")
        if (self.dt if self.dt is not None else self.t_f) <= 0:
            raise TaskError("time step must be positive")
        if self.mode == "exact":
            self.mode = "exact_expectation"
        if self.mode not in MODES:
            raise TaskError(f"mode must be one of {MODES}")
        unknown = set(self.rank_scan) - {"r_grid", "n_grid", "n_samples"}
        unknown |= set(self.study) - {"t_f_values", "n_values", "degrees"}
        if unknown:
            raise TaskError(f"unknown keys {sorted(unknown)}")
        try:
            self.cv_config()
        except (TypeError, ValueError) as exc:
            raise TaskError(f"invalid cv block: {exc}") from exc

    @classmethod
    def from_dict(cls, doc: dict) -> "TaskConfig":
        allowed = set(cls.__dataclass_fields__)
        unknown = set(doc) - allowed
        if unknown:
            raise TaskError(f"unknown task keys {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise TaskError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "TaskConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise TaskError(f"task file is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise TaskError("task file must hold a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def grid(self, t_f: Optional[float] = None) -> TimeGrid:
        if t_f is not None:
            return TimeGrid.from_t_final(t_f, self.N_T)
        if self.dt is not None:
            return TimeGrid(self.dt, self.N_T)
        return TimeGrid.from_t_final(self.t_f, self.N_T)

    def cv_config(self) -> CrossValidationConfig:
        return CrossValidationConfig(**self.cv)

    def build_model(self, n_qubits: Optional[int] = None) -> LiouvillianModel:
        n = self.n_qubits if n_qubits is None else n_qubits
        spec = dict(self.model)
        builder = spec.pop("builder", None)
        if builder == "xy_powerlaw":
            params = spec.pop("params", {})
            if spec or set(params) - {"J", "B", "alpha", "gamma"}:
                raise TaskError("xy_powerlaw takes params J, B, alpha, gamma")
            return build_xy_model(n, **params)
        if builder == "explicit":
            model = LiouvillianModel.from_dict(spec["model"])
            if model.n_qubits != n:
                raise TaskError("explicit model size differs from n_qubits")
            return model
        raise TaskError(f"unknown model builder {builder!r}")


def derive_seed(master: int, *keys: int) -> int:
    """Stable 32-bit child seed for a tuple of integer keys."""
    return int(np.random.SeedSequence([int(master), *map(int, keys)]).generate_state(1)[0])


def n_coefficients(n_qubits: int) -> int:
    """Real parameters of a two-body Hamiltonian plus a full single-Pauli dissipator."""
    n = n_qubits
    return 3 * n + 9 * n * (n - 1) // 2 + 9 * n * n


# ---------------------------------------------------------------------------
# Pipeline stages

def make_settings(task: TaskConfig, seed: Optional[int] = None, n_qubits=None) -> SettingsTable:
    n = task.n_qubits if n_qubits is None else n_qubits
    return draw_settings(n, task.R, derive_seed(task.master_seed, 0) if seed is None else seed)


def make_dataset(task: TaskConfig, model: LiouvillianModel, settings: SettingsTable,
                 grid: Optional[TimeGrid] = None, seed: Optional[int] = None):
    grid = task.grid() if grid is None else grid
    if task.mode == "exact_expectation":
        return simulate_exact(model, settings, grid, task.substeps)
    seed = derive_seed(task.master_seed, 1) if seed is None else seed
    return simulate_dataset(model, settings, grid, task.N_M, seed, task.substeps)


def learn_pairs(exp: SettingExpectations, cv: CrossValidationConfig, pairs=None,
                threads: int = 1, setting_weights=None) -> list:
    pairs = learner.all_pairs(exp.settings.n_qubits) if pairs is None else pairs
    cv.check(exp.grid.n_points)

    def one(pair):
        return learner.learn_pair(exp, pair, cv, setting_weights)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, pairs))
    return [one(p) for p in pairs]


def lambda_groups(model: LiouvillianModel) -> np.ndarray:
    """The 39 averaged coefficient groups used for bar plots.

    1-3 mean field h_(i,a); 4-12 mean |d_(ia,ib)| with (a, b) a-major;
    13-21 nearest-neighbour h_(ia,i+1 b); 22-30 and 31-39 nearest-neighbour
    |Re d_(ia,i+1 b)| and |Im d_(ia,i+1 b)|.  Index 0 of the result is group 1.
    """
    n = model.n_qubits
    h = model.hamiltonian
    d = model.dissipator.entries
    out = np.zeros(N_LAMBDA)
    out[0:3] = h.single.mean(axis=0)
    local = np.array([d[3 * i:3 * i + 3, 3 * i:3 * i + 3] for i in range(n)])
    out[3:12] = np.abs(local).mean(axis=0).reshape(9)
    if n > 1:
        out[12:21] = np.mean([h.pair[i, i + 1] for i in range(n - 1)], axis=0).reshape(9)
        nn = np.array([d[3 * i:3 * i + 3, 3 * i + 3:3 * i + 6] for i in range(n - 1)])
        out[21:30] = np.abs(nn.real).mean(axis=0).reshape(9)
        out[30:39] = np.abs(nn.imag).mean(axis=0).reshape(9)
    return out


def pair_errors(learned: LearnedLiouvillian, truth: LiouvillianModel) -> dict:
    return {pair: learner.reconstruction_error(sol.x_hat, restrict_to_pair(truth, *pair))
            for pair, sol in learned.per_pair.items()}


def bootstrap_lambda(exp: SettingExpectations, cv: CrossValidationConfig, n_resamples: int,
                     seed: int) -> tuple:
    """Replicate pair vectors (B, P, 51) and replicate lambda tables (B, 39)."""
    n = exp.settings.n_qubits
    pairs = learner.all_pairs(n)
    reps = learner.bootstrap_solutions(exp, pairs, cv, n_resamples, seed)
    lam = np.empty((n_resamples, N_LAMBDA))
    for b in range(n_resamples):
        sols = [learner.PairSolution(p, reps[b, k], np.zeros(0), True) for k, p in enumerate(pairs)]
        lam[b] = lambda_groups(learner.aggregate(sols, n).model)
    return reps, lam


@dataclass
class RunReport:
    learned: LearnedLiouvillian
    degrees: dict
    errors: dict = field(default_factory=dict)
    lambdas: np.ndarray = None
    lambda_se: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)
    seed: int = 0

    def results_dict(self) -> dict:
        pairs = []
        for (i, j), sol in sorted(self.learned.per_pair.items()):
            entry = {"i": i, "j": j, "full_rank": bool(sol.full_rank),
                     "x_hat": sol.x_hat.tolist(), "degrees": np.asarray(sol.degrees).tolist(),
                     "bootstrap_se": self.learned.bootstrap_se.get((i, j), None)}
            if entry["bootstrap_se"] is not None:
                entry["bootstrap_se"] = np.asarray(entry["bootstrap_se"]).tolist()
            if (i, j) in self.errors:
                entry["l1_error"] = self.errors[(i, j)]
            pairs.append(entry)
        l = self.learned
        return {
            "pairs": pairs,
            "aggregated_model": l.model.to_dict(),
            "single_body_stats": {"mean": _nan_list(l.single_mean), "se": _nan_list(l.single_se),
                                  "count": l.single_count.tolist()},
            "n_coefficients": n_coefficients(l.model.n_qubits),
            "diagnostics": self.diagnostics,
        }


def _nan_list(a: np.ndarray):
    return [[None if np.isnan(v) else float(v) for v in row] for row in np.asarray(a)]


def learn_dataset(data, task: TaskConfig, truth: Optional[LiouvillianModel] = None,
                  threads: int = 1) -> RunReport:
    """Learn every pair of a dataset and attach errors, lambda groups and diagnostics."""
    t0 = time.perf_counter()
    exp = data.expectations()
    cv = task.cv_config()
    sols = learn_pairs(exp, cv, threads=threads)
    learned = learner.aggregate(sols, exp.settings.n_qubits)
    lam = lambda_groups(learned.model)
    lam_se = None
    if task.bootstrap > 0:
        reps, lam_reps = bootstrap_lambda(exp, cv, task.bootstrap,
                                          derive_seed(task.master_seed, 2))
        for k, pair in enumerate(learner.all_pairs(exp.settings.n_qubits)):
            learned.bootstrap_se[pair] = reps[:, k].std(axis=0, ddof=1)
        lam_se = lam_reps.std(axis=0, ddof=1)
    grid = exp.grid
    diagnostics = {
        "learn_seconds": time.perf_counter() - t0,
        "peak_rss_mb": _peak_rss_mb(),
        "n_settings": exp.settings.n_settings,
        "n_times": grid.n_points,
        "mode": task.mode,
        "total_shots": int(task.N_M * exp.settings.n_settings * grid.n_points)
        if task.mode == "sampled" else 0,
        "total_evolution_time": float(task.N_M * exp.settings.n_settings * grid.times.sum())
        if task.mode == "sampled" else 0.0,
    }
    report = RunReport(learned, {p: s.degrees for p, s in learned.per_pair.items()},
                       lambdas=lam, lambda_se=lam_se, diagnostics=diagnostics,
                       seed=task.master_seed)
    if truth is not None:
        report.errors = pair_errors(learned, truth)
    return report


def y_traces(exp: SettingExpectations, pairs, seed: int) -> list:
    """Rows (seed, i, j, ell, t, Y) of the inverted series Y(t) = M^+ O(t)."""
    m_max = pauli_core.build_m_max()
    rows = []
    for pair in pairs:
        series = series_from_expectations(exp, pair)
        system = learner.assemble_pair_system(m_max, series, exp.grid.times)
        for ell in range(pauli_core.N_PARAMS):
            for t, y in zip(exp.grid.times, system.y[ell]):
                rows.append((seed, pair[0], pair[1], ell, float(t), float(y)))
    return rows


def _peak_rss_mb() -> float:
    try:
        import resource
    except ImportError:  # pragma: no cover
        return float("nan")
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------------------
# Repeated simulation studies

def study_errors(task: TaskConfig, variable: str, values, degrees, n_qubits=None,
                 t_f=None) -> list:
    """Mean pair l1 error for every (value, degree, repeat).

    ``variable`` is "t_f" (sweep final time at fixed size) or "N" (sweep size
    at fixed final time).  Each repeat draws fresh settings and shots; the
    same data serve every degree.  Returns rows (variable, value, degree,
    repeat, error).
    """
    if variable not in ("t_f", "N"):
        raise ValueError("variable must be 't_f' or 'N'")
    base_cv = task.cv_config()
    rows = []
    for value in values:
        n = int(value) if variable == "N" else (n_qubits or task.n_qubits)
        tf = float(value) if variable == "t_f" else (t_f if t_f is not None else task.grid().t_final)
        grid = task.grid(tf)
        model = task.build_model(n)
        truth = {p: restrict_to_pair(model, *p) for p in learner.all_pairs(n)}
        for k in range(task.repeats):
            seed = derive_seed(task.master_seed, 3, k, n, int(round(tf * 1e9)))
            settings = draw_settings(n, task.R, derive_seed(seed, 0))
            exp = make_dataset(task, model, settings, grid, derive_seed(seed, 1)).expectations()
            for deg in degrees:
                cv = CrossValidationConfig(base_cv.k_folds, (int(deg),), base_cv.fold_seed, "shared")
                sols = learn_pairs(exp, cv)
                err = np.mean([learner.reconstruction_error(s.x_hat, truth[s.pair]) for s in sols])
                rows.append((variable, value, int(deg), k, float(err)))
    return rows


def summarize(rows) -> list:
    """(variable, value, degree, mean, std, n) from raw study rows."""
    groups = {}
    for var, value, deg, _, err in rows:
        groups.setdefault((var, value, deg), []).append(err)
    out = []
    for (var, value, deg), errs in groups.items():
        e = np.asarray(errs)
        out.append((var, value, deg, float(e.mean()),
                    float(e.std(ddof=1)) if e.size > 1 else float("nan"), int(e.size)))
    return out


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
