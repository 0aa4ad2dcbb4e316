"""Pairwise inversion, polynomial derivative extraction and aggregation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import pauli_core
from .exceptions import DegenerateData, IllConditioned, NonPositiveValue
from .liouvillian import DissipatorMatrix, HamiltonianCoefficients, LiouvillianModel
from .measurement import ObservedSeries, SettingExpectations, series_from_expectations

SVD_RTOL = 1e-10
VANDERMONDE_COND_WARN = 1e12

# Positions of the single-site block of qubit i / j inside the 51-vector:
# 3 fields followed by the 9 reals of the 3x3 dissipator block.
SINGLE_I = np.r_[0:3, 15:24]
SINGLE_J = np.r_[3:6, 24:33]


def _pinv(a: np.ndarray, rtol: float = SVD_RTOL):
    """SVD pseudo-inverse, numerical rank and condition number."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(a.T.shape), 0, np.inf
    keep = s > rtol * s[0]
    pinv = (vt[keep].T / s[keep]) @ u[:, keep].T
    return pinv, int(keep.sum()), float(s[0] / s[-1]) if s[-1] > 0 else np.inf


@dataclass
class PairSystem:
    pair: tuple
    m: np.ndarray
    series: ObservedSeries
    rank: int
    pinv: np.ndarray
    y: Optional[np.ndarray]
    times: Optional[np.ndarray] = None

    @property
    def full_rank(self) -> bool:
        return self.rank == pauli_core.N_PARAMS


def assemble_pair_system(m_max: pauli_core.CoefficientMatrixMax, series: ObservedSeries,
                         times=None) -> PairSystem:
    """Slice M_max by observed configurations and apply its pseudo-inverse."""
    if len(series) == 0:
        raise ValueError("series has no configurations")
    m = m_max.rows(series.rows)
    pinv, rank, _ = _pinv(m)
    if times is not None:
        times = np.asarray(times, dtype=float)
    return PairSystem(series.pair, m, series, rank, pinv, pinv @ series.series, times)


# ---------------------------------------------------------------------------
# Polynomial fits

@dataclass
class PolynomialFit:
    degree: int
    coefficients: np.ndarray
    residual: float

    @property
    def derivative_at_zero(self) -> float:
        return float(self.coefficients[1])

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(t, self.coefficients)


def _vandermonde(times: np.ndarray, degree: int, scale: float) -> np.ndarray:
    return (times[:, None] / scale) ** np.arange(degree + 1)


def _polyfit(times: np.ndarray, values: np.ndarray, degree: int, scale: float,
             warn: bool = True) -> np.ndarray:
    """Least-squares coefficients for each row of ``values``; returns (K, D + 1).

    Times are divided by ``scale`` before building the Vandermonde matrix and
    the coefficients rescaled afterwards, which leaves the fit unchanged but
    keeps the matrix well conditioned.
    """
    v = _vandermonde(times, degree, scale)
    pinv, _, cond = _pinv(v)
    if warn and cond > VANDERMONDE_COND_WARN:
        warnings.warn(f"Vandermonde condition number {cond:.2e}", IllConditioned, stacklevel=3)
    beta = values @ pinv.T
    return beta / scale ** np.arange(degree + 1)


def fit_polynomial(times, values, degree: int) -> PolynomialFit:
    """Polynomial least squares with intercept; beta[1] estimates the slope at t = 0."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if degree + 1 > times.size:
        raise ValueError(f"degree {degree} needs at least {degree + 1} points")
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise ValueError("times must be positive and strictly increasing")
    beta = _polyfit(times, values[None], degree, times.max())[0]
    fitted = np.polynomial.polynomial.polyval(times, beta)
    return PolynomialFit(degree, beta, float(np.sqrt(np.mean((fitted - values) ** 2))))


@dataclass
class CrossValidationConfig:
    k_folds: int = 3
    candidate_degrees: Sequence[int] = (1, 2, 3, 4, 5)
    fold_seed: int = 0
    mode: str = "per-entry"

    def __post_init__(self):
        self.candidate_degrees = tuple(sorted(int(d) for d in self.candidate_degrees))
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")
        if not self.candidate_degrees or self.candidate_degrees[0] < 1:
            raise ValueError("candidate degrees must be >= 1")
        if self.mode not in ("per-entry", "shared"):
            raise ValueError(f"unknown degree mode {self.mode!r}")

    def check(self, n_points: int):
        if len(self.candidate_degrees) == 1:
            if self.candidate_degrees[0] + 1 > n_points:
                raise ValueError("degree too large for the number of time points")
            return
        if not max(self.candidate_degrees) + 1 < n_points * (self.k_folds - 1) / self.k_folds:
            raise ValueError("not enough time points per fold for the largest degree")


def cv_scores(times, values, cv: CrossValidationConfig) -> np.ndarray:
    """Held-out RMS residual averaged over folds; shape (K_series, n_degrees)."""
    times = np.asarray(times, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    cv.check(times.size)
    perm = np.random.default_rng(cv.fold_seed).permutation(times.size)
    folds = np.array_split(perm, cv.k_folds)
    scale = times.max()
    scores = np.zeros((values.shape[0], len(cv.candidate_degrees)))
    for fold in folds:
        train = np.setdiff1d(perm, fold)
        for k, deg in enumerate(cv.candidate_degrees):
            beta = _polyfit(times[train], values[:, train], deg, scale, warn=False)
            pred = beta @ (times[fold][:, None] ** np.arange(deg + 1)).T
            scores[:, k] += np.sqrt(np.mean((pred - values[:, fold]) ** 2, axis=1))
    return scores / cv.k_folds


def _pick(scores: np.ndarray, degrees: Sequence[int], scale: np.ndarray) -> np.ndarray:
    """Smallest degree whose score ties the minimum (relative 1e-6 plus round-off floor)."""
    best = scores.min(axis=1, keepdims=True)
    tol = 1e-6 * best + 1e-12 * (1.0 + scale[:, None])
    first = np.argmax(scores <= best + tol, axis=1)
    return np.asarray(degrees)[first]


def select_degree(times, values, cv: CrossValidationConfig) -> int:
    """K-fold cross-validated polynomial degree; ties go to the smaller degree."""
    values = np.asarray(values, dtype=float)
    scores = cv_scores(times, values[None], cv)
    return int(_pick(scores, cv.candidate_degrees, np.abs(values).max(keepdims=True))[0])


@dataclass
class PairSolution:
    pair: tuple
    x_hat: np.ndarray
    degrees: np.ndarray
    full_rank: bool
    n_configurations: int = 0


def solve_pair(system: PairSystem, cv: CrossValidationConfig, times=None) -> PairSolution:
    """Slope at t = 0 of every Y_l(t) using cross-validated polynomial fits."""
    times = system.times if times is None else np.asarray(times, dtype=float)
    if times is None:
        raise ValueError("time grid required")
    y = system.y
    degrees_avail = cv.candidate_degrees
    if len(degrees_avail) == 1:
        degrees = np.full(y.shape[0], degrees_avail[0])
    else:
        scores = cv_scores(times, y, cv)
        scale = np.abs(y).max(axis=1)
        if cv.mode == "shared":
            total = scores.sum(axis=0, keepdims=True)
            degrees = np.full(y.shape[0], _pick(total, degrees_avail, scale.max(keepdims=True))[0])
        else:
            degrees = _pick(scores, degrees_avail, scale)
    x_hat = np.zeros(y.shape[0])
    for deg in np.unique(degrees):
        sel = degrees == deg
        x_hat[sel] = _polyfit(times, y[sel], int(deg), times.max())[:, 1]
    return PairSolution(system.pair, x_hat, degrees.astype(int), system.full_rank,
                        len(system.series))


def learn_pair(exp: SettingExpectations, pair, cv: CrossValidationConfig,
               setting_weights=None) -> PairSolution:
    """Series estimation, inversion and derivative fit for one pair."""
    series = series_from_expectations(exp, pair, setting_weights)
    system = assemble_pair_system(pauli_core.build_m_max(), series, exp.grid.times)
    return solve_pair(system, cv)


def all_pairs(n_qubits: int) -> list:
    return [(i, j) for i in range(n_qubits) for j in range(i + 1, n_qubits)]


# ---------------------------------------------------------------------------
# Aggregation and metrics

@dataclass
class LearnedLiouvillian:
    per_pair: dict
    model: LiouvillianModel
    single_mean: np.ndarray  # (N, 12): h_(i,a) then the 9 reals of d_(i.,i.)
    single_se: np.ndarray
    single_count: np.ndarray
    bootstrap_se: dict = field(default_factory=dict)

    @property
    def min_dissipator_eigenvalue(self) -> float:
        return self.model.dissipator.min_eigenvalue()


def aggregate(solutions: Sequence[PairSolution], n_qubits: int) -> LearnedLiouvillian:
    """Average single-site terms over full-rank pairs; take two-site terms from their pair."""
    per_pair = {tuple(s.pair): s for s in solutions}
    n = n_qubits
    samples = [[] for _ in range(n)]
    for (i, j), sol in per_pair.items():
        if not sol.full_rank:
            continue
        samples[i].append(sol.x_hat[SINGLE_I])
        samples[j].append(sol.x_hat[SINGLE_J])
    mean = np.full((n, 12), np.nan)
    se = np.full((n, 12), np.nan)
    count = np.zeros(n, dtype=int)
    for k, vals in enumerate(samples):
        if vals:
            arr = np.array(vals)
            count[k] = len(arr)
            mean[k] = arr.mean(axis=0)
            if len(arr) > 1:
                se[k] = arr.std(axis=0, ddof=1) / np.sqrt(len(arr))
    single = np.zeros((n, 3))
    pair = np.zeros((n, n, 3, 3))
    d = np.zeros((3 * n, 3 * n), dtype=complex)
    for k in range(n):
        if count[k]:
            x = np.zeros(pauli_core.N_PARAMS)
            x[SINGLE_I] = mean[k]
            h_i, _, _, dblk = pauli_core.decode(x)
            single[k] = h_i
            d[3 * k:3 * k + 3, 3 * k:3 * k + 3] = dblk[:3, :3]
    for (i, j), sol in per_pair.items():
        _, _, h_ij, dblk = pauli_core.decode(sol.x_hat)
        pair[i, j] = h_ij
        d[3 * i:3 * i + 3, 3 * j:3 * j + 3] = dblk[:3, 3:]
        d[3 * j:3 * j + 3, 3 * i:3 * i + 3] = dblk[3:, :3]
    d = 0.5 * (d + d.conj().T)
    model = LiouvillianModel(HamiltonianCoefficients(n, single, pair),
                             DissipatorMatrix(n, d, check=False))
    return LearnedLiouvillian(per_pair, model, mean, se, count)


def reconstruction_error(estimate, truth) -> float:
    """l1 distance between two parameter vectors."""
    estimate, truth = np.asarray(estimate, float), np.asarray(truth, float)
    if estimate.shape != truth.shape:
        raise ValueError("vectors differ in length")
    return float(np.abs(estimate - truth).sum())


def bootstrap_solutions(exp: SettingExpectations, pairs, cv: CrossValidationConfig,
                        n_resamples: int = 50, seed: int = 0) -> np.ndarray:
    """Re-learn every pair on settings resampled with replacement.

    Returns replicate estimates of shape (n_resamples, n_pairs, 51); the same
    resampled settings are used for all pairs within a replicate.
    """
    rng = np.random.default_rng(seed)
    n_r = exp.settings.n_settings
    out = np.empty((n_resamples, len(pairs), pauli_core.N_PARAMS))
    for b in range(n_resamples):
        w = np.bincount(rng.integers(0, n_r, n_r), minlength=n_r)
        for p, pair in enumerate(pairs):
            out[b, p] = learn_pair(exp, pair, cv, setting_weights=w).x_hat
    return out


@dataclass
class PowerLawFit:
    amplitude: float
    alpha: float
    amplitude_se: float
    alpha_se: float


def powerlaw_refit(couplings) -> PowerLawFit:
    """Fit value = amplitude * distance^-alpha by least squares in log-log space."""
    data = np.asarray(list(couplings), dtype=float).reshape(-1, 2)
    dist, val = data[:, 0], data[:, 1]
    bad = val <= 0
    if bad.any():
        warnings.warn(f"dropping {int(bad.sum())} non-positive couplings", stacklevel=2)
        dist, val = dist[~bad], val[~bad]
    if np.unique(dist).size < 3:
        if bad.any():
            raise NonPositiveValue("fewer than 3 distances with positive couplings remain")
        raise DegenerateData("need at least 3 distinct distances")
    a = np.column_stack([np.ones_like(dist), -np.log(dist)])
    coef, *_ = np.linalg.lstsq(a, np.log(val), rcond=None)
    resid = np.log(val) - a @ coef
    dof = max(len(val) - 2, 1)
    cov = (resid @ resid / dof) * np.linalg.inv(a.T @ a)
    amp = float(np.exp(coef[0]))
    return PowerLawFit(amp, float(coef[1]), amp * float(np.sqrt(cov[0, 0])), float(np.sqrt(cov[1, 1])))
