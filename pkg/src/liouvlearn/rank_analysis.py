"""Monte-Carlo full-rank probabilities and the Gumbel threshold model."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import pauli_core
from .exceptions import DegenerateData, NoConvergence
from .measurement import setting_ordinals

RANK_RTOL = 1e-10


@dataclass
class GumbelFit:
    r0: float
    mu: float
    residual: float
    r0_se: float = float("nan")
    mu_se: float = float("nan")

    def __call__(self, r):
        return gumbel(np.asarray(r, dtype=float), self.r0, self.mu)


@dataclass
class RankScanResult:
    r_values: np.ndarray
    probabilities: np.ndarray
    n_samples: int
    fit: Optional[GumbelFit] = None

    @property
    def stderr(self) -> np.ndarray:
        p = self.probabilities
        return np.sqrt(p * (1 - p) / self.n_samples)

    @property
    def threshold(self) -> Optional[int]:
        """Smallest scanned R with a nonzero full-rank fraction."""
        nz = np.nonzero(self.probabilities > 0)[0]
        return int(self.r_values[nz[0]]) if nz.size else None


@dataclass
class MultiPairScanResult:
    r_values: np.ndarray
    n_values: np.ndarray
    probabilities: np.ndarray  # (len(r_values), len(n_values))
    n_samples: int
    contour: dict = field(default_factory=dict)  # N -> R at p = 0.5
    iso_fit: Optional[tuple] = None  # (r0_tilde, mu_tilde)


def gumbel(r, r0, mu):
    return np.exp(-np.exp(-(r - r0) / mu))


@functools.lru_cache(maxsize=None)
def _row_outer() -> np.ndarray:
    m = pauli_core.build_m_max().entries
    return np.einsum("ca,cb->cab", m, m).reshape(pauli_core.N_CONFIGS, -1)


def full_rank_mask(observed: np.ndarray) -> np.ndarray:
    """Whether each boolean row mask (S, 360) selects a rank-51 slice of M_max.

    Uses eigenvalues of the 51 x 51 Gram matrix; nonzero squared singular
    values of these integer slices sit many orders above the cutoff.
    """
    n = pauli_core.N_PARAMS
    gram = (observed.astype(float) @ _row_outer()).reshape(-1, n, n)
    ev = np.linalg.eigvalsh(gram)
    return ev[:, 0] > RANK_RTOL * np.maximum(ev[:, -1], 1e-300)


def _observed(prep: np.ndarray, meas: np.ndarray, pair) -> np.ndarray:
    """Boolean (S, 360) row masks for batched settings of shape (S, R, N)."""
    ords = np.concatenate(setting_ordinals(prep, meas, pair), axis=1)
    mask = np.zeros((prep.shape[0], pauli_core.N_CONFIGS), dtype=bool)
    np.put_along_axis(mask, ords, True, axis=1)
    return mask


def pair_rank(prep: np.ndarray, meas: np.ndarray, pair) -> int:
    """SVD rank of the observed M_max slice for one settings table."""
    m = pauli_core.build_m_max().entries
    rows = np.unique(np.concatenate(setting_ordinals(prep, meas, pair)))
    s = np.linalg.svd(m[rows], compute_uv=False)
    return int((s > RANK_RTOL * s[0]).sum())


def _all_pairs_success(rng, n_r, n_qubits, n_samples, chunk=500) -> np.ndarray:
    ok = np.empty(n_samples, dtype=bool)
    pairs = [(i, j) for i in range(n_qubits) for j in range(i + 1, n_qubits)]
    for start in range(0, n_samples, chunk):
        size = min(chunk, n_samples - start)
        prep = rng.integers(0, 6, size=(size, n_r, n_qubits))
        meas = rng.integers(0, 3, size=(size, n_r, n_qubits))
        alive = np.arange(size)
        for pair in pairs:
            if alive.size == 0:
                break
            good = full_rank_mask(_observed(prep[alive], meas[alive], pair))
            alive = alive[good]
        block = np.zeros(size, dtype=bool)
        block[alive] = True
        ok[start:start + size] = block
    return ok


def single_pair_rank_probability(r_grid: Sequence[int], n_samples: int = 1000,
                                 seed: int = 0) -> RankScanResult:
    """Fraction of random R-setting tables giving a full-rank pair system."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    r_grid = np.asarray(r_grid, dtype=int)
    probs = np.empty(len(r_grid))
    for k, r in enumerate(r_grid):
        rng = np.random.default_rng([seed, int(r)])
        probs[k] = _all_pairs_success(rng, int(r), 2, n_samples).mean()
    return RankScanResult(r_grid, probs, n_samples)


def multi_pair_rank_probability(r_grid: Sequence[int], n_grid: Sequence[int],
                                n_samples: int = 1000, seed: int = 0) -> MultiPairScanResult:
    """Fraction of random tables giving full rank on every pair, per (R, N)."""
    r_grid = np.asarray(r_grid, dtype=int)
    n_grid = np.asarray(n_grid, dtype=int)
    if np.any(n_grid < 2):
        raise ValueError("every N must be >= 2")
    probs = np.empty((len(r_grid), len(n_grid)))
    for b, n in enumerate(n_grid):
        for a, r in enumerate(r_grid):
            rng = np.random.default_rng([seed, int(r), int(n)])
            probs[a, b] = _all_pairs_success(rng, int(r), int(n), n_samples).mean()
    result = MultiPairScanResult(r_grid, n_grid, probs, n_samples)
    result.contour = half_contour(r_grid, n_grid, probs)
    if len(result.contour) >= 2:
        ns = np.array(sorted(result.contour))
        rs = np.array([result.contour[n] for n in ns])
        slope, intercept = np.polyfit(np.log(ns), rs, 1)
        result.iso_fit = (float(intercept), float(slope))
    return result


def half_contour(r_grid, n_grid, probs, level: float = 0.5) -> dict:
    """R where p(R, N) first crosses ``level``, linearly interpolated, per N."""
    out = {}
    for b, n in enumerate(n_grid):
        p = probs[:, b]
        for a in range(len(r_grid) - 1):
            if p[a] < level <= p[a + 1]:
                frac = (level - p[a]) / (p[a + 1] - p[a])
                out[int(n)] = float(r_grid[a] + frac * (r_grid[a + 1] - r_grid[a]))
                break
    return out


def fit_gumbel(result: RankScanResult, max_iter: int = 200, tol: float = 1e-8) -> GumbelFit:
    """Gauss-Newton least squares of p(R) = exp(-exp(-(R - R0) / mu)) with step halving."""
    r = np.asarray(result.r_values, dtype=float)
    p = np.asarray(result.probabilities, dtype=float)
    interior = (p > 0) & (p < 1)
    if interior.sum() < 3:
        raise DegenerateData("need at least 3 grid points with 0 < p < 1")
    above_e = np.nonzero(p >= 1 / math.e)[0]
    above_9 = np.nonzero(p >= 0.9)[0]
    r0 = r[above_e[0]]
    r90 = r[above_9[0]] if above_9.size else r[-1]
    r37 = r[np.nonzero(p >= 0.37)[0][0]]
    mu = max((r90 - r37) / 2, np.diff(r).min() / 2)
    theta = np.array([r0, mu])

    def ssr(th):
        return float(np.sum((p - gumbel(r, *th)) ** 2))

    for _ in range(max_iter):
        z = (r - theta[0]) / theta[1]
        f = gumbel(r, *theta)
        dfdz = f * np.exp(-z)
        jac = np.column_stack([-dfdz / theta[1], -dfdz * z / theta[1]])
        step, *_ = np.linalg.lstsq(jac, p - f, rcond=None)
        current = ssr(theta)
        lam = 1.0
        while lam > 1e-10:
            trial = theta + lam * step
            if trial[1] > 0 and ssr(trial) <= current:
                break
            lam /= 2
        else:
            trial = theta
        delta = trial - theta
        theta = trial
        if np.linalg.norm(delta) < tol:
            break
    else:
        raise NoConvergence(f"Gumbel fit did not converge in {max_iter} iterations")
    z = (r - theta[0]) / theta[1]
    f = gumbel(r, *theta)
    dfdz = f * np.exp(-z)
    jac = np.column_stack([-dfdz / theta[1], -dfdz * z / theta[1]])
    res = ssr(theta)
    dof = max(len(r) - 2, 1)
    try:
        cov = res / dof * np.linalg.inv(jac.T @ jac)
        se = np.sqrt(np.diag(cov))
    except np.linalg.LinAlgError:
        se = np.array([np.nan, np.nan])
    fit = GumbelFit(float(theta[0]), float(theta[1]), float(np.sqrt(res / len(r))),
                    float(se[0]), float(se[1]))
    result.fit = fit
    return fit


def recommend_r(n_qubits: int, target: float, fit) -> int:
    """Settings needed for all-pairs full rank with probability ``target``."""
    if not 0 < target < 1:
        raise ValueError("target probability must lie in (0, 1)")
    if n_qubits < 2:
        raise ValueError("need at least two qubits")
    r0, mu = (fit.r0, fit.mu) if isinstance(fit, GumbelFit) else fit
    n_pairs = n_qubits * (n_qubits - 1) / 2
    value = r0 + mu * (math.log(n_pairs) - math.log(abs(math.log(target))))
    return math.ceil(value - 1e-9)


def independence_prediction(p_single: np.ndarray, n_qubits: int) -> np.ndarray:
    """p(R)^(N(N-1)/2): all-pairs success if pair conditions were independent."""
    return np.asarray(p_single) ** (n_qubits * (n_qubits - 1) // 2)
