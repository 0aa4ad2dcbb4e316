"""Dense Lindblad evolution, Born-rule sampling and exact expectations.

States are 2^N x 2^N density matrices with qubit 0 as the most significant
(leftmost) tensor factor.  Arrays of shape ``(B, d, d)`` are evolved as a
batch; the Liouvillian superoperator itself is only ever built by the
small-N verification oracle.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterator

import numpy as np
import scipy.linalg

from . import pauli_core
from .exceptions import DimensionMismatch, InvalidProbabilities, NonFiniteState, TooLarge
from .liouvillian import LiouvillianModel, diagonalize_dissipator

SIGMAS = [pauli_core.SIGMA[c] for c in "XYZ"]

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j])
_X = pauli_core.SIGMA["X"]

# Preparation alphabet, matrices multiplying |0>: H, XH, HS, XHS, 1, X applied
# in circuit order (leftmost gate first) prepare +x, -x, +y, -y, +z, -z.
PREP_UNITARIES = np.array([_H, _H @ _X, _S @ _H, _S @ _H @ _X, np.eye(2), _X])
PREP_VECTORS = PREP_UNITARIES[:, :, 0]
# Measurement alphabet H, HS^dag, 1: V^dag Z V is X, Y, Z respectively.
MEAS_UNITARIES = np.array([_H, _H @ _S.conj().T, np.eye(2, dtype=complex)])


@dataclass(frozen=True)
class TimeGrid:
    """Evolution times t_s = s * dt for s = 1..n_points (t = 0 excluded)."""

    dt: float
    n_points: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_points < 2:
            raise ValueError("a time grid needs at least two points")

    @classmethod
    def from_t_final(cls, t_final: float, n_points: int) -> "TimeGrid":
        return cls(t_final / n_points, n_points)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(1, self.n_points + 1)

    @property
    def t_final(self) -> float:
        return self.dt * self.n_points


def site_operator(op: np.ndarray, site: int, n_qubits: int) -> np.ndarray:
    left = np.eye(2 ** site)
    right = np.eye(2 ** (n_qubits - site - 1))
    return np.kron(np.kron(left, op), right)


def hamiltonian_matrix(model: LiouvillianModel) -> np.ndarray:
    n = model.n_qubits
    ops = [[site_operator(s, k, n) for s in SIGMAS] for k in range(n)]
    h = np.zeros((2 ** n, 2 ** n), dtype=complex)
    coeffs = model.hamiltonian
    for i in range(n):
        for a in range(3):
            if coeffs.single[i, a]:
                h += coeffs.single[i, a] * ops[i][a]
        for j in range(i + 1, n):
            for a in range(3):
                for b in range(3):
                    if coeffs.pair[i, j, a, b]:
                        h += coeffs.pair[i, j, a, b] * (ops[i][a] @ ops[j][b])
    return h


class LindbladGenerator:
    """Right-hand side of the master equation in jump-operator form.

    Uses H_eff = H - (i/2) sum_v g_v L_v^dag L_v so that
    L[rho] = -i (H_eff rho - rho H_eff^dag) + sum_v g_v L_v rho L_v^dag.
    Diagonal jump operators (e.g. z dephasing) are applied elementwise.
    """

    def __init__(self, model: LiouvillianModel):
        n = model.n_qubits
        self.n_qubits = n
        self.dim = 2 ** n
        h = hamiltonian_matrix(model)
        jumps = diagonalize_dissipator(model.dissipator)
        ops = [[site_operator(s, k, n) for s in SIGMAS] for k in range(n)]
        flat_ops = [ops[k][a] for k in range(n) for a in range(3)]
        heff = h.copy()
        self.dense_jumps = []
        diag_weight = np.zeros((self.dim, self.dim))
        for rate, vec in zip(jumps.rates, jumps.operators):
            lop = sum(c * o for c, o in zip(vec, flat_ops) if c != 0)
            heff -= 0.5j * rate * (lop.conj().T @ lop)
            if np.count_nonzero(lop - np.diag(np.diag(lop))) == 0:
                ld = np.diag(lop)
                diag_weight = diag_weight + rate * np.outer(ld, ld.conj())
            else:
                self.dense_jumps.append((rate, lop, lop.conj().T))
        self.heff = heff
        self.heff_dag = heff.conj().T
        self.diag_weight = diag_weight if np.any(diag_weight) else None
        self.is_zero = not np.any(h) and jumps.rates.size == 0

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.heff @ rho - rho @ self.heff_dag)
        if self.diag_weight is not None:
            out += self.diag_weight * rho
        for rate, lop, ldag in self.dense_jumps:
            out += rate * (lop @ rho @ ldag)
        return out


def _check_state(rho: np.ndarray, dim: int):
    if rho.shape[-2:] != (dim, dim):
        raise DimensionMismatch(f"state shape {rho.shape} does not match dimension {dim}")


def iter_evolve(model: LiouvillianModel, rho0: np.ndarray, grid: TimeGrid, substeps: int = 32,
                renormalize: bool = True) -> Iterator[np.ndarray]:
    """Yield the (batched) state at each grid time using classical RK4."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    gen = LindbladGenerator(model)
    rho = np.array(rho0, dtype=complex)
    _check_state(rho, gen.dim)
    h = grid.dt / substeps
    for _ in range(grid.n_points):
        if not gen.is_zero:
            for _ in range(substeps):
                k1 = gen(rho)
                k2 = gen(rho + 0.5 * h * k1)
                k3 = gen(rho + 0.5 * h * k2)
                k4 = gen(rho + h * k3)
                rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(rho)):
                raise NonFiniteState("non-finite entries during integration")
        if renormalize:
            rho = 0.5 * (rho + np.swapaxes(rho, -1, -2).conj())
            tr = np.trace(rho, axis1=-2, axis2=-1).real
            rho = rho / tr[..., None, None]
        yield rho.copy()


def evolve(model: LiouvillianModel, rho0: np.ndarray, grid: TimeGrid, substeps: int = 32,
           renormalize: bool = True) -> np.ndarray:
    """States at every grid time, stacked along a new leading axis."""
    return np.array(list(iter_evolve(model, rho0, grid, substeps, renormalize)))


def superoperator(model: LiouvillianModel) -> np.ndarray:
    """Dense 4^N x 4^N generator acting on column-stacked density matrices."""
    n = model.n_qubits
    if n > 4:
        raise TooLarge("dense superoperator limited to N <= 4")
    dim = 2 ** n
    eye = np.eye(dim)
    h = hamiltonian_matrix(model)
    sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    flat = [site_operator(s, k, n) for k in range(n) for s in SIGMAS]
    d = model.dissipator.entries
    for p, q in zip(*np.nonzero(d)):
        pp, qq = flat[p], flat[q]
        qp = qq @ pp
        sup += d[p, q] * (np.kron(qq.T, pp) - 0.5 * np.kron(eye, qp) - 0.5 * np.kron(qp.T, eye))
    return sup


def superoperator_expm_oracle(model: LiouvillianModel, rho0: np.ndarray, t: float) -> np.ndarray:
    """exp(L t) rho0 via scipy's scaling-and-squaring Pade matrix exponential."""
    sup = superoperator(model)
    dim = 2 ** model.n_qubits
    rho0 = np.asarray(rho0, dtype=complex)
    _check_state(rho0, dim)
    if t == 0:
        return rho0.copy()
    vec = scipy.linalg.expm(sup * t) @ rho0.reshape(-1, order="F")
    return vec.reshape(dim, dim, order="F")


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


# ---------------------------------------------------------------------------
# Preparation, measurement and sampling

def product_states(prep: np.ndarray) -> np.ndarray:
    """Density matrices of product Pauli eigenstates; ``prep`` is (B, N) alphabet indices."""
    prep = np.atleast_2d(prep)
    psi = PREP_VECTORS[prep[:, 0]]
    for k in range(1, prep.shape[1]):
        psi = np.einsum("bi,bj->bij", psi, PREP_VECTORS[prep[:, k]]).reshape(len(prep), -1)
    return np.einsum("bi,bj->bij", psi, psi.conj())


def _kron_batch(mats: np.ndarray) -> np.ndarray:
    """Kronecker product over axis 1 of a (B, N, 2, 2) array."""
    out = mats[:, 0]
    for k in range(1, mats.shape[1]):
        b, d = out.shape[0], out.shape[1]
        out = np.einsum("bij,bkl->bikjl", out, mats[:, k]).reshape(b, 2 * d, 2 * d)
    return out


def measurement_unitary(basis) -> np.ndarray:
    basis = np.asarray(basis, dtype=int)
    return reduce(np.kron, [MEAS_UNITARIES[k] for k in basis])


def basis_probabilities(rho: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Diagonal of V rho V^dag for a batch of states and per-qubit bases.

    Returns real probabilities, clipped at zero and renormalised; raises
    :class:`InvalidProbabilities` below -1e-8.
    """
    rho = np.asarray(rho)
    single = rho.ndim == 2
    rho = rho[None] if single else rho
    basis = np.atleast_2d(basis)
    v = _kron_batch(MEAS_UNITARIES[basis])
    probs = np.einsum("bsa,bac,bsc->bs", v, rho, v.conj()).real
    if probs.min() < -1e-8:
        raise InvalidProbabilities(f"negative probability {probs.min():.3e}")
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs[0] if single else probs


def outcome_bits(n_qubits: int) -> np.ndarray:
    """Bit table (2^N, N), qubit 0 the most significant bit."""
    idx = np.arange(2 ** n_qubits)
    return ((idx[:, None] >> (n_qubits - 1 - np.arange(n_qubits))) & 1).astype(np.uint8)


def shot_rng(master_seed: int, r: int, s: int) -> np.random.Generator:
    """Independent stream per (setting, time) so sampling order does not matter."""
    return np.random.default_rng([int(master_seed), int(r), int(s)])


def sample_outcomes(probs: np.ndarray, n_shots: int, rng: np.random.Generator) -> np.ndarray:
    """Integer-coded outcomes drawn from a probability vector."""
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n_shots), side="right")


def sample_bitstrings(rho: np.ndarray, basis, n_shots: int, rng: np.random.Generator) -> np.ndarray:
    """Measure ``n_shots`` times in the given per-qubit bases; returns (n_shots, N) bits."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    basis = np.asarray(basis, dtype=int)
    n = basis.size
    probs = basis_probabilities(rho, basis[None])
    return outcome_bits(n)[sample_outcomes(probs, n_shots, rng)]


def bits_to_strings(bits: np.ndarray) -> list:
    return ["".join("1" if b else "0" for b in row) for row in bits]


def exact_expectation(rho: np.ndarray, obs: dict) -> float:
    """tr(rho O) for O given as ``{site: axis}`` with axis in 'XYZ' or 0..2."""
    dim = rho.shape[-1]
    n = int(round(np.log2(dim)))
    op = np.eye(dim, dtype=complex)
    for site, axis in obs.items():
        if not 0 <= site < n:
            raise IndexError(f"site {site} out of range for {n} qubits")
        a = "XYZ".index(axis.upper()) if isinstance(axis, str) else int(axis)
        op = op @ site_operator(SIGMAS[a], site, n)
    return float(np.trace(rho @ op).real)


def setting_probabilities(model: LiouvillianModel, prep: np.ndarray, meas: np.ndarray,
                          grid: TimeGrid, substeps: int = 32,
                          max_batch_bytes: float = 64e6) -> np.ndarray:
    """Born probabilities (N_T, R, 2^N) for every setting and grid time.

    Settings sharing a preparation row are evolved once.
    """
    prep = np.asarray(prep, dtype=int)
    meas = np.asarray(meas, dtype=int)
    n_settings, n = prep.shape
    dim = 2 ** n
    out = np.empty((grid.n_points, n_settings, dim))
    uniq, inverse = np.unique(prep, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    chunk = max(1, int(max_batch_bytes // (16 * dim * dim)))
    for start in range(0, len(uniq), chunk):
        block = np.arange(start, min(start + chunk, len(uniq)))
        members = np.nonzero(np.isin(inverse, block))[0]
        local = inverse[members] - start
        rho0 = product_states(uniq[block])
        for s, rho in enumerate(iter_evolve(model, rho0, grid, substeps)):
            out[s, members] = basis_probabilities(rho[local], meas[members])
    return out
