"""Two-body Liouvillian models with single-Pauli dissipators."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import pauli_core
from .exceptions import DimensionMismatch, NotPositiveSemiDefinite

PSD_TOL = 1e-10
RATE_CUTOFF = 1e-12


@dataclass
class HamiltonianCoefficients:
    """Single-site fields ``single[i, a]`` and couplings ``pair[i, j, a, b]`` (i < j)."""

    n_qubits: int
    single: np.ndarray = None
    pair: np.ndarray = None

    def __post_init__(self):
        n = self.n_qubits
        if n < 1:
            raise ValueError("n_qubits must be >= 1")
        self.single = np.zeros((n, 3)) if self.single is None else np.asarray(self.single, float)
        self.pair = np.zeros((n, n, 3, 3)) if self.pair is None else np.asarray(self.pair, float)
        if self.single.shape != (n, 3) or self.pair.shape != (n, n, 3, 3):
            raise DimensionMismatch("coefficient arrays do not match n_qubits")
        lower = np.tril(np.ones((n, n), bool))
        if np.any(self.pair[lower] != 0):
            raise ValueError("pair couplings are stored for i < j only")
        if not (np.all(np.isfinite(self.single)) and np.all(np.isfinite(self.pair))):
            raise ValueError("non-finite Hamiltonian coefficient")

    @property
    def n_parameters(self) -> int:
        n = self.n_qubits
        return 3 * n + 9 * n * (n - 1) // 2


@dataclass
class DissipatorMatrix:
    """Hermitian PSD matrix over (qubit, axis) with index 3 * i + a."""

    n_qubits: int
    entries: np.ndarray = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        n = self.n_qubits
        if self.entries is None:
            self.entries = np.zeros((3 * n, 3 * n), dtype=complex)
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.shape != (3 * n, 3 * n):
            raise DimensionMismatch("dissipator shape does not match n_qubits")
        if self.check:
            if not np.allclose(self.entries, self.entries.conj().T, rtol=0, atol=1e-12):
                raise ValueError("dissipator matrix is not Hermitian")
            if self.min_eigenvalue() < -PSD_TOL:
                raise NotPositiveSemiDefinite(
                    f"minimum eigenvalue {self.min_eigenvalue():.3e} below -{PSD_TOL}"
                )

    def min_eigenvalue(self) -> float:
        if self.entries.size == 0:
            return 0.0
        return float(np.linalg.eigvalsh(0.5 * (self.entries + self.entries.conj().T))[0])

    def __getitem__(self, key):
        i, a, j, b = key
        return self.entries[3 * i + a, 3 * j + b]


@dataclass
class JumpDecomposition:
    rates: np.ndarray
    operators: np.ndarray  # shape (n_jumps, 3N)

    def reconstruct(self) -> np.ndarray:
        ops = self.operators
        return np.einsum("v,vp,vq->pq", self.rates, ops, ops.conj())


@dataclass
class LiouvillianModel:
    hamiltonian: HamiltonianCoefficients
    dissipator: DissipatorMatrix

    def __post_init__(self):
        if self.hamiltonian.n_qubits != self.dissipator.n_qubits:
            raise DimensionMismatch("Hamiltonian and dissipator qubit counts differ")

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits

    @classmethod
    def zero(cls, n_qubits: int) -> "LiouvillianModel":
        return cls(HamiltonianCoefficients(n_qubits), DissipatorMatrix(n_qubits))

    def to_dict(self) -> dict:
        n = self.n_qubits
        h_pair = []
        for i in range(n):
            for j in range(i + 1, n):
                mat = self.hamiltonian.pair[i, j]
                if np.any(mat != 0):
                    h_pair.append({"i": i, "j": j, "matrix": mat.tolist()})
        d_entries = []
        d = self.dissipator.entries
        for p, q in zip(*np.nonzero(d)):
            d_entries.append({
                "i": int(p // 3), "a": int(p % 3), "j": int(q // 3), "b": int(q % 3),
                "re": float(d[p, q].real), "im": float(d[p, q].imag),
            })
        return {
            "n_qubits": n,
            "h_single": self.hamiltonian.single.tolist(),
            "h_pair": h_pair,
            "d_entries": d_entries,
        }

    @classmethod
    def from_dict(cls, doc: dict, check: bool = True) -> "LiouvillianModel":
        n = int(doc["n_qubits"])
        single = np.array(doc.get("h_single", np.zeros((n, 3))), dtype=float)
        pair = np.zeros((n, n, 3, 3))
        for entry in doc.get("h_pair", []):
            pair[entry["i"], entry["j"]] = entry["matrix"]
        d = np.zeros((3 * n, 3 * n), dtype=complex)
        for e in doc.get("d_entries", []):
            d[3 * e["i"] + e["a"], 3 * e["j"] + e["b"]] = e["re"] + 1j * e["im"]
        return cls(HamiltonianCoefficients(n, single, pair), DissipatorMatrix(n, d, check=check))

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_json(cls, path, check: bool = True) -> "LiouvillianModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), check=check)


def diagonalize_dissipator(d: DissipatorMatrix) -> JumpDecomposition:
    """Jump rates and Pauli-basis jump operators, rates sorted descending."""
    mat = 0.5 * (d.entries + d.entries.conj().T)
    if mat.size == 0:
        return JumpDecomposition(np.zeros(0), np.zeros((0, 0), dtype=complex))
    vals, vecs = np.linalg.eigh(mat)
    if vals[0] < -PSD_TOL:
        raise NotPositiveSemiDefinite(f"minimum eigenvalue {vals[0]:.3e}")
    vals = np.clip(vals, 0.0, None)
    order = np.argsort(vals)[::-1]
    keep = [k for k in order if vals[k] > RATE_CUTOFF]
    return JumpDecomposition(vals[keep], vecs[:, keep].T.copy())


def build_xy_model(n_qubits: int, J: float = 4.0, B: float = 1.0, alpha: float = 1.5,
                   gamma: float = 0.0) -> LiouvillianModel:
    """Power-law XY chain with a transverse field and local z dephasing.

    H = (J/2) sum_{i<j} |i-j|^-alpha (XX + YY) + B sum_i Z, and d_{i,z,i,z} = gamma.
    J is the model parameter, so the nearest-neighbour coupling is J/2.
    """
    if n_qubits < 2:
        raise ValueError("the XY model needs at least two qubits")
    if alpha <= 0 or gamma < 0:
        raise ValueError("alpha must be > 0 and gamma >= 0")
    n = n_qubits
    single = np.zeros((n, 3))
    single[:, 2] = B
    pair = np.zeros((n, n, 3, 3))
    for i in range(n):
        for j in range(i + 1, n):
            c = 0.5 * J / abs(i - j) ** alpha
            pair[i, j, 0, 0] = c
            pair[i, j, 1, 1] = c
    d = np.zeros((3 * n, 3 * n), dtype=complex)
    for i in range(n):
        d[3 * i + 2, 3 * i + 2] = gamma
    return LiouvillianModel(HamiltonianCoefficients(n, single, pair), DissipatorMatrix(n, d))


def random_model(n_qubits: int, rng, h_scale: float = 1.0, d_scale: float = 0.5,
                 n_jumps: int = 3) -> LiouvillianModel:
    """Random model with Gaussian couplings and a Wishart-like PSD dissipator."""
    n = n_qubits
    single = h_scale * rng.standard_normal((n, 3))
    pair = np.zeros((n, n, 3, 3))
    iu = np.triu_indices(n, 1)
    pair[iu] = h_scale * rng.standard_normal((len(iu[0]), 3, 3))
    b = rng.standard_normal((3 * n, n_jumps)) + 1j * rng.standard_normal((3 * n, n_jumps))
    d = d_scale * (b @ b.conj().T) / (3 * n * n_jumps)
    d = 0.5 * (d + d.conj().T)
    return LiouvillianModel(HamiltonianCoefficients(n, single, pair), DissipatorMatrix(n, d))


def restrict_to_pair(model: LiouvillianModel, i: int, j: int) -> np.ndarray:
    """Canonical 51-vector of the coefficients supported on qubits (i, j)."""
    n = model.n_qubits
    if not (0 <= i < j < n):
        raise IndexError(f"need 0 <= i < j < {n}, got ({i}, {j})")
    idx = np.r_[3 * i:3 * i + 3, 3 * j:3 * j + 3]
    d_pair = model.dissipator.entries[np.ix_(idx, idx)]
    h = model.hamiltonian
    return pauli_core.encode(h.single[i], h.single[j], h.pair[i, j], d_pair)
