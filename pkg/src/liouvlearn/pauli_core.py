"""Pauli algebra on one and two qubits and the pairwise coefficient matrix.

For a qubit pair (i, j) every learning configuration is a product Pauli
state paired with a one- or two-site Pauli observable.  The rate of change
of that observable at t = 0 is linear in the 51 real Liouvillian parameters
living on the pair; the matrix of those linear coefficients over all 360
configurations is built once by :func:`build_m_max` and sliced per pair.

Row order (frozen): 18 single-site configurations on i, 18 on j, then 324
two-site configurations.  Inside each block the preparation varies slowest
and the observable fastest, with axes ordered X < Y < Z and sign + before -.

Column order (frozen, 51 entries)::

     0- 2  h_i(a)
     3- 5  h_j(a)
     6-14  h_ij(a, b)                  a-major
    15-23  d_(i.,i.)  diag xx yy zz, Re xy xz yz, Im xy xz yz
    24-32  d_(j.,j.)  same scheme
    33-41  Re d_(i a, j b)             a-major
    42-50  Im d_(i a, j b)             a-major
"""
from __future__ import annotations

import csv
import enum
import functools
import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import DimensionMismatch

N_PARAMS = 51
N_CONFIGS = 360

I2 = np.eye(2, dtype=complex)
SIGMA = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Off-diagonal (a, b) pairs with a < b inside a 3x3 Hermitian block.
_UPPER = ((0, 1), (0, 2), (1, 2))


class PauliAxis(enum.IntEnum):
    X = 0
    Y = 1
    Z = 2

    @property
    def matrix(self) -> np.ndarray:
        return SIGMA[self.name]


@dataclass(frozen=True)
class PauliState:
    """Single-qubit Pauli eigenstate (1 + sign * sigma_axis) / 2."""

    axis: PauliAxis
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        object.__setattr__(self, "axis", PauliAxis(self.axis))

    @property
    def index(self) -> int:
        """Position in the preparation alphabet (+x, -x, +y, -y, +z, -z)."""
        return 2 * int(self.axis) + (0 if self.sign > 0 else 1)

    @classmethod
    def from_index(cls, index: int) -> "PauliState":
        if not 0 <= index < 6:
            raise ValueError(f"preparation index out of range: {index}")
        return cls(PauliAxis(index // 2), 1 if index % 2 == 0 else -1)

    @property
    def matrix(self) -> np.ndarray:
        return 0.5 * (I2 + self.sign * self.axis.matrix)

    def __str__(self):
        return ("+" if self.sign > 0 else "-") + self.axis.name.lower()


PAULI_STATES = tuple(PauliState.from_index(k) for k in range(6))


class ConfigKind(enum.Enum):
    SINGLE_I = "single_i"
    SINGLE_J = "single_j"
    PAIR = "pair"


@dataclass(frozen=True)
class Configuration:
    kind: ConfigKind
    prep_i: Optional[PauliState] = None
    prep_j: Optional[PauliState] = None
    obs_i: Optional[PauliAxis] = None
    obs_j: Optional[PauliAxis] = None

    def __post_init__(self):
        has_i = self.prep_i is not None and self.obs_i is not None
        has_j = self.prep_j is not None and self.obs_j is not None
        some_i = self.prep_i is not None or self.obs_i is not None
        some_j = self.prep_j is not None or self.obs_j is not None
        ok = {
            ConfigKind.SINGLE_I: has_i and not some_j,
            ConfigKind.SINGLE_J: has_j and not some_i,
            ConfigKind.PAIR: has_i and has_j,
        }[self.kind]
        if not ok:
            raise ValueError(f"inconsistent fields for {self.kind}")

    @property
    def ordinal(self) -> int:
        """Row index of this configuration in the canonical ordering."""
        if self.kind is ConfigKind.SINGLE_I:
            return single_ordinal(self.prep_i.index, int(self.obs_i), which=0)
        if self.kind is ConfigKind.SINGLE_J:
            return single_ordinal(self.prep_j.index, int(self.obs_j), which=1)
        return pair_ordinal(self.prep_i.index, self.prep_j.index, int(self.obs_i), int(self.obs_j))

    def prep_matrix(self) -> np.ndarray:
        """Initial state on the pair, maximally mixed on an inactive site."""
        ti = self.prep_i.matrix if self.prep_i is not None else I2 / 2
        tj = self.prep_j.matrix if self.prep_j is not None else I2 / 2
        return np.kron(ti, tj)

    def obs_word(self) -> str:
        return (self.obs_i.name if self.obs_i is not None else "I") + (
            self.obs_j.name if self.obs_j is not None else "I"
        )

    def label(self) -> str:
        if self.kind is ConfigKind.SINGLE_I:
            return f"i:{self.prep_i}|{self.obs_i.name}"
        if self.kind is ConfigKind.SINGLE_J:
            return f"j:{self.prep_j}|{self.obs_j.name}"
        return f"ij:{self.prep_i},{self.prep_j}|{self.obs_i.name}{self.obs_j.name}"


def single_ordinal(prep, obs, which):
    """Row index of a single-site configuration; works elementwise on arrays."""
    return 18 * which + 3 * prep + obs


def pair_ordinal(prep_i, prep_j, obs_i, obs_j):
    """Row index of a two-site configuration; works elementwise on arrays."""
    return 36 + 9 * (6 * prep_i + prep_j) + 3 * obs_i + obs_j


@functools.lru_cache(maxsize=None)
def _configurations() -> tuple:
    out = []
    for p, o in itertools.product(PAULI_STATES, PauliAxis):
        out.append(Configuration(ConfigKind.SINGLE_I, prep_i=p, obs_i=o))
    for p, o in itertools.product(PAULI_STATES, PauliAxis):
        out.append(Configuration(ConfigKind.SINGLE_J, prep_j=p, obs_j=o))
    for pi, pj, oi, oj in itertools.product(PAULI_STATES, PAULI_STATES, PauliAxis, PauliAxis):
        out.append(Configuration(ConfigKind.PAIR, prep_i=pi, prep_j=pj, obs_i=oi, obs_j=oj))
    return tuple(out)


def enumerate_configurations() -> list:
    """All 360 pair configurations in canonical order."""
    return list(_configurations())


@dataclass(frozen=True)
class ParameterIndex:
    ordinal: int
    kind: str
    axes: tuple

    @property
    def label(self) -> str:
        ax = "".join("xyz"[a] for a in self.axes)
        return f"{self.kind}[{ax}]"


@functools.lru_cache(maxsize=None)
def _parameters() -> tuple:
    out = []

    def add(kind, axes):
        out.append(ParameterIndex(len(out), kind, axes))

    for site in ("i", "j"):
        for a in range(3):
            add(f"h_{site}", (a,))
    for a, b in itertools.product(range(3), range(3)):
        add("h_ij", (a, b))
    for site in ("ii", "jj"):
        for a in range(3):
            add(f"d_{site}", (a, a))
        for a, b in _UPPER:
            add(f"re_d_{site}", (a, b))
        for a, b in _UPPER:
            add(f"im_d_{site}", (a, b))
    for part in ("re", "im"):
        for a, b in itertools.product(range(3), range(3)):
            add(f"{part}_d_ij", (a, b))
    assert len(out) == N_PARAMS
    return tuple(out)


def parameter_indices() -> list:
    return list(_parameters())


# ---------------------------------------------------------------------------
# Dense 1-/2-site operator helpers

Word = Union[str, np.ndarray]


def pauli_matrix(word: Word) -> np.ndarray:
    """Dense matrix of a Pauli word such as ``"X"``, ``"XY"`` or ``"IZ"``."""
    if isinstance(word, np.ndarray):
        return word
    mat = np.ones((1, 1), dtype=complex)
    for ch in word.upper():
        mat = np.kron(mat, SIGMA[ch])
    return mat


def _state_matrix(prep) -> np.ndarray:
    if isinstance(prep, np.ndarray):
        return prep
    if isinstance(prep, PauliState):
        return prep.matrix
    mat = np.ones((1, 1), dtype=complex)
    for p in prep:
        mat = np.kron(mat, I2 / 2 if p is None else p.matrix)
    return mat


def _check_dims(*mats):
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise DimensionMismatch(f"operand shapes differ: {sorted(shapes)}")


def hamiltonian_trace_coeff(pauli_op: Word, prep, obs: Word) -> float:
    """tr(-i [P, rho] O) for a Pauli word P, product state rho and observable O."""
    p, rho, o = pauli_matrix(pauli_op), _state_matrix(prep), pauli_matrix(obs)
    _check_dims(p, rho, o)
    val = np.trace(-1j * (p @ rho - rho @ p) @ o)
    if abs(val.imag) > 1e-12:
        raise ArithmeticError(f"non-real Hamiltonian coefficient {val}")
    return float(val.real)


def dissipator_trace_coeff(p: Word, q: Word, prep, obs: Word) -> complex:
    """tr(A(p, q, rho) O) with A(p, q, rho) = p rho q - {q p, rho} / 2."""
    pm, qm, rho, o = pauli_matrix(p), pauli_matrix(q), _state_matrix(prep), pauli_matrix(obs)
    _check_dims(pm, qm, rho, o)
    qp = qm @ pm
    a = pm @ rho @ qm - 0.5 * (qp @ rho + rho @ qp)
    return complex(np.trace(a @ o))


# ---------------------------------------------------------------------------
# Coefficient matrix

def _site_word(site: int, axis: int) -> str:
    ch = "XYZ"[axis]
    return ch + "I" if site == 0 else "I" + ch


def _column_coefficient(par: ParameterIndex, rho: np.ndarray, obs: np.ndarray) -> complex:
    kind, axes = par.kind, par.axes
    if kind in ("h_i", "h_j"):
        return hamiltonian_trace_coeff(_site_word(0 if kind == "h_i" else 1, axes[0]), rho, obs)
    if kind == "h_ij":
        return hamiltonian_trace_coeff("XYZ"[axes[0]] + "XYZ"[axes[1]], rho, obs)
    if kind.startswith("d_"):
        part, block = "diag", kind[2:]
    else:
        part, block = kind.split("_d_")
    if block in ("ii", "jj"):
        site = 0 if block == "ii" else 1
        p, q = _site_word(site, axes[0]), _site_word(site, axes[1])
    else:
        p, q = _site_word(0, axes[0]), _site_word(1, axes[1])
    if part == "diag":
        return dissipator_trace_coeff(p, p, rho, obs)
    pq = dissipator_trace_coeff(p, q, rho, obs)
    qp = dissipator_trace_coeff(q, p, rho, obs)
    if part == "re":
        return pq + qp
    return 1j * (pq - qp)


@dataclass(frozen=True)
class CoefficientMatrixMax:
    entries: np.ndarray
    row_labels: tuple
    col_labels: tuple

    @property
    def shape(self):
        return self.entries.shape

    def rows(self, ordinals) -> np.ndarray:
        return self.entries[np.asarray(ordinals, dtype=int)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "column", "value"])
            for c, row in zip(self.row_labels, self.entries):
                for p, v in zip(self.col_labels, row):
                    w.writerow([c.label(), p.label, repr(float(v))])


@functools.lru_cache(maxsize=None)
def build_m_max() -> CoefficientMatrixMax:
    """Precompute the 360 x 51 real coefficient matrix (cached)."""
    configs = _configurations()
    params = _parameters()
    m = np.zeros((N_CONFIGS, N_PARAMS))
    for c, cfg in enumerate(configs):
        rho = cfg.prep_matrix()
        obs = pauli_matrix(cfg.obs_word())
        for par in params:
            val = complex(_column_coefficient(par, rho, obs))
            if abs(val.imag) > 1e-10:
                raise ArithmeticError(
                    f"complex coefficient {val} at ({cfg.label()}, {par.label})"
                )
            m[c, par.ordinal] = val.real
    # Entries are exact small integers up to rounding.
    m = np.round(m, 12) + 0.0
    m.setflags(write=False)
    return CoefficientMatrixMax(m, configs, params)


# ---------------------------------------------------------------------------
# Real encoding of pair-restricted coefficients

def encode(h_i, h_j, h_ij, d_pair) -> np.ndarray:
    """Pack pair coefficients into the canonical 51-vector.

    ``d_pair`` is the 6x6 Hermitian dissipator restricted to the pair with
    index order (i,x), (i,y), (i,z), (j,x), (j,y), (j,z).
    """
    d = np.asarray(d_pair, dtype=complex)
    x = np.zeros(N_PARAMS)
    x[0:3] = h_i
    x[3:6] = h_j
    x[6:15] = np.asarray(h_ij, dtype=float).reshape(9)
    for off, blk in ((15, d[:3, :3]), (24, d[3:, 3:])):
        x[off:off + 3] = np.diag(blk).real
        x[off + 3:off + 6] = [blk[a, b].real for a, b in _UPPER]
        x[off + 6:off + 9] = [blk[a, b].imag for a, b in _UPPER]
    x[33:42] = d[:3, 3:].real.reshape(9)
    x[42:51] = d[:3, 3:].imag.reshape(9)
    return x


def decode(x):
    """Inverse of :func:`encode`; returns (h_i, h_j, h_ij, d_pair)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (N_PARAMS,):
        raise DimensionMismatch(f"expected {N_PARAMS} entries, got {x.shape}")
    d = np.zeros((6, 6), dtype=complex)
    for off, s in ((15, 0), (24, 3)):
        for a in range(3):
            d[s + a, s + a] = x[off + a]
        for k, (a, b) in enumerate(_UPPER):
            d[s + a, s + b] = x[off + 3 + k] + 1j * x[off + 6 + k]
            d[s + b, s + a] = np.conj(d[s + a, s + b])
    cross = (x[33:42] + 1j * x[42:51]).reshape(3, 3)
    d[:3, 3:] = cross
    d[3:, :3] = cross.conj().T
    return x[0:3].copy(), x[3:6].copy(), x[6:15].reshape(3, 3).copy(), d
