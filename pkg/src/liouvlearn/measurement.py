"""Randomized settings, bitstring datasets and per-configuration estimators.

Each setting r fixes, per qubit, a preparation index in 0..5 (+x, -x, +y, -y,
+z, -z) and a measurement index in 0..2 (x, y, z).  A configuration is
estimated by averaging, uniformly over the settings compatible with it, the
empirical mean of (-1)^s_i (single site) or (-1)^(s_i + s_j) (two sites).
Configurations with no compatible setting are dropped.

Bit conventions: qubit 0 is the leftmost character of a shot string and bit
0 is the +1 outcome.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import pauli_core
from .exceptions import EmptyDataset
from .liouvillian import LiouvillianModel
from .pauli_core import ConfigKind, Configuration, pair_ordinal, single_ordinal
from .simulator import (TimeGrid, outcome_bits, sample_outcomes, setting_probabilities,
                        shot_rng)

PREP_LABELS = ("H", "XH", "HS", "XHS", "1", "X")
MEAS_LABELS = ("H", "HSdg", "1")


@dataclass
class SettingsTable:
    prep: np.ndarray  # (R, N) in 0..5
    meas: np.ndarray  # (R, N) in 0..2
    seed: Optional[int] = None

    def __post_init__(self):
        self.prep = np.asarray(self.prep, dtype=np.int64)
        self.meas = np.asarray(self.meas, dtype=np.int64)
        if self.prep.ndim != 2 or self.prep.shape != self.meas.shape:
            raise ValueError("prep and meas must be (R, N) arrays of equal shape")
        if self.prep.shape[0] < 1:
            raise ValueError("need at least one setting")
        if self.prep.min() < 0 or self.prep.max() > 5 or self.meas.min() < 0 or self.meas.max() > 2:
            raise ValueError("setting index out of range")

    @property
    def n_settings(self) -> int:
        return self.prep.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.prep.shape[1]

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "n_settings": self.n_settings, "seed": self.seed,
                "prep": self.prep.tolist(), "meas": self.meas.tolist()}

    @classmethod
    def from_dict(cls, doc) -> "SettingsTable":
        return cls(np.array(doc["prep"]), np.array(doc["meas"]), doc.get("seed"))

    def subset(self, rows) -> "SettingsTable":
        return SettingsTable(self.prep[rows], self.meas[rows], self.seed)


def draw_settings(n_qubits: int, n_settings: int, seed: int) -> SettingsTable:
    """I.i.d. uniform preparation (6 values) and measurement (3 values) indices."""
    if n_settings < 1:
        raise ValueError("n_settings must be >= 1")
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    rng = np.random.default_rng(seed)
    prep = rng.integers(0, 6, size=(n_settings, n_qubits))
    meas = rng.integers(0, 3, size=(n_settings, n_qubits))
    return SettingsTable(prep, meas, seed)


def compatibility(config: Configuration, settings: SettingsTable, r: int, pair) -> int:
    """1 if setting ``r`` realises ``config`` on its active qubits of ``pair``."""
    i, j = pair
    prep, meas = settings.prep[r], settings.meas[r]
    ok = True
    if config.kind in (ConfigKind.SINGLE_I, ConfigKind.PAIR):
        ok &= prep[i] == config.prep_i.index and meas[i] == int(config.obs_i)
    if config.kind in (ConfigKind.SINGLE_J, ConfigKind.PAIR):
        ok &= prep[j] == config.prep_j.index and meas[j] == int(config.obs_j)
    return int(ok)


def setting_ordinals(prep: np.ndarray, meas: np.ndarray, pair) -> tuple:
    """Configuration rows realised by each setting: (single i, single j, pair), each (R,)."""
    i, j = pair
    return (
        single_ordinal(prep[..., i], meas[..., i], 0),
        single_ordinal(prep[..., j], meas[..., j], 1),
        pair_ordinal(prep[..., i], prep[..., j], meas[..., i], meas[..., j]),
    )


def observed_rows(settings: SettingsTable, pair) -> np.ndarray:
    """Sorted configuration rows with at least one compatible setting."""
    return np.unique(np.concatenate(setting_ordinals(settings.prep, settings.meas, pair)))


@dataclass
class SettingExpectations:
    """Per-setting sign averages <Z_k>^(r)(t) and <Z_k Z_l>^(r)(t).

    ``z1`` has shape (N_T, R, N) and ``z2`` shape (N_T, R, N, N).
    """

    settings: SettingsTable
    grid: TimeGrid
    z1: np.ndarray
    z2: np.ndarray

    @classmethod
    def from_probabilities(cls, settings, grid, probs) -> "SettingExpectations":
        signs = 1.0 - 2.0 * outcome_bits(settings.n_qubits)
        z1 = probs @ signs
        z2 = np.einsum("trs,si,sj->trij", probs, signs, signs, optimize=True)
        return cls(settings, grid, z1, z2)

    @classmethod
    def from_shots(cls, settings, grid, shots) -> "SettingExpectations":
        n_t, n_r, n_m, n = shots.shape
        z1 = np.empty((n_t, n_r, n))
        z2 = np.empty((n_t, n_r, n, n))
        for s in range(n_t):
            sig = 1.0 - 2.0 * shots[s]
            z1[s] = sig.mean(axis=1)
            z2[s] = np.swapaxes(sig, 1, 2) @ sig / n_m
        return cls(settings, grid, z1, z2)


@dataclass
class ObservedSeries:
    pair: tuple
    rows: np.ndarray  # configuration ordinals, ascending
    series: np.ndarray  # (C, N_T)
    weights: np.ndarray  # (C,) compatible-setting counts

    @property
    def configurations(self) -> list:
        configs = pauli_core.enumerate_configurations()
        return [configs[k] for k in self.rows]

    def __len__(self):
        return len(self.rows)


def series_from_expectations(exp: SettingExpectations, pair, setting_weights=None) -> ObservedSeries:
    """Compatibility-filtered averages for one pair.

    ``setting_weights`` gives a multiplicity per setting (used by the
    bootstrap); by default every setting counts once.
    """
    i, j = pair
    if not 0 <= i < j < exp.settings.n_qubits:
        raise IndexError(f"invalid pair {pair}")
    n_r = exp.settings.n_settings
    w = np.ones(n_r) if setting_weights is None else np.asarray(setting_weights, dtype=float)
    ords = setting_ordinals(exp.settings.prep, exp.settings.meas, pair)
    values = (exp.z1[:, :, i], exp.z1[:, :, j], exp.z2[:, :, i, j])
    n_t = exp.z1.shape[0]
    sums = np.zeros((pauli_core.N_CONFIGS, n_t))
    counts = np.zeros(pauli_core.N_CONFIGS)
    for o, v in zip(ords, values):
        np.add.at(sums, o, (v * w).T)
        counts += np.bincount(o, weights=w, minlength=pauli_core.N_CONFIGS)
    rows = np.nonzero(counts > 0)[0]
    return ObservedSeries(tuple(pair), rows, sums[rows] / counts[rows, None],
                          np.rint(counts[rows]).astype(int))


# ---------------------------------------------------------------------------
# Datasets

def _header(settings: SettingsTable, grid: TimeGrid, **extra) -> dict:
    doc = {"n_qubits": settings.n_qubits, "n_settings": settings.n_settings}
    doc.update(extra)
    doc.update({"n_times": grid.n_points, "dt": grid.dt, "seed": settings.seed,
                "prep": settings.prep.tolist(), "meas": settings.meas.tolist()})
    return doc


@dataclass
class BitstringDataset:
    """Shots of shape (N_T, R, N_M, N) as 0/1 bytes plus the settings and grid."""

    settings: SettingsTable
    grid: TimeGrid
    shots: np.ndarray
    _exp: Optional[SettingExpectations] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.shots = np.asarray(self.shots, dtype=np.uint8)
        n_t, n_r = self.grid.n_points, self.settings.n_settings
        if self.shots.ndim != 4 or self.shots.shape[:2] != (n_t, n_r) \
                or self.shots.shape[3] != self.settings.n_qubits:
            raise ValueError(f"shots shape {self.shots.shape} inconsistent with settings/grid")

    @property
    def n_shots(self) -> int:
        return self.shots.shape[2]

    def expectations(self) -> SettingExpectations:
        if self.shots.size == 0:
            raise EmptyDataset("dataset holds no shots")
        if self._exp is None:
            self._exp = SettingExpectations.from_shots(self.settings, self.grid, self.shots)
        return self._exp

    def write(self, path) -> None:
        n = self.settings.n_qubits
        with open(path, "w") as fh:
            fh.write(json.dumps(_header(self.settings, self.grid, n_shots=self.n_shots)) + "\n")
            for s in range(self.grid.n_points):
                chars = (self.shots[s] + ord("0")).astype(np.uint8)
                for r in range(self.settings.n_settings):
                    words = chars[r].tobytes()
                    shots = [words[k * n:(k + 1) * n].decode() for k in range(self.n_shots)]
                    fh.write(json.dumps({"t": s + 1, "r": r, "shots": shots}) + "\n")

    @classmethod
    def read(cls, path) -> "BitstringDataset":
        with open(path) as fh:
            head = json.loads(fh.readline())
            settings = SettingsTable(np.array(head["prep"]), np.array(head["meas"]), head.get("seed"))
            grid = TimeGrid(head["dt"], head["n_times"])
            n = head["n_qubits"]
            shots = np.zeros((grid.n_points, settings.n_settings, head["n_shots"], n), np.uint8)
            seen = 0
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                raw = np.frombuffer("".join(rec["shots"]).encode(), dtype=np.uint8)
                if raw.size != head["n_shots"] * n:
                    raise ValueError(f"record (t={rec['t']}, r={rec['r']}) has wrong shot count/length")
                shots[rec["t"] - 1, rec["r"]] = (raw - ord("0")).reshape(-1, n)
                seen += 1
        if seen != grid.n_points * settings.n_settings:
            raise ValueError(f"expected {grid.n_points * settings.n_settings} records, read {seen}")
        return cls(settings, grid, shots)


@dataclass
class ExactDataset:
    """Infinite-shot stand-in: Born probabilities (N_T, R, 2^N) per setting."""

    settings: SettingsTable
    grid: TimeGrid
    probs: np.ndarray
    _exp: Optional[SettingExpectations] = field(default=None, repr=False, compare=False)

    def expectations(self) -> SettingExpectations:
        if self._exp is None:
            self._exp = SettingExpectations.from_probabilities(self.settings, self.grid, self.probs)
        return self._exp

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps(_header(self.settings, self.grid, mode="exact")) + "\n")
            for s in range(self.grid.n_points):
                for r in range(self.settings.n_settings):
                    rec = {"t": s + 1, "r": r, "probs": self.probs[s, r].tolist()}
                    fh.write(json.dumps(rec) + "\n")

    @classmethod
    def read(cls, path) -> "ExactDataset":
        with open(path) as fh:
            head = json.loads(fh.readline())
            settings = SettingsTable(np.array(head["prep"]), np.array(head["meas"]), head.get("seed"))
            grid = TimeGrid(head["dt"], head["n_times"])
            probs = np.zeros((grid.n_points, settings.n_settings, 2 ** head["n_qubits"]))
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    probs[rec["t"] - 1, rec["r"]] = rec["probs"]
        return cls(settings, grid, probs)


def read_dataset(path):
    """Open either dataset flavour, dispatching on the header."""
    with open(path) as fh:
        head = json.loads(fh.readline())
    return ExactDataset.read(path) if head.get("mode") == "exact" else BitstringDataset.read(path)


def simulate_exact(model: LiouvillianModel, settings: SettingsTable, grid: TimeGrid,
                   substeps: int = 32) -> ExactDataset:
    probs = setting_probabilities(model, settings.prep, settings.meas, grid, substeps)
    return ExactDataset(settings, grid, probs)


def simulate_dataset(model: LiouvillianModel, settings: SettingsTable, grid: TimeGrid,
                     n_shots: int, seed: int, substeps: int = 32) -> BitstringDataset:
    """Evolve every setting and draw ``n_shots`` bitstrings per (time, setting)."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    probs = setting_probabilities(model, settings.prep, settings.meas, grid, substeps)
    bits = outcome_bits(settings.n_qubits)
    shots = np.empty((grid.n_points, settings.n_settings, n_shots, settings.n_qubits), np.uint8)
    for s in range(grid.n_points):
        for r in range(settings.n_settings):
            shots[s, r] = bits[sample_outcomes(probs[s, r], n_shots, shot_rng(seed, r, s))]
    return BitstringDataset(settings, grid, shots)


def estimate_series(data, pair, setting_weights=None) -> ObservedSeries:
    """Per-configuration time series for ``pair`` from a bitstring or exact dataset."""
    return series_from_expectations(data.expectations(), pair, setting_weights)


def estimate_series_exact(model: LiouvillianModel, settings: SettingsTable, grid: TimeGrid,
                          pair, substeps: int = 32) -> ObservedSeries:
    """Shot-noise-free series; spectator randomization is kept."""
    return estimate_series(simulate_exact(model, settings, grid, substeps), pair)


def complete_settings(n_qubits: int) -> SettingsTable:
    """Every (prep, meas) combination once: 18^N rows, a perfectly balanced design.

    Averages over compatible settings then realise the maximally mixed state
    on inactive qubits exactly, so no randomization error remains.
    """
    if n_qubits > 3:
        raise ValueError("complete tables are limited to N <= 3")
    grids = np.meshgrid(*([np.arange(6)] * n_qubits + [np.arange(3)] * n_qubits), indexing="ij")
    flat = np.stack([g.reshape(-1) for g in grids], axis=1)
    return SettingsTable(flat[:, :n_qubits], flat[:, n_qubits:])
