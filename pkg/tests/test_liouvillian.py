import numpy as np
import pytest
from hypothesis import given, strategies as st

from liouvlearn import pauli_core
from liouvlearn.exceptions import DimensionMismatch, NotPositiveSemiDefinite
from liouvlearn.liouvillian import (DissipatorMatrix, HamiltonianCoefficients, LiouvillianModel,
                                    build_xy_model, diagonalize_dissipator, random_model,
                                    restrict_to_pair)


def test_hamiltonian_parameter_count():
    assert HamiltonianCoefficients(5).n_parameters == 3 * 5 + 9 * 10


def test_hamiltonian_rejects_lower_triangle():
    pair = np.zeros((2, 2, 3, 3))
    pair[1, 0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        HamiltonianCoefficients(2, pair=pair)
    with pytest.raises(DimensionMismatch):
        HamiltonianCoefficients(2, single=np.zeros((3, 3)))


def test_dissipator_checks():
    d = np.zeros((3, 3), complex)
    d[0, 0] = -1e-3
    with pytest.raises(NotPositiveSemiDefinite):
        DissipatorMatrix(1, d)
    d = np.zeros((3, 3), complex)
    d[0, 1] = 1j
    with pytest.raises(ValueError):
        DissipatorMatrix(1, d)
    # tiny negative eigenvalues within the tolerance are accepted
    d = np.diag([1.0, -5e-11, 0.0]).astype(complex)
    assert DissipatorMatrix(1, d).min_eigenvalue() == pytest.approx(-5e-11)


def test_dephasing_jumps():
    model = build_xy_model(3, gamma=0.5)
    jumps = diagonalize_dissipator(model.dissipator)
    assert np.allclose(jumps.rates, 0.5)
    assert jumps.rates.size == 3
    for op in jumps.operators:
        k = np.argmax(np.abs(op))
        assert k % 3 == 2 and np.isclose(abs(op[k]), 1.0)


def test_zero_dissipator_has_no_jumps():
    assert diagonalize_dissipator(DissipatorMatrix(4)).rates.size == 0


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_jump_reconstruction(seed, n):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((3 * n, 3)) + 1j * rng.standard_normal((3 * n, 3))
    d = DissipatorMatrix(n, b @ b.conj().T)
    jumps = diagonalize_dissipator(d)
    assert np.all(np.diff(jumps.rates) <= 0)
    assert np.linalg.norm(jumps.reconstruct() - d.entries) < 1e-10


def test_xy_model_values():
    m = build_xy_model(2, J=4, B=1, alpha=1.5, gamma=0)
    assert m.hamiltonian.pair[0, 1, 0, 0] == 2 and m.hamiltonian.pair[0, 1, 1, 1] == 2
    assert np.all(m.hamiltonian.single[:, 2] == 1)
    m4 = build_xy_model(4, J=4, B=1, alpha=1.5)
    assert m4.hamiltonian.pair[0, 2, 0, 0] == pytest.approx(2 / 2 ** 1.5)
    assert m4.hamiltonian.pair[0, 3, 0, 0] == pytest.approx(0.3849, abs=1e-4)
    m10 = build_xy_model(10, gamma=0.5)
    d = m10.dissipator.entries
    assert np.count_nonzero(d) == 10
    assert np.all(d[np.nonzero(d)] == 0.5)
    assert all(p % 3 == 2 for p in np.nonzero(d)[0])


@given(st.integers(2, 8), st.floats(0.1, 3.0), st.floats(0.0, 2.0))
def test_xy_powerlaw_invariant(n, alpha, gamma):
    m = build_xy_model(n, J=4, alpha=alpha, gamma=gamma)
    for i in range(n):
        for j in range(i + 1, n):
            assert m.hamiltonian.pair[i, j, 0, 0] * abs(i - j) ** alpha == pytest.approx(2.0)
    assert m.dissipator.min_eigenvalue() >= 0


def test_xy_model_rejects_bad_args():
    with pytest.raises(ValueError):
        build_xy_model(1)
    with pytest.raises(ValueError):
        build_xy_model(3, alpha=0)


def test_restrict_xy_pair():
    x = restrict_to_pair(build_xy_model(2, J=4, B=1, alpha=1.5, gamma=0.5), 0, 1)
    nz = {int(k): x[k] for k in np.nonzero(x)[0]}
    # h_i,z, h_j,z, h_xx, h_yy, d_ii(zz), d_jj(zz)
    assert nz == {2: 1.0, 5: 1.0, 6: 2.0, 10: 2.0, 17: 0.5, 26: 0.5}


def test_restrict_zero_and_range():
    assert not restrict_to_pair(LiouvillianModel.zero(3), 0, 2).any()
    with pytest.raises(IndexError):
        restrict_to_pair(LiouvillianModel.zero(3), 2, 1)
    with pytest.raises(IndexError):
        restrict_to_pair(LiouvillianModel.zero(3), 0, 3)


@given(st.integers(0, 2**32 - 1))
def test_restrict_decode_identity(seed):
    model = random_model(4, np.random.default_rng(seed))
    i, j = 1, 3
    h_i, h_j, h_ij, d = pauli_core.decode(restrict_to_pair(model, i, j))
    assert np.array_equal(h_i, model.hamiltonian.single[i])
    assert np.array_equal(h_j, model.hamiltonian.single[j])
    assert np.array_equal(h_ij, model.hamiltonian.pair[i, j])
    idx = np.r_[3 * i:3 * i + 3, 3 * j:3 * j + 3]
    assert np.allclose(d, model.dissipator.entries[np.ix_(idx, idx)], atol=1e-15)


def test_json_roundtrip(tmp_path, rng):
    model = random_model(3, rng)
    path = tmp_path / "m.json"
    model.to_json(path)
    back = LiouvillianModel.from_json(path)
    assert np.array_equal(back.hamiltonian.single, model.hamiltonian.single)
    assert np.array_equal(back.hamiltonian.pair, model.hamiltonian.pair)
    assert np.array_equal(back.dissipator.entries, model.dissipator.entries)
    doc = build_xy_model(3, gamma=0.5).to_dict()
    assert len(doc["d_entries"]) == 3 and len(doc["h_pair"]) == 3


def test_model_size_mismatch():
    with pytest.raises(DimensionMismatch):
        LiouvillianModel(HamiltonianCoefficients(2), DissipatorMatrix(3))
