import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chshlab.bell import make_observable
from chshlab.operators import (
    ComplexOperator,
    ConvergenceError,
    NotHermitianError,
    StateVector,
    commutator,
    hermitian_eigensystem,
    identity,
    matrix_exponential_i,
    operator_norm,
    random_hermitian,
    random_involution,
    sigma_x,
    sigma_y,
    sigma_z,
    tensor_product,
)

seeds = st.integers(min_value=0, max_value=2**63 - 1)


def _random_2x2(rng):
    return ComplexOperator(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))


class TestComplexOperator:
    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            ComplexOperator(np.zeros((2, 3)))

    def test_wrong_hermitian_flag_rejected(self):
        with pytest.raises(NotHermitianError):
            ComplexOperator([[0, 1], [0, 0]], hermitian=True)

    def test_entries_are_immutable(self):
        op = sigma_x()
        with pytest.raises(ValueError):
            op.matrix[0, 0] = 5

    def test_state_normalization_flag_checked(self):
        with pytest.raises(ValueError):
            StateVector([1, 1], normalized=True)
        assert StateVector([3, 4]).normalize().norm() == pytest.approx(1.0)


class TestTensorProduct:
    def test_identity(self):
        assert tensor_product(identity(2), identity(2)).allclose(np.eye(4))

    def test_sigma_z_kron_identity(self):
        assert tensor_product(sigma_z(), identity(2)).allclose(np.diag([1, 1, -1, -1]))

    def test_entry_layout_matches_definition(self):
        rng = np.random.default_rng(3)
        a = ComplexOperator(rng.normal(size=(2, 2)))
        b = ComplexOperator(rng.normal(size=(3, 3)))
        t = tensor_product(a, b).matrix
        for i in range(2):
            for j in range(2):
                for k in range(3):
                    for l in range(3):
                        assert t[i * 3 + k, j * 3 + l] == a.matrix[i, j] * b.matrix[k, l]

    def test_hermitian_flag_propagates(self):
        assert tensor_product(sigma_x(), sigma_z()).hermitian
        assert not tensor_product(sigma_x(), ComplexOperator([[0, 1], [0, 0]])).hermitian

    def test_xx_on_pair_state_gives_unit_correlation(self):
        phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
        xx = tensor_product(sigma_x(), sigma_x()).matrix
        # E(0, 0) with analyzers along x: |HH>+|VV> is a +1 eigenvector of XX
        assert np.vdot(phi, xx @ phi).real == pytest.approx(1.0, abs=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_mixed_product_property(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c, d = (_random_2x2(rng) for _ in range(4))
        lhs = tensor_product(a, b) @ tensor_product(c, d)
        rhs = tensor_product(a @ c, b @ d)
        assert lhs.dim == 4
        assert lhs.allclose(rhs, atol=1e-12)


class TestCommutator:
    def test_self_commutator_vanishes(self):
        assert commutator(sigma_x(), sigma_x()).allclose(np.zeros((2, 2)))

    def test_pauli_xy(self):
        # hand product: XY = [[i, 0], [0, -i]], YX = -XY
        xy = np.array([[1j, 0], [0, -1j]])
        assert commutator(sigma_x(), sigma_y()).allclose(2 * xy)
        assert commutator(sigma_x(), sigma_y()).allclose(2j * sigma_z().matrix)

    def test_disjoint_tensor_factors_commute(self):
        rng = np.random.default_rng(11)
        a, b = _random_2x2(rng), _random_2x2(rng)
        c = commutator(tensor_product(a, identity(2)), tensor_product(identity(2), b))
        assert c.allclose(np.zeros((4, 4)), atol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            commutator(identity(2), identity(3))


class TestEigensystem:
    def test_diagonal(self):
        es = hermitian_eigensystem(ComplexOperator(np.diag([3.0, 1.0, 2.0]), hermitian=True))
        np.testing.assert_allclose(es.eigenvalues, [1, 2, 3])

    def test_sigma_x_closed_form(self):
        es = hermitian_eigensystem(sigma_x())
        np.testing.assert_allclose(es.eigenvalues, [-1, 1], atol=1e-15)
        s = 1 / math.sqrt(2)
        np.testing.assert_allclose(es.eigenvectors[:, 0], [s, -s], atol=1e-15)
        np.testing.assert_allclose(es.eigenvectors[:, 1], [s, s], atol=1e-15)

    def test_non_hermitian_rejected(self):
        with pytest.raises(NotHermitianError):
            hermitian_eigensystem(ComplexOperator([[0, 1], [0, 0]]))

    def test_sweep_cap_raises(self, monkeypatch):
        import chshlab.operators as ops

        monkeypatch.setattr(ops, "MAX_JACOBI_SWEEPS", 0)
        with pytest.raises(ConvergenceError):
            hermitian_eigensystem(random_hermitian(4, 0))

    @pytest.mark.parametrize("dim", [1, 2, 3, 5, 8, 16])
    def test_invariants_random(self, dim):
        m = random_hermitian(dim, 100 + dim)
        es = hermitian_eigensystem(m)
        scale = np.linalg.norm(m.matrix, 2)
        v = es.eigenvectors
        assert np.all(np.diff(es.eigenvalues) >= 0)
        for k in range(dim):
            residual = m.matrix @ v[:, k] - es.eigenvalues[k] * v[:, k]
            assert np.linalg.norm(residual) <= 1e-9 * scale
        assert np.max(np.abs(v.conj().T @ v - np.eye(dim))) <= 1e-9
        assert np.max(np.abs(es.reconstruct() - m.matrix)) <= 1e-9 * scale
        np.testing.assert_allclose(es.eigenvalues, np.linalg.eigvalsh(m.matrix), atol=1e-12 * scale)

    def test_deterministic(self):
        m = random_hermitian(6, 5)
        a, b = hermitian_eigensystem(m), hermitian_eigensystem(m)
        assert np.array_equal(a.eigenvectors, b.eigenvectors)
        assert np.array_equal(a.eigenvalues, b.eigenvalues)

    def test_degenerate_cluster_is_canonical(self):
        # same operator written in two different bases gives identical vectors
        rng = np.random.default_rng(2)
        u = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
        d = np.diag([1.0, 1.0, 1.0, 2.0])
        m1 = ComplexOperator(u @ d @ u.conj().T, hermitian=True)
        perm = np.eye(4)[:, [1, 0, 2, 3]]
        m2 = ComplexOperator(u @ perm @ d @ perm.T @ u.conj().T, hermitian=True)
        e1, e2 = hermitian_eigensystem(m1), hermitian_eigensystem(m2)
        np.testing.assert_allclose(e1.eigenvectors, e2.eigenvectors, atol=1e-9)
        v = e1.eigenvectors
        assert np.max(np.abs(v.conj().T @ v - np.eye(4))) < 1e-12


class TestOperatorNorm:
    def test_identity(self):
        assert operator_norm(identity(4)) == 1.0

    def test_scaling(self):
        assert operator_norm(2 * sigma_z()) == 2.0

    def test_classical_diagonal_bell_operator(self):
        # every diagonal entry is a +/-1 CHSH combination
        entries = []
        for a1 in (1, -1):
            for a2 in (1, -1):
                for b1 in (1, -1):
                    for b2 in (1, -1):
                        entries.append(a1 * b1 + a2 * b1 + a1 * b2 - a2 * b2)
        b = ComplexOperator(np.diag(entries).astype(float), hermitian=True)
        assert operator_norm(b) <= 2.0

    @pytest.mark.parametrize("dim", [2, 5, 16])
    def test_matches_jacobi(self, dim):
        m = random_hermitian(dim, dim)
        es = hermitian_eigensystem(m)
        assert operator_norm(m) == pytest.approx(np.max(np.abs(es.eigenvalues)), abs=1e-10)

    @pytest.mark.parametrize("dim", [2, 4, 8])
    def test_rayleigh_lower_bound(self, dim):
        m = random_hermitian(dim, 40 + dim)
        rng = np.random.default_rng(dim)
        v = rng.normal(size=(10_000, dim)) + 1j * rng.normal(size=(10_000, dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        rayleigh = np.abs(np.einsum("ni,ij,nj->n", v.conj(), m.matrix, v))
        norm = operator_norm(m)
        assert rayleigh.max() <= norm + 1e-6
        top = hermitian_eigensystem(m)
        k = int(np.argmax(np.abs(top.eigenvalues)))
        w = top.eigenvectors[:, k]
        assert abs(np.vdot(w, m.matrix @ w)) == pytest.approx(norm, abs=1e-10)


class TestMatrixExponential:
    def test_zero_time_is_identity(self):
        u = matrix_exponential_i(random_hermitian(5, 1), 0.0)
        assert u.allclose(np.eye(5), atol=1e-12)

    def test_sigma_z_half_turn(self):
        u = matrix_exponential_i(sigma_z(), math.pi)
        expected = np.diag([np.exp(-1j * math.pi), np.exp(1j * math.pi)])
        assert u.allclose(expected, atol=1e-15)
        assert u.allclose(-np.eye(2), atol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.floats(-20, 20), st.integers(1, 8))
    def test_norm_preserved(self, seed, t, dim):
        rng = np.random.default_rng(seed)
        h = random_hermitian(dim, rng)
        psi = StateVector(rng.normal(size=dim) + 1j * rng.normal(size=dim))
        u = matrix_exponential_i(h, t)
        assert (u @ psi).norm() == pytest.approx(psi.norm(), abs=1e-10)
        assert u.is_unitary(1e-10)

    def test_group_property(self):
        h = random_hermitian(7, 9)
        lhs = matrix_exponential_i(h, 0.7) @ matrix_exponential_i(h, 1.9)
        assert lhs.allclose(matrix_exponential_i(h, 2.6), atol=1e-9)

    def test_non_hermitian_rejected(self):
        with pytest.raises(NotHermitianError):
            matrix_exponential_i(ComplexOperator([[0, 1], [0, 0]]), 1.0)


class TestRandomInvolution:
    def test_one_dimensional(self):
        values = {random_involution(1, s).matrix[0, 0].real for s in range(20)}
        assert values == {1.0, -1.0}

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 9), seeds)
    def test_structure(self, dim, seed):
        m = random_involution(dim, seed)
        assert m.is_hermitian(1e-12)
        assert (m @ m).allclose(np.eye(dim), atol=1e-10)
        assert operator_norm(m) == pytest.approx(1.0, abs=1e-10)
        assert commutator(m, m).allclose(np.zeros((dim, dim)), atol=0)

    def test_balanced_signature(self):
        for dim in (2, 4, 6):
            trace = np.trace(random_involution(dim, dim).matrix).real
            assert trace == pytest.approx(0.0, abs=1e-10)
        for seed in range(10):
            assert abs(np.trace(random_involution(5, seed).matrix).real) == pytest.approx(1.0, abs=1e-10)

    def test_seeded(self):
        assert np.array_equal(random_involution(4, 77).matrix, random_involution(4, 77).matrix)
        assert not np.array_equal(random_involution(4, 77).matrix, random_involution(4, 78).matrix)


def test_observable_eigenvalues_via_jacobi():
    es = hermitian_eigensystem(make_observable(math.pi / 8).matrix)
    np.testing.assert_allclose(es.eigenvalues, [-1, 1], atol=1e-12)
