import numpy as np
import pytest
from conftest import random_hermitian, random_unit
from hypothesis import given, settings
from hypothesis import strategies as st

from aaqc.errors import NoConvergence, NonHermitian, NonUnitary, UnnormalizedVector
from aaqc.numerics import (
    TWO_PI,
    circular_distance,
    eig_hermitian,
    eig_unitary,
    exp_hermitian,
    is_unitary,
    jacobi_eigh,
    kron,
    normalize,
    projector,
    wrap_to_pi,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def hermitian_eigs_closed_form(h):
    """Eigenvalues of a Hermitian matrix of size <= 3 from the characteristic polynomial."""
    n = h.shape[0]
    if n == 1:
        return np.array([h[0, 0].real])
    if n == 2:
        tr = (h[0, 0] + h[1, 1]).real
        disc = np.sqrt(((h[0, 0] - h[1, 1]).real / 2) ** 2 + abs(h[0, 1]) ** 2)
        return np.array([tr / 2 - disc, tr / 2 + disc])
    # trigonometric solution of the depressed cubic
    q = np.trace(h).real / 3
    b = h - q * np.eye(3)
    p = np.sqrt(np.trace(b @ b).real / 6)
    if p == 0:
        return np.full(3, q)
    r = np.clip(np.linalg.det(b / p).real / 2, -1, 1)
    phi = np.arccos(r) / 3
    roots = q + 2 * p * np.cos(phi + 2 * np.pi * np.arange(3) / 3)
    return np.sort(roots)


class TestEigHermitian:
    def test_diagonal(self):
        w, v = eig_hermitian(np.diag([0.0, 2.5]))
        assert np.allclose(w, [0, 2.5])
        assert np.allclose(v, np.eye(2))

    def test_pauli_x(self):
        w, _ = eig_hermitian([[0, 1], [1, 0]])
        assert np.allclose(w, [-1, 1], atol=1e-15)

    def test_clock_laplacian(self):
        h = np.diag([0.5, 1, 1, 1, 0.5]) - 0.5 * (np.eye(5, k=1) + np.eye(5, k=-1))
        for method in ("lapack", "jacobi"):
            w, _ = eig_hermitian(h, method=method)
            assert np.allclose(w, 1 - np.cos(np.arange(5) * np.pi / 5), atol=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(NonHermitian):
            eig_hermitian([[0, 1], [0, 0]])

    def test_jacobi_sweep_cap(self):
        with pytest.raises(NoConvergence):
            jacobi_eigh([[0, 1], [1, 0]], max_sweeps=0)

    def test_degenerate_order_is_deterministic(self):
        w1, v1 = eig_hermitian(np.eye(3))
        assert np.allclose(v1, np.eye(3))

    @settings(max_examples=60, deadline=None)
    @given(seeds, st.integers(1, 3))
    def test_closed_form_oracle(self, seed, dim):
        h = random_hermitian(np.random.default_rng(seed), dim)
        for method in ("lapack", "jacobi"):
            w, _ = eig_hermitian(h, method=method)
            assert np.allclose(w, hermitian_eigs_closed_form(h), atol=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(1, 12))
    def test_reconstruction_and_jacobi_agreement(self, seed, dim):
        h = random_hermitian(np.random.default_rng(seed), dim)
        w, v = eig_hermitian(h)
        assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - h)) <= 1e-9
        assert np.max(np.abs(v.conj().T @ v - np.eye(dim))) <= 1e-10
        wj, vj = eig_hermitian(h, method="jacobi")
        assert np.allclose(wj, w, atol=1e-10)
        assert np.max(np.abs(vj @ np.diag(wj) @ vj.conj().T - h)) <= 1e-9


class TestEigUnitary:
    def test_identity(self):
        assert np.allclose(eig_unitary(np.eye(3)).values, 0)

    def test_diagonal(self):
        th, _ = eig_unitary(np.diag([1, np.exp(-1j * TWO_PI / 3)]))
        assert np.allclose(th, [0, TWO_PI / 3])

    def test_optimal_block_at_pi(self):
        h0 = np.diag([0, TWO_PI / 3])
        v = np.array([1, 1]) / np.sqrt(2)
        u = exp_hermitian(h0, 1.0) @ (np.eye(2) + (np.exp(-1j * np.pi) - 1) * np.outer(v, v))
        th, _ = eig_unitary(u)
        assert np.allclose(th, [np.pi / 3, 4 * np.pi / 3], atol=1e-12)

    def test_rejects_non_unitary(self):
        with pytest.raises(NonUnitary):
            eig_unitary(np.diag([1.0, 2.0]))

    def test_conjugate_pair_cluster(self):
        # e^{-i t} and e^{+i t} share a Hermitian part; the second stage splits them
        th, v = eig_unitary(np.diag(np.exp(-1j * np.array([0.3, TWO_PI - 0.3, 1.0]))))
        assert np.allclose(np.sort(th), [0.3, 1.0, TWO_PI - 0.3])

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(1, 12))
    def test_reconstruction_and_completeness(self, seed, dim):
        rng = np.random.default_rng(seed)
        u = exp_hermitian(random_hermitian(rng, dim), 1.0)
        th, v = eig_unitary(u)
        assert np.all((th >= 0) & (th < TWO_PI))
        assert np.max(np.abs(v @ np.diag(np.exp(-1j * th)) @ v.conj().T - u)) <= 1e-9
        psi = random_unit(rng, dim)
        assert abs(np.sum(np.abs(v.conj().T @ psi) ** 2) - 1) <= 1e-9

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(1, 10))
    def test_matches_exponentiated_spectrum(self, seed, dim):
        rng = np.random.default_rng(seed)
        h = random_hermitian(rng, dim)
        lam = np.linalg.eigvalsh(h)
        T = 0.99 * TWO_PI / (np.max(np.abs(lam)) * 2 + 1e-12)
        th, _ = eig_unitary(exp_hermitian(h, T))
        expected = np.mod(lam * T, TWO_PI)
        assert max(np.min(circular_distance(x, th)) for x in expected) <= 1e-9

    def test_degenerate_spectrum(self, rng):
        q, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
        u = (q * np.exp(-1j * np.array([1, 1, 1, 2, 2, 4]))) @ q.conj().T
        th, v = eig_unitary(u)
        assert np.allclose(th, [1, 1, 1, 2, 2, 4], atol=1e-10)
        assert np.max(np.abs(v.conj().T @ v - np.eye(6))) <= 1e-10


class TestHelpers:
    def test_exp_of_zero(self):
        assert np.allclose(exp_hermitian(np.zeros((3, 3)), 2.0), np.eye(3))

    def test_exp_diagonal(self):
        u = exp_hermitian(np.diag([0, 2.0]), 0.5)
        assert np.allclose(u, np.diag([1, np.exp(-1j)]))

    def test_exp_inverse(self, rng):
        h = random_hermitian(rng, 5)
        assert np.allclose(exp_hermitian(h, 0.7) @ exp_hermitian(h, -0.7), np.eye(5), atol=1e-10)
        assert is_unitary(exp_hermitian(h, 0.7))

    def test_kron(self):
        assert np.allclose(kron(np.eye(2), np.eye(2)), np.eye(4))
        assert np.allclose(kron([1, 0], [0, 1], [1, 0]), np.eye(8)[2])

    def test_projector(self, rng):
        assert np.allclose(projector([1, 0, 0]), np.diag([1, 0, 0]))
        p = projector(random_unit(rng, 4))
        assert np.allclose(p @ p, p, atol=1e-12)
        assert np.allclose(p, p.conj().T, atol=1e-12)
        assert abs(np.trace(p) - 1) < 1e-12

    def test_projector_needs_unit_vector(self):
        with pytest.raises(UnnormalizedVector):
            projector([1, 1])
        with pytest.raises(UnnormalizedVector):
            normalize([0, 0])

    def test_circle_helpers(self):
        assert np.isclose(circular_distance(0.1, TWO_PI - 0.1), 0.2)
        assert np.isclose(wrap_to_pi(3 * np.pi / 2), -np.pi / 2)
        assert wrap_to_pi(-np.pi) == np.pi
