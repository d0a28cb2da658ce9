import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmemcap.errors import DimensionError, IncompleteProjectorsError, InvalidStateError, NotHermitianError
from qmemcap.operators import (
    DensityOperator,
    HermitianSpectrum,
    eig_hermitian,
    entropies,
    partial_trace,
    pinch,
    psd_inv_sqrt,
    psd_sqrt,
    random_density_matrix,
    random_unitary,
    tensor_all,
    tensor_product,
    trace_distance,
    von_neumann_entropy,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 6)


def test_entropy_known_values():
    assert von_neumann_entropy(np.diag([0.25, 0.75])) == pytest.approx(0.811278124459, abs=1e-12)
    assert von_neumann_entropy(np.eye(4) / 4) == pytest.approx(2.0, abs=1e-12)
    assert von_neumann_entropy(np.diag([1.0, 0.0])) == 0.0


def test_entropy_of_pure_state_is_zero(rng):
    psi = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    psi /= np.linalg.norm(psi)
    assert abs(von_neumann_entropy(np.outer(psi, psi.conj()))) < 1e-10


def test_batched_entropies_match_single(rng):
    stack = np.stack([random_density_matrix(3, rng) for _ in range(5)])
    np.testing.assert_allclose(entropies(stack), [von_neumann_entropy(s) for s in stack], atol=1e-12)


def test_density_operator_validation():
    DensityOperator(np.eye(2) / 2)
    with pytest.raises(InvalidStateError):
        DensityOperator(np.diag([1.5, -0.5]))
    with pytest.raises(InvalidStateError):
        DensityOperator(np.eye(2))
    with pytest.raises(InvalidStateError):
        DensityOperator(np.array([[0.5, 1.0], [0.0, 0.5]]))
    with pytest.raises(DimensionError):
        DensityOperator(np.ones((2, 3)))


def test_density_operator_is_read_only():
    rho = DensityOperator.maximally_mixed(2)
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 1.0


def test_kron_convention():
    a = np.array([[1, 2], [3, 4]])
    b = np.array([[0, 1], [1, 0]])
    t = tensor_product(a, b)
    assert t[0 * 2 + 1, 1 * 2 + 0] == a[0, 1] * b[1, 0]
    np.testing.assert_array_equal(tensor_all([a, b]), t)


def test_partial_trace_of_product(rng):
    a, b, c = (random_density_matrix(d, rng) for d in (2, 3, 2))
    abc = tensor_all([a, b, c])
    np.testing.assert_allclose(partial_trace(abc, 1, (2, 3, 2)), b, atol=1e-12)
    np.testing.assert_allclose(partial_trace(abc, [0, 2], (2, 3, 2)), np.kron(a, c), atol=1e-12)
    np.testing.assert_allclose(partial_trace(abc, 0, (2, 3, 2)), a, atol=1e-12)


def test_partial_trace_of_bell_state_is_maximally_mixed():
    psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    rho = np.outer(psi, psi)
    np.testing.assert_allclose(partial_trace(rho, 0, (2, 2)), np.eye(2) / 2, atol=1e-15)
    with pytest.raises(DimensionError):
        partial_trace(rho, 0, (2, 3))


def test_eig_hermitian_merges_degenerate_eigenvalues():
    spec = eig_hermitian(np.diag([0.25, 0.5, 0.25]))
    np.testing.assert_allclose(spec.eigenvalues, [0.5, 0.25])
    np.testing.assert_array_equal(spec.ranks, [1, 2])
    np.testing.assert_allclose(spec.reconstruct(), np.diag([0.25, 0.5, 0.25]), atol=1e-14)
    with pytest.raises(NotHermitianError):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_pinch_checks_completeness(rng):
    rho = random_density_matrix(2, rng)
    spec = eig_hermitian(np.diag([0.3, 0.7]))
    np.testing.assert_allclose(pinch(rho, spec), np.diag(np.diag(rho)), atol=1e-14)
    partial = HermitianSpectrum(spec.eigenvalues[:1], spec.projectors[:1])
    with pytest.raises(IncompleteProjectorsError):
        pinch(rho, partial)


def test_trace_distance_has_no_half_factor():
    assert trace_distance(np.diag([1, 0]), np.diag([0, 1])) == pytest.approx(2.0)


def test_psd_sqrt_and_inverse(rng):
    rho = random_density_matrix(4, rng, rank=2)
    s = psd_sqrt(rho)
    np.testing.assert_allclose(s @ s, rho, atol=1e-12)
    inv = psd_inv_sqrt(rho)
    support = inv @ rho @ inv
    np.testing.assert_allclose(support @ support, support, atol=1e-9)
    assert np.trace(support).real == pytest.approx(2.0)


@given(seeds, dims)
def test_entropy_bounds(seed, d):
    rho = random_density_matrix(d, np.random.default_rng(seed))
    s = von_neumann_entropy(rho)
    assert -1e-12 <= s <= math.log2(d) + 1e-12


@given(seeds, dims)
def test_entropy_is_unitarily_invariant(seed, d):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(d, rng)
    u = random_unitary(d, rng)
    assert von_neumann_entropy(u @ rho @ u.conj().T) == pytest.approx(von_neumann_entropy(rho), abs=1e-9)


@given(seeds, st.integers(2, 4), st.integers(2, 3))
def test_entropy_subadditivity_and_trace_preservation(seed, da, db):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(da * db, rng)
    ra, rb = partial_trace(rho, 0, (da, db)), partial_trace(rho, 1, (da, db))
    assert np.trace(ra).real == pytest.approx(1.0)
    assert von_neumann_entropy(rho) <= von_neumann_entropy(ra) + von_neumann_entropy(rb) + 1e-9


@given(seeds, dims)
def test_trace_distance_triangle(seed, d):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density_matrix(d, rng) for _ in range(3))
    assert 0 <= trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-12
    assert trace_distance(a, b) <= 2 + 1e-12


@given(seeds, st.integers(2, 6))
def test_spectrum_projectors_are_complete(seed, d):
    rho = random_density_matrix(d, np.random.default_rng(seed))
    spec = eig_hermitian(rho)
    np.testing.assert_allclose(sum(spec.projectors), np.eye(d), atol=1e-10)
    for p in spec.projectors:
        np.testing.assert_allclose(p @ p, p, atol=1e-10)
