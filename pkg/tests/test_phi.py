import math

import mpmath
import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from lawsonrd.discretization import build_fd_dirichlet, build_fd_mixed
from lawsonrd.phi import (LinearPropagator, PhiRequest, augmented_oracle, phi_scalar,
                          propagator_apply)


def quad_phi(z, j):
    """phi_j(z) = int_0^1 e^{(1-s) z} s^{j-1}/(j-1)! ds in high precision."""
    mpmath.mp.dps = 40
    if j == 0:
        return complex(mpmath.exp(z))
    f = lambda s: mpmath.exp((1 - s) * z) * s ** (j - 1) / mpmath.factorial(j - 1)
    return complex(mpmath.quad(f, [0, 1]))


def stable_matrix(rng, n):
    m = rng.standard_normal((n, n))
    return m - (np.max(np.real(np.linalg.eigvals(m))) + 1.0) * np.eye(n)


def test_phi_scalar_origin():
    assert phi_scalar(0.0, 2) == 0.5
    assert phi_scalar(0.0, 0) == 1.0
    for j in range(6):
        assert phi_scalar(0.0, j) == pytest.approx(1 / math.factorial(j), rel=1e-15)


def test_phi1_at_one():
    assert phi_scalar(1.0, 1) == pytest.approx(math.e - 1, rel=1e-15)


@pytest.mark.parametrize("z", [-10.0, -50.0, -1e-3, 0.5, -0.999, 1.001, 3.7, 49.0, 2 + 3j, -0.3j])
@pytest.mark.parametrize("j", [1, 2, 3, 4, 5])
def test_phi_scalar_against_quadrature(z, j):
    assert abs(phi_scalar(z, j) - quad_phi(z, j)) <= 1e-13 * abs(quad_phi(z, j))


def test_phi_scalar_index_range():
    with pytest.raises(ValueError):
        phi_scalar(1.0, 6)
    with pytest.raises(ValueError):
        phi_scalar(1.0, -1)


def test_phi_scalar_vectorised():
    z = np.array([-3.0, 0.0, 1e-8, 2.0])
    out = phi_scalar(z, 3)
    assert out.shape == (4,)
    assert np.allclose(out, [phi_scalar(v, 3) for v in z], rtol=0, atol=0)


@given(st.floats(-50, 50), st.integers(0, 4))
def test_phi_recurrence_scalar(z, j):
    lhs = z * phi_scalar(z, j + 1) + 1 / math.factorial(j)
    assert lhs == pytest.approx(phi_scalar(z, j), rel=1e-12, abs=1e-14)


def test_apply_zero_matrix():
    prop = LinearPropagator.dense(np.zeros((3, 3)))
    v = np.array([1.0, -2.0, 4.0])
    assert np.allclose(prop.apply(1.0, 2, v), v / 2, rtol=1e-15)


def test_apply_diagonal():
    prop = LinearPropagator.spectral(np.diag([-1.0, -2.0]))
    out = propagator_apply(prop, PhiRequest(1.0, 1, np.ones(2)))
    assert np.allclose(out, [1 - math.exp(-1), (1 - math.exp(-2)) / 2], rtol=1e-14)
    dense = LinearPropagator.dense(np.diag([-1.0, -2.0])).apply(1.0, 1, np.ones(2))
    assert np.allclose(dense, out, rtol=1e-13)


def test_small_laplacian_spectral_vs_dense():
    space = build_fd_dirichlet(3)
    e1 = np.array([1.0, 0.0, 0.0])
    sine = LinearPropagator.sine(space.matrix, space.h).apply(1e-3, 1, e1)
    dense = LinearPropagator.dense(space.matrix).apply(1e-3, 1, e1)
    assert np.max(np.abs(sine - dense)) <= 1e-11 * np.max(np.abs(dense))


def test_oracle_examples():
    v = np.array([0.3, -1.0])
    assert np.allclose(augmented_oracle(np.zeros((2, 2)), 1.0, 1, v), v, rtol=1e-15)
    assert augmented_oracle(np.array([[-3.0]]), 0.5, 2, np.array([1.0]))[0] == pytest.approx(
        phi_scalar(-1.5, 2), rel=1e-13)


def test_oracle_dimension_limit():
    with pytest.raises(ValueError):
        augmented_oracle(np.eye(201), 1.0, 1, np.ones(201))


def test_oracle_random_stable_matrix():
    rng = np.random.default_rng(3)
    m = stable_matrix(rng, 5)
    v = rng.standard_normal(5)
    ref = augmented_oracle(m, 0.1, 3, v)
    for prop in (LinearPropagator.dense(m), LinearPropagator.spectral(m)):
        assert np.max(np.abs(prop.apply(0.1, 3, v) - ref)) <= 1e-10 * np.max(np.abs(ref))


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("tau", [1e-3, 1e-1, 1.0])
def test_recurrence_residual_matrix(seed, tau):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 21))
    m = stable_matrix(rng, n)
    v = rng.standard_normal(n)
    for prop in (LinearPropagator.dense(m), LinearPropagator.spectral(m, check=False)):
        for j in range(4):
            res = tau * m @ prop.apply(tau, j + 1, v) + v / math.factorial(j) - prop.apply(tau, j, v)
            assert np.max(np.abs(res)) <= 1e-10 * np.max(np.abs(v))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 50), st.sampled_from([1e-4, 1e-2, 0.3]), st.integers(0, 4),
       st.integers(0, 2**31 - 1))
def test_cross_backend_agreement(n, tau, j, seed):
    space = build_fd_dirichlet(n)
    v = np.random.default_rng(seed).standard_normal(n)
    ref = augmented_oracle(space.matrix, tau, j, v)
    scale = np.max(np.abs(ref))
    for prop in (LinearPropagator.sine(space.matrix, space.h),
                 LinearPropagator.spectral(space.matrix),
                 LinearPropagator.dense(space.matrix)):
        assert np.max(np.abs(prop.apply(tau, j, v) - ref)) <= 1e-10 * scale


def test_batched_apply_matches_rows():
    space = build_fd_dirichlet(12)
    v = np.random.default_rng(0).standard_normal((4, 12))
    for prop in (space.propagator, LinearPropagator.dense(space.matrix)):
        batch = prop.apply(0.01, 2, v)
        rows = np.array([prop.apply(0.01, 2, r) for r in v])
        assert np.allclose(batch, rows, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("tau", [1e-4, 1e-2, 1.0, 10.0])
def test_dirichlet_semigroup_contractive(tau):
    space = build_fd_dirichlet(60)
    expo = space.propagator.exponential_matrix(tau)
    assert np.max(np.sum(np.abs(expo), axis=1)) <= 1 + 1e-12


def test_exponential_matrix_matches_expm():
    space = build_fd_dirichlet(8)
    assert np.allclose(space.propagator.exponential_matrix(0.01),
                       scipy.linalg.expm(0.01 * space.matrix), rtol=1e-12, atol=1e-14)


def test_input_validation():
    prop = LinearPropagator.dense(-np.eye(2))
    with pytest.raises(ValueError):
        prop.apply(1.0, 1, np.ones(3))
    with pytest.raises(ValueError):
        prop.apply(1.0, 1, np.array([np.nan, 1.0]))
    with pytest.raises(ValueError):
        prop.apply(-1.0, 1, np.ones(2))
    with pytest.raises(ValueError):
        PhiRequest(1.0, 7, np.ones(2))
    with pytest.raises(ValueError):
        LinearPropagator(np.ones((2, 3)), "dense")
    with pytest.raises(ValueError):
        LinearPropagator.sine(np.eye(3), 0.25)


def test_spectral_reconstruction_checked():
    prop = LinearPropagator.spectral(build_fd_dirichlet(10).matrix)
    assert prop.check_reconstruction() <= 1e-10


@pytest.mark.parametrize("tau", [1e-4, 1e-2])
def test_dense_high_index_no_cancellation(tau):
    # tau*|M| just above the Taylor radius while the slowest modes have tau*|lambda| << 1
    space = build_fd_dirichlet(64)
    v = np.random.default_rng(5).standard_normal(64)
    dense = LinearPropagator.dense(space.matrix)
    for j in range(1, 5):
        ref = augmented_oracle(space.matrix, tau, j, v)
        assert np.max(np.abs(dense.apply(tau, j, v) - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_nonsymmetric_tridiagonal_uses_symmetrized_basis():
    space = build_fd_mixed(40)
    prop = LinearPropagator.spectral(space.matrix)
    assert np.isrealobj(prop.eigenvalues) and np.all(prop.eigenvalues < 0)
    assert np.linalg.cond(prop.basis) <= 2.0
    v = np.random.default_rng(6).standard_normal(40)
    for tau in (1e-3, 0.1):
        for j in range(5):
            ref = augmented_oracle(space.matrix, tau, j, v)
            assert np.max(np.abs(prop.apply(tau, j, v) - ref)) <= 1e-11 * np.max(np.abs(ref))
