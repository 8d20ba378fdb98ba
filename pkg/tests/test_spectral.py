"""Affinity construction, eigendecomposition, and feature space tests."""

import numpy as np
import pytest

import oracles
from uodkit.errors import DegenerateInputError
from uodkit.feature_store import PatchFeatureMap
from uodkit.spectral import (
    AffinityGraph,
    build_affinity,
    build_feature_space,
    eigendecompose,
    residual_norms,
)


def fmap_from_tokens(tokens, h, w):
    tokens = np.asarray(tokens, dtype=np.float32)
    return PatchFeatureMap("t", tokens.reshape(h, w, -1))


def test_identical_tokens_weight_one():
    tokens = np.tile([1.0, 2.0, 3.0], (4, 1))
    g = build_affinity(fmap_from_tokens(tokens, 2, 2))
    assert g.weights[0, 1] == pytest.approx(1.0)


def test_orthogonal_tokens_clamped_to_floor():
    tokens = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    g = build_affinity(fmap_from_tokens(tokens, 2, 2), floor=1e-5)
    assert g.weights[0, 1] == pytest.approx(1e-5, abs=0)


def test_affinity_matches_brute_force(rng):
    values = rng.normal(size=(3, 3, 5)).astype(np.float32)
    g = build_affinity(PatchFeatureMap("x", values), floor=1e-5)
    brute = oracles.affinity_brute(values, 1e-5)
    np.testing.assert_allclose(g.weights, brute, atol=1e-12)


def test_affinity_symmetric_and_clamped(rng):
    values = rng.normal(size=(4, 5, 6)).astype(np.float32)
    g = build_affinity(PatchFeatureMap("x", values), floor=1e-4)
    np.testing.assert_array_equal(g.weights, g.weights.T)
    assert (g.weights >= 1e-4).all()
    np.testing.assert_array_equal(np.diag(g.weights), np.ones(20))


def test_zero_norm_token_names_patch():
    values = np.ones((2, 3, 4), dtype=np.float32)
    values[1, 2] = 0.0
    with pytest.raises(DegenerateInputError, match="index 5"):
        build_affinity(PatchFeatureMap("x", values))


def test_binarized_variant():
    tokens = np.array([[1.0, 0.0], [1.0, 0.1], [0.0, 1.0], [0.1, 1.0]])
    g = build_affinity(fmap_from_tokens(tokens, 2, 2), binarize=True, binarize_tau=0.5)
    assert g.weights[0, 1] == 1.0
    assert g.weights[0, 2] == 1e-5


def two_clique_graph(n_a, n_b):
    n = n_a + n_b
    w = np.zeros((n, n))
    w[:n_a, :n_a] = 1.0
    w[n_a:, n_a:] = 1.0
    return AffinityGraph(w)


def test_two_cliques_recover_block_structure():
    g = two_clique_graph(6, 4)
    basis = eigendecompose(g, 2)
    assert basis.eigenvalues[0] == pytest.approx(0.0, abs=1e-8)
    vec = basis.vectors[:, 0]
    assert np.ptp(vec[:6]) < 1e-8 and np.ptp(vec[6:]) < 1e-8
    # the two plateaus differ (vector is D-orthogonal to the constant)
    assert abs(vec[0] - vec[6]) > 1e-3


def test_complete_uniform_graph_spectrum(rng):
    # dense oracle: for W = ones, all nontrivial generalized eigenvalues equal
    n = 12
    g = AffinityGraph(np.ones((n, n)))
    basis = eigendecompose(g, 4)
    assert np.ptp(basis.eigenvalues) < 1e-8
    d = g.weights.sum(axis=1)
    lap = np.diag(d) - g.weights
    oracle_vals = np.sort(
        np.linalg.eigvalsh(np.diag(d**-0.5) @ lap @ np.diag(d**-0.5))
    )
    np.testing.assert_allclose(basis.eigenvalues, oracle_vals[1:5], atol=1e-8)


def test_residual_invariant_random_graph(rng):
    values = rng.normal(size=(4, 5, 7)).astype(np.float32)
    g = build_affinity(PatchFeatureMap("x", values))
    basis = eigendecompose(g, 5)
    assert (residual_norms(g, basis) <= 1e-6).all()
    assert (np.diff(basis.eigenvalues) >= -1e-12).all()


def test_degree_normalization_and_sign(rng):
    values = rng.normal(size=(3, 4, 5)).astype(np.float32)
    g = build_affinity(PatchFeatureMap("x", values))
    basis = eigendecompose(g, 3)
    deg = g.weights.sum(axis=1)
    for col in range(3):
        y = basis.vectors[:, col]
        assert y @ (deg * y) == pytest.approx(1.0, abs=1e-9)
        assert y[np.abs(y).argmax()] > 0


def test_permutation_equivariance(rng):
    values = rng.normal(size=(3, 3, 6)).astype(np.float32)
    g = build_affinity(PatchFeatureMap("x", values))
    perm = rng.permutation(9)
    gp = AffinityGraph(g.weights[np.ix_(perm, perm)])
    basis = eigendecompose(g, 3)
    basis_p = eigendecompose(gp, 3)
    np.testing.assert_allclose(basis_p.eigenvalues, basis.eigenvalues, atol=1e-9)
    for col in range(3):
        a = basis.vectors[perm, col]
        b = basis_p.vectors[:, col]
        # equal up to the sign convention
        assert min(np.abs(a - b).max(), np.abs(a + b).max()) < 1e-7


def test_iterative_solver_path(rng):
    # 500 nodes crosses the dense cutoff; the ARPACK path must satisfy the
    # same residual contract and be deterministic
    values = rng.normal(size=(20, 25, 8)).astype(np.float32)
    g = build_affinity(PatchFeatureMap("big", values))
    basis = eigendecompose(g, 3)
    assert (residual_norms(g, basis) <= 1e-6).all()
    again = eigendecompose(g, 3)
    np.testing.assert_array_equal(basis.vectors, again.vectors)
    dense_vals = np.sort(
        np.linalg.eigvalsh(
            (lambda d: np.diag(d**-0.5) @ (np.diag(d) - g.weights) @ np.diag(d**-0.5))(
                g.weights.sum(axis=1)
            )
        )
    )
    np.testing.assert_allclose(basis.eigenvalues, dense_vals[1:4], atol=1e-7)


def test_eigendecompose_preconditions():
    g = two_clique_graph(3, 3)
    with pytest.raises(ValueError):
        eigendecompose(g, 1)
    with pytest.raises(ValueError):
        eigendecompose(g, 6)


def test_residual_failure_carries_norm(rng):
    from uodkit.errors import SolverConvergenceError
    from uodkit.spectral import EigenBasis, _check_residual

    values = rng.normal(size=(3, 3, 4)).astype(np.float32)
    g = build_affinity(PatchFeatureMap("x", values))
    basis = eigendecompose(g, 2)
    wrong = EigenBasis(basis.vectors, basis.eigenvalues + 0.5)
    with pytest.raises(SolverConvergenceError) as excinfo:
        _check_residual(g, g.weights.sum(axis=1), wrong)
    assert excinfo.value.residual > 0


def test_feature_space_factor_one_is_identity(rng):
    values = rng.normal(size=(3, 4, 5)).astype(np.float32)
    g = build_affinity(PatchFeatureMap("x", values))
    basis = eigendecompose(g, 2)
    space = build_feature_space(basis, 3, 4, 1)
    np.testing.assert_array_equal(space.points(), basis.vectors)


def test_feature_space_constant_vector(rng):
    basis_vectors = np.hstack(
        [np.full((6, 1), 0.3), rng.normal(size=(6, 1))]
    )
    from uodkit.spectral import EigenBasis

    basis = EigenBasis(basis_vectors, np.array([0.1, 0.2]))
    space = build_feature_space(basis, 2, 3, 3)
    np.testing.assert_allclose(space.features[:, :, 0], 0.3, atol=0)
    assert space.features.shape == (6, 9, 2)


def test_feature_space_bilinear_midpoints():
    # 2x2 ramp, factor 2: sample positions r/2 give exact neighbour means
    from uodkit.spectral import EigenBasis

    grid = np.array([[0.0, 1.0], [2.0, 3.0]])
    basis = EigenBasis(grid.reshape(4, 1), np.array([0.0]))
    space = build_feature_space(basis, 2, 2, 2)
    f = space.features[:, :, 0]
    expected = np.array(
        [
            [0.0, 0.5, 1.0, 1.0],
            [1.0, 1.5, 2.0, 2.0],
            [2.0, 2.5, 3.0, 3.0],
            [2.0, 2.5, 3.0, 3.0],
        ]
    )
    np.testing.assert_allclose(f, expected, atol=1e-12)
