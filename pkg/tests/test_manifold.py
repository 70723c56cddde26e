import time

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_rotation
from pointmanifold.errors import InsufficientPointsError, InvalidInputError
from pointmanifold.manifold import (
    DEFAULT_REG,
    EmbeddingCache,
    LocallyLinearFeatures,
    PCAFeatures,
    augment_lle,
    cache_key,
    embedding_matrix,
    fix_signs,
    jitter_duplicates,
    lle_embed,
    lle_weights,
    neighborhood_overlap,
    pca_embed,
)
from pointmanifold.pointset import SHAPE_CLASSES, generate_shape, standardize


def planar_cloud(rng, n, offset=0.3):
    uv = rng.uniform(-1, 1, (n, 2))
    rot = random_rotation(rng)
    return np.column_stack([uv, np.zeros(n)]) @ rot.T + offset


def kkt_weights(pts, i, nbrs, reg=DEFAULT_REG):
    """Dense solve of the stationarity system of the regularized constrained least squares.

    minimize |sum_j w_j (p_j - p_i)|^2 + reg * tr(G) * |w|^2  subject to  sum_j w_j = 1
    """
    z = pts[nbrs] - pts[i]
    g = z @ z.T
    k = len(nbrs)
    a = np.zeros((k + 1, k + 1))
    a[:k, :k] = 2 * (g + reg * np.trace(g) * np.eye(k))
    a[:k, k] = 1.0
    a[k, :k] = 1.0
    return np.linalg.solve(a, np.r_[np.zeros(k), 1.0])[:k]


def regularized_objective(pts, i, nbrs, w, reg=DEFAULT_REG):
    z = pts[nbrs] - pts[i]
    g = z @ z.T
    return float(w @ g @ w + reg * np.trace(g) * w @ w)


def test_midpoint_weights():
    pts = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [3.5, 0, 0]])
    w = lle_weights(pts, 2)
    assert sorted(w.indices[1]) == [0, 2]
    np.testing.assert_allclose(w.weights[1], [0.5, 0.5], atol=1e-12)


def test_weights_match_kkt_oracle(rng):
    pts = planar_cloud(rng, 10)
    w = lle_weights(pts, 4)
    for i in range(10):
        oracle = kkt_weights(pts, i, w.indices[i])
        np.testing.assert_allclose(w.weights[i], oracle, atol=1e-8)
        assert regularized_objective(pts, i, w.indices[i], w.weights[i]) <= (
            regularized_objective(pts, i, w.indices[i], oracle) + 1e-10
        )


@given(st.sampled_from(SHAPE_CLASSES), st.integers(0, 1000), st.integers(2, 15))
@settings(max_examples=25)
def test_weight_rows_sum_to_one(shape, seed, k):
    cloud = standardize(generate_shape(shape, 60, 0.01, seed))
    w = lle_weights(cloud, k)
    assert np.abs(w.weights.sum(axis=1) - 1).max() <= 1e-10
    assert np.all(np.isfinite(w.weights))
    assert all(i not in row for i, row in enumerate(w.indices))


def test_weights_translation_invariant(rng):
    pts = rng.standard_normal((80, 3))
    a = lle_weights(pts, 8)
    # a power of two shifts every coordinate without rounding at this magnitude
    b = lle_weights(pts + 8.0, 8)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-10)
    c = lle_weights(pts + np.array([0.1, -2.3, 5.7]), 8)
    np.testing.assert_array_equal(a.indices, c.indices)
    np.testing.assert_allclose(a.weights, c.weights, atol=1e-10)


def test_weights_rotation_invariant(rng):
    pts = rng.standard_normal((80, 3))
    a = lle_weights(pts, 8)
    b = lle_weights(pts @ random_rotation(rng).T, 8)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-10)


def test_duplicates_are_jittered_deterministically():
    pts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 0, 0], [0, 1, 0], [1, 0, 0], [0, 0, 1]])
    j = jitter_duplicates(pts)
    np.testing.assert_array_equal(j[[0, 1, 3, 5]], pts[[0, 1, 3, 5]])
    assert len(np.unique(j, axis=0)) == len(pts)
    assert np.abs(j - pts).max() <= 1.1e-9
    np.testing.assert_array_equal(j, jitter_duplicates(pts))
    w = lle_weights(pts, 3)
    assert np.all(np.isfinite(w.weights))


def test_lle_errors():
    with pytest.raises(InsufficientPointsError):
        lle_weights(np.eye(3), 3)
    with pytest.raises(InvalidInputError):
        lle_embed(np.random.default_rng(0).standard_normal((20, 3)), 5, D=3)


def test_planar_embedding_residual():
    # K=6 > 3 makes every local Gram matrix singular, so the trace-relative
    # regularization always acts and biases the weights; the bias shrinks
    # with sampling density, and a dense patch is reconstructed to 1e-8
    cloud = generate_shape("plane_patch", 1000, 0.0, seed=0)
    res = lle_embed(cloud, 6, 2)
    assert res.residual <= 1e-8
    assert res.eigenvalues[0] <= 1e-8


def test_planar_residual_is_regularization_bias():
    cloud = generate_shape("plane_patch", 120, 0.0, seed=1)
    r3 = lle_embed(cloud, 6, 2, reg=1e-3).residual
    r4 = lle_embed(cloud, 6, 2, reg=1e-4).residual
    # quadratic in the regularization strength, vanishing with it
    assert 50 < r3 / r4 < 200
    assert lle_embed(cloud, 6, 2, reg=1e-6).residual <= 1e-8


@given(st.sampled_from(SHAPE_CLASSES), st.integers(0, 1000))
@settings(max_examples=16)
def test_embedding_spectrum_identities(shape, seed):
    res = lle_embed(standardize(generate_shape(shape, 80, 0.0, seed)), 10, 2)
    assert np.all(np.diff(res.eigenvalues) >= 0)
    assert res.eigenvalues[0] <= 1e-8
    assert abs(res.residual - res.eigenvalues[1:].sum()) <= 1e-8
    np.testing.assert_allclose(np.linalg.norm(res.coords, axis=0), 1.0, atol=1e-12)
    pivots = res.coords[np.argmax(np.abs(res.coords), axis=0), [0, 1]]
    assert np.all(pivots > 0)


def test_embedding_matches_dense_oracle():
    cloud, _ = generate_shape("swiss_roll", 800, 0.01, seed=3, return_params=True)
    res = lle_embed(cloud, 12, 2)
    w = lle_weights(cloud, 12)
    # assemble M from the sparse rows by explicit loops, independent of the library path
    n = cloud.n
    wd = np.zeros((n, n))
    for i in range(n):
        for j, v in zip(w.indices[i], w.weights[i]):
            wd[i, j] = v
    a = np.eye(n) - wd
    vals, vecs = scipy.linalg.eigh(a.T @ a)
    ref = vecs[:, 1:3]
    for c in range(2):
        s = np.sign(ref[:, c] @ res.coords[:, c])
        assert np.abs(res.coords[:, c] - s * ref[:, c]).max() <= 1e-6
    np.testing.assert_allclose(res.eigenvalues, vals[:3], atol=1e-10)


def test_embedding_is_optimal_among_orthonormal(rng):
    cloud = standardize(generate_shape("torus", 150, 0.0, 2))
    res = lle_embed(cloud, 10, 2)
    w = lle_weights(cloud, 10)
    ones = np.ones((150, 1)) / np.sqrt(150)
    for _ in range(25):
        q, _ = np.linalg.qr(rng.standard_normal((150, 2)) - ones @ (ones.T @ rng.standard_normal((150, 2))))
        q = q - ones @ (ones.T @ q)
        q, _ = np.linalg.qr(q)
        assert res.residual <= w.reconstruction_error(q) + 1e-12


def test_embedding_matrix_annihilates_constants(rng):
    m = embedding_matrix(lle_weights(rng.standard_normal((40, 3)), 6))
    assert np.abs(m @ np.ones(40)).max() <= 1e-12
    np.testing.assert_array_equal(m, m.T)


def test_fix_signs():
    v = np.array([[0.1, -0.9], [-0.5, 0.2]])
    np.testing.assert_array_equal(fix_signs(v), [[-0.1, 0.9], [0.5, -0.2]])


def test_pca_line():
    x = np.array([-2.0, -1.0, 0.5, 2.5])
    res = pca_embed(np.column_stack([x, np.zeros(4), np.zeros(4)]), 1)
    centered = x - x.mean()
    np.testing.assert_allclose(np.abs(res.coords[:, 0]), np.abs(centered), atol=1e-12)
    full = pca_embed(np.column_stack([x, np.zeros(4), np.zeros(4)]), 3)
    assert full.eigenvalues[0] / full.eigenvalues.sum() == pytest.approx(1.0, abs=1e-12)


def test_pca_planar_reconstruction(rng):
    pts = planar_cloud(rng, 50)
    res = pca_embed(pts, 2)
    centered = pts - pts.mean(axis=0)
    basis = np.linalg.lstsq(res.coords, centered, rcond=None)[0]
    np.testing.assert_allclose(res.coords @ basis, centered, atol=1e-9)
    assert res.residual <= 1e-9


def test_pca_matches_svd_oracle(rng):
    pts = rng.standard_normal((50, 3)) * [3.0, 2.0, 0.5]
    res = pca_embed(pts, 2)
    centered = pts - pts.mean(axis=0)
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    ref = u[:, :2] * s[:2]
    for c in range(2):
        sign = np.sign(ref[:, c] @ res.coords[:, c])
        np.testing.assert_allclose(res.coords[:, c], sign * ref[:, c], atol=1e-8)
    np.testing.assert_allclose(res.eigenvalues, s[:2] ** 2 / 49, rtol=1e-12)


def test_pca_degenerate_returns_zeros():
    res = pca_embed(np.ones((5, 3)), 2)
    np.testing.assert_array_equal(res.coords, np.zeros((5, 2)))


def test_augment_lle_layout():
    cloud = standardize(generate_shape("swiss_roll", 200, 0.01, 1))
    feats = augment_lle(cloud, 12)
    assert feats.width == 5
    assert feats.layout == ("x", "y", "z", "lle_u", "lle_v")
    assert feats.values[:, :3].tobytes() == np.ascontiguousarray(cloud.points).tobytes()
    emb = lle_embed(cloud, 12, 2)
    assert feats.values[:, 3:].tobytes() == np.ascontiguousarray(emb.coords).tobytes()


def test_lle_beats_pca_on_swiss_roll():
    cloud, params = generate_shape("swiss_roll", 800, 0.01, seed=0, return_params=True)
    lle = neighborhood_overlap(lle_embed(cloud, 12, 2).coords, params)
    pca = neighborhood_overlap(pca_embed(cloud, 2).coords, params)
    assert lle >= pca


def test_cache_round_trip(tmp_path, rng):
    pts = rng.standard_normal((30, 3))
    cache = EmbeddingCache(tmp_path)
    coords, result = cache.embed(pts, "lle", 6, 2)
    assert result is not None and cache.misses == 1
    again, hit = cache.embed(pts, "lle", 6, 2)
    assert hit is None and cache.hits == 1
    np.testing.assert_array_equal(coords, again)
    np.testing.assert_array_equal(coords, result.coords.astype(np.float32))
    meta = cache.meta(cache_key(pts, 6, 2))
    assert meta["residual"] == pytest.approx(result.residual)
    assert cache_key(pts, 6, 2) != cache_key(pts, 7, 2)
    assert cache_key(pts, 6, 2) != cache_key(pts, 6, 2, method="pca")
    with pytest.raises(InvalidInputError):
        cache.embed(pts, "isomap", 6, 2)


def test_transformers(rng):
    X = np.stack([standardize(generate_shape("cone", 40, 0.0, s)).points for s in range(3)])
    out = LocallyLinearFeatures(n_neighbors=8).fit_transform(X)
    assert out.shape == (3, 40, 5)
    np.testing.assert_array_equal(out[1, :, 3:], lle_embed(X[1], 8, 2).coords)
    out = PCAFeatures(n_components=2).fit_transform(X)
    assert out.shape == (3, 40, 5)
