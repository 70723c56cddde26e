"""Locally linear embedding, a PCA baseline and coordinate augmentation.

The LLE path reconstructs every point from its ``K`` nearest neighbors with
weights that sum to one, then finds the low-dimensional coordinates that are
best reconstructed by the same weights: the bottom non-constant eigenvectors
of ``M = (I - W)^T (I - W)``.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import InsufficientPointsError, InvalidInputError, NumericalError
from .neighbors import knn
from .pointset import read_packed, write_packed
from .validation import check_clouds, check_points, check_positive_int

DEFAULT_REG = 1e-3
_JITTER = 1e-9


def _points_of(cloud):
    return check_points(getattr(cloud, "points", cloud))


@dataclass(frozen=True, eq=False)
class LleWeights:
    """Sparse reconstruction weights: row ``i`` has ``weights[i]`` on ``indices[i]``."""

    indices: np.ndarray
    weights: np.ndarray

    @property
    def n(self):
        return self.indices.shape[0]

    def dense(self):
        """The ``(n, n)`` matrix W' with zeros outside each neighborhood."""
        n = self.n
        w = np.zeros((n, n))
        np.put_along_axis(w, self.indices, self.weights, axis=1)
        return w

    def reconstruction_error(self, coords):
        """``sum_i ||y_i - sum_j W_ij y_j||^2`` for per-point coordinates ``coords``."""
        coords = np.asarray(coords, dtype=np.float64)
        recon = np.einsum("nk,nkd->nd", self.weights, coords[self.indices])
        return float(((coords - recon) ** 2).sum())


@dataclass(frozen=True, eq=False)
class EmbeddingResult:
    """Low-dimensional coordinates plus solver diagnostics.

    For LLE ``eigenvalues`` holds the ``D + 1`` smallest eigenvalues of ``M``
    (ascending, the first one belongs to the constant vector) and
    ``residual`` is the LLE objective at ``coords``. For PCA ``eigenvalues``
    holds the top ``D`` variances (descending) and ``residual`` the squared
    reconstruction error of the centered points.
    """

    coords: np.ndarray
    eigenvalues: np.ndarray
    residual: float
    method: str = "lle"


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    layout: tuple

    @property
    def width(self):
        return self.values.shape[1]


def jitter_duplicates(points):
    """Nudge repeated points apart by ``1e-9`` along an index-derived direction.

    The first occurrence of every coordinate stays put. The offset depends
    only on the row index, so results do not depend on any seed.
    """
    pts = np.array(points, dtype=np.float64)
    _, first, inverse = np.unique(pts, axis=0, return_index=True, return_inverse=True)
    dup = np.flatnonzero(first[inverse.ravel()] != np.arange(len(pts)))
    if dup.size:
        # golden-angle spiral directions, distinct per index
        i = dup.astype(np.float64)
        z = 1.0 - 2.0 * ((i * 0.6180339887498949) % 1.0)
        r = np.sqrt(1.0 - z**2)
        phi = i * 2.399963229728653
        pts[dup] += _JITTER * np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return pts


def lle_weights(cloud, K, reg=DEFAULT_REG):
    """Constrained least-squares reconstruction weights for every point.

    For point ``i`` with neighbor offsets ``Z = N_i - p_i`` the local Gram
    matrix ``S = Z Z^T`` is regularized to ``S + reg * trace(S) * I`` and the
    weights are ``S^{-1} 1`` rescaled to sum to one.
    """
    pts = jitter_duplicates(_points_of(cloud))
    K = check_positive_int(K, "K")
    n = len(pts)
    if K >= n:
        raise InsufficientPointsError(f"LLE with K={K} needs more than {K} points, got {n}")
    idx = knn(pts, K).indices
    z = pts[idx] - pts[:, None, :]
    gram = np.einsum("nkc,nmc->nkm", z, z)
    trace = np.trace(gram, axis1=1, axis2=2)
    shift = np.where(trace > 0, reg * trace, reg)
    gram[:, np.arange(K), np.arange(K)] += shift[:, None]
    try:
        w = np.linalg.solve(gram, np.ones((n, K, 1)))[..., 0]
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular regularized Gram system: {exc}") from None
    w /= w.sum(axis=1, keepdims=True)
    if not np.all(np.isfinite(w)):
        raise NumericalError("non-finite LLE weights")
    return LleWeights(idx, w)


def fix_signs(vectors):
    """Flip columns so each one's largest-magnitude entry is positive."""
    vectors = np.array(vectors, dtype=np.float64)
    if vectors.size == 0:
        return vectors
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def embedding_matrix(weights):
    """Dense ``M = (I - W')^T (I - W')``."""
    a = np.eye(weights.n) - weights.dense()
    return a.T @ a


def lle_embed(cloud, K, D=2, reg=DEFAULT_REG):
    """Locally linear embedding of a point cloud into ``D`` dimensions.

    Parameters
    ----------
    cloud : PointCloud or array of shape (n, 3)
    K : int
        Neighbors per point.
    D : int
        Output dimension, ``1 <= D < 3``.
    reg : float
        Trace-relative Tikhonov regularization of the local Gram matrices.

    Returns
    -------
    EmbeddingResult
        ``coords`` are unit-norm eigenvectors of ``M`` for eigenvalues
        2 through ``D + 1``, sign-normalized with :func:`fix_signs`.
    """
    D = check_positive_int(D, "D")
    if D >= 3:
        raise InvalidInputError(f"LLE output dimension must be < 3, got {D}")
    weights = lle_weights(cloud, K, reg=reg)
    m = embedding_matrix(weights)
    try:
        vals, vecs = scipy.linalg.eigh(m, subset_by_index=[0, D], driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"symmetric eigensolver failed: {exc}") from None
    coords = fix_signs(vecs[:, 1:])
    return EmbeddingResult(
        coords=coords,
        eigenvalues=vals,
        residual=weights.reconstruction_error(coords),
        method="lle",
    )


def pca_embed(cloud, D=2):
    """Project centered points onto their top ``D`` principal directions."""
    pts = _points_of(cloud)
    D = check_positive_int(D, "D")
    if D > 3:
        raise InvalidInputError(f"PCA output dimension must be <= 3, got {D}")
    if len(pts) < 2:
        raise InsufficientPointsError("PCA needs at least 2 points")
    centered = pts - pts.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    coords = fix_signs(centered @ vt[:D].T)
    variances = s[:D] ** 2 / (len(pts) - 1)
    # energy outside the kept subspace = squared reconstruction error
    residual = float((s[D:] ** 2).sum())
    return EmbeddingResult(coords=coords, eigenvalues=variances, residual=residual, method="pca")


def augment_lle(cloud, K=12, reg=DEFAULT_REG, embedding=None):
    """Concatenate the 3-D coordinates with a 2-D LLE embedding (width 5).

    A precomputed ``embedding`` (``(n, 2)`` array or EmbeddingResult) skips the
    solve, e.g. when read from the on-disk cache.
    """
    pts = _points_of(cloud)
    if embedding is None:
        embedding = lle_embed(pts, K, 2, reg=reg)
    coords = getattr(embedding, "coords", embedding)
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape != (len(pts), 2):
        raise InvalidInputError(f"embedding must be ({len(pts)}, 2), got {coords.shape}")
    return FeatureMatrix(np.hstack([pts, coords]), ("x", "y", "z", "lle_u", "lle_v"))


def neighborhood_overlap(embedding, reference, k=12):
    """Mean fraction of each point's ``k`` nearest neighbors shared by both spaces."""
    a = knn(embedding, k).indices
    b = knn(reference, k).indices
    shared = [len(np.intersect1d(ra, rb, assume_unique=True)) for ra, rb in zip(a, b)]
    return float(np.mean(shared) / k)


# ---------------------------------------------------------------------------
# on-disk cache


def cache_key(points, K, D, reg=DEFAULT_REG, method="lle"):
    """Content hash of the coordinates and every solver setting."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(points, dtype="<f8").tobytes())
    h.update(f"|{method}|K={K}|D={D}|reg={reg!r}".encode())
    return h.hexdigest()


class EmbeddingCache:
    """Directory of packed-binary embeddings keyed by :func:`cache_key`."""

    def __init__(self, directory):
        self.directory = str(directory)
        self.hits = 0
        self.misses = 0

    def path(self, key):
        return os.path.join(self.directory, f"{key}.pmc")

    def get(self, key):
        p = self.path(key)
        if os.path.exists(p):
            self.hits += 1
            return read_packed(p)
        return None

    def put(self, key, coords, meta=None):
        """Store ``coords`` (and an optional JSON-able ``meta`` dict) atomically."""
        os.makedirs(self.directory, exist_ok=True)
        # writer-unique temporaries: identical clouds may be filled concurrently
        suffix = f".{os.getpid()}.{threading.get_ident()}.tmp"
        if meta is not None:
            tmp = self.path(key) + ".json" + suffix
            with open(tmp, "w") as fh:
                json.dump(meta, fh)
            os.replace(tmp, self.path(key)[:-4] + ".json")
        tmp = self.path(key) + suffix
        write_packed(tmp, coords)
        os.replace(tmp, self.path(key))

    def meta(self, key):
        """The metadata stored with ``key``, or ``None``."""
        p = self.path(key)[:-4] + ".json"
        if not os.path.exists(p):
            return None
        with open(p) as fh:
            return json.load(fh)

    def embed(self, points, method="lle", K=12, D=2, reg=DEFAULT_REG):
        """Return ``(coords, result_or_None)``; ``None`` when served from disk."""
        key = cache_key(points, K, D, reg, method)
        hit = self.get(key)
        if hit is not None:
            return hit, None
        self.misses += 1
        if method == "lle":
            result = lle_embed(points, K, D, reg=reg)
        elif method == "pca":
            result = pca_embed(points, D)
        else:
            raise InvalidInputError(f"unknown embedding method {method!r}")
        self.put(key, result.coords, {"method": method, "K": K, "D": D, "residual": float(result.residual)})
        # the cache stores float32; hand back exactly what a later hit will see
        return read_packed(self.path(key)), result


# ---------------------------------------------------------------------------
# estimator API


class LocallyLinearFeatures(TransformerMixin, BaseEstimator):
    """Append per-cloud LLE coordinates to the xyz channels.

    ``transform`` maps an ``(n_clouds, n_points, 3)`` batch (or a list of
    :class:`PointCloud`) to ``(n_clouds, n_points, 3 + n_components)``.
    Each cloud is embedded independently, so ``fit`` only validates input.
    """

    def __init__(self, n_neighbors=12, n_components=2, reg=DEFAULT_REG, cache_dir=None):
        self.n_neighbors = n_neighbors
        self.n_components = n_components
        self.reg = reg
        self.cache_dir = cache_dir

    def fit(self, X, y=None):
        X = check_clouds(X)
        self.n_features_in_ = X.shape[2]
        return self

    def _embed(self, pts):
        if self.cache_dir is not None:
            return EmbeddingCache(self.cache_dir).embed(
                pts, "lle", self.n_neighbors, self.n_components, self.reg
            )[0]
        return lle_embed(pts, self.n_neighbors, self.n_components, reg=self.reg).coords

    def transform(self, X):
        X = check_clouds(X)
        return np.stack([np.hstack([c, self._embed(c)]) for c in X])


class PCAFeatures(TransformerMixin, BaseEstimator):
    """Per-cloud PCA counterpart of :class:`LocallyLinearFeatures`."""

    def __init__(self, n_components=2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_clouds(X)
        self.n_features_in_ = X.shape[2]
        return self

    def transform(self, X):
        X = check_clouds(X)
        return np.stack([np.hstack([c, pca_embed(c, self.n_components).coords]) for c in X])
