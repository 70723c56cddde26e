"""Exact k-nearest-neighbor graphs.

Neighbor rows are sorted by squared Euclidean distance, ties broken by the
smaller point index, and never contain the query point itself. The brute
force scan is the reference; the kd-tree backend must reproduce it exactly.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._kernels import knn_batch, select_k_smallest
from .errors import ContractError, InsufficientPointsError
from .validation import check_features, check_positive_int

# rows per block in the brute-force scan; bounds memory at BLOCK * n * c
_BLOCK = 256


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    """``indices[i]`` lists the ``k`` neighbors of point ``i``, nearest first."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        if idx.ndim != 2:
            raise ContractError(f"neighbor indices must be 2-D, got shape {idx.shape}")
        idx = idx.copy()
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def k(self):
        return self.indices.shape[1]

    @property
    def n(self):
        return self.indices.shape[0]


def pairwise_sq_dist(features):
    """Squared Euclidean distances between all rows, from explicit differences.

    The result is exactly symmetric with an exactly zero diagonal.
    """
    x = check_features(features)
    n = x.shape[0]
    out = np.empty((n, n))
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        diff = x[start:stop, None, :] - x[None, :, :]
        out[start:stop] = np.einsum("ijc,ijc->ij", diff, diff)
    return out


def _sorted_rows(cand, dist, k):
    """Order candidate columns by (distance, index) and keep the first ``k``."""
    order = np.lexsort((cand, dist), axis=-1)
    return np.take_along_axis(cand, order, axis=-1)[:, :k]


def _knn_brute(x, k):
    n = x.shape[0]
    rows = []
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        diff = x[start:stop, None, :] - x[None, :, :]
        d = np.einsum("ijc,ijc->ij", diff, diff)
        local = np.arange(stop - start)
        d[local, start + local] = np.inf
        cand = np.broadcast_to(np.arange(n), d.shape)
        rows.append(_sorted_rows(cand, d, k))
    return np.concatenate(rows)


def _knn_kdtree(x, k):
    n = x.shape[0]
    tree = cKDTree(x)
    extra = 4
    while True:
        m = min(n, k + 1 + extra)
        _, cand = tree.query(x, k=m)
        cand = np.asarray(cand, dtype=np.intp).reshape(n, m)
        # recompute exact distances so ties compare identically to the brute path
        diff = x[cand] - x[:, None, :]
        d = np.einsum("ijc,ijc->ij", diff, diff)
        d[cand == np.arange(n)[:, None]] = np.inf
        if m == n:
            return _sorted_rows(cand, d, k)
        kth = np.sort(d, axis=1)[:, k - 1]
        # a tie at the k-th distance may continue past the returned candidates
        far = d.max(axis=1, where=np.isfinite(d), initial=-np.inf)
        if np.all(kth < far * (1.0 - 1e-12)):
            return _sorted_rows(cand, d, k)
        extra *= 2


def knn(features, k, *, backend="auto"):
    """Build the exact kNN graph of ``features`` (an ``(n, c)`` array).

    Parameters
    ----------
    backend : {"auto", "brute", "kdtree"}
        ``auto`` uses the kd-tree for low-dimensional inputs with many points.
    """
    x = check_features(features)
    k = check_positive_int(k, "k")
    n, c = x.shape
    if n <= k:
        raise InsufficientPointsError(f"knn needs more than k={k} points, got {n}")
    if backend == "auto":
        backend = "kdtree" if c <= 8 and n > 512 else "brute"
    if backend == "brute":
        idx = _knn_brute(x, k)
    elif backend == "kdtree":
        idx = _knn_kdtree(x, k)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return NeighborGraph(idx)


# above this width a BLAS Gram product beats the fused loop
_FUSED_MAX_WIDTH = 16


def batched_knn(x, k, return_margin=False):
    """kNN indices for a ``(B, n, c)`` batch via the Gram-matrix identity.

    Used for the per-layer dynamic graph inside the network, where speed
    matters more than tie semantics at rounding level. Ties that survive
    rounding still resolve to the smaller index. Each row holds the neighbor
    *set* in unspecified order (EdgeConv does not depend on it). With ``return_margin`` also
    return the smallest gap between the k-th and (k+1)-th distance over all
    rows (how far the graph is from changing).
    """
    b, n, _ = x.shape
    if n <= k:
        raise InsufficientPointsError(f"knn needs more than k={k} points, got {n}")
    if x.shape[2] <= _FUSED_MAX_WIDTH:
        idx, gap = knn_batch(np.ascontiguousarray(x), k)
    else:
        sq = np.einsum("bnc,bnc->bn", x, x)
        # |x_i|^2 is constant per row: it changes neither the ranking nor the gap
        d = np.matmul(x, x.transpose(0, 2, 1))
        d *= -2.0
        d += sq[:, None, :]
        diag = np.arange(n)
        d[:, diag, diag] = np.inf
        idx, gap = select_k_smallest(d.reshape(b * n, n), k)
        idx = idx.reshape(b, n, k)
    if return_margin:
        return idx, float(gap.min())
    return idx
