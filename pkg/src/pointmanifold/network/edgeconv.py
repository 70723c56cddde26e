"""EdgeConv: per-edge linear kernels, LeakyReLU and a max over neighbors.

For point ``i`` with neighbors ``j`` and kernel ``m``::

    out[i, m] = max_j LeakyReLU(theta_m . f_i + phi_m . (f_j - f_i))

followed by batch normalization. LeakyReLU is monotone, so the max is taken
over pre-activations and the activation applied once per output; the result
is bit-identical to activating every edge first.
"""

import numpy as np

from .._kernels import edge_max, edge_scatter
from ..errors import ContractError
from ..neighbors import batched_knn
from .layers import LEAKY_SLOPE, BatchNorm, Layer, Parameter, glorot_uniform


class EdgeConv(Layer):
    def __init__(self, in_features, out_features, k=20, batchnorm=True, rng=None,
                 dtype=np.float64, name="edgeconv"):
        rng = np.random.default_rng(rng)
        self.name = name
        self.in_features = in_features
        self.out_features = out_features
        self.k = k
        # fan_in of the underlying edge MLP is 2 * in_features (f_i and f_j - f_i)
        self.theta = Parameter(glorot_uniform(rng, out_features, in_features, dtype, 2 * in_features))
        self.phi = Parameter(glorot_uniform(rng, out_features, in_features, dtype, 2 * in_features))
        self.bn = BatchNorm(out_features, dtype=dtype, name=f"{name}.bn") if batchnorm else None
        self._cache = None
        # margins to non-differentiable points, filled only when track_margins is set
        self.track_margins = False
        self.kink_margin = np.inf
        self.tie_margin = np.inf
        self.knn_margin = np.inf

    def graph(self, x):
        """Dynamic graph: kNN of the layer input in feature space."""
        if self.track_margins:
            idx, self.knn_margin = batched_knn(x, self.k, return_margin=True)
            return idx
        return batched_knn(x, self.k)

    def forward(self, x, graph=None, train=False):
        if x.ndim != 3:
            raise ContractError(f"{self.name}: expected (B, n, c), got shape {x.shape}")
        self._check_width(x, self.in_features)
        b, n, _ = x.shape
        idx = self.graph(x) if graph is None else np.asarray(graph)
        if idx.ndim == 2:
            idx = np.broadcast_to(idx, (b,) + idx.shape)
        if idx.shape[:2] != (b, n):
            raise ContractError(
                f"{self.name}: graph covers {idx.shape[1]} points, features have {n}"
            )
        theta, phi = self.theta.value, self.phi.value
        center = x @ (theta - phi).T
        neigh = np.ascontiguousarray((x @ phi.T).reshape(b * n, -1))
        rows = np.ascontiguousarray(idx + (np.arange(b) * n)[:, None, None], dtype=np.int64)
        out, arg, deriv = edge_max(neigh, rows, np.ascontiguousarray(center), LEAKY_SLOPE)
        if self.track_margins:
            self._record_margins(neigh[rows] + center[:, :, None, :], neigh[rows].max(axis=2) + center)
        self._cache = (x, rows, arg, deriv)
        if self.bn is not None:
            out = self.bn.forward(out, train=train)
        return out

    def _record_margins(self, edges, pre):
        self.kink_margin = float(np.abs(pre).min()) if pre.size else np.inf
        if edges.shape[2] > 1:
            top2 = -np.partition(-edges, 1, axis=2)[:, :, :2, :]
            self.tie_margin = float((top2[:, :, 0] - top2[:, :, 1]).min())
        else:
            self.tie_margin = np.inf

    def pattern(self):
        """Neighbor sets, winning neighbor and activation slope of the last forward."""
        _, rows, arg, deriv = self._cache
        winners = np.take_along_axis(rows, arg.astype(np.int64), axis=2)
        return np.concatenate([np.sort(rows, axis=2).ravel(), winners.ravel(), (deriv == 1).ravel()])

    def backward(self, grad):
        if self.bn is not None:
            grad = self.bn.backward(grad)
        x, rows, arg, deriv = self._cache
        b, n, c = x.shape
        m = self.out_features
        g_pre, g_neigh = edge_scatter(np.ascontiguousarray(grad), deriv, rows, arg, b * n)
        x2 = x.reshape(-1, c)
        gc2 = g_pre.reshape(-1, m)
        grad_theta_minus_phi = gc2.T @ x2
        grad_phi_direct = g_neigh.T @ x2
        self.theta.grad += grad_theta_minus_phi
        self.phi.grad += grad_phi_direct - grad_theta_minus_phi
        theta, phi = self.theta.value, self.phi.value
        return g_pre @ (theta - phi) + (g_neigh @ phi).reshape(b, n, c)
