"""Learnable manifold projection: gated in-plane coordinates.

For every projection plane the exact orthogonal projection gives 2-D
coordinates ``uv``. A small perceptron ``Q`` sees the point and a one-hot
plane code and produces a scalar gate ``g = LeakyReLU(Q(x, y, z, onehot))``;
the output channels are ``(x, y, z)`` followed by ``g * uv`` for each plane.
"""

import numpy as np

from ..errors import ContractError
from ..projection import axis_planes
from .layers import LeakyReLU, Layer, Linear

PLANE_NAMES = ("x=0", "y=0", "z=0")


def plane_selection(planes):
    """``(3, 2 * len(planes))`` matrix mapping xyz to concatenated ``uv``.

    Axis planes pass through the origin, so their in-plane coordinates are a
    fixed linear map of the point.
    """
    all_planes = axis_planes()
    cols = [all_planes[p].basis.T for p in planes]
    return np.hstack(cols)


class MPGate(Layer):
    """Gate network 6 -> hidden -> 1 shared across planes.

    Parameters
    ----------
    planes : sequence of int
        Indices into ``(x=0, y=0, z=0)``; a single plane defaults to z=0.
    """

    name = "mp_gate"

    def __init__(self, planes=(0, 1, 2), hidden=16, rng=None, dtype=np.float64):
        rng = np.random.default_rng(rng)
        self.planes = tuple(planes)
        self.hidden = hidden
        self.fc1 = Linear(6, hidden, rng=rng, dtype=dtype, name="mp_gate.fc1")
        self.act1 = LeakyReLU(name="mp_gate.act1")
        self.fc2 = Linear(hidden, 1, rng=rng, dtype=dtype, name="mp_gate.fc2")
        self.act2 = LeakyReLU(name="mp_gate.act2")
        self.dtype = dtype
        self._sel = plane_selection(self.planes).astype(dtype)
        self._cache = None

    @property
    def out_features(self):
        return 3 + 2 * len(self.planes)

    @property
    def kink_margin(self):
        return min(self.act1.kink_margin, self.act2.kink_margin)

    def gate_inputs(self, xyz):
        """Stack ``(x, y, z, onehot(plane))`` for every plane: ``(P, B, n, 6)``."""
        p = len(self.planes)
        onehot = np.zeros((p,) + xyz.shape[:-1] + (3,), dtype=xyz.dtype)
        for i, plane in enumerate(self.planes):
            onehot[i, ..., plane] = 1.0
        return np.concatenate([np.broadcast_to(xyz, (p,) + xyz.shape), onehot], axis=-1)

    def gates(self, xyz):
        """Gate value per plane and point, shape ``(P, B, n, 1)``."""
        h = self.act1.forward(self.fc1.forward(self.gate_inputs(xyz)))
        return self.act2.forward(self.fc2.forward(h))

    def forward(self, xyz):
        if xyz.shape[-1] != 3:
            raise ContractError(f"{self.name}: expected xyz input, got shape {xyz.shape}")
        p = len(self.planes)
        uv = (xyz @ self._sel).reshape(xyz.shape[:-1] + (p, 2))
        uv = np.moveaxis(uv, -2, 0)  # (P, ..., 2)
        g = self.gates(xyz)
        gated = g * uv
        self._cache = (uv, g)
        return np.concatenate([xyz] + [gated[i] for i in range(p)], axis=-1)

    def backward(self, grad):
        uv, g = self._cache
        p = len(self.planes)
        g_xyz = grad[..., :3].copy()
        g_gated = np.stack([grad[..., 3 + 2 * i: 5 + 2 * i] for i in range(p)])
        g_gate = (g_gated * uv).sum(axis=-1, keepdims=True)
        g_uv = g_gated * g
        g_in = self.fc1.backward(self.act1.backward(self.fc2.backward(self.act2.backward(g_gate))))
        g_xyz += g_in[..., :3].sum(axis=0)
        g_xyz += np.moveaxis(g_uv, 0, -2).reshape(grad.shape[:-1] + (2 * p,)) @ self._sel.T
        return g_xyz
