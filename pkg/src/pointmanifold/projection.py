"""Orthogonal projection of points onto planes ``Ax + By + Cz + D = 0``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .validation import check_points


@dataclass(frozen=True, eq=False)
class Plane:
    """A plane with an orthonormal in-plane basis used for 2-D coordinates."""

    A: float
    B: float
    C: float
    D: float
    basis: np.ndarray

    @classmethod
    def from_coefficients(cls, A, B, C, D, basis=None):
        normal = np.array([A, B, C], dtype=np.float64)
        norm = np.linalg.norm(normal)
        if not np.all(np.isfinite(normal)) or norm == 0.0 or not np.isfinite(D):
            raise InvalidInputError(f"degenerate plane coefficients {(A, B, C, D)}")
        if basis is None:
            unit = normal / norm
            # Gram-Schmidt against the coordinate axis least aligned with the normal
            seed = np.eye(3)[np.argmin(np.abs(unit))]
            e1 = seed - (seed @ unit) * unit
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(unit, e1)
            basis = np.vstack([e1, e2])
        basis = np.array(basis, dtype=np.float64)
        if basis.shape != (2, 3):
            raise InvalidInputError(f"plane basis must be 2 x 3, got {basis.shape}")
        if not np.allclose(basis @ basis.T, np.eye(2), atol=1e-12) or np.any(
            np.abs(basis @ normal) > 1e-12 * norm
        ):
            raise InvalidInputError("plane basis must be orthonormal and orthogonal to the normal")
        basis.setflags(write=False)
        return cls(float(A), float(B), float(C), float(D), basis)

    @property
    def normal(self):
        return np.array([self.A, self.B, self.C])

    @property
    def origin(self):
        """Foot of the coordinate origin on the plane; the (0, 0) of ``uv``."""
        n = self.normal
        return -self.D / (n @ n) * n


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    foot: np.ndarray
    t: np.ndarray
    uv: np.ndarray


def project_points(plane, points):
    """Project an ``(n, 3)`` array; ``t`` and ``uv`` are per point."""
    p = check_points(points)
    n = plane.normal
    t = (p @ n + plane.D) / (n @ n)
    foot = p - t[:, None] * n
    uv = (foot - plane.origin) @ plane.basis.T
    return ProjectionResult(foot, t, uv)


def project_point(plane, p):
    """Project one point: ``t = (Ax+By+Cz+D)/(A^2+B^2+C^2)``, foot ``p - t (A,B,C)``."""
    r = project_points(plane, np.asarray(p, dtype=np.float64).reshape(1, 3))
    return ProjectionResult(r.foot[0], float(r.t[0]), r.uv[0])


_AXIS_PLANES = None


def axis_planes():
    """The planes x=0, y=0, z=0; their ``uv`` drop the zeroed coordinate."""
    global _AXIS_PLANES
    if _AXIS_PLANES is None:
        e = np.eye(3)
        _AXIS_PLANES = (
            Plane.from_coefficients(1, 0, 0, 0, basis=[e[1], e[2]]),
            Plane.from_coefficients(0, 1, 0, 0, basis=[e[0], e[2]]),
            Plane.from_coefficients(0, 0, 1, 0, basis=[e[0], e[1]]),
        )
    return list(_AXIS_PLANES)


def linear_projection_features(cloud, planes=None):
    """In-plane coordinates on each plane, concatenated: ``(n, 2 * len(planes))``.

    With the default axis planes the columns are ``(y, z, x, z, x, y)``.
    """
    pts = check_points(getattr(cloud, "points", cloud))
    planes = axis_planes() if planes is None else planes
    return np.hstack([project_points(pl, pts).uv for pl in planes])
