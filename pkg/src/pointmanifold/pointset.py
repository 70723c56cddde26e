"""Point cloud container, standardization, synthetic shapes and file I/O.

Two on-disk formats are supported:

``xyz`` text
    One point per line, three whitespace separated reals. ``#`` starts a
    comment that runs to the end of the line; blank lines are ignored.

``pmc`` packed binary
    Little-endian header ``b"PMC1"``, ``u32 n``, ``u32 dim`` followed by
    ``n * dim`` float32 values in row-major order.

A dataset manifest is a text file of ``<path>,<label>,<split>`` lines, paths
relative to the manifest. An optional ``# classes: a,b,c`` line names the
labels.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import FormatError, InvalidInputError, ParseError
from .validation import check_points, check_positive_int

SHAPE_CLASSES = (
    "sphere",
    "plane_patch",
    "cylinder",
    "torus",
    "cone",
    "cube",
    "swiss_roll",
    "helix",
)

PMC_MAGIC = b"PMC1"
_PMC_HEADER = struct.Struct("<4sII")
SPLITS = ("train", "test")


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An ``(n, 3)`` point set with an optional class label.

    The coordinate array is copied and made read-only on construction.
    """

    points: np.ndarray
    label: int | None = None
    id: str = ""

    def __post_init__(self):
        pts = check_points(self.points, name=f"cloud {self.id!r}" if self.id else "points")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))

    @property
    def n(self):
        return self.points.shape[0]

    def with_points(self, points):
        return PointCloud(points, label=self.label, id=self.id)

    def __len__(self):
        return self.n


@dataclass
class Dataset:
    clouds: list
    class_names: list
    splits: list = field(default_factory=list)

    def __post_init__(self):
        if not self.splits:
            self.splits = ["train"] * len(self.clouds)
        if len(self.splits) != len(self.clouds):
            raise InvalidInputError("one split tag is required per cloud")
        for s in self.splits:
            if s not in SPLITS:
                raise InvalidInputError(f"unknown split {s!r}; expected one of {SPLITS}")
        for c in self.clouds:
            if c.label is None or not 0 <= c.label < len(self.class_names):
                raise InvalidInputError(
                    f"cloud {c.id!r} has label {c.label} outside 0..{len(self.class_names) - 1}"
                )

    def subset(self, split):
        return [c for c, s in zip(self.clouds, self.splits) if s == split]

    def require_splits(self):
        for s in SPLITS:
            if not self.subset(s):
                raise InvalidInputError(f"dataset has an empty {s!r} split")


def standardize(cloud):
    """Center on the centroid and scale so the farthest point has norm 1.

    A cloud whose points all coincide maps to all-zero coordinates; so does
    one whose spread is at the rounding level of its centroid, which would
    otherwise blow rounding noise up to unit size.
    """
    pts = cloud.points
    centered = pts - pts.mean(axis=0)
    radius = np.sqrt((centered**2).sum(axis=1)).max()
    if radius <= len(pts) * np.finfo(np.float64).eps * np.abs(pts).max():
        return cloud.with_points(np.zeros_like(pts))
    return cloud.with_points(centered / radius)


# ---------------------------------------------------------------------------
# synthetic shapes
#
# Every sampler returns surface points roughly inside the unit ball, centered
# on the shape's own center, plus a per-point (n, 2) intrinsic parameter array.


def _sphere(rng, n):
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    polar = np.arccos(np.clip(v[:, 2], -1.0, 1.0))
    azimuth = np.arctan2(v[:, 1], v[:, 0])
    return v, np.column_stack([polar, azimuth])


def _plane_patch(rng, n):
    aspect = rng.uniform(0.4, 1.0)
    u = rng.uniform(-1.0, 1.0, n)
    v = rng.uniform(-aspect, aspect, n)
    return np.column_stack([u, v, np.zeros(n)]), np.column_stack([u, v])


def _cylinder(rng, n):
    radius = rng.uniform(0.45, 0.7)
    half = rng.uniform(0.6, 0.9)
    theta = rng.uniform(0.0, 2 * np.pi, n)
    h = rng.uniform(-half, half, n)
    pts = np.column_stack([radius * np.cos(theta), radius * np.sin(theta), h])
    return pts, np.column_stack([radius * theta, h])


def _torus(rng, n):
    major = 0.7
    minor = rng.uniform(0.18, 0.3)
    # rejection on the tube angle gives uniform surface density
    theta = np.empty(0)
    while theta.size < n:
        cand = rng.uniform(0.0, 2 * np.pi, 2 * n)
        keep = rng.uniform(0.0, 1.0, 2 * n) < (major + minor * np.cos(cand)) / (major + minor)
        theta = np.concatenate([theta, cand[keep]])
    theta = theta[:n]
    phi = rng.uniform(0.0, 2 * np.pi, n)
    ring = major + minor * np.cos(theta)
    pts = np.column_stack([ring * np.cos(phi), ring * np.sin(phi), minor * np.sin(theta)])
    return pts, np.column_stack([major * phi, minor * theta])


def _cone(rng, n):
    height = rng.uniform(0.9, 1.4)
    base = rng.uniform(0.4, 0.7)
    # slant fraction ~ sqrt(U) for uniform lateral-surface density
    s = np.sqrt(rng.uniform(0.0, 1.0, n))
    phi = rng.uniform(0.0, 2 * np.pi, n)
    r = base * s
    z = height * (0.5 - s)
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return pts, np.column_stack([s * np.cos(phi), s * np.sin(phi)])


def _cube(rng, n):
    half = rng.uniform(0.35, 0.6, 3)
    # six faces picked proportionally to area
    areas = np.array([half[1] * half[2], half[0] * half[2], half[0] * half[1]])
    areas = np.repeat(areas, 2)
    face = rng.choice(6, size=n, p=areas / areas.sum())
    axis = face // 2
    sign = np.where(face % 2 == 0, -1.0, 1.0)
    pts = rng.uniform(-1.0, 1.0, (n, 3)) * half
    pts[np.arange(n), axis] = sign * half[axis]
    uv = np.column_stack([pts[np.arange(n), (axis + 1) % 3], pts[np.arange(n), (axis + 2) % 3]])
    return pts, uv


def _swiss_roll(rng, n):
    t = 1.5 * np.pi * (1.0 + 2.0 * rng.uniform(0.0, 1.0, n))
    h = rng.uniform(0.0, 21.0, n)
    scale = 4.5 * np.pi
    pts = np.column_stack([t * np.cos(t), h - 10.5, t * np.sin(t)]) / scale
    arc = 0.5 * (t * np.sqrt(1.0 + t**2) + np.arcsinh(t))
    return pts, np.column_stack([arc, h - 10.5]) / scale


def _helix(rng, n):
    turns = 2.0
    pitch = rng.uniform(0.35, 0.5)
    theta = rng.uniform(0.0, 2 * np.pi * turns, n)
    rho = rng.uniform(0.3, 0.8, n)
    z = pitch * (theta / (2 * np.pi) - turns / 2)
    pts = np.column_stack([rho * np.cos(theta), rho * np.sin(theta), z])
    return pts, np.column_stack([theta, rho])


_SAMPLERS = {
    "sphere": _sphere,
    "plane_patch": _plane_patch,
    "cylinder": _cylinder,
    "torus": _torus,
    "cone": _cone,
    "cube": _cube,
    "swiss_roll": _swiss_roll,
    "helix": _helix,
}


def generate_shape(shape, n, noise=0.0, seed=0, *, rotate=True, return_params=False):
    """Sample ``n`` points from a parametric surface.

    Parameters
    ----------
    shape : str
        One of :data:`SHAPE_CLASSES`.
    n : int
        Number of points, at least 8.
    noise : float
        Standard deviation of isotropic Gaussian noise added to every point.
    seed : int
        Seeds the shape proportions, the sampled surface points, the pose and
        the noise. Equal arguments give bit-identical output.
    rotate : bool
        Apply a uniformly random rotation about the shape center.
    return_params : bool
        Also return the ``(n, 2)`` intrinsic surface coordinates of every point
        (for the swiss roll: arc length along the spiral and height).

    Returns
    -------
    PointCloud, or ``(PointCloud, params)`` when ``return_params`` is set.
    """
    if shape not in _SAMPLERS:
        raise InvalidInputError(f"unknown shape class {shape!r}; expected one of {SHAPE_CLASSES}")
    n = check_positive_int(n, "n", minimum=8)
    if not np.isfinite(noise) or noise < 0:
        raise InvalidInputError(f"noise must be a finite value >= 0, got {noise}")
    rng = np.random.default_rng(seed)
    pts, params = _SAMPLERS[shape](rng, n)
    if rotate:
        pts = pts @ Rotation.random(random_state=rng).as_matrix().T
    if noise > 0:
        pts = pts + noise * rng.standard_normal(pts.shape)
    cloud = PointCloud(pts, label=SHAPE_CLASSES.index(shape), id=f"{shape}-{seed}")
    if return_params:
        return cloud, params
    return cloud


def synthetic_dataset(per_class, n_points, noise=0.0, seed=0, classes=SHAPE_CLASSES, test_fraction=0.2):
    """Labelled shapes with a stratified train/test split.

    Each class contributes ``per_class`` clouds of which the last
    ``round(test_fraction * per_class)`` are tagged ``test``. Cloud seeds are
    derived from ``seed``, the class and the index, so the result depends on
    nothing else.
    """
    per_class = check_positive_int(per_class, "per_class")
    classes = list(classes)
    if not classes:
        raise InvalidInputError("at least one class is required")
    for name in classes:
        if name not in _SAMPLERS:
            raise InvalidInputError(f"unknown shape class {name!r}; expected one of {SHAPE_CLASSES}")
    n_test = int(round(test_fraction * per_class))
    clouds, splits = [], []
    for label, name in enumerate(classes):
        for i in range(per_class):
            cloud_seed = int(np.random.SeedSequence([seed, SHAPE_CLASSES.index(name), i]).generate_state(1)[0])
            c = generate_shape(name, n_points, noise, cloud_seed)
            clouds.append(PointCloud(c.points, label=label, id=f"{name}-{seed}-{i}"))
            splits.append("test" if i >= per_class - n_test else "train")
    return Dataset(clouds, classes, splits)


# ---------------------------------------------------------------------------
# file formats


def write_packed(path, array):
    """Write a 2-D array to the packed binary container (float32 payload)."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim != 2:
        raise InvalidInputError(f"packed container holds 2-D arrays, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(_PMC_HEADER.pack(PMC_MAGIC, arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def read_packed(path):
    """Read a packed binary container into a float64 ``(n, dim)`` array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _PMC_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, n, dim = _PMC_HEADER.unpack_from(blob)
    if magic != PMC_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    payload = blob[_PMC_HEADER.size:]
    expected = n * dim * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: header declares {n} x {dim} values ({expected} bytes), payload has {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(n, dim).astype(np.float64)


def _read_xyz(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            fields = text.split()
            if len(fields) != 3:
                raise ParseError(f"expected 3 values, got {len(fields)}", line=lineno, path=path)
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno, path=path) from None
    if not rows:
        raise ParseError("no points found", path=path)
    return np.array(rows)


def _format_of(path, fmt):
    if fmt is not None:
        if fmt not in ("xyz", "pmc"):
            raise InvalidInputError(f"unknown format {fmt!r}; expected 'xyz' or 'pmc'")
        return fmt
    return "pmc" if str(path).endswith(".pmc") else "xyz"


def load_cloud(path, fmt=None, *, label=None, id=None):
    """Load a cloud from ``xyz`` text or ``pmc`` binary (inferred from suffix)."""
    fmt = _format_of(path, fmt)
    if fmt == "xyz":
        pts = _read_xyz(path)
    else:
        pts = read_packed(path)
        if pts.shape[1] != 3:
            raise FormatError(f"{path}: expected dim 3, header says {pts.shape[1]}")
    return PointCloud(pts, label=label, id=id if id is not None else Path(path).stem)


def save_cloud(cloud, path, fmt=None):
    fmt = _format_of(path, fmt)
    if fmt == "xyz":
        # 17 significant digits round-trip float64 exactly
        np.savetxt(path, cloud.points, fmt="%.17g")
    else:
        write_packed(path, cloud.points)


def write_manifest(path, entries, class_names):
    """Write ``(relative_path, label, split)`` entries."""
    with open(path, "w") as fh:
        fh.write(f"# classes: {','.join(class_names)}\n")
        for rel, label, split in entries:
            fh.write(f"{rel},{int(label)},{split}\n")


def read_manifest(path):
    """Parse a manifest into ``(entries, class_names)``; paths resolved."""
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    class_names = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                body = text[1:].strip()
                if body.startswith("classes:"):
                    class_names = [c.strip() for c in body[len("classes:"):].split(",") if c.strip()]
                continue
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != 3:
                raise ParseError("expected <path>,<label>,<split>", line=lineno, path=path)
            rel, label, split = parts
            try:
                label = int(label)
            except ValueError:
                raise ParseError(f"label {label!r} is not an integer", line=lineno, path=path) from None
            if split not in SPLITS:
                raise ParseError(f"split must be train or test, got {split!r}", line=lineno, path=path)
            entries.append((os.path.join(base, rel), label, split))
    if not entries:
        raise ParseError("manifest lists no clouds", path=path)
    if class_names is None:
        class_names = [str(i) for i in range(max(e[1] for e in entries) + 1)]
    return entries, class_names


def load_dataset(manifest_path):
    entries, class_names = read_manifest(manifest_path)
    clouds, splits = [], []
    for path, label, split in entries:
        clouds.append(load_cloud(path, label=label))
        splits.append(split)
    return Dataset(clouds, class_names, splits)
