import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_rotation
from pointmanifold.errors import FormatError, InvalidInputError, ParseError
from pointmanifold.pointset import (
    SHAPE_CLASSES,
    Dataset,
    PointCloud,
    generate_shape,
    load_cloud,
    load_dataset,
    read_manifest,
    read_packed,
    save_cloud,
    standardize,
    synthetic_dataset,
    write_manifest,
    write_packed,
)

coords = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
clouds = arrays(np.float64, st.tuples(st.integers(1, 40), st.just(3)), elements=coords)


def resolvable(pts):
    """Spread well above the rounding level of the coordinates."""
    scale = np.abs(pts).max()
    return scale > 1e-100 and np.ptp(pts, axis=0).max() > 1e-6 * scale


def test_standardize_two_points():
    out = standardize(PointCloud([[0, 0, 0], [2, 0, 0]], label=3))
    np.testing.assert_array_equal(out.points, [[-1, 0, 0], [1, 0, 0]])
    assert out.label == 3


def test_standardize_single_point_is_origin():
    out = standardize(PointCloud([[5, 5, 5]]))
    np.testing.assert_array_equal(out.points, [[0, 0, 0]])


def test_standardize_coincident_points_are_origin():
    # the centroid of 37 copies of 56.29... is not exactly 56.29...
    out = standardize(PointCloud(np.full((37, 3), 56.29580788)))
    np.testing.assert_array_equal(out.points, np.zeros((37, 3)))


def test_standardize_random_cloud(rng):
    out = standardize(PointCloud(rng.normal(3.0, 2.0, (100, 3))))
    assert np.linalg.norm(out.points.mean(axis=0)) <= 1e-9
    assert abs(np.linalg.norm(out.points, axis=1).max() - 1.0) <= 1e-9


def test_non_finite_rejected():
    with pytest.raises(InvalidInputError):
        PointCloud([[0, 0, np.nan]])
    with pytest.raises(InvalidInputError):
        PointCloud(np.zeros((0, 3)))


def test_points_are_read_only():
    c = PointCloud(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        c.points[0, 0] = 1.0


@given(clouds)
def test_standardize_idempotent(pts):
    assume(resolvable(pts))
    once = standardize(PointCloud(pts))
    twice = standardize(once)
    np.testing.assert_allclose(twice.points, once.points, atol=1e-9)


@given(clouds, st.integers(0, 2**32 - 1))
def test_standardize_commutes_with_rotation(pts, seed):
    assume(resolvable(pts))
    rot = random_rotation(np.random.default_rng(seed))
    a = standardize(PointCloud(pts @ rot.T)).points
    b = standardize(PointCloud(pts)).points @ rot.T
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_sphere_norms_equal():
    pts = generate_shape("sphere", 500, 0.0, seed=7).points
    # the sample centroid is not the sphere center; fit the center instead
    center = np.linalg.lstsq(
        np.hstack([2 * pts, np.ones((len(pts), 1))]), (pts**2).sum(axis=1), rcond=None
    )[0][:3]
    r = np.linalg.norm(pts - center, axis=1)
    assert r.max() - r.min() <= 1e-9


def test_plane_patch_rank_two():
    pts = generate_shape("plane_patch", 200, 0.0, seed=1).points
    s = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    assert s[2] <= 1e-9


@pytest.mark.parametrize("shape", SHAPE_CLASSES)
def test_generate_deterministic_and_labelled(shape):
    a = generate_shape(shape, 64, 0.01, seed=5)
    b = generate_shape(shape, 64, 0.01, seed=5)
    assert a.points.tobytes() == b.points.tobytes()
    assert a.label == SHAPE_CLASSES.index(shape)
    assert a.n == 64


@given(st.sampled_from(SHAPE_CLASSES), st.integers(0, 10_000), st.floats(0, 0.05))
def test_generated_shapes_standardize(shape, seed, noise):
    out = standardize(generate_shape(shape, 32, noise, seed))
    assert np.linalg.norm(out.points.mean(axis=0)) <= 1e-9
    assert abs(np.linalg.norm(out.points, axis=1).max() - 1.0) <= 1e-9


def test_generate_errors():
    with pytest.raises(InvalidInputError):
        generate_shape("klein_bottle", 32)
    with pytest.raises(InvalidInputError):
        generate_shape("sphere", 7)
    with pytest.raises(InvalidInputError):
        generate_shape("sphere", 32, noise=-1.0)


def test_binary_round_trip_bits(tmp_path):
    pts = np.array([[0.5, -1.25, 3.0], [2.0**-10, 2.0, -7.5], [0.0, 0.0, 1.0]])
    path = tmp_path / "c.pmc"
    save_cloud(PointCloud(pts), path)
    assert load_cloud(path).points.tobytes() == pts.tobytes()


def test_binary_round_trip_is_float32(tmp_path, rng):
    pts = rng.standard_normal((50, 3))
    path = tmp_path / "c.pmc"
    save_cloud(PointCloud(pts), path)
    np.testing.assert_array_equal(load_cloud(path).points, pts.astype(np.float32).astype(np.float64))


def test_binary_header_layout(tmp_path):
    path = tmp_path / "c.pmc"
    write_packed(path, np.ones((2, 3)))
    blob = path.read_bytes()
    assert blob[:4] == b"PMC1"
    assert int.from_bytes(blob[4:8], "little") == 2
    assert int.from_bytes(blob[8:12], "little") == 3
    assert len(blob) == 12 + 2 * 3 * 4


def test_binary_count_mismatch(tmp_path):
    path = tmp_path / "c.pmc"
    write_packed(path, np.ones((4, 3)))
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(FormatError):
        read_packed(path)
    path.write_bytes(b"XXXX" + bytes(8))
    with pytest.raises(FormatError):
        read_packed(path)


def test_text_format(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("1 2 3\n4 5 6\n")
    np.testing.assert_array_equal(load_cloud(path).points, [[1, 2, 3], [4, 5, 6]])


def test_text_comments_and_blanks(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("# header\n\n1 2 3  # first\n\t4 5 6\n")
    assert load_cloud(path).n == 2


def test_text_parse_error_line(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("1 2\n")
    with pytest.raises(ParseError) as err:
        load_cloud(path)
    assert err.value.line == 1
    path.write_text("1 2 3\n4 x 6\n")
    with pytest.raises(ParseError) as err:
        load_cloud(path)
    assert err.value.line == 2


@given(arrays(np.float64, (5, 3), elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_text_round_trip_nine_digits(pts):
    import tempfile, os

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "c.xyz")
        save_cloud(PointCloud(pts), path)
        back = load_cloud(path).points
    np.testing.assert_allclose(back, pts, rtol=1e-9, atol=0)


def test_manifest_round_trip(tmp_path):
    for name in ("a", "b"):
        save_cloud(PointCloud(np.eye(3)), tmp_path / f"{name}.xyz")
    write_manifest(tmp_path / "m.txt", [("a.xyz", 0, "train"), ("b.xyz", 1, "test")], ["x", "y"])
    entries, names = read_manifest(tmp_path / "m.txt")
    assert names == ["x", "y"]
    assert [(e[1], e[2]) for e in entries] == [(0, "train"), (1, "test")]
    ds = load_dataset(tmp_path / "m.txt")
    assert [c.id for c in ds.subset("test")] == ["b"]


def test_manifest_errors(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("a.xyz,0\n")
    with pytest.raises(ParseError):
        read_manifest(path)
    path.write_text("a.xyz,0,validation\n")
    with pytest.raises(ParseError):
        read_manifest(path)


def test_dataset_label_range():
    with pytest.raises(InvalidInputError):
        Dataset([PointCloud(np.eye(3), label=2)], ["a", "b"])


def test_synthetic_dataset_split():
    ds = synthetic_dataset(10, 32, seed=3)
    assert len(ds.clouds) == 80
    assert ds.splits.count("test") == 16
    for label in range(8):
        tags = [s for c, s in zip(ds.clouds, ds.splits) if c.label == label]
        assert tags.count("test") == 2
    again = synthetic_dataset(10, 32, seed=3)
    assert all(a.points.tobytes() == b.points.tobytes() for a, b in zip(ds.clouds, again.clouds))
    with pytest.raises(InvalidInputError):
        synthetic_dataset(0, 32)
