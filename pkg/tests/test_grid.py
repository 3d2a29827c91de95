import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cgunwarp.errors import DepthError, DimensionError
from cgunwarp.grid import (
    CameraIntrinsics,
    DenseBackwardMap,
    GridMesh3D,
    UnwarpGrid2D,
    densify,
    denormalize_coords,
    depth_to_world,
    flip_grid,
    flip_mesh,
    normalize_coords,
    regrid,
    resample,
    restrict,
    slice_grid,
    unwarp,
)


def pixel_centers(w, h):
    x = -1.0 + (2.0 * np.arange(w) + 1.0) / w
    y = -1.0 + (2.0 * np.arange(h) + 1.0) / h
    gx, gy = np.meshgrid(x, y)
    return np.stack([gx, gy], axis=-1)


def scalar_bilinear(img, x, y):
    """Per-pixel reference interpolator with edge clamping (pixel units)."""
    h, w = img.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    tx, ty = x - x0, y - y0
    top = img[y0, x0] * (1 - tx) + img[y0, x1] * tx
    bot = img[y1, x0] * (1 - tx) + img[y1, x1] * tx
    return top * (1 - ty) + bot * ty


# -- types -------------------------------------------------------------------


def test_grid_types_validate_shape():
    with pytest.raises(DimensionError):
        UnwarpGrid2D(np.zeros((1, 5, 2)))
    with pytest.raises(DimensionError):
        UnwarpGrid2D(np.zeros((4, 4, 3)))
    with pytest.raises(DimensionError):
        GridMesh3D(np.zeros((4, 4, 2)))
    with pytest.raises(ValueError):
        CameraIntrinsics(0.0, 1.0, 0.0, 0.0)


def test_identity_grid_is_valid_and_immutable():
    g = UnwarpGrid2D.identity()
    assert (g.rows, g.cols) == (45, 31)
    assert g.valid
    with pytest.raises(ValueError):
        g.coords[0, 0, 0] = 3.0
    assert not UnwarpGrid2D(np.full((2, 2, 2), 1.5)).valid


# -- normalization -----------------------------------------------------------


def test_normalize_center_pixel_odd_width():
    x, _ = normalize_coords(3, 0, 7, 5)
    assert x == 0.0


def test_normalize_origin_pixel():
    x, y = normalize_coords(0, 0, 488, 712)
    assert x == pytest.approx(-1 + 1 / 488, abs=1e-15)
    assert y == pytest.approx(-1 + 1 / 712, abs=1e-15)


@given(
    st.floats(-50, 600, allow_nan=False),
    st.floats(-50, 800, allow_nan=False),
    st.integers(1, 2000),
    st.integers(1, 2000),
)
def test_normalize_round_trip(px, py, w, h):
    x, y = normalize_coords(px, py, w, h)
    bx, by = denormalize_coords(x, y, w, h)
    assert abs(bx - px) < 1e-9 and abs(by - py) < 1e-9


# -- densify -----------------------------------------------------------------


def test_densify_identity_2x2():
    g = UnwarpGrid2D(np.array([[[-1, -1], [1, -1]], [[-1, 1], [1, 1]]], dtype=float))
    m = densify(g, 37, 23).map
    assert m.shape == (23, 37, 2)
    assert np.max(np.abs(m - pixel_centers(37, 23))) < 1e-6


def test_densify_constant_grid():
    m = densify(UnwarpGrid2D(np.zeros((2, 2, 2))), 9, 11).map
    assert np.all(m == 0.0)


def test_densify_analytic_warp_within_bilinear_bound():
    rows, cols = 45, 31
    xs = np.linspace(-1, 1, cols)
    ys = np.linspace(-1, 1, rows)
    gx, gy = np.meshgrid(xs, ys)
    g = UnwarpGrid2D(np.stack([gx, gy + 0.1 * np.sin(np.pi * gx)], axis=-1))
    w, h = 488, 712
    m = densify(g, w, h).map
    q = pixel_centers(w, h)
    exact_y = q[..., 1] + 0.1 * np.sin(np.pi * q[..., 0])
    # linear interpolation error bound: hx^2/8 * max|f_xx|
    hx = 2.0 / (cols - 1)
    bound = hx * hx / 8.0 * 0.1 * np.pi**2
    assert np.max(np.abs(m[..., 0] - q[..., 0])) < 1e-12
    err = np.abs(m[..., 1] - exact_y)
    assert err.max() <= bound + 1e-12
    # the bound is tight enough to matter
    assert err.max() > 0.25 * bound


def test_densify_rejects_tiny_output():
    with pytest.raises(DimensionError):
        densify(UnwarpGrid2D.identity(2, 2), 1, 10)


@given(
    st.integers(2, 9),
    st.integers(2, 9),
    st.integers(0, 2**31 - 1),
    st.integers(2, 5),
    st.integers(2, 5),
)
def test_restrict_recovers_densified_grid(rows, cols, seed, sx, sy):
    r = np.random.default_rng(seed)
    coords = r.uniform(-1, 1, size=(rows, cols, 2))
    w = (cols - 1) * sx + r.integers(0, 3)
    h = (rows - 1) * sy + r.integers(0, 3)
    back = restrict(densify(UnwarpGrid2D(coords), w, h), rows, cols)
    assert np.max(np.abs(back - coords)) <= 1e-6


# -- resample ----------------------------------------------------------------


def test_resample_identity_map(rng):
    img = rng.random((31, 17, 3)).astype(np.float32)
    out = resample(img, densify(UnwarpGrid2D.identity(), 17, 31))
    assert np.max(np.abs(out - img)) < 1e-6


def test_resample_mirror_map(rng):
    img = rng.random((13, 21))
    m = pixel_centers(21, 13)
    m[..., 0] *= -1.0
    out = resample(img, DenseBackwardMap(m))
    assert np.max(np.abs(out - img[:, ::-1])) < 1e-12


def test_resample_matches_scalar_oracle(rng):
    img = rng.random((8, 8))
    m = rng.uniform(-1, 1, size=(8, 8, 2))
    out = resample(img, DenseBackwardMap(m))
    for i in range(8):
        for j in range(8):
            px, py = denormalize_coords(m[i, j, 0], m[i, j, 1], 8, 8)
            assert out[i, j] == pytest.approx(scalar_bilinear(img, float(px), float(py)), abs=1e-12)


def test_resample_oob_policies(rng):
    img = rng.random((6, 6))
    m = np.full((2, 3, 2), 1.5)
    clamp = resample(img, DenseBackwardMap(m))
    assert np.allclose(clamp, img[-1, -1])
    fill = resample(img, DenseBackwardMap(m), ("fill", 0.25))
    assert np.all(fill == 0.25)
    with pytest.raises(ValueError):
        resample(img, DenseBackwardMap(m), ("wrap", 0))


@given(st.integers(0, 1000))
def test_unwarp_with_identity_grid_is_identity(seed):
    img = np.random.default_rng(seed).random((15, 11, 3))
    out = unwarp(img, UnwarpGrid2D.identity(5, 4), 11, 15)
    assert np.max(np.abs(out - img)) < 1e-9


# -- slicing and flips -------------------------------------------------------


def test_slice_hires_to_coarse():
    g = slice_grid(UnwarpGrid2D.identity(89, 61))
    assert (g.rows, g.cols) == (45, 31)
    assert np.allclose(g.coords, UnwarpGrid2D.identity(45, 31).coords)


def test_slice_3x3_gives_corners(rng):
    a = rng.random((3, 3, 2))
    out = slice_grid(UnwarpGrid2D(a)).coords
    assert np.array_equal(out, a[[0, 0, 2, 2], [0, 2, 0, 2]].reshape(2, 2, 2))


def test_slice_index_set_oracle(rng):
    a = rng.random((9, 7, 3))
    out = slice_grid(GridMesh3D(a)).points
    rows, cols = [0, 2, 4, 6, 8], [0, 2, 4, 6]
    for i, r in enumerate(rows):
        for j, c in enumerate(cols):
            assert np.array_equal(out[i, j], a[r, c])


def test_slice_divisibility_error():
    with pytest.raises(DimensionError):
        slice_grid(np.zeros((10, 7, 2)))


@given(st.integers(0, 10**6), st.sampled_from(["horizontal", "vertical"]))
def test_slice_commutes_with_flips(seed, axis):
    a = np.random.default_rng(seed).uniform(-1, 1, size=(89, 61, 2))
    lhs = slice_grid(flip_grid(a, axis))
    rhs = flip_grid(slice_grid(a), axis)
    assert np.array_equal(lhs, rhs)


def test_flip_identity_grid_is_fixed_point():
    ident = UnwarpGrid2D.identity().coords
    assert np.allclose(flip_grid(ident, "horizontal"), ident)
    assert np.allclose(flip_grid(ident, "vertical"), ident)


def test_flip_mesh_is_involution(rng):
    p = rng.random((5, 4, 3))
    for axis in ("horizontal", "vertical"):
        assert np.array_equal(flip_mesh(flip_mesh(p, axis), axis), p)
    with pytest.raises(ValueError):
        flip_mesh(p, "diagonal")


# -- back-projection ---------------------------------------------------------


def test_depth_principal_point():
    K = CameraIntrinsics(500.0, 520.0, 10.0, 7.0)
    depth = np.full((15, 21), 0.5)
    pix = np.array([[[10.0, 7.0], [10.0, 7.0]], [[10.0, 7.0], [10.0, 7.0]]])
    pts = depth_to_world(pix, depth, K).points
    assert np.allclose(pts, [0.0, 0.0, 0.5], atol=0, rtol=0)


def test_depth_unit_intrinsics(rng):
    K = CameraIntrinsics(1.0, 1.0, 0.0, 0.0)
    z = 1.7
    depth = np.full((10, 12), z)
    pix = rng.uniform(0, 9, size=(3, 4, 2))
    pts = depth_to_world(pix, depth, K).points
    assert np.allclose(pts[..., 0], pix[..., 0] * z, atol=1e-12)
    assert np.allclose(pts[..., 1], pix[..., 1] * z, atol=1e-12)
    assert np.allclose(pts[..., 2], z, atol=1e-12)


def test_depth_plane_fit():
    # inverse depth linear in (u, v) is exactly a world plane
    K = CameraIntrinsics(300.0, 300.0, 32.0, 24.0)
    v, u = np.mgrid[0:48, 0:64].astype(float)
    depth = 1.0 / (0.8 + 0.002 * u - 0.003 * v)
    gu, gv = np.meshgrid(np.arange(2, 62, 6.0), np.arange(2, 46, 4.0))
    pts = depth_to_world(np.stack([gu, gv], -1), depth, K).points.reshape(-1, 3)
    a = np.c_[pts[:, 0], pts[:, 1], np.ones(len(pts))]
    coef, *_ = np.linalg.lstsq(a, pts[:, 2], rcond=None)
    rms = np.sqrt(np.mean((a @ coef - pts[:, 2]) ** 2))
    assert rms < 1e-6


def test_depth_constant_gives_constant_z(rng):
    K = CameraIntrinsics(100.0, 100.0, 15.5, 20.5)
    pts = depth_to_world(rng.uniform(0, 30, size=(6, 5, 2)), np.full((41, 31), 2.25), K).points
    assert np.all(pts[..., 2] == 2.25)


def test_depth_invalid_errors():
    K = CameraIntrinsics(1.0, 1.0, 0.0, 0.0)
    depth = np.ones((5, 5))
    depth[2, 2] = 0.0
    pix = np.array([[[2.0, 2.0], [0.0, 0.0]], [[1.0, 1.0], [3.0, 3.0]]])
    with pytest.raises(DepthError):
        depth_to_world(pix, depth, K)
    depth[2, 2] = np.nan
    with pytest.raises(DepthError):
        depth_to_world(pix, depth, K)
    with pytest.raises(DimensionError):
        depth_to_world(pix + 10, np.ones((5, 5)), K)


def test_regrid_identity_and_linear(rng):
    a = rng.random((5, 4, 3))
    assert np.array_equal(regrid(a, 5, 4), a)
    ident = UnwarpGrid2D.identity(45, 31).coords
    assert np.allclose(regrid(ident, 12, 8), UnwarpGrid2D.identity(12, 8).coords, atol=1e-12)
