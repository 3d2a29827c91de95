"""Coupled-grid data model, densification, resampling and back-projection.

Conventions used throughout the package:

* grids are ``(rows, cols, k)`` arrays, rows vertical; ``coords[..., 0]`` is x.
* normalized image coordinates use pixel centers: pixel ``i`` of an image of
  width ``w`` sits at ``-1 + (2 i + 1) / w``; -1 and +1 are the outer image
  edges.
* images are float arrays ``(h, w)`` or ``(h, w, c)`` with samples in [0, 1].
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DepthError, DimensionError

GRID_ROWS = 45
GRID_COLS = 31
HIRES_ROWS = 89
HIRES_COLS = 61


@dataclass(frozen=True)
class UnwarpGrid2D:
    """Coarse backward map: ``coords[i, j]`` is the normalized source position
    of the unwarped-image point at grid node ``(i, j)``."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64)
        if c.ndim != 3 or c.shape[2] != 2:
            raise DimensionError(f"2D grid must be (rows, cols, 2), got {c.shape}")
        if c.shape[0] < 2 or c.shape[1] < 2:
            raise DimensionError(f"grid needs at least 2x2 nodes, got {c.shape[:2]}")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def rows(self):
        return self.coords.shape[0]

    @property
    def cols(self):
        return self.coords.shape[1]

    @property
    def valid(self):
        """True when every coordinate lies in [-1, 1] (ground-truth requirement)."""
        return bool(np.all(np.isfinite(self.coords)) and np.all(np.abs(self.coords) <= 1.0))

    @classmethod
    def identity(cls, rows=GRID_ROWS, cols=GRID_COLS):
        xs = np.linspace(-1.0, 1.0, cols)
        ys = np.linspace(-1.0, 1.0, rows)
        gx, gy = np.meshgrid(xs, ys)
        return cls(np.stack([gx, gy], axis=-1))


@dataclass(frozen=True)
class GridMesh3D:
    """3D shape grid; ``points[i, j]`` is (X, Y, Z) in camera space, meters."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 3 or p.shape[2] != 3:
            raise DimensionError(f"3D grid must be (rows, cols, 3), got {p.shape}")
        if p.shape[0] < 2 or p.shape[1] < 2:
            raise DimensionError(f"grid needs at least 2x2 nodes, got {p.shape[:2]}")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def rows(self):
        return self.points.shape[0]

    @property
    def cols(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class DenseBackwardMap:
    """Per-output-pixel normalized source coordinates, shape ``(height, width, 2)``."""

    map: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.map, dtype=np.float64)
        if m.ndim != 3 or m.shape[2] != 2:
            raise DimensionError(f"dense map must be (h, w, 2), got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "map", m)

    @property
    def width(self):
        return self.map.shape[1]

    @property
    def height(self):
        return self.map.shape[0]


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


def as_image(img):
    """Float64 view of an image with an explicit channel axis ``(h, w, c)``."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[2] not in (1, 3) or a.shape[0] == 0 or a.shape[1] == 0:
        raise DimensionError(f"image must be (h, w) or (h, w, 1|3), got {a.shape}")
    return a


def _restore(out, like):
    return out[:, :, 0] if np.ndim(like) == 2 else out


# ---------------------------------------------------------------------------
# coordinate conventions
# ---------------------------------------------------------------------------


def normalize_coords(px, py, width, height):
    """Pixel coordinates (pixel-center convention) to normalized [-1, 1]."""
    if width <= 0 or height <= 0:
        raise DimensionError("width and height must be positive")
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    return (2.0 * px + 1.0) / width - 1.0, (2.0 * py + 1.0) / height - 1.0


def denormalize_coords(x, y, width, height):
    """Inverse of :func:`normalize_coords`."""
    if width <= 0 or height <= 0:
        raise DimensionError("width and height must be positive")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return ((x + 1.0) * width - 1.0) / 2.0, ((y + 1.0) * height - 1.0) / 2.0


def grid_to_pixels(coords, width, height):
    """(rows, cols, 2) normalized grid to pixel coordinates."""
    px, py = denormalize_coords(coords[..., 0], coords[..., 1], width, height)
    return np.stack([px, py], axis=-1)


def pixels_to_grid(pixels, width, height):
    x, y = normalize_coords(pixels[..., 0], pixels[..., 1], width, height)
    return np.stack([x, y], axis=-1)


# ---------------------------------------------------------------------------
# densification
# ---------------------------------------------------------------------------


def _interp_matrix(n_out, n_nodes):
    """Rows of linear-interpolation weights taking ``n_nodes`` node values to
    ``n_out`` pixel centers, nodes spanning the outer edges [-1, 1]."""
    q = (2.0 * np.arange(n_out) + 1.0) / n_out - 1.0
    f = (q + 1.0) / 2.0 * (n_nodes - 1)
    i0 = np.minimum(np.floor(f).astype(np.int64), n_nodes - 2)
    t = f - i0
    m = np.zeros((n_out, n_nodes))
    rows = np.arange(n_out)
    m[rows, i0] = 1.0 - t
    m[rows, i0 + 1] += t
    return m


def densify(grid, out_width, out_height):
    """Bilinearly interpolate a coarse grid to a per-pixel backward map.

    The corner nodes sit on the corners of the output image; pixel centers in
    between are interpolated separably.
    """
    if out_width < 2 or out_height < 2:
        raise DimensionError(f"output must be at least 2x2, got {out_width}x{out_height}")
    coords = grid.coords if isinstance(grid, UnwarpGrid2D) else np.asarray(grid, dtype=np.float64)
    ay = _interp_matrix(out_height, coords.shape[0])
    ax = _interp_matrix(out_width, coords.shape[1])
    dense = np.einsum("hr,rck,wc->hwk", ay, coords, ax, optimize=True)
    return DenseBackwardMap(dense)


def _node_restriction_matrix(n_px, n_nodes):
    # node j sits at pixel position j * n_px / (n_nodes - 1) - 0.5; evaluate the
    # piecewise-linear profile there from two pixel centers of one adjacent cell
    cell = n_px / (n_nodes - 1)
    m = np.zeros((n_nodes, n_px))
    for j in range(n_nodes):
        c = min(j, n_nodes - 2)
        lo = c * cell - 0.5
        hi = (c + 1) * cell - 0.5
        p0 = int(np.ceil(lo - 1e-12))
        p1 = p0 + 1
        if p1 > hi + 1e-12:
            raise DimensionError("output too small: each grid cell must cover two pixel centers")
        x = j * cell - 0.5
        m[j, p0] = 1.0 - (x - p0)
        m[j, p1] = x - p0
    return m


def restrict(dense, rows, cols):
    """Evaluate a dense map at the output positions of a ``rows x cols`` grid.

    Uses bilinear interpolation (extrapolating inside one cell where needed),
    so it recovers the node values of any map produced by :func:`densify`.
    """
    m = dense.map if isinstance(dense, DenseBackwardMap) else np.asarray(dense)
    ry = _node_restriction_matrix(m.shape[0], rows)
    rx = _node_restriction_matrix(m.shape[1], cols)
    return np.einsum("rh,hwk,cw->rck", ry, m, rx, optimize=True)


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------


def resample(image, dense_map, oob_policy="clamp"):
    """Bilinearly sample ``image`` through a normalized backward map.

    ``oob_policy`` is ``"clamp"`` (replicate border) or ``("fill", value)``;
    with fill, map coordinates outside [-1, 1] produce ``value``.
    """
    img = as_image(image)
    m = dense_map.map if isinstance(dense_map, DenseBackwardMap) else np.asarray(dense_map, dtype=np.float64)
    h, w = img.shape[:2]
    px, py = denormalize_coords(m[..., 0], m[..., 1], w, h)
    if oob_policy == "clamp":
        fill, value = False, 0.0
    else:
        kind, value = oob_policy
        if kind != "fill":
            raise ValueError(f"unknown oob_policy {oob_policy!r}")
        fill = True
    out = kernels.bilinear_sample(np.ascontiguousarray(img), np.ascontiguousarray(px), np.ascontiguousarray(py), fill, float(value))
    return _restore(out, image)


def unwarp(image, grid, out_width, out_height, oob_policy="clamp"):
    return resample(image, densify(grid, out_width, out_height), oob_policy)


def resize(image, width, height):
    """Bilinear resize with pixel-center alignment."""
    img = as_image(image)
    h, w = img.shape[:2]
    ys, xs = np.meshgrid((np.arange(height) + 0.5) * h / height - 0.5, (np.arange(width) + 0.5) * w / width - 0.5, indexing="ij")
    out = kernels.bilinear_sample(np.ascontiguousarray(img), xs, ys, False, 0.0)
    return _restore(out, image)


# ---------------------------------------------------------------------------
# slicing, flips, back-projection
# ---------------------------------------------------------------------------


def slice_grid(hi, factor=2):
    """Keep every ``factor``-th node in both directions (89x61 -> 45x31)."""
    arr = hi.coords if isinstance(hi, UnwarpGrid2D) else hi.points if isinstance(hi, GridMesh3D) else np.asarray(hi)
    rows, cols = arr.shape[:2]
    if factor < 1 or (rows - 1) % factor or (cols - 1) % factor:
        raise DimensionError(f"({rows}-1, {cols}-1) not divisible by factor {factor}")
    out = arr[::factor, ::factor]
    if isinstance(hi, UnwarpGrid2D):
        return UnwarpGrid2D(out)
    if isinstance(hi, GridMesh3D):
        return GridMesh3D(out)
    return out.copy()


def flip_grid(coords, axis):
    """Mirror a normalized 2D grid: negate the coordinate and reverse the node order."""
    c = np.array(coords, dtype=np.float64)
    if axis == "horizontal":
        c[..., 0] *= -1.0
        return c[:, ::-1].copy()
    if axis == "vertical":
        c[..., 1] *= -1.0
        return c[::-1].copy()
    raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def flip_mesh(points, axis):
    p = np.array(points, dtype=np.float64)
    if axis == "horizontal":
        p[..., 0] *= -1.0
        return p[:, ::-1].copy()
    if axis == "vertical":
        p[..., 1] *= -1.0
        return p[::-1].copy()
    raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def depth_to_world(pixels, depth, K):
    """Back-project pixel-unit grid positions through a depth image.

    ``pixels`` is (rows, cols, 2) in pixel units; depth is sampled bilinearly.
    """
    pix = pixels.coords if isinstance(pixels, UnwarpGrid2D) else np.asarray(pixels, dtype=np.float64)
    d = as_image(depth)
    if d.shape[2] != 1:
        raise DimensionError("depth image must have one channel")
    h, w = d.shape[:2]
    u, v = pix[..., 0], pix[..., 1]
    if np.any(u < -0.5) or np.any(u > w - 0.5) or np.any(v < -0.5) or np.any(v > h - 0.5):
        raise DimensionError("grid pixels fall outside the depth image")
    z = kernels.bilinear_sample(np.ascontiguousarray(d), np.ascontiguousarray(u), np.ascontiguousarray(v), False, 0.0)[..., 0]
    bad = ~np.isfinite(z) | (z <= 0)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise DepthError(f"invalid depth {z[i, j]} at grid node ({i}, {j})")
    x = (u - K.cx) * z / K.fx
    y = (v - K.cy) * z / K.fy
    return GridMesh3D(np.stack([x, y, z], axis=-1))


def project(points, K):
    """Pinhole projection of (..., 3) camera-space points to pixel coordinates."""
    p = np.asarray(points, dtype=np.float64)
    return np.stack([K.fx * p[..., 0] / p[..., 2] + K.cx, K.fy * p[..., 1] / p[..., 2] + K.cy], axis=-1)


def regrid(arr, rows, cols):
    """Linearly resample a (R, C, k) node array to (rows, cols, k) nodes spanning
    the same extent; the identity when the sizes already match."""
    a = np.asarray(arr, dtype=np.float64)
    if a.shape[:2] == (rows, cols):
        return a.copy()

    def weights(n_in, n_out):
        f = np.linspace(0.0, n_in - 1.0, n_out)
        i0 = np.minimum(np.floor(f).astype(np.int64), n_in - 2)
        t = f - i0
        m = np.zeros((n_out, n_in))
        m[np.arange(n_out), i0] = 1.0 - t
        m[np.arange(n_out), i0 + 1] += t
        return m

    return np.einsum("ar,rck,bc->abk", weights(a.shape[0], rows), a, weights(a.shape[1], cols), optimize=True)
