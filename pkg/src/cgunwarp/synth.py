"""Pseudo-photorealistic sample synthesis.

A parametric height-field deformation of an A4 sheet is imaged by a virtual
pinhole camera, tightly cropped, shaded into a blank "lit" page and multiplied
with a document texture; the background is replaced outside the sheet. The
same machinery renders dot-grid UV captures for the grid recovery tests.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import GenerationError
from .grid import (
    HIRES_COLS,
    HIRES_ROWS,
    CameraIntrinsics,
    GridMesh3D,
    UnwarpGrid2D,
    as_image,
    densify,
    flip_grid,
    flip_mesh,
    grid_to_pixels,
    pixels_to_grid,
    resample,
    resize,
    slice_grid,
)
from .io import read_image, write_grid, write_image

A4_WIDTH = 0.210
A4_HEIGHT = 0.297
IMAGE_WIDTH = 488
IMAGE_HEIGHT = 712
MAX_REJECTIONS = 100

SOURCE_UVDOC = "uvdoc-style"
SOURCE_DOC3D = "synthetic-doc3d-standin"


@dataclass(frozen=True)
class UVParam:
    """Texture coordinates (u, v) in [0, 1] at each grid node, ``(rows, cols, 2)``."""

    nodes: np.ndarray

    @classmethod
    def regular(cls, rows, cols):
        u, v = np.meshgrid(np.linspace(0.0, 1.0, cols), np.linspace(0.0, 1.0, rows))
        return cls(np.stack([u, v], axis=-1))

    @property
    def rows(self):
        return self.nodes.shape[0]

    @property
    def cols(self):
        return self.nodes.shape[1]


@dataclass
class Sample:
    image: np.ndarray
    G: UnwarpGrid2D
    W: GridMesh3D
    uv: UVParam
    source: str = SOURCE_UVDOC
    aug_log: list = field(default_factory=list)
    seed: int = 0
    index: int = 0
    blank_lit: np.ndarray = None
    texture: np.ndarray = None


# ---------------------------------------------------------------------------
# deformation
# ---------------------------------------------------------------------------


@dataclass
class DeformationField:
    """Height field over the flat sheet plus a rigid camera pose.

    Each term is ``(kind, amplitude, direction_angle, offset, scale)``:
    ``curl`` is a sinusoid across the direction, ``fold`` a smoothed crease,
    ``bend`` a quadratic page curve.
    """

    terms: list
    tilt_x: float = 0.0
    tilt_y: float = 0.0
    roll: float = 0.0
    distance: float = 0.5

    def height(self, x, y):
        h = np.zeros(np.broadcast(x, y).shape)
        for kind, amp, ang, off, scale in self.terms:
            s = np.cos(ang) * x + np.sin(ang) * y - off
            if kind == "curl":
                h += amp * np.sin(2.0 * np.pi * s / scale)
            elif kind == "fold":
                h += amp * (np.sqrt(s * s + scale * scale) - scale)
            elif kind == "bend":
                h += amp * s * s / scale
            else:
                raise ValueError(f"unknown deformation term {kind!r}")
        return h

    def rotation(self):
        cx, sx = np.cos(self.tilt_x), np.sin(self.tilt_x)
        cy, sy = np.cos(self.tilt_y), np.sin(self.tilt_y)
        cz, sz = np.cos(self.roll), np.sin(self.roll)
        rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
        ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
        rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
        return rz @ ry @ rx

    def surface(self, u, v):
        """Camera-space 3D points (meters) of flat-sheet coordinates (u, v) in [0, 1]."""
        x = (np.asarray(u) - 0.5) * A4_WIDTH
        y = (np.asarray(v) - 0.5) * A4_HEIGHT
        # +z points away from the camera; the page bulges toward it
        local = np.stack([x, y, -self.height(x, y)], axis=-1)
        return local @ self.rotation().T + np.array([0.0, 0.0, self.distance])


def draw_deformation(rng, prior=SOURCE_UVDOC):
    terms = []
    if prior == SOURCE_DOC3D:
        for _ in range(rng.integers(1, 3)):
            terms.append(("curl", rng.uniform(0.006, 0.018), rng.uniform(0, np.pi), rng.uniform(-0.05, 0.05), rng.uniform(0.2, 0.45)))
        if rng.random() < 0.8:
            terms.append(("bend", rng.uniform(-0.8, 0.8), rng.uniform(0, np.pi), rng.uniform(-0.03, 0.03), 1.0))
        tilt = 0.45
    else:
        for _ in range(rng.integers(0, 3)):
            terms.append(("curl", rng.uniform(0.003, 0.012), rng.uniform(0, np.pi), rng.uniform(-0.05, 0.05), rng.uniform(0.1, 0.3)))
        for _ in range(rng.integers(1, 4)):
            terms.append(("fold", rng.uniform(-0.35, 0.35), rng.uniform(0, np.pi), rng.uniform(-0.08, 0.08), rng.uniform(0.003, 0.012)))
        if rng.random() < 0.5:
            terms.append(("bend", rng.uniform(-0.8, 0.8), rng.uniform(0, np.pi), rng.uniform(-0.03, 0.03), 1.0))
        tilt = 0.25
    return DeformationField(
        terms=terms,
        tilt_x=float(rng.uniform(-tilt, tilt)),
        tilt_y=float(rng.uniform(-tilt, tilt)),
        roll=float(rng.uniform(-0.1, 0.1)),
        distance=float(rng.uniform(0.45, 0.6)),
    )


def quad_orientation_ok(pixels):
    """True when every quad of an image-space grid is positively oriented (no foldover)."""
    q = np.asarray(pixels)
    u = q[:-1, 1:] - q[:-1, :-1]
    v = q[1:, :-1] - q[:-1, :-1]
    c1 = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    u2 = q[1:, 1:] - q[1:, :-1]
    v2 = q[1:, 1:] - q[:-1, 1:]
    c2 = u2[..., 0] * v2[..., 1] - u2[..., 1] * v2[..., 0]
    return bool(np.all(c1 > 0) and np.all(c2 > 0))


def _lattice(rows, cols, lo=0.0, hi=1.0):
    u, v = np.meshgrid(np.linspace(lo, hi, cols), np.linspace(lo, hi, rows))
    return u, v


def _frame(points_px, width, height, margins, keep_aspect=False):
    """Affine (scale, offset) taking edge-continuous coordinates of a crop box
    around ``points_px`` onto a ``width x height`` frame."""
    lo = points_px.reshape(-1, 2).min(axis=0)
    hi = points_px.reshape(-1, 2).max(axis=0)
    span = hi - lo
    lo = lo - span * np.array([margins[0], margins[1]])
    hi = hi + span * np.array([margins[2], margins[3]])
    scale = np.array([width, height], dtype=np.float64) / (hi - lo)
    if keep_aspect:
        s = scale.min()
        center = (lo + hi) / 2.0
        scale = np.array([s, s])
        lo = center - np.array([width, height]) / (2.0 * s)
    return scale, lo


def _camera(deform, rows, cols, width, height, margins, keep_aspect=False, focal=1000.0):
    u, v = _lattice(rows, cols)
    pts = deform.surface(u, v)
    raw = focal * pts[..., :2] / pts[..., 2:3]
    scale, lo = _frame(raw, width, height, margins, keep_aspect)
    # edge-continuous -> pixel-center coordinates
    K = CameraIntrinsics(focal * scale[0], focal * scale[1], -lo[0] * scale[0] - 0.5, -lo[1] * scale[1] - 0.5)
    return K, pts


def _project(pts, K):
    return np.stack([K.fx * pts[..., 0] / pts[..., 2] + K.cx, K.fy * pts[..., 1] / pts[..., 2] + K.cy], axis=-1)


# ---------------------------------------------------------------------------
# appearance
# ---------------------------------------------------------------------------


def procedural_texture(rng, width=IMAGE_WIDTH, height=IMAGE_HEIGHT, blur=1.6):
    """Band-limited document-like page: text-line bars, occasional figure blocks."""
    paper = rng.uniform(0.9, 1.0, size=3)
    img = np.ones((height, width, 3)) * paper
    ink = rng.uniform(0.1, 0.3, size=3)
    mx, my = int(width * rng.uniform(0.06, 0.1)), int(height * rng.uniform(0.05, 0.08))
    line_h = int(rng.integers(14, 22))
    bar_h = max(4, int(line_h * rng.uniform(0.35, 0.5)))
    y = my
    while y + bar_h < height - my:
        if rng.random() < 0.06 and y + 6 * line_h < height - my:
            x0 = mx + int(rng.integers(0, width // 4))
            x1 = min(width - mx, x0 + int(rng.integers(width // 4, width // 2)))
            img[y : y + 5 * line_h, x0:x1] = rng.uniform(0.4, 0.85, size=3)
            y += 6 * line_h
            continue
        x = mx
        end = width - mx - (int(rng.integers(0, width // 3)) if rng.random() < 0.2 else 0)
        while x < end:
            wl = int(rng.integers(8, 45))
            img[y : y + bar_h, x : min(x + wl, end)] = ink
            x += wl + int(rng.integers(5, 9))
        y += line_h
    return ndimage.gaussian_filter(img, sigma=(blur, blur, 0))


def procedural_background(rng, width=IMAGE_WIDTH, height=IMAGE_HEIGHT):
    base = rng.uniform(0.1, 0.8, size=3)
    noise = ndimage.gaussian_filter(rng.normal(size=(height, width, 3)), sigma=(rng.uniform(2, 12),) * 2 + (0,))
    noise /= np.abs(noise).max() + 1e-12
    return np.clip(base + 0.25 * noise, 0.0, 1.0)


def _load_random_image(rng, directory, width, height):
    files = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in (".png", ".ppm", ".pgm", ".jpg", ".jpeg"))
    if not files:
        raise GenerationError(f"no images found in {directory}")
    img = read_image(files[int(rng.integers(len(files)))])
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    return resize(img, width, height)


def shading_nodes(points, rng):
    """Per-node RGB shading of a lit blank page from mesh normals."""
    du = np.gradient(points, axis=1)
    dv = np.gradient(points, axis=0)
    n = np.cross(du, dv)
    n /= np.linalg.norm(n, axis=-1, keepdims=True) + 1e-12
    # orient toward the camera
    flip = np.sum(n * points, axis=-1) > 0
    n[flip] *= -1.0
    light = np.array([rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), -1.0])
    light /= np.linalg.norm(light)
    ambient = rng.uniform(0.4, 0.55)
    diffuse = rng.uniform(0.35, 0.5)
    lam = ambient + diffuse * np.clip(n @ light, 0.0, 1.0)
    tint = rng.uniform(0.9, 1.0, size=3)
    return np.clip(lam[..., None] * tint, 0.0, 1.0)


def _grid_pixels(grid, width, height):
    coords = grid.coords if isinstance(grid, UnwarpGrid2D) else np.asarray(grid, dtype=np.float64)
    return grid_to_pixels(coords, width, height)


def document_region(grid, width, height):
    """Boolean mask of pixel centers inside the union of grid quads."""
    px = _grid_pixels(grid, width, height)
    _, mask = kernels.rasterize_quads(np.ascontiguousarray(px), np.zeros(px.shape[:2] + (1,)), height, width)
    return mask


def sample_texture(texture, uvmap):
    tex = as_image(texture)
    th, tw = tex.shape[:2]
    xs = uvmap[..., 0] * tw - 0.5
    ys = uvmap[..., 1] * th - 0.5
    return kernels.bilinear_sample(np.ascontiguousarray(tex), np.ascontiguousarray(xs), np.ascontiguousarray(ys), False, 0.0)


def composite(blank_lit, uv, grid, texture, background):
    """Multiply the lit blank page by the texture inside the sheet; background elsewhere."""
    blank = as_image(blank_lit)
    bg = as_image(background)
    h, w = blank.shape[:2]
    if bg.shape[:2] != (h, w):
        raise ValueError(f"background {bg.shape[:2]} does not match image {(h, w)}")
    px = _grid_pixels(grid, w, h)
    nodes = uv.nodes if isinstance(uv, UVParam) else np.asarray(uv)
    uvmap, mask = kernels.rasterize_quads(np.ascontiguousarray(px), np.ascontiguousarray(nodes, dtype=np.float64), h, w)
    tex = sample_texture(texture, uvmap)
    nc = max(blank.shape[2], tex.shape[2], bg.shape[2])
    out = np.broadcast_to(bg, (h, w, nc)).copy()
    doc = np.broadcast_to(blank, (h, w, nc)) * np.broadcast_to(tex, (h, w, nc))
    out[mask] = doc[mask]
    return out


def render_blank(grid, shading, width, height, outside=0.0):
    """Lit blank page: per-node shading interpolated across the sheet."""
    px = _grid_pixels(grid, width, height)
    vals, mask = kernels.rasterize_quads(np.ascontiguousarray(px), np.ascontiguousarray(shading), height, width)
    vals[~mask] = outside
    return vals


# ---------------------------------------------------------------------------
# sample generation
# ---------------------------------------------------------------------------


def _sample_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def make_sample(rng, prior=SOURCE_UVDOC, width=IMAGE_WIDTH, height=IMAGE_HEIGHT, texture_dir=None, background_dir=None):
    for _ in range(MAX_REJECTIONS):
        deform = draw_deformation(rng, prior)
        margins = rng.uniform(0.01, 0.05, size=4)
        K, pts = _camera(deform, HIRES_ROWS, HIRES_COLS, width, height, margins)
        px = _project(pts, K)
        fine_u, fine_v = _lattice(4 * HIRES_ROWS, 4 * HIRES_COLS)
        if not quad_orientation_ok(_project(deform.surface(fine_u, fine_v), K)):
            continue
        g_hi = pixels_to_grid(px, width, height)
        if np.all(np.abs(g_hi) <= 1.0):
            break
    else:
        raise GenerationError(f"no valid deformation after {MAX_REJECTIONS} draws")
    uv_hi = UVParam.regular(HIRES_ROWS, HIRES_COLS)
    shade = shading_nodes(pts, rng)
    blank = render_blank(g_hi, shade, width, height)
    texture = _load_random_image(rng, texture_dir, width, height) if texture_dir else procedural_texture(rng, width, height)
    background = _load_random_image(rng, background_dir, width, height) if background_dir else procedural_background(rng, width, height)
    image = composite(blank, uv_hi, g_hi, texture, background)
    return Sample(
        image=image,
        G=UnwarpGrid2D(slice_grid(g_hi, 2)),
        W=GridMesh3D(slice_grid(pts, 2)),
        uv=UVParam(slice_grid(uv_hi.nodes, 2)),
        source=prior,
        blank_lit=blank,
        texture=texture,
    )


def generate_standin(n, seed, prior=SOURCE_UVDOC, width=IMAGE_WIDTH, height=IMAGE_HEIGHT, texture_dir=None, background_dir=None):
    """``n`` samples; sample ``i`` depends only on ``(seed, i)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = []
    for i in range(n):
        s = make_sample(_sample_rng(seed, i), prior, width, height, texture_dir, background_dir)
        s.seed, s.index = int(seed), i
        out.append(s)
    return out


def roundtrip_psnr(s, crop=0.9):
    """PSNR between the sample unwarped by its own G and the flat texture under
    the same (unwarped) lighting, on the central ``crop`` fraction."""
    h, w = s.image.shape[:2]
    dense = densify(s.G, w, h)
    out = resample(s.image, dense)
    ref = resample(s.blank_lit, dense) * as_image(s.texture)
    my, mx = int(round(h * (1 - crop) / 2)), int(round(w * (1 - crop) / 2))
    err = np.mean((out[my : h - my, mx : w - mx] - ref[my : h - my, mx : w - mx]) ** 2)
    return float("inf") if err == 0 else float(10.0 * np.log10(1.0 / err))


# ---------------------------------------------------------------------------
# UV dot captures
# ---------------------------------------------------------------------------


def _extend_grid(px, amount):
    """Grow a pixel grid by one ring of nodes extrapolated ``amount`` spacings outward."""
    g = np.asarray(px, dtype=np.float64)
    g = np.concatenate([g[:1] + amount * (g[:1] - g[1:2]), g, g[-1:] + amount * (g[-1:] - g[-2:-1])], axis=0)
    g = np.concatenate([g[:, :1] + amount * (g[:, :1] - g[:, 1:2]), g, g[:, -1:] + amount * (g[:, -1:] - g[:, -2:-1])], axis=1)
    return g


def render_uv_dots(grid, width, height, radius=2.2, paper_level=0.3, dot_level=1.0, background=0.02, paper_margin=0.6):
    """Dark frame, dim paper, one anti-aliased bright disc per grid node.

    ``grid`` is an :class:`UnwarpGrid2D` in normalized coordinates; the paper
    outline is the grid pushed out by ``paper_margin`` node spacings.
    """
    coords = grid.coords if isinstance(grid, UnwarpGrid2D) else np.asarray(grid, dtype=np.float64)
    if coords.shape[0] < 2 or coords.shape[1] < 2:
        raise ValueError("dot rendering needs at least a 2x2 grid")
    px = grid_to_pixels(coords, width, height)
    paper = document_region(pixels_to_grid(_extend_grid(px, paper_margin), width, height), width, height)
    img = np.full((height, width), background)
    img[paper] = paper_level
    r = int(np.ceil(radius + 1))
    oy, ox = np.mgrid[-r : r + 1, -r : r + 1]
    centers = px.reshape(-1, 2)
    base = np.floor(centers).astype(np.int64)
    xs = base[:, 0, None, None] + ox
    ys = base[:, 1, None, None] + oy
    dist = np.hypot(xs - centers[:, 0, None, None], ys - centers[:, 1, None, None])
    cov = np.clip(radius + 0.5 - dist, 0.0, 1.0)
    ok = (xs >= 0) & (xs < width) & (ys >= 0) & (ys < height) & (cov > 0)
    val = paper_level + (dot_level - paper_level) * cov
    flat = img.ravel()
    np.maximum.at(flat, ys[ok] * width + xs[ok], val[ok])
    return flat.reshape(height, width)


def generate_uv_capture(seed, width=720, height=1000, radius=2.2, prior=SOURCE_UVDOC):
    """Synthetic UV-lit capture of a warped 89x61 dot grid.

    Returns ``(image, pixels)`` with ``pixels`` the (89, 61, 2) true dot centers.
    """
    rng = _sample_rng(seed, 0)
    for _ in range(MAX_REJECTIONS):
        deform = draw_deformation(rng, prior)
        margins = rng.uniform(0.04, 0.08, size=4)
        K, pts = _camera(deform, HIRES_ROWS, HIRES_COLS, width, height, margins, keep_aspect=True)
        px = _project(pts, K)
        fine_u, fine_v = _lattice(4 * HIRES_ROWS, 4 * HIRES_COLS)
        if not quad_orientation_ok(_project(deform.surface(fine_u, fine_v), K)):
            continue
        spacing = min(np.linalg.norm(np.diff(px, axis=0), axis=-1).min(), np.linalg.norm(np.diff(px, axis=1), axis=-1).min())
        if spacing < 2 * radius + 3:
            continue
        break
    else:
        raise GenerationError(f"no valid capture geometry after {MAX_REJECTIONS} draws")
    img = render_uv_dots(pixels_to_grid(px, width, height), width, height, radius)
    return img, px


# ---------------------------------------------------------------------------
# flips and augmentation
# ---------------------------------------------------------------------------


def _flip_image(img, axis):
    if img is None:
        return None
    return img[:, ::-1].copy() if axis == "horizontal" else img[::-1].copy()


def flip_sample(s, axis):
    """Mirror image and grids; grid node order is reversed along the flipped axis."""
    if axis not in ("horizontal", "vertical"):
        raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")
    nodes = s.uv.nodes[:, ::-1] if axis == "horizontal" else s.uv.nodes[::-1]
    return replace(
        s,
        image=_flip_image(s.image, axis),
        G=UnwarpGrid2D(flip_grid(s.G.coords, axis)),
        W=GridMesh3D(flip_mesh(s.W.points, axis)),
        uv=UVParam(nodes.copy()),
        blank_lit=_flip_image(s.blank_lit, axis),
        texture=_flip_image(s.texture, axis),
        aug_log=s.aug_log + [{"op": "flip", "axis": axis}],
    )


@dataclass
class AugmentConfig:
    noise_sigma: float = 0.02
    gain: float = 0.1
    bias: float = 0.05
    gamma: float = 0.2
    rotation_deg: tuple = (-25.0, 25.0)
    tight_crop: bool = True
    crop_margin: float = 0.03
    tolerance: float = 0.0

    @classmethod
    def zero(cls):
        return cls(noise_sigma=0.0, gain=0.0, bias=0.0, gamma=0.0, rotation_deg=(0.0, 0.0))


def _rotate_sample(s, theta, cfg):
    img = as_image(s.image)
    h, w = img.shape[:2]
    c = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    gpx = grid_to_pixels(s.G.coords, w, h)
    rotated = (gpx - c) @ rot.T + c
    # output pixel q -> rotated-frame pixel via the crop affine
    if cfg.tight_crop:
        edge = rotated + 0.5
        m = np.full(4, cfg.crop_margin)
        scale, lo = _frame(edge, w, h, m)
    else:
        scale, lo = np.ones(2), np.zeros(2)
    new_px = (rotated + 0.5 - lo) * scale - 0.5
    g_new = pixels_to_grid(new_px, w, h)
    if np.any(np.abs(g_new) > 1.0 + cfg.tolerance):
        raise GenerationError("rotation pushes the grid outside the image")
    qy, qx = np.mgrid[0:h, 0:w].astype(np.float64)
    q = np.stack([qx, qy], axis=-1)
    in_rot = (q + 0.5) / scale + lo - 0.5
    src = (in_rot - c) @ rot + c  # inverse rotation
    sx, sy = src[..., 0], src[..., 1]
    nx = (2.0 * sx + 1.0) / w - 1.0
    ny = (2.0 * sy + 1.0) / h - 1.0
    dense = np.stack([nx, ny], axis=-1)

    def warp(a):
        return None if a is None else resample(a, dense, "clamp")

    pts = np.array(s.W.points)
    pts[..., :2] = pts[..., :2] @ rot.T
    return replace(s, image=warp(s.image), G=UnwarpGrid2D(g_new), W=GridMesh3D(pts), blank_lit=warp(s.blank_lit))


def augment(s, cfg, seed):
    """Photometric jitter (never touches G/W), then an optional rotation."""
    rng = np.random.default_rng(seed)
    log = list(s.aug_log)
    img = np.array(s.image, dtype=np.float64)
    nc = 1 if img.ndim == 2 else img.shape[2]
    if cfg.gamma > 0:
        g = float(np.exp(rng.uniform(-cfg.gamma, cfg.gamma)))
        img = np.clip(img, 0.0, 1.0) ** g
        log.append({"op": "gamma", "value": g})
    if cfg.gain > 0 or cfg.bias > 0:
        gain = rng.uniform(1 - cfg.gain, 1 + cfg.gain, size=nc)
        bias = rng.uniform(-cfg.bias, cfg.bias, size=nc)
        if img.ndim == 2:
            gain, bias = gain[0], bias[0]
        img = img * gain + bias
        log.append({"op": "gain_bias", "gain": np.atleast_1d(gain).tolist(), "bias": np.atleast_1d(bias).tolist()})
    if cfg.noise_sigma > 0:
        sigma = float(rng.uniform(0.0, cfg.noise_sigma))
        img = img + rng.normal(0.0, sigma, size=img.shape)
        log.append({"op": "noise", "sigma": sigma})
    if len(log) > len(s.aug_log):
        img = np.clip(img, 0.0, 1.0)
    out = replace(s, image=img, aug_log=log)
    lo, hi = cfg.rotation_deg
    if lo != 0.0 or hi != 0.0:
        deg = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        out = _rotate_sample(out, np.deg2rad(deg), cfg)
        out.aug_log = log + [{"op": "rotate", "degrees": deg, "tight_crop": cfg.tight_crop}]
    return out


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------


def write_dataset(samples, root, split="train"):
    d = Path(root) / split
    d.mkdir(parents=True, exist_ok=True)
    for s in samples:
        stem = d / f"{s.index:06d}"
        write_image(f"{stem}.png", s.image)
        write_grid(f"{stem}.G.cgug", s.G)
        write_grid(f"{stem}.W.cgug", s.W)
        meta = {"source": s.source, "seed": s.seed, "index": s.index, "augmentation": s.aug_log}
        Path(f"{stem}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return d


def list_dataset(root, split="train"):
    d = Path(root) / split
    if not d.is_dir():
        raise FileNotFoundError(f"dataset split not found: {d}")
    return sorted(p.with_suffix("").with_suffix("") for p in d.glob("*.G.cgug"))
