"""Recover an ordered dot grid from a UV-lit capture.

Pipeline: :func:`detect_dots` -> :func:`segment_paper` -> :func:`extract_contour`
-> :func:`find_top_left` -> :func:`order_border` -> :func:`order_interior`.
:func:`order_grid` chains them and labels failures with the step name.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import kernels
from .errors import OrderingError
from .grid import HIRES_COLS, HIRES_ROWS, as_image

log = logging.getLogger(__name__)


@dataclass
class OrderParams:
    dot_threshold: float = 0.6
    min_area: int = 3
    max_area: int = 400
    paper_threshold: float = 0.15
    fill_holes: bool = True
    rows: int = HIRES_ROWS
    cols: int = HIRES_COLS


@dataclass(frozen=True)
class OrderedGrid:
    """``assignment[i, j]`` indexes into ``points`` (x, y pixel coordinates)."""

    points: np.ndarray
    assignment: np.ndarray

    @property
    def rows(self):
        return self.assignment.shape[0]

    @property
    def cols(self):
        return self.assignment.shape[1]

    @property
    def pixels(self):
        return self.points[self.assignment]


def _gray(img):
    a = as_image(img)
    if a.shape[2] == 3:
        return a @ np.array([0.299, 0.587, 0.114])
    return a[:, :, 0]


def detect_dots(uv_image, min_area=3, max_area=400, threshold=0.6):
    """Threshold, label 8-connected blobs and return intensity-weighted
    centroids (x, y) of blobs whose pixel area is within bounds."""
    g = _gray(uv_image)
    mask = g > threshold
    labels, count = kernels.label_components(np.ascontiguousarray(mask))
    if count == 0:
        return np.zeros((0, 2))
    lab = labels.ravel()
    ys, xs = np.divmod(np.arange(lab.size), g.shape[1])
    w = g.ravel() * (lab > 0)
    area = np.bincount(lab, minlength=count + 1)[1:]
    wsum = np.bincount(lab, weights=w, minlength=count + 1)[1:]
    cx = np.bincount(lab, weights=w * xs, minlength=count + 1)[1:] / wsum
    cy = np.bincount(lab, weights=w * ys, minlength=count + 1)[1:] / wsum
    keep = (area >= min_area) & (area <= max_area)
    return np.stack([cx[keep], cy[keep]], axis=1)


def segment_paper(uv_image, threshold=0.15, fill_holes=True):
    """Largest bright component of the thresholded capture."""
    g = _gray(uv_image)
    labels, count = kernels.label_components(np.ascontiguousarray(g > threshold))
    if count == 0:
        raise OrderingError("segment", "no foreground above threshold; empty paper mask")
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    sizes[0] = 0
    mask = labels == int(np.argmax(sizes))
    if fill_holes:
        mask = ndimage.binary_fill_holes(mask)
    return mask


def extract_contour(mask):
    """Outer boundary pixels (x, y) of the component holding the topmost-leftmost
    foreground pixel, traced counterclockwise on screen."""
    m = np.ascontiguousarray(np.asarray(mask, dtype=bool))
    fg = np.flatnonzero(m)
    if fg.size == 0:
        raise OrderingError("contour", "mask has no foreground")
    sy, sx = divmod(int(fg[0]), m.shape[1])
    return kernels.trace_boundary(m, sx, sy)


def principal_axes(points):
    """Two principal directions, each oriented to have positive dot product with (1, 1)."""
    p = np.asarray(points, dtype=np.float64)
    evals, evecs = np.linalg.eigh(np.cov((p - p.mean(axis=0)).T))
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order].T
    for k in range(2):
        s = evecs[k, 0] + evecs[k, 1]
        if s < 0 or (s == 0 and evecs[k, 0] < 0):
            evecs[k] = -evecs[k]
    return evals, evecs


def find_top_left(points):
    """Index of the only point with no other point on its top-left side of the
    line orthogonal to the principal diagonal."""
    p = np.asarray(points, dtype=np.float64)
    if p.shape[0] < 3:
        raise OrderingError("top_left", "need at least 3 points")
    evals, axes = principal_axes(p)
    if evals[1] <= 1e-12 * max(evals[0], 1e-300):
        raise OrderingError("top_left", "points are collinear; diagonal undefined")
    d = axes[0] + axes[1]
    proj = p @ d
    scale = np.ptp(proj) or 1.0
    lo = proj.min()
    # "left" means strictly smaller projection; ties within rounding count as ambiguous
    cands = np.flatnonzero(proj <= lo + 1e-9 * scale)
    if cands.size != 1:
        raise OrderingError("top_left", f"{cands.size} candidate corners")
    return int(cands[0])


def border_count(rows, cols):
    return 2 * (rows + cols) - 4


def _turning(seq_pts, k, m):
    n = len(seq_pts)
    a = seq_pts[(k - m) % n]
    b = seq_pts[k % n]
    c = seq_pts[(k + m) % n]
    u, v = b - a, c - b
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.arccos(np.clip(u @ v / (nu * nv), -1.0, 1.0)))


def order_border(points, contour, rows=HIRES_ROWS, cols=HIRES_COLS, top_left=None):
    """Ordered border point indices: start at the top-left corner, walk the
    top row first (rows-major orientation)."""
    p = np.asarray(points, dtype=np.float64)
    contour = np.asarray(contour)
    nb = border_count(rows, cols)
    if p.shape[0] != rows * cols:
        raise OrderingError("border", f"expected {rows * cols} points, got {p.shape[0]}")
    if contour.shape[0] == 0:
        raise OrderingError("border", "empty contour")
    _, nn = cKDTree(p).query(contour.astype(np.float64))
    hits = np.bincount(nn, minlength=p.shape[0])
    rank = np.argsort(-hits, kind="stable")
    if hits[rank[nb - 1]] == 0:
        raise OrderingError("border", f"fewer than {nb} points touched by the contour")
    if hits[rank[nb - 1]] == hits[rank[nb]]:
        raise OrderingError("border", f"tie at border rank {nb} ({hits[rank[nb - 1]]} hits)")
    chosen = np.zeros(p.shape[0], dtype=bool)
    chosen[rank[:nb]] = True
    first = np.full(p.shape[0], np.iinfo(np.int64).max)
    pos = np.arange(nn.size)
    np.minimum.at(first, nn, pos)
    seq = np.flatnonzero(chosen)
    seq = seq[np.argsort(first[seq], kind="stable")]
    if top_left is None:
        top_left = find_top_left(p)
    hit = np.flatnonzero(seq == top_left)
    if hit.size == 0:
        raise OrderingError("border", "top-left corner is not among the border points")
    seq = np.roll(seq, -int(hit[0]))
    fwd = seq
    bwd = np.concatenate([seq[:1], seq[1:][::-1]])
    corners = [0, cols - 1, cols + rows - 2, 2 * cols + rows - 3]
    m = 2

    def score(s):
        q = p[s]
        return sum(_turning(q, k, m) for k in corners)

    sf, sb = score(fwd), score(bwd)
    if abs(sf - sb) < 1e-9:
        # square grid: prefer the walk that heads right first
        sf, sb = p[fwd[1], 0] - p[fwd[0], 0], p[bwd[1], 0] - p[bwd[0], 0]
    return fwd if sf > sb else bwd


def _place_border(seq, rows, cols):
    a = np.full((rows, cols), -1, dtype=np.int64)
    k = 0
    for j in range(cols):
        a[0, j] = seq[k]
        k += 1
    k -= 1
    for i in range(rows):
        a[i, cols - 1] = seq[k]
        k += 1
    k -= 1
    for j in range(cols - 1, -1, -1):
        a[rows - 1, j] = seq[k]
        k += 1
    k -= 1
    for i in range(rows - 1, 0, -1):
        a[i, 0] = seq[k % len(seq)]
        k += 1
    return a


def _nearest_unordered(tree, p, ordered, ref, k):
    n = p.shape[0]
    q = min(max(k + 9, 12), n)
    while True:
        dist, idx = tree.query(p[ref], k=q)
        idx = np.atleast_1d(idx)
        free = idx[~ordered[idx]]
        if free.size >= k or q >= n:
            return set(free[:k].tolist())
        q = min(2 * q, n)


def order_interior(points, border, rows=HIRES_ROWS, cols=HIRES_COLS):
    """Fill interior nodes in row-major order from already-ordered neighbours.

    Node (i, j) is the point shared by the 3-nearest-unordered sets of its
    top-left, left and top neighbours; ties go to the smallest mean distance.
    """
    p = np.asarray(points, dtype=np.float64)
    a = _place_border(np.asarray(border), rows, cols)
    ordered = np.zeros(p.shape[0], dtype=bool)
    ordered[a[a >= 0]] = True
    tree = cKDTree(p)
    for i in range(1, rows - 1):
        for j in range(1, cols - 1):
            refs = (a[i - 1, j - 1], a[i, j - 1], a[i - 1, j])
            sets = [_nearest_unordered(tree, p, ordered, r, 3) for r in refs]
            common = sets[0] & sets[1] & sets[2]
            if not common:
                raise OrderingError("interior", "empty neighbour intersection", where=(i, j))
            if len(common) > 1:
                cand = np.array(sorted(common))
                mean_d = np.mean([np.linalg.norm(p[cand] - p[r], axis=1) for r in refs], axis=0)
                pick = int(cand[np.argmin(mean_d)])
            else:
                pick = common.pop()
            a[i, j] = pick
            ordered[pick] = True
    return OrderedGrid(p, a)


def check_grid(grid):
    """Raise unless the ordering is a bijection with consistently oriented quads."""
    a = grid.assignment
    n = grid.points.shape[0]
    if a.min() < 0 or np.unique(a).size != a.size or a.size != n:
        raise OrderingError("check", "assignment is not a bijection onto the points")
    q = grid.pixels
    u = q[:-1, 1:] - q[:-1, :-1]
    v = q[1:, :-1] - q[:-1, :-1]
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    u2 = q[1:, 1:] - q[1:, :-1]
    v2 = q[1:, 1:] - q[:-1, 1:]
    cross2 = u2[..., 0] * v2[..., 1] - u2[..., 1] * v2[..., 0]
    bad = np.argwhere((cross <= 0) | (cross2 <= 0))
    if bad.size:
        raise OrderingError("check", "inverted or degenerate grid quad", where=tuple(int(x) for x in bad[0]))


def read_overrides(path):
    """Lines ``idx row col``; blank lines and ``#`` comments ignored."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'idx row col'")
        out.append(tuple(int(x) for x in parts))
    return out


def apply_overrides(assignment, overrides):
    """Pin point ``idx`` at (row, col), swapping with the previous occupant."""
    a = np.array(assignment)
    for idx, r, c in overrides:
        where = np.argwhere(a == idx)
        prev = a[r, c]
        if where.size:
            a[tuple(where[0])] = prev
        a[r, c] = idx
    return a


def order_grid(uv_image, params=None, overrides=None):
    """Full recovery of the ordered grid from a UV-lit image."""
    params = params or OrderParams()
    pts = detect_dots(uv_image, params.min_area, params.max_area, params.dot_threshold)
    expected = params.rows * params.cols
    if overrides is not None and len(overrides) == expected:
        a = np.full((params.rows, params.cols), -1, dtype=np.int64)
        for idx, r, c in overrides:
            a[r, c] = idx
        grid = OrderedGrid(pts, a)
        check_grid(grid)
        return grid
    if pts.shape[0] != expected:
        raise OrderingError("detect", f"expected {expected} dots, found {pts.shape[0]}")
    mask = segment_paper(uv_image, params.paper_threshold, params.fill_holes)
    contour = extract_contour(mask)
    tl = find_top_left(pts)
    border = order_border(pts, contour, params.rows, params.cols, top_left=tl)
    grid = order_interior(pts, border, params.rows, params.cols)
    if overrides:
        grid = OrderedGrid(pts, apply_overrides(grid.assignment, overrides))
    check_grid(grid)
    log.debug("ordered %d dots", expected)
    return grid
