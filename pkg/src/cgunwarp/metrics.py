"""Rectification quality metrics: MS-SSIM, local distortion, aligned distortion,
edit distance / CER, plus the area normalization applied before scoring."""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from . import kernels
from .errors import AlgorithmError, CgunwarpError, DimensionError
from .grid import as_image, resize
from .io import read_flow, read_image

TARGET_AREA = 598400
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
LUMA = (0.299, 0.587, 0.114)


class ImageTooSmallError(DimensionError):
    pass


class BackendUnavailableError(CgunwarpError):
    pass


class SingularFitError(AlgorithmError):
    pass


class EmptyReferenceError(CgunwarpError, ValueError):
    pass


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------


def area_dims(width, height, target_area=TARGET_AREA):
    """Integer (w, h) with the input aspect whose area is closest to the target."""
    aspect = width / height
    h0 = math.sqrt(target_area / aspect)
    w0 = aspect * h0
    best = None
    for h in {max(1, math.floor(h0)), max(1, math.ceil(h0))}:
        for w in {max(1, math.floor(w0)), max(1, math.ceil(w0)), max(1, round(target_area / h))}:
            key = (abs(w * h - target_area), abs(w / h - aspect), w, h)
            if best is None or key < best:
                best = key
    return best[2], best[3]


def resize_to_area(img, target_area=TARGET_AREA):
    a = np.asarray(img)
    h, w = a.shape[:2]
    nw, nh = area_dims(w, h, target_area)
    if (nw, nh) == (w, h):
        return a.astype(np.float64, copy=True)
    return resize(a, nw, nh)


def psnr(a, b, data_range=1.0):
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))
    return float("inf") if mse == 0 else 10.0 * np.log10(data_range**2 / mse)


def luminance(img):
    a = as_image(img)
    if a.shape[2] == 1:
        return a[:, :, 0].copy()
    return a @ np.array(LUMA)


# ---------------------------------------------------------------------------
# MS-SSIM
# ---------------------------------------------------------------------------


def gaussian_window(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(img, g):
    # separable 'valid' correlation
    t = sliding_window_view(img, g.size, axis=0) @ g
    return sliding_window_view(t, g.size, axis=1) @ g


def _ssim_terms(a, b, g, c1, c2):
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    saa = _filter_valid(a * a, g) - mu_a * mu_a
    sbb = _filter_valid(b * b, g) - mu_b * mu_b
    sab = _filter_valid(a * b, g) - mu_a * mu_b
    cs = (2.0 * sab + c2) / (saa + sbb + c2)
    lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def _halve(img):
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    a = img[:h, :w]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def ms_ssim(a, b, weights=MS_SSIM_WEIGHTS, window=11, sigma=1.5, k1=0.01, k2=0.03, data_range=1.0):
    """Multi-scale SSIM over a dyadic pyramid of the luminance images.

    Negative per-scale terms are clamped to zero before exponentiation.
    """
    a, b = luminance(a), luminance(b)
    if a.shape != b.shape:
        raise DimensionError(f"ms_ssim: shape mismatch {a.shape} vs {b.shape}")
    levels = len(weights)
    need = window * 2 ** (levels - 1)
    if min(a.shape) < need:
        raise ImageTooSmallError(f"ms_ssim needs both sides >= {need} px for {levels} scales, got {a.shape}")
    g = gaussian_window(window, sigma)
    c1, c2 = (k1 * data_range) ** 2, (k2 * data_range) ** 2
    val = 1.0
    for lvl, wgt in enumerate(weights):
        s, cs = _ssim_terms(a, b, g, c1, c2)
        term = s if lvl == levels - 1 else cs
        val *= max(term, 0.0) ** wgt
        if lvl < levels - 1:
            a, b = _halve(a), _halve(b)
    return float(val)


# ---------------------------------------------------------------------------
# dense flow
# ---------------------------------------------------------------------------


@dataclass
class FlowParams:
    bins: int = 8
    cell: int = 6
    grid: int = 4
    min_size: int = 24
    max_levels: int = 3
    coarse_radius: int = 6
    radius: int = 2
    smooth: float = 0.05
    truncate: float = 4.0
    tiebreak: float = 1e-4
    sweeps: int = 4

    def fingerprint(self):
        return "internal/ogh-ctf-v1:" + ",".join(f"{k}={v}" for k, v in sorted(asdict(self).items()))


@dataclass
class FlowField:
    flow: np.ndarray
    fingerprint: str

    @property
    def width(self):
        return self.flow.shape[1]

    @property
    def height(self):
        return self.flow.shape[0]

    @property
    def dx(self):
        return self.flow[:, :, 0]

    @property
    def dy(self):
        return self.flow[:, :, 1]


def orientation_descriptors(img, bins=8, cell=4, grid=2):
    """Per-pixel histograms of gradient orientation pooled over a grid x grid
    block of ``cell``-sized cells; (h, w, grid * grid * bins)."""
    gy, gx = np.gradient(img)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), 2 * np.pi) * (bins / (2 * np.pi))
    lo = np.floor(ang).astype(np.int64) % bins
    t = ang - np.floor(ang)
    hist = np.zeros(img.shape + (bins,))
    rows, cols = np.indices(img.shape)
    np.add.at(hist, (rows, cols, lo), mag * (1.0 - t))
    np.add.at(hist, (rows, cols, (lo + 1) % bins), mag * t)
    pooled = ndimage.uniform_filter(hist, size=(cell, cell, 1), mode="nearest")
    offs = [int(round((i - (grid - 1) / 2.0) * cell)) for i in range(grid)]
    h, w = img.shape
    parts = []
    for oy in offs:
        for ox in offs:
            ys = np.clip(np.arange(h) + oy, 0, h - 1)
            xs = np.clip(np.arange(w) + ox, 0, w - 1)
            parts.append(pooled[ys][:, xs])
    d = np.concatenate(parts, axis=2)
    norm = np.sqrt((d * d).sum(axis=2, keepdims=True))
    return d / (norm + 0.1 * norm.mean() + 1e-12)


def _regularize(cost, fx, fy, radius, p):
    """Truncated-L1 smoothness by checkerboard ICM over the candidate window."""
    h, w, k, _ = cost.shape
    offs = np.arange(k) - radius
    ox = fx[:, :, None, None] + offs[None, None, None, :]
    oy = fy[:, :, None, None] + offs[None, None, :, None]
    data = cost + p.tiebreak * (np.abs(ox) + np.abs(oy))
    flat = np.ascontiguousarray(data.reshape(h, w, -1))
    lab = np.argmin(flat, axis=2)
    ux = np.ascontiguousarray(np.broadcast_to(ox, (h, w, k, k)).reshape(h, w, -1), dtype=np.float64)
    uy = np.ascontiguousarray(np.broadcast_to(oy, (h, w, k, k)).reshape(h, w, -1), dtype=np.float64)
    lab = kernels.icm_labels(flat, ux, uy, lab, float(p.smooth), float(p.truncate), int(p.sweeps))
    bx = np.take_along_axis(ux, lab[:, :, None], 2)[:, :, 0]
    by = np.take_along_axis(uy, lab[:, :, None], 2)[:, :, 0]
    return bx.astype(np.int64), by.astype(np.int64), lab


def _subpixel(cost, lab, radius):
    h, w, k, _ = cost.shape
    iy, ix = np.divmod(lab, k)
    rr, cc = np.indices((h, w))

    def at(dy, dx):
        y = np.clip(iy + dy, 0, k - 1)
        x = np.clip(ix + dx, 0, k - 1)
        return cost[rr, cc, y, x]

    c0 = at(0, 0)

    def offset(cm, cp, inside):
        den = cm - 2.0 * c0 + cp
        ok = inside & np.isfinite(cm) & np.isfinite(cp) & (den > 0) & (c0 > 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            o = 0.5 * (cm - cp) / den
        return np.where(ok, np.clip(o, -0.5, 0.5), 0.0)

    sx = offset(at(0, -1), at(0, 1), (ix > 0) & (ix < k - 1))
    sy = offset(at(-1, 0), at(1, 0), (iy > 0) & (iy < k - 1))
    return sx, sy


def _pyramid(img, min_size, max_levels):
    levels = [img]
    while len(levels) < max_levels and min(levels[-1].shape) // 2 >= min_size:
        levels.append(_halve(levels[-1]))
    return levels


def internal_flow(reference, test, params=None):
    """Coarse-to-fine descriptor matching with smoothness regularization.

    The returned flow maps each reference pixel p to test coordinates p + f(p).
    """
    p = params or FlowParams()
    ref, tst = luminance(reference), luminance(test)
    if ref.shape != tst.shape:
        raise DimensionError(f"dense_flow: shape mismatch {ref.shape} vs {tst.shape}")
    pr = _pyramid(ref, p.min_size, p.max_levels)
    pt = _pyramid(tst, p.min_size, p.max_levels)
    fx = fy = None
    for lvl in range(len(pr) - 1, -1, -1):
        a, b = pr[lvl], pt[lvl]
        h, w = a.shape
        if fx is None:
            fx = np.zeros((h, w), dtype=np.int64)
            fy = np.zeros((h, w), dtype=np.int64)
            radius = p.coarse_radius
        else:
            ys = np.minimum(np.arange(h) // 2, fx.shape[0] - 1)
            xs = np.minimum(np.arange(w) // 2, fx.shape[1] - 1)
            fx = 2 * fx[ys][:, xs]
            fy = 2 * fy[ys][:, xs]
            radius = p.radius
        da = orientation_descriptors(a, p.bins, p.cell, p.grid)
        db = orientation_descriptors(b, p.bins, p.cell, p.grid)
        cost = kernels.match_costs(np.ascontiguousarray(da), np.ascontiguousarray(db), fx, fy, radius)
        fx, fy, lab = _regularize(cost, fx, fy, radius, p)
    sx, sy = _subpixel(cost, lab, radius)
    return np.stack([fx + sx, fy + sy], axis=2)


def dense_flow(reference, test, backend="internal", flow_path=None, params=None):
    if backend == "internal":
        p = params or FlowParams()
        return FlowField(internal_flow(reference, test, p), p.fingerprint())
    if backend == "file":
        if flow_path is None:
            raise BackendUnavailableError("file flow backend needs a flow path")
        data = Path(flow_path).read_bytes()
        flow = read_flow(flow_path)
        ref = np.asarray(reference)
        if ref.shape[:2] != flow.shape[:2]:
            raise DimensionError(f"flow {flow.shape[:2]} does not match image {ref.shape[:2]}")
        return FlowField(flow, "file:" + hashlib.sha256(data).hexdigest()[:16])
    raise BackendUnavailableError(f"unknown flow backend {backend!r}")


# ---------------------------------------------------------------------------
# LD / AD
# ---------------------------------------------------------------------------


def _flow_array(flow):
    return flow.flow if isinstance(flow, FlowField) else np.asarray(flow, dtype=np.float64)


def ld(flow):
    """Mean displacement magnitude."""
    f = _flow_array(flow)
    return float(np.mean(np.sqrt(f[:, :, 0] ** 2 + f[:, :, 1] ** 2)))


def gradient_weights(reference):
    gy, gx = np.gradient(luminance(reference))
    m = np.hypot(gx, gy)
    s = m.mean()
    if not s > 0:
        raise SingularFitError("reference image has no gradient; AD weights are all zero")
    return m / s


def fit_affine(flow, weights):
    """Weighted least-squares 2x3 affine displacement model of ``flow``."""
    f = _flow_array(flow)
    h, w = f.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    # centred and scaled coordinates keep the normal equations well conditioned
    sx, sy = max(w - 1, 1) / 2.0, max(h - 1, 1) / 2.0
    X = np.stack([(xx.ravel() - sx) / sx, (yy.ravel() - sy) / sy, np.ones(h * w)], axis=1)
    sw = np.sqrt(np.asarray(weights, dtype=np.float64).ravel())
    A = X * sw[:, None]
    if np.linalg.matrix_rank(A) < 3:
        raise SingularFitError("affine fit is singular for these weights")
    coef, *_ = np.linalg.lstsq(A, f.reshape(-1, 2) * sw[:, None], rcond=None)
    return (X @ coef).reshape(h, w, 2)


def ad(flow, reference):
    """Gradient-weighted mean residual after removing the best affine motion."""
    f = _flow_array(flow)
    if f.shape[:2] != np.shape(reference)[:2]:
        raise DimensionError("ad: flow and reference dims differ")
    wts = gradient_weights(reference)
    r = f - fit_affine(f, wts)
    return float(np.mean(wts * np.sqrt(r[:, :, 0] ** 2 + r[:, :, 1] ** 2)))


# ---------------------------------------------------------------------------
# text
# ---------------------------------------------------------------------------


def _codes(s):
    return np.array([ord(c) for c in s], dtype=np.int64)


def edit_operations(ref, hyp):
    """(distance, substitutions, insertions, deletions) of an optimal alignment."""
    d, s, i, dl = kernels.edit_ops(_codes(ref), _codes(hyp))
    return int(d), int(s), int(i), int(dl)


def edit_distance(ref, hyp):
    return edit_operations(ref, hyp)[0]


def cer(ref, hyp):
    if len(ref) == 0:
        raise EmptyReferenceError("CER is undefined for an empty reference")
    _, s, i, d = edit_operations(ref, hyp)
    return (s + i + d) / len(ref)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class MetricsConfig:
    target_area: int = TARGET_AREA
    ms_ssim_weights: tuple = MS_SSIM_WEIGHTS
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    luma: tuple = LUMA
    flow_backend: str = "internal"
    flow: FlowParams = field(default_factory=FlowParams)

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        if "flow" in d and isinstance(d["flow"], dict):
            d["flow"] = FlowParams(**d["flow"])
        for k in ("ms_ssim_weights", "luma"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def fingerprint(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def evaluate_pair(rectified, scan, ref_text=None, hyp_text=None, cfg=None, flow_path=None):
    """Score one rectified image against its flat scan; returns a dict row.

    Both images are brought to the scan's area-normalized size first.
    """
    cfg = cfg or MetricsConfig()
    scan_n = resize_to_area(scan, cfg.target_area)
    h, w = scan_n.shape[:2]
    rect_n = resize(rectified, w, h)
    flow = dense_flow(scan_n, rect_n, cfg.flow_backend, flow_path, cfg.flow)
    row = {
        "ms_ssim": ms_ssim(rect_n, scan_n, cfg.ms_ssim_weights, cfg.window, cfg.sigma, cfg.k1, cfg.k2),
        "ld": ld(flow),
        "ad": ad(flow, scan_n),
        "ed": None,
        "cer": None,
        "flow_fingerprint": flow.fingerprint,
        "width": w,
        "height": h,
    }
    if ref_text is not None and hyp_text is not None:
        row["ed"] = edit_distance(ref_text, hyp_text)
        row["cer"] = cer(ref_text, hyp_text) if ref_text else None
    return row


def _read_text(path):
    return Path(path).read_text(encoding="utf-8").rstrip("\n") if path else None


def evaluate_manifest(manifest_path, cfg=None, flow_dir=None):
    """Evaluate every non-excluded entry of a JSON manifest.

    Paths are resolved relative to the manifest. With the file flow backend,
    an entry's ``flow_path`` or ``<flow_dir>/<id>.cguf`` supplies the flow.
    """
    cfg = cfg or MetricsConfig()
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    entries = json.loads(manifest_path.read_text())

    def res(p):
        return None if p is None else base / p

    rows, skipped = [], []
    for e in entries:
        if e.get("excluded", False):
            skipped.append(e["id"])
            continue
        flow_path = None
        if cfg.flow_backend == "file":
            flow_path = res(e.get("flow_path")) or Path(flow_dir or base) / f"{e['id']}.cguf"
        row = evaluate_pair(
            read_image(res(e["rectified_path"])),
            read_image(res(e["scan_path"])),
            _read_text(res(e.get("ref_text_path"))),
            _read_text(res(e.get("hyp_text_path"))),
            cfg,
            flow_path,
        )
        rows.append({"id": e["id"], **row})
    agg = {}
    for k in ("ms_ssim", "ld", "ad", "ed", "cer"):
        vals = [r[k] for r in rows if r[k] is not None]
        agg[k] = float(math.fsum(vals) / len(vals)) if vals else None
    return {
        "config": cfg.to_dict(),
        "config_fingerprint": cfg.fingerprint(),
        "rows": rows,
        "skipped": skipped,
        "aggregate": agg,
    }
