"""Hot inner loops, each in a numba flavour and a pure-numpy flavour.

The public names at the bottom of the module dispatch on
:data:`cgunwarp._jit.USE_NUMBA`. Both flavours are importable directly
(``*_nb`` / ``*_np``) so tests can check parity and the benchmark can time
them side by side.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided
from scipy import ndimage

from ._jit import HAVE_NUMBA, USE_NUMBA, njit  # noqa: F401

# ---------------------------------------------------------------------------
# bilinear sampling
# ---------------------------------------------------------------------------


@njit
def bilinear_sample_nb(img, xs, ys, fill, fill_value):
    h, w, c = img.shape
    m, n = xs.shape
    out = np.empty((m, n, c), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            x = xs[i, j]
            y = ys[i, j]
            if fill and (x < -0.5 or x > w - 0.5 or y < -0.5 or y > h - 0.5 or x != x or y != y):
                for k in range(c):
                    out[i, j, k] = fill_value
                continue
            x = min(max(x, 0.0), w - 1.0)
            y = min(max(y, 0.0), h - 1.0)
            x0 = int(np.floor(x))
            y0 = int(np.floor(y))
            x0 = min(x0, max(w - 2, 0))
            y0 = min(y0, max(h - 2, 0))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = x - x0
            fy = y - y0
            for k in range(c):
                top = img[y0, x0, k] * (1.0 - fx) + img[y0, x1, k] * fx
                bot = img[y1, x0, k] * (1.0 - fx) + img[y1, x1, k] * fx
                out[i, j, k] = top * (1.0 - fy) + bot * fy
    return out


def bilinear_sample_np(img, xs, ys, fill, fill_value):
    h, w, _ = img.shape
    oob = None
    if fill:
        oob = (xs < -0.5) | (xs > w - 0.5) | (ys < -0.5) | (ys > h - 0.5) | np.isnan(xs) | np.isnan(ys)
        xs = np.where(oob, 0.0, xs)
        ys = np.where(oob, 0.0, ys)
    x = np.clip(xs, 0.0, w - 1.0)
    y = np.clip(ys, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(np.floor(y).astype(np.int64), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    if oob is not None:
        out[oob] = fill_value
    return out


# ---------------------------------------------------------------------------
# 8-connected component labeling
# ---------------------------------------------------------------------------


@njit
def _uf_find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit
def label_components_nb(mask):
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int64)
    parent = np.zeros(h * w // 2 + 2, dtype=np.int64)
    nxt = 1
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            best = 0
            # already-visited 8-neighbours: W, NW, N, NE
            for dy, dx in ((0, -1), (-1, -1), (-1, 0), (-1, 1)):
                yy = y + dy
                xx = x + dx
                if yy < 0 or xx < 0 or xx >= w:
                    continue
                lab = labels[yy, xx]
                if lab == 0:
                    continue
                if best == 0:
                    best = lab
                else:
                    ra = _uf_find(parent, best)
                    rb = _uf_find(parent, lab)
                    if ra < rb:
                        parent[rb] = ra
                    elif rb < ra:
                        parent[ra] = rb
            if best == 0:
                if nxt >= parent.shape[0]:
                    grown = np.zeros(parent.shape[0] * 2, dtype=np.int64)
                    grown[: parent.shape[0]] = parent
                    parent = grown
                parent[nxt] = nxt
                best = nxt
                nxt += 1
            labels[y, x] = best
    # final labels in raster order of each component's first pixel
    final = np.zeros(nxt, dtype=np.int64)
    count = 0
    for y in range(h):
        for x in range(w):
            lab = labels[y, x]
            if lab == 0:
                continue
            r = _uf_find(parent, lab)
            if final[r] == 0:
                count += 1
                final[r] = count
            labels[y, x] = final[r]
    return labels, count


def label_components_np(mask):
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    return labels.astype(np.int64), int(count)


# ---------------------------------------------------------------------------
# Moore-neighbour boundary tracing (screen-counterclockwise)
# ---------------------------------------------------------------------------

# neighbour ring in screen-counterclockwise order, starting east
_RING = np.array([[1, 0], [1, -1], [0, -1], [-1, -1], [-1, 0], [-1, 1], [0, 1], [1, 1]], dtype=np.int64)


@njit
def _ring_index(ring, dx, dy):
    for k in range(8):
        if ring[k, 0] == dx and ring[k, 1] == dy:
            return k
    return -1


@njit
def trace_boundary_nb(mask, sx, sy, ring):
    h, w = mask.shape
    out = np.empty((4 * h * w + 8, 2), dtype=np.int64)
    out[0, 0] = sx
    out[0, 1] = sy
    n = 1
    px, py = sx, sy
    bx, by = sx, sy - 1
    fx, fy = -1, -1
    limit = 4 * h * w + 4
    while n < limit:
        k0 = _ring_index(ring, bx - px, by - py)
        cx, cy = -1, -1
        lastx, lasty = bx, by
        for step in range(1, 9):
            k = (k0 + step) % 8
            qx = px + ring[k, 0]
            qy = py + ring[k, 1]
            if 0 <= qx < w and 0 <= qy < h and mask[qy, qx]:
                cx, cy = qx, qy
                break
            lastx, lasty = qx, qy
        if cx < 0:
            break  # isolated pixel
        if px == sx and py == sy:
            if fx < 0:
                fx, fy = cx, cy
            elif cx == fx and cy == fy:
                break
        out[n, 0] = cx
        out[n, 1] = cy
        n += 1
        bx, by = lastx, lasty
        px, py = cx, cy
    # the last appended pixel is the start again on a closed loop
    if n > 1 and out[n - 1, 0] == sx and out[n - 1, 1] == sy:
        n -= 1
    return out[:n].copy()


def trace_boundary_py(mask, sx, sy, ring):
    h, w = mask.shape
    ring_list = [tuple(r) for r in ring.tolist()]
    pts = [(sx, sy)]
    px, py = sx, sy
    bx, by = sx, sy - 1
    first = None
    limit = 4 * h * w + 4
    while len(pts) < limit:
        k0 = ring_list.index((bx - px, by - py))
        nxt = None
        lastx, lasty = bx, by
        for step in range(1, 9):
            dx, dy = ring_list[(k0 + step) % 8]
            qx, qy = px + dx, py + dy
            if 0 <= qx < w and 0 <= qy < h and mask[qy, qx]:
                nxt = (qx, qy)
                break
            lastx, lasty = qx, qy
        if nxt is None:
            break
        if (px, py) == (sx, sy):
            if first is None:
                first = nxt
            elif nxt == first:
                break
        pts.append(nxt)
        bx, by = lastx, lasty
        px, py = nxt
    if len(pts) > 1 and pts[-1] == (sx, sy):
        pts.pop()
    return np.array(pts, dtype=np.int64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# per-quad inverse-bilinear rasterization
# ---------------------------------------------------------------------------

_NEWTON_ITERS = 12
_INSIDE_EPS = 1e-9


@njit
def rasterize_quads_nb(grid, vals, height, width):
    rows, cols, _ = grid.shape
    nv = vals.shape[2]
    out = np.zeros((height, width, nv), dtype=np.float64)
    mask = np.zeros((height, width), dtype=np.bool_)
    for r in range(rows - 1):
        for c in range(cols - 1):
            ax, ay = grid[r, c, 0], grid[r, c, 1]
            bx, by = grid[r, c + 1, 0], grid[r, c + 1, 1]
            dx, dy = grid[r + 1, c, 0], grid[r + 1, c, 1]
            ex, ey = grid[r + 1, c + 1, 0], grid[r + 1, c + 1, 1]
            x_lo = max(int(np.ceil(min(min(ax, bx), min(dx, ex)))), 0)
            x_hi = min(int(np.floor(max(max(ax, bx), max(dx, ex)))), width - 1)
            y_lo = max(int(np.ceil(min(min(ay, by), min(dy, ey)))), 0)
            y_hi = min(int(np.floor(max(max(ay, by), max(dy, ey)))), height - 1)
            ux, uy = bx - ax, by - ay
            vx, vy = dx - ax, dy - ay
            wx, wy = ax - bx - dx + ex, ay - by - dy + ey
            for py in range(y_lo, y_hi + 1):
                for px in range(x_lo, x_hi + 1):
                    if mask[py, px]:
                        continue
                    s = 0.5
                    t = 0.5
                    for _ in range(_NEWTON_ITERS):
                        fx = ax + s * ux + t * vx + s * t * wx - px
                        fy = ay + s * uy + t * vy + s * t * wy - py
                        j00 = ux + t * wx
                        j01 = vx + s * wx
                        j10 = uy + t * wy
                        j11 = vy + s * wy
                        det = j00 * j11 - j01 * j10
                        if det == 0.0:
                            break
                        s -= (j11 * fx - j01 * fy) / det
                        t -= (-j10 * fx + j00 * fy) / det
                    fx = ax + s * ux + t * vx + s * t * wx - px
                    fy = ay + s * uy + t * vy + s * t * wy - py
                    if abs(fx) > 1e-6 or abs(fy) > 1e-6:
                        continue
                    if s < -_INSIDE_EPS or s > 1.0 + _INSIDE_EPS or t < -_INSIDE_EPS or t > 1.0 + _INSIDE_EPS:
                        continue
                    s = min(max(s, 0.0), 1.0)
                    t = min(max(t, 0.0), 1.0)
                    mask[py, px] = True
                    for k in range(nv):
                        v00 = vals[r, c, k]
                        v01 = vals[r, c + 1, k]
                        v10 = vals[r + 1, c, k]
                        v11 = vals[r + 1, c + 1, k]
                        top = v00 * (1.0 - s) + v01 * s
                        bot = v10 * (1.0 - s) + v11 * s
                        out[py, px, k] = top * (1.0 - t) + bot * t
    return out, mask


def rasterize_quads_np(grid, vals, height, width):
    rows, cols, _ = grid.shape
    nv = vals.shape[2]
    a = grid[:-1, :-1].reshape(-1, 2)
    b = grid[:-1, 1:].reshape(-1, 2)
    d = grid[1:, :-1].reshape(-1, 2)
    e = grid[1:, 1:].reshape(-1, 2)
    corners = np.stack([a, b, d, e])
    lo = np.ceil(corners.min(axis=0)).astype(np.int64)
    hi = np.floor(corners.max(axis=0)).astype(np.int64)
    lo = np.maximum(lo, 0)
    hi[:, 0] = np.minimum(hi[:, 0], width - 1)
    hi[:, 1] = np.minimum(hi[:, 1], height - 1)
    nx = np.maximum(hi[:, 0] - lo[:, 0] + 1, 0)
    ny = np.maximum(hi[:, 1] - lo[:, 1] + 1, 0)
    counts = nx * ny
    q = np.repeat(np.arange(a.shape[0]), counts)
    start = np.cumsum(counts) - counts
    local = np.arange(counts.sum()) - np.repeat(start, counts)
    # pixels in row-major order inside each quad's box, quads in row-major order
    py = lo[q, 1] + local // np.maximum(nx[q], 1)
    px = lo[q, 0] + local % np.maximum(nx[q], 1)
    px = px.astype(np.float64)
    py = py.astype(np.float64)
    ax, ay = a[q, 0], a[q, 1]
    ux, uy = b[q, 0] - ax, b[q, 1] - ay
    vx, vy = d[q, 0] - ax, d[q, 1] - ay
    wx = ax - b[q, 0] - d[q, 0] + e[q, 0]
    wy = ay - b[q, 1] - d[q, 1] + e[q, 1]
    s = np.full(q.shape, 0.5)
    t = np.full(q.shape, 0.5)
    live = np.ones(q.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(_NEWTON_ITERS):
            fx = ax + s * ux + t * vx + s * t * wx - px
            fy = ay + s * uy + t * vy + s * t * wy - py
            j00 = ux + t * wx
            j01 = vx + s * wx
            j10 = uy + t * wy
            j11 = vy + s * wy
            det = j00 * j11 - j01 * j10
            live &= det != 0.0
            ds = np.where(live, (j11 * fx - j01 * fy) / det, 0.0)
            dt = np.where(live, (-j10 * fx + j00 * fy) / det, 0.0)
            s = s - ds
            t = t - dt
    fx = ax + s * ux + t * vx + s * t * wx - px
    fy = ay + s * uy + t * vy + s * t * wy - py
    ok = (np.abs(fx) <= 1e-6) & (np.abs(fy) <= 1e-6)
    ok &= (s >= -_INSIDE_EPS) & (s <= 1.0 + _INSIDE_EPS) & (t >= -_INSIDE_EPS) & (t <= 1.0 + _INSIDE_EPS)
    q, px, py, s, t = q[ok], px[ok].astype(np.int64), py[ok].astype(np.int64), s[ok], t[ok]
    flat = py * width + px
    # first quad (row-major) wins on shared edges
    _, first = np.unique(flat, return_index=True)
    q, flat, s, t = q[first], flat[first], np.clip(s[first], 0, 1), np.clip(t[first], 0, 1)
    r, c = q // (cols - 1), q % (cols - 1)
    s_, t_ = s[:, None], t[:, None]
    top = vals[r, c] * (1.0 - s_) + vals[r, c + 1] * s_
    bot = vals[r + 1, c] * (1.0 - s_) + vals[r + 1, c + 1] * s_
    out = np.zeros((height * width, nv))
    out[flat] = top * (1.0 - t_) + bot * t_
    mask = np.zeros(height * width, dtype=bool)
    mask[flat] = True
    return out.reshape(height, width, nv), mask.reshape(height, width)


# ---------------------------------------------------------------------------
# im2col / col2im for strided, dilated convolution
# ---------------------------------------------------------------------------


def conv_windows(xp, kh, kw, stride, dilation, ho, wo):
    """Zero-copy view (N, C, kh, kw, ho, wo) of a padded NCHW array."""
    n, c, _, _ = xp.shape
    sn, sc, sh, sw = xp.strides
    return as_strided(
        xp,
        shape=(n, c, kh, kw, ho, wo),
        strides=(sn, sc, sh * dilation, sw * dilation, sh * stride, sw * stride),
        writeable=False,
    )


def im2col_np(xp, kh, kw, stride, dilation, ho, wo):
    return np.ascontiguousarray(conv_windows(xp, kh, kw, stride, dilation, ho, wo))


@njit
def im2col_nb(xp, kh, kw, stride, dilation, ho, wo):
    n, c, _, _ = xp.shape
    out = np.empty((n, c, kh, kw, ho, wo), dtype=xp.dtype)
    for b in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    for y in range(ho):
                        yy = y * stride + i * dilation
                        for x in range(wo):
                            out[b, ch, i, j, y, x] = xp[b, ch, yy, x * stride + j * dilation]
    return out


def col2im_np(cols, shape, stride, dilation):
    """Scatter-add (N, C, kh, kw, ho, wo) columns back into a padded array of ``shape``."""
    _, _, kh, kw, ho, wo = cols.shape
    xp = np.zeros(shape, dtype=cols.dtype)
    for i in range(kh):
        y0 = i * dilation
        for j in range(kw):
            x0 = j * dilation
            xp[:, :, y0 : y0 + stride * (ho - 1) + 1 : stride, x0 : x0 + stride * (wo - 1) + 1 : stride] += cols[:, :, i, j]
    return xp


@njit
def _col2im_nb(cols, xp, stride, dilation):
    n, c, kh, kw, ho, wo = cols.shape
    for b in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    for y in range(ho):
                        yy = y * stride + i * dilation
                        for x in range(wo):
                            xp[b, ch, yy, x * stride + j * dilation] += cols[b, ch, i, j, y, x]
    return xp


def col2im_nb(cols, shape, stride, dilation):
    xp = np.zeros(shape, dtype=cols.dtype)
    return _col2im_nb(np.ascontiguousarray(cols), xp, stride, dilation)


# ---------------------------------------------------------------------------
# Levenshtein DP with operation counts
# ---------------------------------------------------------------------------


@njit
def edit_ops_nb(a, b):
    n = a.shape[0]
    m = b.shape[0]
    d = np.empty((n + 1, m + 1), dtype=np.int64)
    for j in range(m + 1):
        d[0, j] = j
    for i in range(1, n + 1):
        d[i, 0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            v = d[i - 1, j - 1] + cost
            if d[i - 1, j] + 1 < v:
                v = d[i - 1, j] + 1
            if d[i, j - 1] + 1 < v:
                v = d[i, j - 1] + 1
            d[i, j] = v
    subs = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and d[i, j] == d[i - 1, j - 1]:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + 1:
            subs += 1
            i -= 1
            j -= 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return d[n, m], subs, ins, dels


def edit_ops_np(a, b):
    n, m = a.shape[0], b.shape[0]
    d = np.empty((n + 1, m + 1), dtype=np.int64)
    cols = np.arange(m + 1)
    d[0] = cols
    for i in range(1, n + 1):
        prev = d[i - 1]
        cost = (b != a[i - 1]).astype(np.int64)
        t = np.empty(m + 1, dtype=np.int64)
        t[0] = i
        t[1:] = np.minimum(prev[:-1] + cost, prev[1:] + 1)
        # insertions: d[i, j] = min_k<=j t[k] + (j - k)
        d[i] = np.minimum.accumulate(t - cols) + cols
    subs = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and d[i, j] == d[i - 1, j - 1]:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + 1:
            subs += 1
            i -= 1
            j -= 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return int(d[n, m]), subs, ins, dels


# ---------------------------------------------------------------------------
# dense matching: cost of descriptor displacement candidates
# ---------------------------------------------------------------------------


@njit
def match_costs_nb(dref, dtest, fx, fy, radius):
    """L1 descriptor cost for every integer candidate around an integer prior.

    ``dref``/``dtest`` are (H, W, D); ``fx``/``fy`` integer prior flow (H, W).
    Returns (H, W, 2r+1, 2r+1); candidates landing outside ``dtest`` get +inf.
    """
    h, w, nd = dref.shape
    k = 2 * radius + 1
    out = np.empty((h, w, k, k), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            for iy in range(k):
                ty = y + fy[y, x] + iy - radius
                for ix in range(k):
                    tx = x + fx[y, x] + ix - radius
                    if ty < 0 or ty >= h or tx < 0 or tx >= w:
                        out[y, x, iy, ix] = np.inf
                        continue
                    acc = 0.0
                    for q in range(nd):
                        acc += abs(dref[y, x, q] - dtest[ty, tx, q])
                    out[y, x, iy, ix] = acc
    return out


def match_costs_np(dref, dtest, fx, fy, radius):
    h, w, _ = dref.shape
    k = 2 * radius + 1
    out = np.empty((h, w, k, k), dtype=np.float64)
    yy, xx = np.mgrid[0:h, 0:w]
    for iy in range(k):
        ty = yy + fy + iy - radius
        for ix in range(k):
            tx = xx + fx + ix - radius
            valid = (ty >= 0) & (ty < h) & (tx >= 0) & (tx < w)
            cost = np.abs(dref - dtest[np.clip(ty, 0, h - 1), np.clip(tx, 0, w - 1)]).sum(axis=2)
            out[:, :, iy, ix] = np.where(valid, cost, np.inf)
    return out



# ---------------------------------------------------------------------------
# checkerboard ICM for truncated-L1 flow smoothness
# ---------------------------------------------------------------------------


@njit
def icm_labels_nb(data, ux, uy, lab, smooth, truncate, sweeps):
    h, w, n = data.shape
    lab = lab.copy()
    for _ in range(sweeps):
        for color in range(2):
            for r in range(h):
                for c in range(w):
                    if (r + c) % 2 != color:
                        continue
                    best = 0
                    best_e = np.inf
                    for k in range(n):
                        e = data[r, c, k]
                        for q in range(4):
                            if q == 0:
                                rr, cc = max(r - 1, 0), c
                            elif q == 1:
                                rr, cc = min(r + 1, h - 1), c
                            elif q == 2:
                                rr, cc = r, max(c - 1, 0)
                            else:
                                rr, cc = r, min(c + 1, w - 1)
                            lq = lab[rr, cc]
                            d = abs(ux[r, c, k] - ux[rr, cc, lq]) + abs(uy[r, c, k] - uy[rr, cc, lq])
                            e += smooth * min(d, truncate)
                        if e < best_e:
                            best_e = e
                            best = k
                    lab[r, c] = best
    return lab


def icm_labels_np(data, ux, uy, lab, smooth, truncate, sweeps):
    """Minimise data[p, l] + smooth * sum_q min(|u_l - u_q|_1, truncate) by
    checkerboard sweeps; neighbours past the border are the pixel itself."""
    h, w, _ = data.shape
    rr, cc = np.indices((h, w))
    color = (rr + cc) % 2
    lab = lab.copy()
    for _ in range(sweeps):
        for c in (0, 1):
            cx = np.take_along_axis(ux, lab[:, :, None], 2)[:, :, 0]
            cy = np.take_along_axis(uy, lab[:, :, None], 2)[:, :, 0]
            px = np.pad(cx, 1, mode="edge")
            py = np.pad(cy, 1, mode="edge")
            energy = data.copy()
            for sy, sx in ((0, 1), (2, 1), (1, 0), (1, 2)):
                nx = px[sy : sy + h, sx : sx + w][:, :, None]
                ny = py[sy : sy + h, sx : sx + w][:, :, None]
                energy += smooth * np.minimum(np.abs(ux - nx) + np.abs(uy - ny), truncate)
            new = np.argmin(energy, axis=2)
            lab = np.where(color == c, new, lab)
    return lab


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if USE_NUMBA:
    bilinear_sample = bilinear_sample_nb
    label_components = label_components_nb
    rasterize_quads = rasterize_quads_nb
    # a strided-view copy beats the compiled loop at every measured size
    im2col = im2col_np
    col2im = col2im_nb
    edit_ops = edit_ops_nb
    match_costs = match_costs_nb
    icm_labels = icm_labels_nb

    def trace_boundary(mask, sx, sy):
        return trace_boundary_nb(mask, sx, sy, _RING)

else:
    bilinear_sample = bilinear_sample_np
    label_components = label_components_np
    rasterize_quads = rasterize_quads_np
    im2col = im2col_np
    col2im = col2im_np
    edit_ops = edit_ops_np
    match_costs = match_costs_np
    icm_labels = icm_labels_np

    def trace_boundary(mask, sx, sy):
        return trace_boundary_py(mask, sx, sy, _RING)
