"""Compiled and numpy kernel flavours must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cgunwarp import kernels as K

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.booleans())
def test_bilinear_parity(seed, fill):
    r = np.random.default_rng(seed)
    h, w, c = r.integers(1, 9, size=3)
    c = 1 if c < 5 else 3
    img = r.random((h, w, c))
    xs = r.uniform(-2, w + 1, size=(5, 6))
    ys = r.uniform(-2, h + 1, size=(5, 6))
    a = K.bilinear_sample_nb(img, xs, ys, fill, 0.5)
    b = K.bilinear_sample_np(img, xs, ys, fill, 0.5)
    assert np.allclose(a, b, rtol=0, atol=1e-14)


@given(arrays(np.bool_, st.tuples(st.integers(1, 24), st.integers(1, 24))))
def test_label_parity(mask):
    la, na = K.label_components_nb(mask)
    lb, nb = K.label_components_np(mask)
    assert na == nb
    assert np.array_equal(la, lb)


def _topmost_leftmost(mask):
    ys, xs = np.nonzero(mask)
    i = np.lexsort((xs, ys))[0]
    return int(xs[i]), int(ys[i])


@given(arrays(np.bool_, st.tuples(st.integers(1, 16), st.integers(1, 16))))
def test_trace_boundary_parity(mask):
    if not mask.any():
        return
    labels, _ = K.label_components_np(mask)
    comp = labels == labels[mask][0]
    sx, sy = _topmost_leftmost(comp)
    a = K.trace_boundary_nb(comp, sx, sy, K._RING)
    b = K.trace_boundary_py(comp, sx, sy, K._RING)
    assert np.array_equal(a, b)


@given(seeds)
def test_rasterize_parity(seed):
    r = np.random.default_rng(seed)
    rows, cols = r.integers(2, 6, size=2)
    gy, gx = np.meshgrid(np.linspace(1, 30, rows), np.linspace(1, 40, cols), indexing="ij")
    grid = np.stack([gx, gy], -1) + r.normal(scale=1.5, size=(rows, cols, 2))
    vals = r.random((rows, cols, 3))
    oa, ma = K.rasterize_quads_nb(grid, vals, 32, 42)
    ob, mb = K.rasterize_quads_np(grid, vals, 32, 42)
    assert np.array_equal(ma, mb)
    assert np.allclose(oa, ob, rtol=0, atol=1e-9)


@given(
    seeds,
    st.integers(1, 3),
    st.integers(1, 3),
    st.integers(1, 3),
    st.integers(0, 2),
)
def test_im2col_col2im_parity(seed, k, stride, dilation, pad):
    r = np.random.default_rng(seed)
    x = r.random((2, 3, 9 + pad * 2, 8 + pad * 2))
    ho = (x.shape[2] - dilation * (k - 1) - 1) // stride + 1
    wo = (x.shape[3] - dilation * (k - 1) - 1) // stride + 1
    a = K.im2col_nb(x, k, k, stride, dilation, ho, wo)
    b = K.im2col_np(x, k, k, stride, dilation, ho, wo)
    assert np.array_equal(a, b)
    g = r.random(a.shape)
    ca = K.col2im_nb(g, x.shape, stride, dilation)
    cb = K.col2im_np(g, x.shape, stride, dilation)
    assert np.allclose(ca, cb, rtol=1e-13, atol=1e-13)


@given(st.text(alphabet="abcd", max_size=12), st.text(alphabet="abcd", max_size=12))
def test_edit_ops_parity(s, t):
    a = np.array([ord(c) for c in s], dtype=np.int64)
    b = np.array([ord(c) for c in t], dtype=np.int64)
    assert tuple(K.edit_ops_nb(a, b)) == tuple(K.edit_ops_np(a, b))


@given(seeds, st.integers(0, 3))
def test_match_costs_parity(seed, radius):
    r = np.random.default_rng(seed)
    dref = r.random((7, 9, 5))
    dtest = r.random((7, 9, 5))
    fx = r.integers(-2, 3, size=(7, 9))
    fy = r.integers(-2, 3, size=(7, 9))
    a = K.match_costs_nb(dref, dtest, fx, fy, radius)
    b = K.match_costs_np(dref, dtest, fx, fy, radius)
    assert np.array_equal(np.isinf(a), np.isinf(b))
    fin = np.isfinite(a)
    assert np.allclose(a[fin], b[fin], rtol=1e-12, atol=1e-12)


@given(seeds, st.integers(1, 4))
def test_icm_parity(seed, sweeps):
    r = np.random.default_rng(seed)
    h, w, n = 6, 7, 9
    # integer-valued data keeps both flavours' sums exact
    data = r.integers(0, 20, size=(h, w, n)).astype(np.float64)
    off = np.stack(np.meshgrid(np.arange(-1, 2), np.arange(-1, 2)), -1).reshape(-1, 2)
    ux = np.broadcast_to(off[:, 0].astype(np.float64), (h, w, n)) + r.integers(-1, 2, size=(h, w, 1))
    uy = np.broadcast_to(off[:, 1].astype(np.float64), (h, w, n)) + r.integers(-1, 2, size=(h, w, 1))
    lab = np.argmin(data, axis=2)
    a = K.icm_labels_nb(data, np.ascontiguousarray(ux), np.ascontiguousarray(uy), lab, 1.0, 4.0, sweeps)
    b = K.icm_labels_np(data, ux, uy, lab, 1.0, 4.0, sweeps)
    assert np.array_equal(a, b)


def test_disable_flag_selects_numpy_flavour():
    env = dict(os.environ, CGUNWARP_DISABLE_JIT="1")
    code = (
        "from cgunwarp import kernels as K;"
        "assert not K.USE_NUMBA;"
        "assert K.bilinear_sample is K.bilinear_sample_np;"
        "assert K.icm_labels is K.icm_labels_np;"
        "print('ok')"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "ok"


@pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")
def test_default_uses_compiled_flavour():
    if K.USE_NUMBA:
        assert K.bilinear_sample is K.bilinear_sample_nb
        assert K.match_costs is K.match_costs_nb
