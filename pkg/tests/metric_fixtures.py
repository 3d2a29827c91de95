"""Image pairs and a plain DP edit distance shared by metric tests."""

import numpy as np
from scipy import ndimage


def texture(seed, h, w, sigma=2.0):
    r = np.random.default_rng(seed)
    t = ndimage.gaussian_filter(r.random((h, w)), sigma)
    t = (t - t.min()) / (t.max() - t.min())
    return 0.1 + 0.8 * t


def dp_distance(a, b):
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def ms_ssim_pairs():
    a = texture(0, 180, 200)
    b = texture(1, 180, 200)
    yield "self", a, a
    yield "inverted", a, 1 - a
    yield "offset", a, a + 0.05
    yield "noise", a, np.clip(a + np.random.default_rng(2).normal(0, 0.05, a.shape), 0, 1)
    yield "blur", a, ndimage.gaussian_filter(a, 1.5)
    yield "shift", a, np.roll(a, 3, axis=1)
    yield "gamma", a, a**1.5
    yield "other", a, b
    yield "scaled", a, 0.7 * a
    rgb = np.stack([a, b, texture(3, 180, 200)], -1)
    yield "color", rgb, rgb[..., ::-1]


def random_string_pairs(n, seed=0, alphabet="abcde "):
    r = np.random.default_rng(seed)
    for _ in range(n):
        la, lb = r.integers(1, 25), r.integers(0, 25)
        yield "".join(r.choice(list(alphabet), la)), "".join(r.choice(list(alphabet), lb))
