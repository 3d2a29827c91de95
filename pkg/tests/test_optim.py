import math

import numpy as np
import pytest

from cgunwarp.nn import AdamState, adam_step, lr_at_epoch
from cgunwarp.nn import tensor as T


def scalar_adam(w, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    return w


def test_zero_gradient_no_change():
    p = {"a": T.parameter(np.array([1.0, -2.0]))}
    adam_step(p, {"a": np.zeros(2)}, AdamState(), 0.1)
    assert p["a"].data.tolist() == [1.0, -2.0]


def test_state_buffers_shaped_like_params():
    p = {"a": T.parameter(np.ones((2, 3)))}
    s = AdamState()
    adam_step(p, {"a": np.ones((2, 3))}, s, 0.1)
    assert s.step == 1 and s.m["a"].shape == (2, 3) and s.v["a"].shape == (2, 3)


@pytest.mark.parametrize("g", [0.5, -3.0, 1e-6])
def test_constant_gradient_matches_scalar_reference(g):
    p = {"w": T.parameter(np.array([0.2]))}
    s = AdamState()
    for _ in range(5):
        adam_step(p, {"w": np.array([g])}, s, 0.01)
    assert p["w"].data[0] == pytest.approx(scalar_adam(0.2, [g] * 5, 0.01), abs=1e-15)
    # first step moves by about lr regardless of scale
    q = {"w": T.parameter(np.array([0.0]))}
    adam_step(q, {"w": np.array([g])}, AdamState(), 0.01)
    assert abs(q["w"].data[0]) == pytest.approx(0.01 * abs(g) / (abs(g) + 1e-8), rel=1e-12)


def test_quadratic_converges():
    p = {"w": T.parameter(np.array([1.0]))}
    s = AdamState()
    for _ in range(200):
        adam_step(p, {"w": 2.0 * p["w"].data}, s, 0.1)
    assert abs(p["w"].data[0]) < 1e-2


def test_lr_schedule():
    assert [lr_at_epoch(e) for e in range(1, 11)] == [1e-3] * 10
    assert lr_at_epoch(12) == pytest.approx(0.0006, abs=1e-18)
    assert lr_at_epoch(15) == 0.0
    assert lr_at_epoch(11) == pytest.approx(0.0008, abs=1e-18)
    vals = [lr_at_epoch(e) for e in range(10, 16)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
