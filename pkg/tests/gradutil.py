"""Finite-difference helper shared by the layer and acceptance tests."""

import numpy as np


def fd_check(build, arrays, h=1e-6, rtol=1e-4, atol=1e-6):
    """``build(*tensors) -> scalar Tensor``. Returns the worst relative error
    over entries whose absolute error exceeds ``atol``."""
    from cgunwarp.nn import tensor as T

    params = [T.parameter(np.array(a, dtype=np.float64)) for a in arrays]
    build(*params).backward()
    worst = 0.0
    for p in params:
        ana = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            a = float(build(*params).data)
            flat[i] = old - h
            b = float(build(*params).data)
            flat[i] = old
            num = (a - b) / (2 * h)
            err = abs(num - ana.reshape(-1)[i])
            if err >= atol:
                worst = max(worst, err / max(abs(num), abs(ana.reshape(-1)[i]), 1e-300))
    return worst
