"""Central finite-difference checks of the analytic gradients (f64)."""

from dataclasses import dataclass

import numpy as np

from .model import CGUNet, grid_loss


@dataclass
class GradCheckResult:
    checked: int
    max_rel_error: float
    max_abs_error: float
    worst: tuple
    passed: bool


def check_model_gradients(config, seed=0, batch=2, h=1e-6, rtol=1e-4, atol=1e-6, enable_w=True, max_per_param=None):
    """Compare backprop against central differences for (a sample of) every
    parameter entry. An entry passes if its relative error is below ``rtol``
    or its absolute error is below ``atol``."""
    model = CGUNet(config, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 1)
    x = rng.uniform(size=(batch, config.in_channels, config.input_height, config.input_width))
    g = rng.normal(size=(batch, 2, config.grid_rows, config.grid_cols))
    w = rng.normal(size=(batch, 3, config.grid_rows, config.grid_cols))

    def loss():
        gh, wh = model.forward(x)
        return grid_loss(gh, g, wh, w, enable_w)[0]

    model.zero_grad()
    loss().backward()
    analytic = model.grads()
    n = 0
    worst_rel, worst_abs, worst = 0.0, 0.0, None
    ok = True
    for name, p in model.params.items():
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_per_param is not None and flat.size > max_per_param:
            idx = np.sort(rng.choice(flat.size, max_per_param, replace=False))
        for i in idx:
            old = flat[i]
            flat[i] = old + h
            a = float(loss().data)
            flat[i] = old - h
            b = float(loss().data)
            flat[i] = old
            num = (a - b) / (2 * h)
            ana = float(analytic[name].reshape(-1)[i])
            err_abs = abs(num - ana)
            err_rel = err_abs / max(abs(num), abs(ana), 1e-300)
            n += 1
            if err_rel >= rtol and err_abs >= atol:
                ok = False
            if err_abs >= atol and err_rel > worst_rel:
                worst_rel, worst = err_rel, (name, int(i), num, ana)
            worst_abs = max(worst_abs, err_abs)
    return GradCheckResult(n, worst_rel, worst_abs, worst, ok)
