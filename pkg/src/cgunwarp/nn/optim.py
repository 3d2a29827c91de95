"""Adam and the constant-then-linear-decay learning-rate schedule."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state, lr):
    """One bias-corrected Adam update, in place on ``params[name].data``."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name]
        data = p.data if hasattr(p, "data") else p
        if name not in state.m:
            state.m[name] = np.zeros_like(data)
            state.v[name] = np.zeros_like(data)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(data.dtype)
        data -= update
    return params


def lr_at_epoch(epoch, base_lr=1e-3, const_epochs=10, decay_epochs=5):
    """LR used throughout 1-based ``epoch``: ``base_lr`` for the first
    ``const_epochs``, then the linear ramp to zero evaluated at the end of
    the epoch (epoch 12 of 10+5 -> 0.6 * base_lr)."""
    if epoch <= const_epochs:
        return base_lr
    if decay_epochs <= 0:
        return 0.0
    return base_lr * max(0.0, (const_epochs + decay_epochs - epoch) / decay_epochs)
