"""Dual-head fully convolutional grid regressor and its training loss."""

from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DimensionError
from ..grid import GridMesh3D, UnwarpGrid2D, as_image, densify, resample, resize
from . import tensor as T


def _halve(n):
    # 5x5 kernel, stride 2, padding 2
    return T.conv_output_size(n, 5, 2, 1, 2)


@dataclass
class CGUNetConfig:
    input_width: int = 488
    input_height: int = 712
    in_channels: int = 3
    base_channels: int = 32
    down_layers: int = 2
    dilations: list = field(default_factory=lambda: [[1, 2], [2, 4], [4, 8]])
    head_channels: int = 32
    head_layers: int = 2
    grid_rows: int = None
    grid_cols: int = None

    def __post_init__(self):
        if self.down_layers != 2 or self.head_layers != 2:
            raise ValueError("this network has exactly two downsampling and two head layers")
        self.dilations = [list(d) for d in self.dilations]
        if self.grid_rows is None or self.grid_cols is None:
            # grid = four stride-2 halvings of the input (45x31 for 712x488)
            r, c = self.input_height, self.input_width
            for _ in range(4):
                r, c = _halve(r), _halve(c)
            self.grid_rows = self.grid_rows or r
            self.grid_cols = self.grid_cols or c

    @property
    def trunk_channels(self):
        return 2 * self.base_channels

    @property
    def trunk_size(self):
        return _halve(_halve(self.input_height)), _halve(_halve(self.input_width))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def tiny(cls, width=48, height=64, **kw):
        kw.setdefault("base_channels", 8)
        kw.setdefault("head_channels", 8)
        kw.setdefault("dilations", [[1, 2], [1, 2], [2, 1]])
        return cls(input_width=width, input_height=height, **kw)


def _init_conv(rng, co, ci, k, dtype):
    bound = 1.0 / np.sqrt(ci * k * k)
    w = rng.uniform(-bound, bound, size=(co, ci, k, k)).astype(dtype)
    b = rng.uniform(-bound, bound, size=(co,)).astype(dtype)
    return w, b


class CGUNet:
    """Shared strided/dilated trunk, adaptive pooling to the grid, two heads.

    ``forward`` returns ``(G_hat, W_hat)`` of shapes (N, 2, R, C), (N, 3, R, C).
    """

    def __init__(self, config=None, seed=0, dtype=np.float32):
        self.config = config or CGUNetConfig()
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        cfg = self.config
        c1, c2, ch = cfg.base_channels, cfg.trunk_channels, cfg.head_channels
        spec = [
            ("down1", c1, cfg.in_channels, 5),
            ("down2", c2, c1, 5),
        ]
        for b in range(len(cfg.dilations)):
            spec += [(f"res{b}.a", c2, c2, 3), (f"res{b}.b", c2, c2, 3)]
        spec += [("headG.0", ch, c2, 3), ("headG.1", 2, ch, 1), ("headW.0", ch, c2, 3), ("headW.1", 3, ch, 1)]
        self.params = OrderedDict()
        for name, co, ci, k in spec:
            w, b = _init_conv(rng, co, ci, k, self.dtype)
            self.params[f"{name}.weight"] = T.parameter(w, f"{name}.weight")
            self.params[f"{name}.bias"] = T.parameter(b, f"{name}.bias")

    def _conv(self, x, name, **kw):
        return T.conv2d(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"], **kw)

    def forward(self, images):
        cfg = self.config
        x = images if isinstance(images, T.Tensor) else T.Tensor(np.asarray(images, dtype=self.dtype))
        if x.data.ndim != 4 or x.shape[1:] != (cfg.in_channels, cfg.input_height, cfg.input_width):
            raise DimensionError(
                f"expected input (N, {cfg.in_channels}, {cfg.input_height}, {cfg.input_width}), got {x.shape}"
            )
        if x.dtype != self.dtype:
            x = T.Tensor(x.data.astype(self.dtype))
        x = T.relu(self._conv(x, "down1", stride=2, padding=2))
        x = self._conv(x, "down2", stride=2, padding=2)
        for b, (d1, d2) in enumerate(cfg.dilations):
            h = self._conv(T.relu(x), f"res{b}.a", dilation=d1, padding=d1)
            h = self._conv(T.relu(h), f"res{b}.b", dilation=d2, padding=d2)
            x = T.add(x, h)
        x = T.adaptive_avg_pool2d(T.relu(x), cfg.grid_rows, cfg.grid_cols)
        g = self._conv(T.relu(self._conv(x, "headG.0", padding=1)), "headG.1")
        w = self._conv(T.relu(self._conv(x, "headW.0", padding=1)), "headW.1")
        return g, w

    __call__ = forward

    def head_params(self, head):
        return {k: v for k, v in self.params.items() if k.startswith(f"head{head}.")}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def grads(self):
        """Gradient per parameter; untouched parameters get explicit zeros."""
        return OrderedDict((k, p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in self.params.items())

    def state_dict(self):
        return OrderedDict((k, p.data.copy()) for k, p in self.params.items())

    def load_state_dict(self, state):
        missing = set(self.params) - set(state)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for k, p in self.params.items():
            arr = np.asarray(state[k])
            if arr.shape != p.data.shape:
                raise DimensionError(f"{k}: shape {arr.shape} != {p.data.shape}")
            p.data = arr.astype(self.dtype)

    def num_parameters(self):
        return sum(p.data.size for p in self.params.values())


def grid_loss(g_hat, g, w_hat, w, enable_w=True):
    """MSE on the 2D grid plus, optionally, MSE on the 3D grid.

    Returns ``(total, L_G, L_W)``; ``L_W`` is ``None`` when disabled.
    """
    g = g if isinstance(g, T.Tensor) else T.Tensor(np.asarray(g, dtype=g_hat.dtype))
    lg = T.mse(g_hat, g)
    if not enable_w:
        return lg, lg, None
    w = w if isinstance(w, T.Tensor) else T.Tensor(np.asarray(w, dtype=w_hat.dtype))
    lw = T.mse(w_hat, w)
    return T.add(lg, lw), lg, lw


def image_to_input(image, config):
    """(h, w[, c]) float image -> (1, C, H, W) network input at config size."""
    img = as_image(image)
    if img.shape[2] != config.in_channels:
        if img.shape[2] == 1:
            img = np.repeat(img, config.in_channels, axis=2)
        else:
            raise DimensionError(f"image has {img.shape[2]} channels, model expects {config.in_channels}")
    if img.shape[:2] != (config.input_height, config.input_width):
        img = resize(img, config.input_width, config.input_height)
    return img.transpose(2, 0, 1)[None]


def predict_grids(model, images):
    """Run the network on a list of images; returns lists of grids."""
    batch = np.concatenate([image_to_input(im, model.config) for im in images]).astype(model.dtype)
    g, w = model.forward(batch)
    gs = [UnwarpGrid2D(gi.transpose(1, 2, 0).astype(np.float64)) for gi in g.data]
    ws = [GridMesh3D(wi.transpose(1, 2, 0).astype(np.float64)) for wi in w.data]
    return gs, ws


def infer_unwarp(model, image, out_width=None, out_height=None):
    """Predict grids for ``image`` and unwarp it at the requested resolution
    (default: the image's own size)."""
    results = infer_unwarp_batch(model, [image], out_width, out_height)
    return results[0]


def infer_unwarp_batch(model, images, out_width=None, out_height=None):
    gs, ws = predict_grids(model, images)
    out = []
    for im, g, w in zip(images, gs, ws):
        h, wd = np.shape(im)[:2]
        dense = densify(g, out_width or wd, out_height or h)
        out.append((resample(im, dense, "clamp"), g, w))
    return out
