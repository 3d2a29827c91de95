"""Alternating two-dataset training loop with per-epoch LR schedule."""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import CgunwarpError
from ..grid import regrid
from ..io import read_grid, read_image
from ..synth import SOURCE_DOC3D, SOURCE_UVDOC, list_dataset
from .model import grid_loss, image_to_input
from .optim import AdamState, adam_step, lr_at_epoch

log = logging.getLogger(__name__)

LOG_FIELDS = ["step", "epoch", "dataset", "lr", "loss", "L_G", "L_W"]


class EmptyDatasetError(CgunwarpError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 8
    lr: float = 1e-3
    const_epochs: int = 10
    decay_epochs: int = 5
    seed: int = 0
    enable_w: bool = True
    alternate: bool = True
    steps_per_epoch: int = None

    @property
    def epochs(self):
        return self.const_epochs + self.decay_epochs

    def to_dict(self):
        return asdict(self)


class GridDataset:
    """Network-ready arrays: images (N, C, H, W), G (N, 2, R, C), W (N, 3, R, C).

    W targets are mean-centred per sample.
    """

    def __init__(self, images, g, w, tag):
        self.images = np.asarray(images)
        self.g = np.asarray(g)
        self.w = np.asarray(w)
        self.tag = tag

    def __len__(self):
        return self.images.shape[0]

    @classmethod
    def build(cls, items, config, tag, dtype=np.float32):
        """``items`` yields (image, G coords, W points)."""
        ims, gs, ws = [], [], []
        for image, g, w in items:
            ims.append(image_to_input(image, config)[0])
            gs.append(regrid(g, config.grid_rows, config.grid_cols).transpose(2, 0, 1))
            w = regrid(w, config.grid_rows, config.grid_cols)
            w = w - w.reshape(-1, 3).mean(axis=0)
            ws.append(w.transpose(2, 0, 1))
        if not ims:
            raise EmptyDatasetError(f"dataset {tag!r} is empty")
        return cls(np.stack(ims).astype(dtype), np.stack(gs).astype(dtype), np.stack(ws).astype(dtype), tag)

    @classmethod
    def from_samples(cls, samples, config, tag=None, dtype=np.float32):
        samples = list(samples)
        tag = tag or (samples[0].source if samples else SOURCE_UVDOC)
        return cls.build(((s.image, s.G.coords, s.W.points) for s in samples), config, tag, dtype)

    @classmethod
    def from_dir(cls, root, config, split="train", tag=None, dtype=np.float32):
        stems = list_dataset(root, split)
        if not stems:
            raise EmptyDatasetError(f"no samples under {Path(root) / split}")
        if tag is None:
            meta = Path(f"{stems[0]}.meta.json")
            tag = json.loads(meta.read_text())["source"] if meta.exists() else SOURCE_UVDOC

        def items():
            for s in stems:
                yield read_image(f"{s}.png"), read_grid(f"{s}.G.cgug").coords, read_grid(f"{s}.W.cgug").points

        return cls.build(items(), config, tag, dtype)


class _BatchStream:
    def __init__(self, n, batch_size, rng):
        self.n, self.bs, self.rng = n, batch_size, rng
        self.order = rng.permutation(n)
        self.pos = 0
        self.consumed = 0

    def next(self):
        idx = []
        while len(idx) < self.bs:
            if self.pos == self.n:
                self.order = self.rng.permutation(self.n)
                self.pos = 0
            take = min(self.bs - len(idx), self.n - self.pos)
            idx.extend(self.order[self.pos : self.pos + take].tolist())
            self.pos += take
        self.consumed += 1
        return np.array(idx)


def schedule(dsets, cfg):
    """Dataset tags in step order for one epoch, and steps per epoch."""
    names = list(dsets)
    if cfg.steps_per_epoch:
        steps = cfg.steps_per_epoch
    else:
        per = max(math.ceil(len(d) / cfg.batch_size) for d in dsets.values())
        steps = per * len(names)
    return [names[i % len(names)] for i in range(steps)]


def train(model, cfg, dsets, max_steps=None, callback=None):
    """Optimise ``model`` in place; returns the per-step log (list of dicts).

    ``dsets`` maps names to :class:`GridDataset`. With ``cfg.alternate`` and
    two datasets, steps strictly alternate, first dataset first.
    """
    dsets = {k: v for k, v in dsets.items() if v is not None}
    if not dsets:
        raise EmptyDatasetError("no training data")
    for k, d in dsets.items():
        if len(d) == 0:
            raise EmptyDatasetError(f"dataset {k!r} is empty")
    if not cfg.alternate and len(dsets) > 1:
        merged = list(dsets.values())
        dsets = {
            "mixed": GridDataset(
                np.concatenate([d.images for d in merged]),
                np.concatenate([d.g for d in merged]),
                np.concatenate([d.w for d in merged]),
                "mixed",
            )
        }
    ss = np.random.SeedSequence(cfg.seed)
    streams = {k: _BatchStream(len(d), cfg.batch_size, np.random.default_rng(s)) for (k, d), s in zip(dsets.items(), ss.spawn(len(dsets)))}
    order = schedule(dsets, cfg)
    state = AdamState()
    rows = []
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        lr = lr_at_epoch(epoch, cfg.lr, cfg.const_epochs, cfg.decay_epochs)
        for name in order:
            if max_steps is not None and step >= max_steps:
                return rows
            d = dsets[name]
            idx = streams[name].next()
            model.zero_grad()
            g_hat, w_hat = model.forward(d.images[idx])
            total, lg, lw = grid_loss(g_hat, d.g[idx], w_hat, d.w[idx], cfg.enable_w)
            total.backward()
            adam_step(model.params, model.grads(), state, lr)
            step += 1
            row = {
                "step": step,
                "epoch": epoch,
                "dataset": d.tag,
                "lr": lr,
                "loss": float(total.data),
                "L_G": float(lg.data),
                "L_W": float(lw.data) if lw is not None else "",
            }
            rows.append(row)
            if callback:
                callback(row)
        log.info("epoch %d lr %.6g loss %.6g", epoch, lr, rows[-1]["loss"] if rows else float("nan"))
    return rows


def write_log(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=LOG_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def read_log(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


DATASET_KEYS = {"standin_doc3d": SOURCE_DOC3D, "uvdoc_style": SOURCE_UVDOC}
