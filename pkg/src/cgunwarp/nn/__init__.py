from .checkpoint import load_checkpoint, save_checkpoint
from .model import CGUNet, CGUNetConfig, grid_loss, infer_unwarp, infer_unwarp_batch
from .optim import AdamState, adam_step, lr_at_epoch
from .train import GridDataset, TrainConfig, train

__all__ = [
    "AdamState",
    "CGUNet",
    "CGUNetConfig",
    "GridDataset",
    "TrainConfig",
    "adam_step",
    "grid_loss",
    "infer_unwarp",
    "infer_unwarp_batch",
    "load_checkpoint",
    "lr_at_epoch",
    "save_checkpoint",
    "train",
]
