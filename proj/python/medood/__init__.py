"""OoD patch mining and balanced training for patch segmentation."""

from ._core import (
    class_dice,
    class_iou,
    combine,
    dice_loss,
    estimate,
    estimate_dirs,
    evaluate,
    mine_ood,
    ood_sample_count,
    patchify,
    run,
    split,
    synth,
    train,
)

__all__ = [
    "class_dice",
    "class_iou",
    "combine",
    "dice_loss",
    "estimate",
    "estimate_dirs",
    "evaluate",
    "mine_ood",
    "ood_sample_count",
    "patchify",
    "run",
    "split",
    "synth",
    "train",
]
