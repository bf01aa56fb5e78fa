from .augment import AugmentationSpec, add_joint_noise, augment, pivot, rotate_y, yaw_matrix
from .dataset import (SPLITS, SequenceDataset, WindowSet, downsample, import_csv,
                      window_count, window_split)
from .pseq import FormatError, PoseSequence, dumps_pseq, load_pseq, loads_pseq, save_pseq
from .synth import CLASSES, JOINT_NAMES, PARENTS, synth_dataset, synth_generate

__all__ = [
    "AugmentationSpec", "CLASSES", "FormatError", "JOINT_NAMES", "PARENTS", "PoseSequence",
    "SPLITS", "SequenceDataset", "WindowSet", "add_joint_noise", "augment", "downsample",
    "dumps_pseq", "import_csv", "load_pseq", "loads_pseq", "pivot", "rotate_y",
    "save_pseq", "synth_dataset", "synth_generate", "window_count", "window_split",
    "yaw_matrix",
]
