"""Sequence collections, the TSV index, CSV import, resampling and windowing."""
import csv
import logging
import os
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .pseq import FormatError, PoseSequence, load_pseq, save_pseq

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


def import_csv(path, fps, action_label="", subject_id="", skip_header=False):
    """Read one frame per row with J*3 columns ordered x, y, z per joint."""
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if skip_header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
                if width % 3 or width < 6:
                    raise FormatError(f"{path}:{lineno}: {width} columns is not J*3 with J >= 2")
            elif len(row) != width:
                raise FormatError(f"{path}:{lineno}: ragged row ({len(row)} columns, expected {width})")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric cell") from None
    if not rows:
        raise FormatError(f"{path}: no frames")
    frames = np.asarray(rows).reshape(len(rows), width // 3, 3)
    return PoseSequence(frames, fps, action_label, subject_id)


def downsample(seq, target_fps):
    """Keep every ``round(fps / target_fps)``-th frame; no interpolation."""
    if target_fps <= 0 or target_fps > seq.fps:
        raise ValueError(f"target fps {target_fps} must be in (0, {seq.fps}]")
    ratio = seq.fps / target_fps
    stride = max(1, int(np.floor(ratio + 0.5)))
    if abs(ratio - stride) > 1e-6:
        log.warning("downsample %.3g Hz -> %.3g Hz: exact retiming unsupported, using stride %d",
                    seq.fps, target_fps, stride)
    if stride == 1:
        return seq
    return PoseSequence(seq.frames[::stride], seq.fps / stride, seq.action_label, seq.subject_id)


def window_count(n_frames, t1, t2, stride):
    span = t1 + t2
    if n_frames < span:
        return 0
    return (n_frames - span) // stride + 1


def window_split(seq, t1, t2, stride=1):
    """Sliding (input, target) pairs of length t1 and t2."""
    if t1 < 1 or t2 < 1 or stride < 1:
        raise ValueError("t1, t2 and stride must be positive")
    frames = seq.frames if isinstance(seq, PoseSequence) else np.asarray(seq)
    out = []
    for i in range(window_count(len(frames), t1, t2, stride)):
        s = i * stride
        out.append((frames[s:s + t1], frames[s + t1:s + t1 + t2]))
    return out


@dataclass
class WindowSet:
    """Stacked windows: inputs (N, t1, J, 3), targets (N, t2, J, 3)."""

    inputs: np.ndarray
    targets: np.ndarray
    actions: list
    seq_ids: list

    def __len__(self):
        return len(self.inputs)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return WindowSet(self.inputs[idx], self.targets[idx],
                         [self.actions[i] for i in idx], [self.seq_ids[i] for i in idx])


@dataclass
class SequenceDataset:
    sequences: list = field(default_factory=list)
    splits: list = field(default_factory=list)
    paths: list = field(default_factory=list)

    def add(self, seq, split, path=None):
        if split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
        self.sequences.append(seq)
        self.splits.append(split)
        self.paths.append(path)

    def __len__(self):
        return len(self.sequences)

    @property
    def index(self):
        """Action label -> sequence ids."""
        out = OrderedDict()
        for i, seq in enumerate(self.sequences):
            out.setdefault(seq.action_label, []).append(i)
        return out

    def ids(self, split):
        return [i for i, s in enumerate(self.splits) if s == split]

    def actions(self):
        return sorted(self.index)

    def windows(self, split, t1, t2, stride=1):
        inputs, targets, actions, seq_ids = [], [], [], []
        for i in self.ids(split):
            seq = self.sequences[i]
            for x, y in window_split(seq, t1, t2, stride):
                inputs.append(x)
                targets.append(y)
                actions.append(seq.action_label)
                seq_ids.append(i)
        if not inputs:
            J = self.sequences[0].n_joints if self.sequences else 0
            return WindowSet(np.zeros((0, t1, J, 3), np.float32), np.zeros((0, t2, J, 3), np.float32), [], [])
        return WindowSet(np.stack(inputs), np.stack(targets), actions, seq_ids)

    def save(self, directory, index_name="index.tsv"):
        """Write one PSEQ per sequence plus a ``path<TAB>action<TAB>subject<TAB>split`` index."""
        os.makedirs(directory, exist_ok=True)
        lines = []
        for i, (seq, split) in enumerate(zip(self.sequences, self.splits)):
            rel = self.paths[i] or f"seq_{i:05d}.pseq"
            save_pseq(seq, os.path.join(directory, rel))
            self.paths[i] = rel
            for text in (rel, seq.action_label, seq.subject_id):
                if "\t" in text or "\n" in text:
                    raise FormatError(f"tab or newline in index field {text!r}")
            lines.append(f"{rel}\t{seq.action_label}\t{seq.subject_id}\t{split}\n")
        index_path = os.path.join(directory, index_name)
        with open(index_path, "w", encoding="utf-8") as f:
            f.writelines(lines)
        return index_path

    @classmethod
    def load(cls, index_path):
        """Load from an index file (or a directory holding ``index.tsv``)."""
        if os.path.isdir(index_path):
            index_path = os.path.join(index_path, "index.tsv")
        root = os.path.dirname(os.path.abspath(index_path))
        ds = cls()
        seen = set()
        with open(index_path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 4:
                    raise FormatError(f"{index_path}:{lineno}: expected 4 tab-separated fields")
                path, action, subject, split = parts
                if path in seen:
                    raise FormatError(f"{index_path}:{lineno}: {path} listed twice")
                seen.add(path)
                seq = load_pseq(os.path.join(root, path))
                seq.action_label, seq.subject_id = action, subject
                try:
                    ds.add(seq, split, path)
                except ValueError as e:
                    raise FormatError(f"{index_path}:{lineno}: {e}") from None
        return ds
