"""PoseSequence and the PSEQ binary format.

Layout (little-endian)::

    magic "PSEQ" | version u32 = 1 | T u32 | J u32 | D u32 = 3 | fps f32
    label_len u32 | label utf-8 | subject_len u32 | subject utf-8
    T*J*3 f32, frame-major, then joint-major, then xyz
"""
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"PSEQ"
VERSION = 1
_HEAD = struct.Struct("<4sIIIIf")


class FormatError(ValueError):
    """Malformed, truncated or invalid pose data."""


@dataclass(eq=False)
class PoseSequence:
    frames: np.ndarray
    fps: float = 25.0
    action_label: str = ""
    subject_id: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 3 or frames.shape[2] != 3:
            raise FormatError(f"frames must be (T, J, 3), got {frames.shape}")
        if frames.shape[0] < 1 or frames.shape[1] < 2:
            raise FormatError("need T >= 1 and J >= 2")
        if not np.all(np.isfinite(frames)):
            raise FormatError("non-finite joint coordinates")
        if not self.fps > 0:
            raise FormatError(f"fps must be positive, got {self.fps}")
        self.frames = frames
        self.fps = float(np.float32(self.fps))

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def n_joints(self):
        return self.frames.shape[1]

    def __eq__(self, other):
        return (isinstance(other, PoseSequence) and self.fps == other.fps
                and self.action_label == other.action_label
                and self.subject_id == other.subject_id
                and self.frames.shape == other.frames.shape
                and np.array_equal(self.frames, other.frames))


def dumps_pseq(seq):
    T, J, _ = seq.frames.shape
    label = seq.action_label.encode("utf-8")
    subject = seq.subject_id.encode("utf-8")
    return b"".join([
        _HEAD.pack(MAGIC, VERSION, T, J, 3, seq.fps),
        struct.pack("<I", len(label)), label,
        struct.pack("<I", len(subject)), subject,
        np.ascontiguousarray(seq.frames, dtype="<f4").tobytes(),
    ])


def loads_pseq(buf):
    if len(buf) < _HEAD.size:
        raise FormatError("truncated PSEQ header")
    magic, version, T, J, D, fps = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported PSEQ version {version}")
    if D != 3:
        raise FormatError(f"expected D = 3, got {D}")
    pos = _HEAD.size
    strings = []
    for _ in range(2):
        if len(buf) < pos + 4:
            raise FormatError("truncated PSEQ string block")
        (n,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        if len(buf) < pos + n:
            raise FormatError("truncated PSEQ string block")
        try:
            strings.append(buf[pos:pos + n].decode("utf-8"))
        except UnicodeDecodeError as e:
            raise FormatError(f"invalid utf-8 in PSEQ header: {e}") from None
        pos += n
    nbytes = T * J * 3 * 4
    if len(buf) - pos < nbytes:
        raise FormatError(f"truncated PSEQ payload: need {nbytes} bytes, have {len(buf) - pos}")
    if len(buf) - pos > nbytes:
        raise FormatError("trailing bytes after PSEQ payload")
    frames = np.frombuffer(buf, dtype="<f4", count=T * J * 3, offset=pos).reshape(T, J, 3)
    return PoseSequence(frames.astype(np.float32), fps, strings[0], strings[1])


def save_pseq(seq, path):
    with open(path, "wb") as f:
        f.write(dumps_pseq(seq))


def load_pseq(path):
    with open(path, "rb") as f:
        return loads_pseq(f.read())
