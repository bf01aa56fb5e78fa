"""CIST checkpoint container.

Layout (little-endian)::

    magic "CIST" | version u32
    config_len u32 | UTF-8 "key=value" lines (sorted keys)
    param_count u32 | tensors
    opt_count u32   | tensors
    rng state, 16 bytes

Each tensor is ``name_len u32 | name | ndim u32 | dims u32... | f32 data``.
Model buffers (batch-norm running statistics) are stored among the
parameters under a ``buffers/`` name prefix.
"""
import struct
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"CIST"
VERSION = 1
BUFFER_PREFIX = "buffers/"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: dict = field(default_factory=dict)
    params: OrderedDict = field(default_factory=OrderedDict)
    optimizer: OrderedDict = field(default_factory=OrderedDict)
    rng_state: bytes = bytes(16)
    version: int = VERSION

    def trainable(self):
        return OrderedDict((k, v) for k, v in self.params.items() if not k.startswith(BUFFER_PREFIX))

    def buffers(self):
        return OrderedDict((k[len(BUFFER_PREFIX):], v) for k, v in self.params.items()
                           if k.startswith(BUFFER_PREFIX))


def _pack_tensors(tensors):
    parts = [struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr)
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf):
        self.buf, self.pos = buf, 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CheckpointError("truncated checkpoint")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def tensors(self):
        out = OrderedDict()
        for _ in range(self.u32()):
            name = self.take(self.u32()).decode("utf-8")
            if name in out:
                raise CheckpointError(f"duplicate tensor name {name!r}")
            ndim = self.u32()
            dims = struct.unpack(f"<{ndim}I", self.take(4 * ndim))
            count = int(np.prod(dims, dtype=np.int64))
            out[name] = np.frombuffer(self.take(4 * count), dtype="<f4").reshape(dims).astype(np.float32)
        return out


def _config_blob(config):
    lines = []
    for key in sorted(config):
        value = str(config[key])
        if "\n" in value or "=" in key:
            raise CheckpointError(f"config entry {key!r} cannot be encoded")
        lines.append(f"{key}={value}")
    return "\n".join(lines).encode("utf-8")


def dumps_checkpoint(ckpt):
    if len(ckpt.rng_state) != 16:
        raise CheckpointError("rng state must be 16 bytes")
    blob = _config_blob(ckpt.config)
    return b"".join([
        MAGIC, struct.pack("<I", ckpt.version),
        struct.pack("<I", len(blob)), blob,
        _pack_tensors(ckpt.params),
        _pack_tensors(ckpt.optimizer),
        bytes(ckpt.rng_state),
    ])


def loads_checkpoint(buf):
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise CheckpointError("not a CIST checkpoint (bad magic)")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    config = OrderedDict()
    text = r.take(r.u32()).decode("utf-8")
    for line in text.split("\n") if text else []:
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointError(f"bad config line {line!r}")
        config[key] = value
    params = r.tensors()
    optimizer = r.tensors()
    rng_state = r.take(16)
    if r.pos != len(buf):
        raise CheckpointError("trailing bytes after checkpoint")
    return Checkpoint(config, params, optimizer, rng_state, version)


def save_checkpoint(ckpt, path):
    with open(path, "wb") as f:
        f.write(dumps_checkpoint(ckpt))


def load_checkpoint(path):
    with open(path, "rb") as f:
        return loads_checkpoint(f.read())


def model_state(model):
    out = OrderedDict((name, p.data) for name, p in model.named_parameters())
    for name, b in model.named_buffers():
        out[BUFFER_PREFIX + name] = b
    return out


def load_model_state(model, params):
    """Copy checkpoint tensors into ``model``; names must match exactly."""
    own = OrderedDict((name, p) for name, p in model.named_parameters())
    bufs = OrderedDict(model.named_buffers())
    expected = set(own) | {BUFFER_PREFIX + n for n in bufs}
    got = set(params)
    if expected != got:
        missing = sorted(expected - got)[:3]
        extra = sorted(got - expected)[:3]
        raise CheckpointError(f"parameter names differ: missing {missing}, unexpected {extra}")
    for name, p in own.items():
        arr = params[name]
        if arr.shape != p.shape:
            raise CheckpointError(f"{name}: shape {arr.shape} != {p.shape}")
        p.data = np.array(arr, dtype=p.data.dtype)
    for name, b in bufs.items():
        b[...] = params[BUFFER_PREFIX + name]
