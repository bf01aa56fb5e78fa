"""TNSR debug dump: a 16-byte header then dims and raw little-endian data.

Header: magic ``TNSR``, dtype code u32 (1 = f32, 2 = f64), ndim u32, reserved
u32 (zero). Then ``ndim`` u32 dims and the row-major payload.
"""
import struct

import numpy as np

MAGIC = b"TNSR"
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2}


class TensorFormatError(ValueError):
    pass


def dumps(array):
    array = np.asarray(array)
    if array.dtype not in CODES:
        array = array.astype(np.float64)
    code = CODES[array.dtype]
    head = MAGIC + struct.pack("<III", code, array.ndim, 0)
    dims = struct.pack(f"<{array.ndim}I", *array.shape)
    return head + dims + np.ascontiguousarray(array, dtype=DTYPES[code]).tobytes()


def loads(buf):
    if len(buf) < 16 or buf[:4] != MAGIC:
        raise TensorFormatError("not a TNSR buffer")
    code, ndim, _ = struct.unpack_from("<III", buf, 4)
    if code not in DTYPES:
        raise TensorFormatError(f"unknown dtype code {code}")
    end = 16 + 4 * ndim
    if len(buf) < end:
        raise TensorFormatError("truncated TNSR header")
    shape = struct.unpack_from(f"<{ndim}I", buf, 16)
    dtype = DTYPES[code]
    count = int(np.prod(shape, dtype=np.int64))
    if len(buf) != end + count * dtype.itemsize:
        raise TensorFormatError("TNSR payload size does not match dims")
    return np.frombuffer(buf, dtype=dtype, count=count, offset=end).reshape(shape).astype(dtype.newbyteorder("="))


def save(path, array):
    with open(path, "wb") as f:
        f.write(dumps(array))


def load(path):
    with open(path, "rb") as f:
        return loads(f.read())
