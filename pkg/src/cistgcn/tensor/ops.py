"""Differentiable ops on :class:`Tensor`.

Every op computes its forward with numpy (or the compiled kernels), checks the
result for NaN/Inf and records one tape node whose closure maps the output
gradient to one gradient per input.
"""
import numpy as np

from .. import kernels
from .core import Tensor, make_result


def _pair(a, b):
    """Coerce operands to tensors sharing the dtype of whichever is a Tensor."""
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype))
    return a, b


def _shape_error(op, *shapes):
    return ValueError(f"{op}: incompatible shapes " + " and ".join(str(tuple(s)) for s in shapes))


def _axis(axis, ndim):
    if not -ndim <= axis < ndim:
        raise ValueError(f"axis {axis} out of range for {ndim}-d tensor")
    return axis % ndim


# elementwise arithmetic

def add(a, b):
    a, b = _pair(a, b)
    try:
        data = a.data + b.data
    except ValueError:
        raise _shape_error("add", a.shape, b.shape) from None
    return make_result("add", data, (a, b), lambda g: (g, g))


def sub(a, b):
    a, b = _pair(a, b)
    try:
        data = a.data - b.data
    except ValueError:
        raise _shape_error("sub", a.shape, b.shape) from None
    return make_result("sub", data, (a, b), lambda g: (g, -g))


def mul(a, b):
    a, b = _pair(a, b)
    try:
        data = a.data * b.data
    except ValueError:
        raise _shape_error("mul", a.shape, b.shape) from None
    return make_result("mul", data, (a, b), lambda g: (g * b.data, g * a.data))


def div(a, b):
    a, b = _pair(a, b)
    data = a.data / b.data

    def back(g):
        return g / b.data, -g * a.data / (b.data * b.data)

    return make_result("div", data, (a, b), back)


def scale(x, factor):
    factor = float(factor)
    return make_result("scale", x.data * x.dtype.type(factor), (x,),
                       lambda g: (g * factor,))


def square(x):
    return make_result("square", x.data * x.data, (x,), lambda g: (2.0 * g * x.data,))


def sqrt(x, eps=0.0):
    with np.errstate(invalid="ignore"):  # make_result reports NaN as NumericError
        y = np.sqrt(x.data + eps)
    return make_result("sqrt", y, (x,), lambda g: (g * 0.5 / y,))


def exp(x):
    with np.errstate(over="ignore"):  # make_result reports Inf as NumericError
        y = np.exp(x.data)
    return make_result("exp", y, (x,), lambda g: (g * y,))


def sigmoid(x):
    z = x.data
    # split on sign so exp never overflows
    e = np.exp(-np.abs(z))
    y = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(z.dtype)
    return make_result("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x):
    y = np.tanh(x.data)
    return make_result("tanh", y, (x,), lambda g: (g * (1.0 - y * y),))


def prelu(x, alpha):
    """``x`` where positive, ``alpha * x`` otherwise; ``alpha`` is per channel (axis 1).

    At exactly zero the ``alpha`` branch is taken.
    """
    a = alpha.data
    if a.size > 1:
        if x.ndim < 2 or x.shape[1] != a.size:
            raise _shape_error("prelu", x.shape, alpha.shape)
        a = a.reshape((1, a.size) + (1,) * (x.ndim - 2))
    else:
        a = a.reshape(())
    pos = x.data > 0
    y = np.where(pos, x.data, a * x.data)

    def back(g):
        gx = np.where(pos, g, a * g)
        ga = np.where(pos, 0.0, g * x.data)
        if alpha.size > 1:
            ga = ga.sum(axis=tuple(i for i in range(x.ndim) if i != 1))
        else:
            ga = ga.sum()
        return gx, ga.reshape(alpha.shape)

    return make_result("prelu", y, (x, alpha), back)


# shape manipulation

def reshape(x, shape):
    shape = tuple(shape)
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise _shape_error("reshape", x.shape, shape) from None
    return make_result("reshape", y, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None):
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(a % x.ndim for a in axes)
    inv = tuple(np.argsort(axes))
    y = np.ascontiguousarray(x.data.transpose(axes))
    return make_result("transpose", y, (x,), lambda g: (g.transpose(inv),))


def swapaxes(x, a, b):
    axes = list(range(x.ndim))
    axes[a], axes[b] = axes[b], axes[a]
    return transpose(x, axes)


def concat(tensors, axis=0):
    tensors = list(tensors)
    ax = _axis(axis, tensors[0].ndim)
    try:
        y = np.concatenate([t.data for t in tensors], axis=ax)
    except ValueError:
        raise _shape_error("concat", *(t.shape for t in tensors)) from None
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def back(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax)
                     for i in range(len(tensors)))

    return make_result("concat", y, tuple(tensors), back)


def index(x, idx):
    y = np.array(x.data[idx], copy=True)

    def back(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        return (gx,)

    return make_result("index", y, (x,), back)


def broadcast_to(x, shape):
    y = np.ascontiguousarray(np.broadcast_to(x.data, shape))
    return make_result("broadcast_to", y, (x,), lambda g: (g,))


# reductions

def sum(x, axis=None, keepdims=False):
    y = np.asarray(x.data.sum(axis=axis, keepdims=keepdims))

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return make_result("sum", y, (x,), back)


def _count(x, axis):
    if axis is None:
        return x.size
    axes = axis if isinstance(axis, tuple) else (axis,)
    n = 1
    for a in axes:
        n *= x.shape[a]
    return n


def mean(x, axis=None, keepdims=False):
    n = _count(x, axis)
    if n == 0:
        raise ValueError("mean over an empty axis")
    return scale(sum(x, axis, keepdims), 1.0 / n)


def std(x, axis=None, keepdims=False, eps=1e-8):
    """Population standard deviation, ``sqrt(var + eps)``."""
    n = _count(x, axis)
    if n == 0:
        raise ValueError("std over an empty axis")
    mu = x.data.mean(axis=axis, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=axis, keepdims=True)
    s = np.sqrt(var + eps)
    y = s if keepdims else np.squeeze(s, axis=axis) if axis is not None else s.reshape(())

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        elif axis is None:
            g = np.reshape(g, s.shape)
        return (g * centered / (n * s),)

    return make_result("std", y, (x,), back)


def max(x, axis, keepdims=False):
    ax = _axis(axis, x.ndim)
    if x.shape[ax] == 0:
        raise ValueError("max over an empty axis")
    arg = np.expand_dims(np.argmax(x.data, axis=ax), ax)
    y = np.take_along_axis(x.data, arg, axis=ax)
    if not keepdims:
        y = np.squeeze(y, axis=ax)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, arg, g, axis=ax)
        return (gx,)

    return make_result("max", y, (x,), back)


def softmax(x, axis=-1):
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_result("softmax", y, (x,), back)


def pool(x, axis, kind="avg", scores=None, keepdims=False):
    """Reduce ``axis`` by max, average or attention pooling.

    Attention pooling takes ``scores`` broadcastable to ``x``; the weights are
    ``softmax(scores)`` along ``axis``, so uniform scores give average pooling.
    """
    ax = _axis(axis, x.ndim)
    if x.shape[ax] == 0:
        raise ValueError("pool over an empty axis")
    if kind == "max":
        return max(x, ax, keepdims)
    if kind == "avg":
        return mean(x, ax, keepdims)
    if kind == "attention":
        if scores is None:
            raise ValueError("attention pooling needs scores")
        weights = softmax(scores, axis=ax)
        return sum(mul(x, weights), ax, keepdims)
    raise ValueError(f"unknown pooling kind {kind!r}")


# linear algebra

def matmul(a, b):
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise _shape_error("matmul", a.shape, b.shape)
    try:
        y = np.matmul(a.data, b.data)
    except ValueError:
        raise _shape_error("matmul", a.shape, b.shape) from None

    def back(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2)) if a.requires_grad else None
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g) if b.requires_grad else None
        return ga, gb

    return make_result("matmul", y, (a, b), back)


def linear(x, weight, bias=None):
    """``x @ weight.T + bias`` over the last axis; ``weight`` is (out, in)."""
    if x.shape[-1] != weight.shape[1]:
        raise _shape_error("linear", x.shape, weight.shape)
    w = weight.data
    y = np.matmul(x.data, w.T)
    if bias is not None:
        y = y + bias.data
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def back(g):
        gx = np.matmul(g, w) if x.requires_grad else None
        g2 = g.reshape(-1, g.shape[-1])
        gw = np.matmul(g2.T, x.data.reshape(-1, x.shape[-1]))
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    return make_result("linear", y, inputs, back)


def channel_mix(x, weight, bias=None):
    """1x1 convolution: mixes axis 1 of ``x`` (N, C, ...) with ``weight`` (O, C)."""
    if x.ndim < 2 or x.shape[1] != weight.shape[1]:
        raise _shape_error("channel_mix", x.shape, weight.shape)
    N, C = x.shape[:2]
    rest = x.shape[2:]
    xf = x.data.reshape(N, C, -1)
    y = np.matmul(weight.data, xf)
    if bias is not None:
        y = y + bias.data[:, None]
    y = y.reshape((N, weight.shape[0]) + rest)
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def back(g):
        gf = g.reshape(N, weight.shape[0], -1)
        gx = np.matmul(weight.data.T, gf).reshape(x.shape) if x.requires_grad else None
        gw = np.matmul(gf, xf.transpose(0, 2, 1)).sum(axis=0)
        if bias is None:
            return gx, gw
        return gx, gw, gf.sum(axis=(0, 2))

    return make_result("channel_mix", y, inputs, back)


# convolution and normalization

def _conv_padding(padding, span, L):
    if padding == "same":
        return span // 2, L
    if padding == "valid":
        return 0, L - span
    raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")


def conv1d(x, weight, bias=None, dilation=1, padding="same", groups=1):
    """Dilated cross-correlation along the length axis.

    ``x`` is (C, L), (N, C, L) or (N, C, L, M); in the 4-d form every trailing
    position ``M`` is convolved independently. ``weight`` is (O, C // groups, K).
    """
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    shape = x.shape
    if x.ndim == 2:
        x4 = x.data[None, :, :, None]
    elif x.ndim == 3:
        x4 = x.data[:, :, :, None]
    elif x.ndim == 4:
        x4 = x.data
    else:
        raise ValueError(f"conv1d expects 2-4 dims, got shape {shape}")
    N, C, L, M = x4.shape
    O, Cg, K = weight.shape
    if K < 1 or C % groups or O % groups or Cg != C // groups:
        raise _shape_error("conv1d", shape, weight.shape)
    span = (K - 1) * dilation
    pad_left, out_len = _conv_padding(padding, span, L)
    if out_len < 1 or span + 1 > L + (span if padding == "same" else 0):
        raise ValueError(f"conv1d: kernel span {span + 1} exceeds padded length for input {shape}")
    x4 = np.ascontiguousarray(x4)
    w = np.ascontiguousarray(weight.data)
    y4 = kernels.conv1d_forward(x4, w, dilation, pad_left, out_len, groups)
    if bias is not None:
        y4 = y4 + bias.data[None, :, None, None]
    out_shape = {2: (O, out_len), 3: (N, O, out_len), 4: (N, O, out_len, M)}[x.ndim]
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def back(g):
        g4 = np.ascontiguousarray(g.reshape(N, O, out_len, M))
        gx, gw = kernels.conv1d_backward(g4, x4, w, dilation, pad_left, groups,
                                         x.requires_grad, weight.requires_grad)
        if gx is not None:
            gx = gx.reshape(shape)
        if bias is None:
            return gx, gw
        return gx, gw, g4.sum(axis=(0, 2, 3))

    return make_result("conv1d", y4.reshape(out_shape), inputs, back)


def separable_conv(x, depthwise, pointwise, dilation=1, padding="same"):
    """Depthwise conv (one K-tap filter per channel) then a 1x1 pointwise conv.

    ``depthwise`` is (C, 1, K) and ``pointwise`` (C_out, C, 1).
    """
    C = x.shape[0] if x.ndim == 2 else x.shape[1]
    if depthwise.shape[0] != C or depthwise.shape[1] != 1:
        raise _shape_error("separable_conv", x.shape, depthwise.shape)
    if pointwise.shape[1] != C:
        raise _shape_error("separable_conv", depthwise.shape, pointwise.shape)
    h = conv1d(x, depthwise, dilation=dilation, padding=padding, groups=C)
    return conv1d(h, pointwise, padding="valid")


def batch_norm(x, gamma, beta, running_mean, running_var, training,
               momentum=0.1, eps=1e-5):
    """Normalize axis 1 of ``x`` over every other axis.

    In training mode batch statistics are used and the running buffers (plain
    numpy arrays) are updated in place; otherwise the running buffers are used.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    C = x.shape[1]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise _shape_error("batch_norm", x.shape, gamma.shape)
    axes = tuple(i for i in range(x.ndim) if i != 1)
    bshape = (1, C) + (1,) * (x.ndim - 2)
    if training:
        m = x.size // C
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        unbiased = var * (m / (m - 1)) if m > 1 else var
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        mu, var = running_mean, running_var
    invstd = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x.data - mu.reshape(bshape).astype(x.dtype)) * invstd.reshape(bshape)
    y = xhat * gamma.data.reshape(bshape) + beta.data.reshape(bshape)

    def back(g):
        gg = (g * xhat).sum(axis=axes)
        gb = g.sum(axis=axes)
        dxhat = g * gamma.data.reshape(bshape)
        if training:
            m = x.size // C
            gx = (invstd.reshape(bshape) / m) * (
                m * dxhat
                - dxhat.sum(axis=axes).reshape(bshape)
                - xhat * (dxhat * xhat).sum(axis=axes).reshape(bshape))
        else:
            gx = dxhat * invstd.reshape(bshape)
        return gx, gg, gb

    return make_result("batch_norm", y, (x, gamma, beta), back)


__all__ = [
    "add", "sub", "mul", "div", "scale", "square", "sqrt", "exp", "sigmoid", "tanh",
    "prelu", "reshape", "transpose", "swapaxes", "concat", "index", "broadcast_to",
    "sum", "mean", "std", "max", "softmax", "pool", "matmul", "linear",
    "channel_mix", "conv1d", "separable_conv", "batch_norm",
]
