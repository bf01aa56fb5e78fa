"""Parameter containers and the basic layers the architecture is built from."""
import copy
from collections import OrderedDict

import numpy as np

from ..tensor import Tensor, name_scope, ops


class Module:
    """Tracks parameters, buffers and child modules in assignment order."""

    def __init__(self):
        object.__setattr__(self, "_params", OrderedDict())
        object.__setattr__(self, "_buffers", OrderedDict())
        object.__setattr__(self, "_children", OrderedDict())
        object.__setattr__(self, "training", True)

    def __setattr__(self, key, value):
        if isinstance(value, Module):
            self._children[key] = value
            object.__setattr__(value, "_scope_name", key)
        elif isinstance(value, Tensor) and value.requires_grad:
            self._params[key] = value
        object.__setattr__(self, key, value)

    def add_children(self, prefix, modules):
        for i, m in enumerate(modules):
            self._children[f"{prefix}.{i}"] = m
            object.__setattr__(m, "_scope_name", f"{prefix}.{i}")
        object.__setattr__(self, prefix, list(modules))

    def param(self, name, array):
        t = Tensor(np.asarray(array), requires_grad=True, name=name)
        setattr(self, name, t)
        return t

    def buffer(self, name, array):
        self._buffers[name] = np.asarray(array)
        object.__setattr__(self, name, self._buffers[name])

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for cname, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{cname}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix=""):
        for name, b in self._buffers.items():
            yield prefix + name, b
        for cname, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{cname}.")

    def modules(self):
        yield self
        for child in self._children.values():
            yield from child.modules()

    def train(self, mode=True):
        for m in self.modules():
            object.__setattr__(m, "training", mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def clone(self):
        """Independent deep copy; parameters, buffers and gradients are not shared."""
        return copy.deepcopy(self)

    def astype(self, dtype):
        """Cast every parameter and buffer in place."""
        dtype = np.dtype(dtype)
        for m in self.modules():
            for p in m._params.values():
                p.data = p.data.astype(dtype)
                p.grad = None
            for name in list(m._buffers):
                arr = m._buffers[name].astype(dtype)
                m._buffers[name] = arr
                object.__setattr__(m, name, arr)
        return self

    def __call__(self, *args, **kwargs):
        with name_scope(getattr(self, "_scope_name", type(self).__name__)):
            return self.forward(*args, **kwargs)


def kaiming_uniform(rng, shape, fan_in, slope=0.25):
    bound = np.sqrt(6.0 / ((1.0 + slope ** 2) * fan_in))
    return rng.uniform(-bound, bound, size=shape)


class Conv1d(Module):
    """Temporal (or node-axis) convolution over axis 2 of (B, C, L[, M])."""

    def __init__(self, rng, c_in, c_out, kernel=3, dilation=1, padding="same", groups=1, bias=True):
        super().__init__()
        self.dilation, self.padding, self.groups = dilation, padding, groups
        fan_in = (c_in // groups) * kernel
        self.param("weight", kaiming_uniform(rng, (c_out, c_in // groups, kernel), fan_in))
        self.bias = self.param("bias", np.zeros(c_out)) if bias else None

    def forward(self, x):
        return ops.conv1d(x, self.weight, self.bias, self.dilation, self.padding, self.groups)


class ChannelLinear(Module):
    """1x1 convolution mixing axis 1."""

    def __init__(self, rng, c_in, c_out, bias=True, zero=False):
        super().__init__()
        w = np.zeros((c_out, c_in)) if zero else kaiming_uniform(rng, (c_out, c_in), c_in)
        self.param("weight", w)
        self.bias = self.param("bias", np.zeros(c_out)) if bias else None

    def forward(self, x):
        return ops.channel_mix(x, self.weight, self.bias)


class Linear(Module):
    def __init__(self, rng, n_in, n_out, bias=True, zero=False):
        super().__init__()
        w = np.zeros((n_out, n_in)) if zero else kaiming_uniform(rng, (n_out, n_in), n_in)
        self.param("weight", w)
        self.bias = self.param("bias", np.zeros(n_out)) if bias else None

    def forward(self, x):
        return ops.linear(x, self.weight, self.bias)


class BatchNorm(Module):
    def __init__(self, channels, momentum=0.1, eps=1e-5):
        super().__init__()
        self.momentum, self.eps = momentum, eps
        self.param("gamma", np.ones(channels))
        self.param("beta", np.zeros(channels))
        self.buffer("running_mean", np.zeros(channels))
        self.buffer("running_var", np.ones(channels))

    def forward(self, x):
        return ops.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                              self.training, self.momentum, self.eps)


class PReLU(Module):
    def __init__(self, channels, init=0.25):
        super().__init__()
        self.param("alpha", np.full(channels, init))

    def forward(self, x):
        return ops.prelu(x, self.alpha)


class ConvBNPReLU(Module):
    def __init__(self, rng, c_in, c_out, kernel=3, dilation=1):
        super().__init__()
        self.conv = Conv1d(rng, c_in, c_out, kernel, dilation, "same", bias=False)
        self.bn = BatchNorm(c_out)
        self.act = PReLU(c_out)

    def forward(self, x):
        return self.act(self.bn(self.conv(x)))
