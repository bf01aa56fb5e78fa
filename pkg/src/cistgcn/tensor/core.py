"""Tensor, tape and the reverse pass."""
import contextlib
import threading

import numpy as np


class NumericError(FloatingPointError):
    """A forward op produced NaN or Inf."""


class TapeError(RuntimeError):
    pass


class Node:
    __slots__ = ("op", "inputs", "out", "backward")

    def __init__(self, op, inputs, out, backward):
        self.op = op
        self.inputs = inputs
        self.out = out
        self.backward = backward


class Tape:
    """Ordered record of executed ops.

    ``backward`` consumes the tape and freezes it; a second ``backward`` raises
    until ``reset``. Recording a new op on a frozen tape starts a fresh graph.
    """

    def __init__(self):
        self.nodes = []
        self.frozen = False
        self.recording = True

    def reset(self):
        self.nodes = []
        self.frozen = False

    def record(self, node):
        if self.frozen:
            self.reset()
        self.nodes.append(node)

    def __len__(self):
        return len(self.nodes)


_local = threading.local()


def get_tape():
    tape = getattr(_local, "tape", None)
    if tape is None:
        tape = _local.tape = Tape()
    return tape


@contextlib.contextmanager
def new_tape():
    """Run the block against a fresh tape, restoring the previous one after."""
    prev = getattr(_local, "tape", None)
    tape = _local.tape = Tape()
    try:
        yield tape
    finally:
        _local.tape = prev


@contextlib.contextmanager
def no_grad():
    tape = get_tape()
    prev = tape.recording
    tape.recording = False
    try:
        yield
    finally:
        tape.recording = prev


def _scopes():
    stack = getattr(_local, "scopes", None)
    if stack is None:
        stack = _local.scopes = []
    return stack


@contextlib.contextmanager
def name_scope(name):
    """Label ops executed in the block; shows up in NumericError messages."""
    stack = _scopes()
    stack.append(name)
    try:
        yield
    finally:
        stack.pop()


def current_scope():
    return "/".join(_scopes())


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "__weakref__")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def backward(self):
        backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # operator sugar; implementations live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.index(self, index)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops
        return ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        from . import ops
        return ops.sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops
        return ops.mean(self, axis, keepdims)


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def make_result(op, data, inputs, backward_fn):
    """Wrap an op's output, check finiteness and record the node if needed."""
    if not np.all(np.isfinite(data)):
        scope = current_scope()
        where = f" in {scope}" if scope else ""
        raise NumericError(f"non-finite values produced by {op}{where}")
    tape = get_tape()
    needs = tape.recording and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    if needs:
        tape.record(Node(op, inputs, out, backward_fn))
    return out


def unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(loss, tape=None):
    """Populate ``.grad`` on every leaf reachable from the scalar ``loss``.

    Leaf gradients accumulate into any existing ``.grad``.
    """
    tape = tape or get_tape()
    if loss.size != 1:
        raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if tape.frozen:
        raise TapeError("tape already consumed by backward; call reset() first")
    if not loss.requires_grad:
        raise TapeError("loss does not depend on any tensor requiring grad")
    grads = {id(loss): np.ones_like(loss.data)}
    holders = {id(loss): loss}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        holders.pop(id(node.out), None)
        in_grads = node.backward(g)
        for inp, gi in zip(node.inputs, in_grads):
            if gi is None or not inp.requires_grad:
                continue
            gi = unbroadcast(np.asarray(gi, dtype=inp.data.dtype), inp.shape)
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
                holders[key] = inp
    for key, g in grads.items():
        leaf = holders[key]
        leaf.grad = g if leaf.grad is None else leaf.grad + g
    tape.frozen = True
