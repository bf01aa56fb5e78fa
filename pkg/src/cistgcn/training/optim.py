from collections import OrderedDict

import numpy as np


class Adam:
    """Adaptive-moment optimizer with bias correction.

    State is kept per named parameter so it can be checkpointed by name.
    """

    def __init__(self, named_params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = OrderedDict(named_params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step_count = 0
        self.m = OrderedDict((k, np.zeros_like(p.data)) for k, p in self.params.items())
        self.v = OrderedDict((k, np.zeros_like(p.data)) for k, p in self.params.items())

    def step(self):
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** t
        c2 = 1.0 - b2 ** t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad.astype(p.data.dtype, copy=False)
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.data.dtype)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def state_tensors(self):
        out = OrderedDict()
        out["adam.step"] = np.array([self.step_count], dtype=np.float32)
        for name in self.params:
            out[f"adam.m/{name}"] = self.m[name]
        for name in self.params:
            out[f"adam.v/{name}"] = self.v[name]
        return out

    def load_state_tensors(self, tensors):
        expected = set(self.state_tensors())
        got = set(tensors)
        if expected != got:
            missing = sorted(expected - got)[:3]
            extra = sorted(got - expected)[:3]
            raise KeyError(f"optimizer state mismatch: missing {missing}, unexpected {extra}")
        self.step_count = int(tensors["adam.step"][0])
        for name, p in self.params.items():
            self.m[name] = np.array(tensors[f"adam.m/{name}"], dtype=p.data.dtype).reshape(p.shape)
            self.v[name] = np.array(tensors[f"adam.v/{name}"], dtype=p.data.dtype).reshape(p.shape)


def clip_grad_norm(params, max_norm):
    """Scale gradients in place so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(np.square(p.grad, dtype=np.float64)))
    norm = float(np.sqrt(total))
    if max_norm is not None and norm > max_norm:
        factor = max_norm / (norm + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * p.grad.dtype.type(factor)
    return norm


def step_decay(lr, epoch, factor, interval):
    """Learning rate for a 0-based ``epoch``: ``lr * factor ** (epoch // interval)``."""
    return lr * factor ** (epoch // max(1, interval))
