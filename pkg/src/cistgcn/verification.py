"""Finite-difference verification suite for every primitive op and a whole model."""
import time

import numpy as np

from .model.config import ModelConfig
from .model.network import CISTGCN, build_input_features
from .tensor import Tensor, grad_check, ops
from .training.loss import mpjpe_loss

OP_TOLERANCE = 1e-7
OP_TOLERANCE_F32 = 1e-4
MODEL_TOLERANCE = 1e-3


def _weighted_sum(out, weights):
    """Scalar ``sum(out * weights)`` so every output coordinate has a distinct gradient."""
    return ops.sum(ops.mul(out, Tensor(weights)))


def _away_from_zero(rng, shape, margin=0.1):
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-300) * margin + x, x)


def _op_cases(rng):
    """``(name, fn(**tensors) -> Tensor, {name: array})`` for each primitive op.

    Dimension sizes are drawn from ``rng`` so different seeds cover different shapes.
    """
    d = lambda lo=2, hi=5: int(rng.integers(lo, hi + 1))
    n = lambda *s: rng.normal(size=s)
    pos = lambda *s: rng.uniform(0.5, 2.0, size=s)
    distinct = lambda *s: rng.permutation(int(np.prod(s))).reshape(s) * 0.1 + rng.uniform(0, 0.01, s)
    a, b, c, e = d(), d(), d(), d()
    B, C, L, M, O = d(1, 3), d(2, 4), d(7, 11), d(1, 3), d(2, 5)
    G = 2
    K, dil = int(rng.choice([1, 3])), d(1, 3)
    return [
        ("add", lambda a, b: ops.add(a, b), {"a": n(a, b), "b": n(b)}),
        ("sub", lambda a, b: ops.sub(a, b), {"a": n(a, 1), "b": n(a, b)}),
        ("mul", lambda a, b: ops.mul(a, b), {"a": n(c, a, b), "b": n(a, 1)}),
        ("div", lambda a, b: ops.div(a, b), {"a": n(a, b), "b": pos(a, b)}),
        ("scale", lambda x: ops.scale(x, 0.37), {"x": n(a)}),
        ("square", lambda x: ops.square(x), {"x": n(a, b)}),
        ("sqrt", lambda x: ops.sqrt(x), {"x": pos(a, b)}),
        ("exp", lambda x: ops.exp(x), {"x": n(a)}),
        ("sigmoid", lambda x: ops.sigmoid(x), {"x": n(a, b)}),
        ("tanh", lambda x: ops.tanh(x), {"x": n(a, b)}),
        ("prelu", lambda x, al: ops.prelu(x, al), {"x": _away_from_zero(rng, (c, a, b)), "al": pos(a) * 0.2}),
        ("reshape", lambda x: ops.reshape(x, (b, a)), {"x": n(a, b)}),
        ("transpose", lambda x: ops.transpose(x, (2, 0, 1)), {"x": n(a, b, c)}),
        ("swapaxes", lambda x: ops.swapaxes(x, 0, 2), {"x": n(a, b, c)}),
        ("concat", lambda x, y: ops.concat([x, y], axis=1), {"x": n(a, b), "y": n(a, c)}),
        ("index", lambda x: ops.index(x, (slice(None), [0, b - 1, b - 1])), {"x": n(a, b)}),
        ("broadcast_to", lambda x: ops.broadcast_to(x, (c, a, b)), {"x": n(a, 1)}),
        ("sum", lambda x: ops.sum(x, axis=1, keepdims=True), {"x": n(a, b)}),
        ("mean", lambda x: ops.mean(x, axis=(0, 2)), {"x": n(a, b, c)}),
        ("std", lambda x: ops.std(x, axis=-1), {"x": n(a, b + 1)}),
        ("max", lambda x: ops.max(x, axis=1), {"x": distinct(a, b)}),
        ("softmax", lambda x: ops.softmax(x, axis=-1), {"x": n(a, b)}),
        ("pool_avg", lambda x: ops.pool(x, 2, "avg"), {"x": n(a, b, c)}),
        ("pool_max", lambda x: ops.pool(x, 2, "max"), {"x": distinct(a, b, c)}),
        ("pool_attention", lambda x, s: ops.pool(x, 2, "attention", scores=s),
         {"x": n(a, b, c), "s": n(a, 1, c)}),
        ("matmul", lambda x, y: ops.matmul(x, y), {"x": n(c, a, b), "y": n(b, e)}),
        ("linear", lambda x, w, bias: ops.linear(x, w, bias), {"x": n(a, b), "w": n(c, b), "bias": n(c)}),
        ("channel_mix", lambda x, w, bias: ops.channel_mix(x, w, bias),
         {"x": n(B, C, L, M), "w": n(O, C), "bias": n(O)}),
        ("conv1d", lambda x, w, bias: ops.conv1d(x, w, bias, dilation=dil),
         {"x": n(B, C, L), "w": n(O, C, K), "bias": n(O)}),
        ("conv1d_grouped_4d", lambda x, w: ops.conv1d(x, w, dilation=dil, groups=G),
         {"x": n(B, G * C, L, M), "w": n(G * O, C, 3)}),
        ("conv1d_valid", lambda x, w: ops.conv1d(x, w, padding="valid"), {"x": n(B, C, L), "w": n(O, C, 3)}),
        ("separable_conv", lambda x, dw, pw: ops.separable_conv(x, dw, pw, dilation=dil),
         {"x": n(B, C, L), "dw": n(C, 1, 3), "pw": n(O, C, 1)}),
        ("batch_norm_train", lambda x, g, bias: ops.batch_norm(x, g, bias, np.zeros(C), np.ones(C), True),
         {"x": n(B + 1, C, L), "g": pos(C), "bias": n(C)}),
        ("batch_norm_eval", lambda x, g, bias, _m=n(C), _v=pos(C): ops.batch_norm(x, g, bias, _m, _v, False),
         {"x": n(B, C, L), "g": pos(C), "bias": n(C)}),
        ("mpjpe_loss", lambda p, t: mpjpe_loss(p, t), {"p": n(B, a, b, 3), "t": n(B, a, b, 3)}),
    ]


OP_NAMES = tuple(name for name, _, _ in _op_cases(np.random.default_rng(0)))


def op_check(name, seed=0, dtype=np.float64, tolerance=None):
    """Gradient check one op on a random shape; float32 is compared to a float64 reference."""
    rng = np.random.default_rng(seed)
    cases = {n: (fn, arrays) for n, fn, arrays in _op_cases(rng)}
    fn, arrays = cases[name]
    dtype = np.dtype(dtype)
    if tolerance is None:
        tolerance = OP_TOLERANCE if dtype == np.float64 else OP_TOLERANCE_F32
    tensors = {k: Tensor(np.array(v, dtype=dtype), requires_grad=True) for k, v in arrays.items()}
    weights = [None]

    def loss():
        out = fn(**tensors)
        if weights[0] is None:
            weights[0] = rng.normal(size=out.shape)
        return _weighted_sum(out, weights[0])

    fd_dtype = np.float64 if dtype != np.float64 else None
    return grad_check(loss, tensors, tolerance=tolerance, rng=rng, fd_dtype=fd_dtype)


def check_ops(seed=0, tolerance=OP_TOLERANCE):
    """Gradient check of every primitive op in float64; returns ``[(name, GradReport)]``."""
    return [(name, op_check(name, seed, np.float64, tolerance)) for name in OP_NAMES]


def check_model(config=None, samples=200, batch=4, seed=0, tolerance=MODEL_TOLERANCE):
    """Gradient check of a float64 model on random parameters and data.

    The zero-initialized output heads are randomized first so every layer
    receives gradient. ``samples`` parameter coordinates are drawn at random.
    """
    config = config or ModelConfig.preset("M8")
    config = ModelConfig.from_dict({**config.to_dict(), "dtype": "float64", "seed": seed})
    model = CISTGCN(config)
    rng = np.random.default_rng(seed)
    for _, p in model.named_parameters():
        if not np.any(p.data):
            p.data = rng.normal(0.0, 0.1, p.shape)
    model.train()
    x = np.cumsum(rng.normal(0.0, 20.0, (batch, config.t1, config.joints, 3)), axis=1)
    y = x[:, -1:] + rng.normal(0.0, 50.0, (batch, config.t2, config.joints, 3))
    feats = build_input_features(x)
    last = x[:, -1]

    def loss():
        pred, _ = model(feats, last)
        return mpjpe_loss(pred, y)

    params = dict(model.named_parameters())
    return grad_check(loss, params, tolerance=tolerance, samples=samples, rng=rng, floor=1e-10)


def run_suite(config=None, samples=200, seed=0, log=print):
    """Run op-level and model-level checks; returns ``(passed, results, seconds)``."""
    t0 = time.perf_counter()
    results = check_ops(seed)
    model_report = check_model(config, samples=samples, seed=seed)
    results.append(("model", model_report))
    for name, report in results:
        log(f"gradcheck {name}: {report}")
    passed = all(r.passed for _, r in results)
    return passed, results, time.perf_counter() - t0
