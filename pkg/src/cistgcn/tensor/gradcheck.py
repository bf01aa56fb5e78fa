"""Central finite-difference gradient verification."""
from dataclasses import dataclass, field

import numpy as np

from .core import backward, new_tape

EPS_STEP = np.cbrt(np.finfo(np.float64).eps)


def step_size(dtype):
    """``cbrt(machine epsilon)`` of ``dtype``: the central-difference step scale."""
    return float(np.cbrt(np.finfo(dtype).eps))


@dataclass
class GradReport:
    max_rel_error: float
    per_input: dict = field(default_factory=dict)
    checked: int = 0
    tolerance: float = 0.0

    @property
    def passed(self):
        return self.max_rel_error < self.tolerance

    def __str__(self):
        status = "ok" if self.passed else "FAIL"
        return (f"{status}: max rel err {self.max_rel_error:.3e} over {self.checked} "
                f"checks (tol {self.tolerance:.1e})")


def rel_error(analytic, numeric, floor=1e-8):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _analytic(fn, inputs):
    for t in inputs.values():
        t.grad = None
        t.requires_grad = True
    with new_tape():
        loss = fn()
        backward(loss)
    return {name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
            for name, t in inputs.items()}


def _central(fn, t, delta):
    """``f(x + delta) - f(x - delta)`` and the perturbation actually applied.

    In low precision ``x + delta`` rounds, so the difference of the two
    perturbed inputs (not ``2 * delta``) is what the analytic side must use.
    """
    orig = t.data.copy()
    t.data[...] = orig + delta
    plus = t.data.copy()
    with new_tape():
        f_plus = float(fn().data)
    t.data[...] = orig - delta
    applied = plus.astype(np.float64) - t.data.astype(np.float64)
    with new_tape():
        f_minus = float(fn().data)
    t.data[...] = orig
    return f_plus - f_minus, applied


def grad_check(fn, inputs, tolerance=1e-7, samples=None, rng=None, floor=1e-8, directions=3,
               fd_dtype=None):
    """Compare backprop gradients of the scalar ``fn()`` with central differences.

    ``inputs`` maps names to tensors that ``fn`` closes over (perturbed in place).

    By default each input gets ``directions`` Jacobian-vector comparisons: the
    directional derivative ``grad . v`` against ``(f(x + h v) - f(x - h v)) / 2h``.
    Each ``v`` has random magnitudes in [0.5, 1] and the signs of the analytic
    gradient, so no term cancels another, while a wrong sign or magnitude in
    any coordinate still shows up as a mismatch. When ``samples`` is given,
    that many single coordinates are drawn at random across all inputs instead.

    The step is ``h = cbrt(eps) * max(1, |x|)``, where ``eps`` is the machine
    epsilon of the dtype the differences are taken in and ``|x|`` is the
    coordinate's magnitude (the input's largest magnitude for directions).

    ``fd_dtype`` (e.g. float64 for float32 inputs) takes the finite differences
    on copies of the inputs cast to that dtype, so a low-precision backward
    pass is compared against an accurate reference instead of its own
    rounding noise.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    analytic = _analytic(fn, inputs)
    if fd_dtype is not None:
        original = {name: t.data for name, t in inputs.items()}
        for t in inputs.values():
            t.data = t.data.astype(fd_dtype)
        try:
            return _numeric(fn, inputs, analytic, tolerance, samples, rng, floor, directions)
        finally:
            for name, t in inputs.items():
                t.data = original[name]
    return _numeric(fn, inputs, analytic, tolerance, samples, rng, floor, directions)


def _numeric(fn, inputs, analytic, tolerance, samples, rng, floor, directions):
    report = GradReport(0.0, {}, 0, tolerance)

    def record(name, a, n):
        err = rel_error(a, n, floor)
        report.per_input[name] = max(report.per_input.get(name, 0.0), err)
        report.max_rel_error = max(report.max_rel_error, err)
        report.checked += 1

    if samples is None:
        for name, t in inputs.items():
            h = step_size(t.dtype) * max(1.0, float(np.max(np.abs(t.data))) if t.size else 1.0)
            for _ in range(directions):
                g = analytic[name]
                sign = np.where(g != 0, np.sign(g), rng.choice([-1.0, 1.0], t.shape))
                v = sign * rng.uniform(0.5, 1.0, t.shape)
                diff, applied = _central(fn, t, (h * v).astype(t.dtype))
                record(name, float(np.sum(analytic[name] * applied)) / (2 * h), diff / (2 * h))
        return report

    coords = [(name, i) for name, t in inputs.items() for i in range(t.size)]
    if samples < len(coords):
        pick = rng.choice(len(coords), size=samples, replace=False)
        coords = [coords[i] for i in sorted(pick)]
    for name, i in coords:
        t = inputs[name]
        h = step_size(t.dtype) * max(1.0, abs(float(t.data.reshape(-1)[i])))
        delta = np.zeros_like(t.data)
        delta.reshape(-1)[i] = h
        diff, applied = _central(fn, t, delta)
        step = float(applied.reshape(-1)[i])
        record(name, float(analytic[name].reshape(-1)[i]), diff / step)
    return report
