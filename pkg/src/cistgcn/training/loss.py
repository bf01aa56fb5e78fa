import numpy as np

from ..tensor import Tensor
from ..tensor.core import make_result

GRAD_EPS = 1e-12


def per_joint_distance(pred, target):
    """Euclidean distance per (..., frame, joint); numpy in, numpy out."""
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def mpjpe(pred, target):
    """Mean per-joint position error of numpy arrays (..., T, J, 3)."""
    return float(per_joint_distance(pred, target).mean())


def mpjpe_loss(pred, target):
    """Differentiable MPJPE: mean over every frame and joint of ``||pred - target||``.

    The forward value is the exact mean distance; the backward divides by
    ``sqrt(d^2 + 1e-12)`` so coincident points get a zero, finite gradient.
    """
    p = pred if isinstance(pred, Tensor) else Tensor(np.asarray(pred))
    t = target if isinstance(target, Tensor) else Tensor(np.asarray(target, dtype=p.dtype))
    if p.shape != t.shape or p.shape[-1] != 3:
        raise ValueError(f"mpjpe_loss: shape mismatch {p.shape} vs {t.shape}")
    diff = p.data - t.data
    sq = np.sum(diff * diff, axis=-1, keepdims=True)
    n = sq.size
    value = np.asarray(np.sqrt(sq).sum() / n, dtype=p.dtype)

    def back(g):
        gp = g * diff / (np.sqrt(sq + GRAD_EPS) * n)
        return gp, -gp

    return make_result("mpjpe", value, (p, t), back)
