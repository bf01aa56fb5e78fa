"""Rigid transforms, scaling and joint noise for (input, target) window pairs."""
from dataclasses import dataclass

import numpy as np


@dataclass
class AugmentationSpec:
    """Ranges for random augmentation.

    ``noise_rate`` is the probability that a joint in a frame is perturbed by
    N(0, ``noise_sigma_mm``^2) per axis. Scale and rotation act about the
    centroid of the last input frame.
    """

    rotation_max_deg: float = 0.0
    noise_rate: float = 0.0
    noise_sigma_mm: float = 25.0
    scale_range: tuple = (1.0, 1.0)
    translation_max_mm: float = 0.0

    def __post_init__(self):
        lo, hi = (float(v) for v in self.scale_range)
        self.scale_range = (lo, hi)
        for name in ("rotation_max_deg", "noise_rate", "noise_sigma_mm", "translation_max_mm"):
            setattr(self, name, float(getattr(self, name)))
        if not 0.0 <= self.rotation_max_deg <= 360.0:
            raise ValueError("rotation_max_deg must be in [0, 360]")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError("noise_rate must be in [0, 1]")
        if self.noise_sigma_mm < 0 or self.translation_max_mm < 0:
            raise ValueError("noise sigma and translation must be non-negative")
        if not 0 < lo <= 1.0 <= hi:
            raise ValueError("scale_range must satisfy 0 < lo <= 1 <= hi")

    @property
    def is_identity(self):
        return (self.rotation_max_deg == 0 and self.noise_rate == 0
                and self.scale_range == (1.0, 1.0) and self.translation_max_mm == 0)


def yaw_matrix(degrees):
    t = np.deg2rad(degrees)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def pivot(inputs):
    """Centroid of the last input frame."""
    return np.asarray(inputs, dtype=np.float64)[..., -1, :, :].mean(axis=-2)


def rotate_y(frames, degrees, center):
    """Rotate (..., J, 3) coordinates about the vertical axis through ``center``."""
    R = yaw_matrix(degrees)
    x = np.asarray(frames, dtype=np.float64)
    c = np.asarray(center, dtype=np.float64)
    return (x - c) @ R.T + c


def add_joint_noise(frames, rate, sigma, rng):
    """Perturb each joint-frame with probability ``rate`` by isotropic Gaussian noise."""
    x = np.asarray(frames, dtype=np.float64)
    if rate <= 0 or sigma <= 0:
        return x.copy()
    hit = rng.random(x.shape[:-1]) < rate
    noise = rng.normal(0.0, sigma, x.shape)
    return x + noise * hit[..., None]


def augment(inputs, targets, spec, rng):
    """Apply one random draw of ``spec`` to a window pair.

    The rigid part (rotation, scale, translation) hits inputs and targets alike;
    noise only corrupts the inputs. Returns ``(inputs, targets, params)``.
    """
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    center = pivot(x)
    angle = rng.uniform(0.0, spec.rotation_max_deg) if spec.rotation_max_deg > 0 else 0.0
    lo, hi = spec.scale_range
    scale = rng.uniform(lo, hi) if hi > lo else 1.0
    shift = (rng.uniform(-spec.translation_max_mm, spec.translation_max_mm, 3)
             if spec.translation_max_mm > 0 else np.zeros(3))
    A = scale * yaw_matrix(angle)
    x = (x - center) @ A.T + center + shift
    y = (y - center) @ A.T + center + shift
    x = add_joint_noise(x, spec.noise_rate, spec.noise_sigma_mm, rng)
    params = {"rotation_deg": float(angle), "scale": float(scale),
              "translation_mm": shift.tolist(), "center": center.tolist()}
    return x.astype(np.float32), y.astype(np.float32), params
