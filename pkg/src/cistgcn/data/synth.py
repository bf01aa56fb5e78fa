"""Procedural stick-figure motion: cyclic gait, static poses and spontaneous bursts.

The skeleton has 22 joints in a human-like tree (y up, facing +z, millimetres),
so H3.6M-shaped configurations run unchanged on synthetic data.
"""
import numpy as np

from .dataset import SequenceDataset
from .pseq import PoseSequence

CLASSES = ("cyclic", "static", "spontaneous")

JOINT_NAMES = (
    "pelvis", "r_hip", "r_knee", "r_ankle", "r_toe", "l_hip", "l_knee", "l_ankle", "l_toe",
    "spine", "thorax", "neck", "head", "head_top",
    "l_shoulder", "l_elbow", "l_wrist", "l_hand", "r_shoulder", "r_elbow", "r_wrist", "r_hand",
)
PARENTS = (-1, 0, 1, 2, 3, 0, 5, 6, 7, 0, 9, 10, 11, 12, 10, 14, 15, 16, 10, 18, 19, 20)
OFFSETS = np.array([
    [0, 0, 0],
    [-100, -20, 0], [0, -420, 0], [0, -420, 0], [0, -60, 130],
    [100, -20, 0], [0, -420, 0], [0, -420, 0], [0, -60, 130],
    [0, 230, 0], [0, 230, 0], [0, 100, 0], [0, 110, 20], [0, 110, 0],
    [160, 0, 0], [0, -280, 0], [0, -250, 0], [0, -80, 0],
    [-160, 0, 0], [0, -280, 0], [0, -250, 0], [0, -80, 0],
], dtype=np.float64)
J_FULL = len(PARENTS)
PELVIS_HEIGHT = 920.0
_J = {name: i for i, name in enumerate(JOINT_NAMES)}

# joints whose rotation moves a limb in spontaneous bursts
_BURST_JOINTS = ("r_shoulder", "l_shoulder", "r_elbow", "l_elbow", "r_hip", "l_hip",
                 "spine", "neck", "r_knee", "l_knee")


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    z, o = np.zeros_like(a), np.ones_like(a)
    return np.stack([np.stack([o, z, z], -1), np.stack([z, c, -s], -1), np.stack([z, s, c], -1)], -2)


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    z, o = np.zeros_like(a), np.ones_like(a)
    return np.stack([np.stack([c, z, s], -1), np.stack([z, o, z], -1), np.stack([-s, z, c], -1)], -2)


def _rot_z(a):
    c, s = np.cos(a), np.sin(a)
    z, o = np.zeros_like(a), np.ones_like(a)
    return np.stack([np.stack([c, -s, z], -1), np.stack([s, c, z], -1), np.stack([z, z, o], -1)], -2)


def forward_kinematics(angles, root, heading=0.0):
    """Joint positions (T, 22, 3) from per-joint xyz Euler angles (T, 22, 3) and root (T, 3)."""
    T = angles.shape[0]
    local = _rot_z(angles[..., 2]) @ _rot_y(angles[..., 1]) @ _rot_x(angles[..., 0])
    glob = np.empty((T, J_FULL, 3, 3))
    pos = np.empty((T, J_FULL, 3))
    head = _rot_y(np.full(T, heading))
    for j, p in enumerate(PARENTS):
        if p < 0:
            glob[:, j] = head @ local[:, j]
            pos[:, j] = root
        else:
            glob[:, j] = glob[:, p] @ local[:, j]
            pos[:, j] = pos[:, p] + np.einsum("tab,b->ta", glob[:, p], OFFSETS[j])
    return pos


def _base_angles(rng, T, relaxed=True):
    angles = np.zeros((T, J_FULL, 3))
    if relaxed:
        # arms slightly away from the body, elbows a little bent
        angles[:, _J["l_shoulder"], 2] = np.deg2rad(rng.uniform(5, 20))
        angles[:, _J["r_shoulder"], 2] = -np.deg2rad(rng.uniform(5, 20))
        angles[:, _J["l_elbow"], 0] = -np.deg2rad(rng.uniform(5, 30))
        angles[:, _J["r_elbow"], 0] = -np.deg2rad(rng.uniform(5, 30))
    return angles


def _cyclic(rng, T, fps):
    t = np.arange(T) / fps
    period = rng.uniform(0.9, 1.1)
    phase = 2 * np.pi * t / period + rng.uniform(0, 2 * np.pi)
    speed = rng.uniform(900.0, 1500.0)  # mm/s
    hip_amp = np.deg2rad(rng.uniform(20, 30))
    knee_amp = np.deg2rad(rng.uniform(35, 55))
    arm_amp = np.deg2rad(rng.uniform(15, 30))
    angles = _base_angles(rng, T)
    for side, shift in (("r", 0.0), ("l", np.pi)):
        ph = phase + shift
        # hip flexion swings the thigh forward (negative x rotation moves the knee to +z)
        angles[:, _J[f"{side}_hip"], 0] = -hip_amp * np.sin(ph)
        angles[:, _J[f"{side}_knee"], 0] = knee_amp * 0.5 * (1 + np.sin(ph - np.pi / 2))
        angles[:, _J[f"{side}_ankle"], 0] = np.deg2rad(10) * np.sin(ph)
        # arms swing against the leg on the same side
        angles[:, _J[f"{side}_shoulder"], 0] = arm_amp * np.sin(ph)
    angles[:, _J["spine"], 1] = np.deg2rad(5) * np.sin(phase)
    root = np.zeros((T, 3))
    root[:, 1] = PELVIS_HEIGHT + 15.0 * np.cos(2 * phase)
    root[:, 2] = speed * t
    return angles, root, period


def _static(rng, T):
    angles = _base_angles(rng, T)
    # a random held pose: arm raises and a slight trunk lean
    angles[:, _J["l_shoulder"], 0] += np.deg2rad(rng.uniform(-60, 20))
    angles[:, _J["r_shoulder"], 0] += np.deg2rad(rng.uniform(-60, 20))
    angles[:, _J["spine"], 0] += np.deg2rad(rng.uniform(-10, 15))
    root = np.zeros((T, 3))
    root[:, 1] = PELVIS_HEIGHT
    return angles, root


def _smooth_bursts(rng, T, fps, amplitude_deg):
    """Low-pass filtered random walk that only moves inside a few random bursts."""
    steps = rng.normal(0.0, 1.0, T)
    active = np.zeros(T)
    for _ in range(rng.integers(1, 4)):
        start = rng.integers(0, max(1, T - 5))
        length = rng.integers(int(0.3 * fps), int(1.2 * fps) + 1)
        active[start:start + length] = 1.0
    walk = np.cumsum(steps * active)
    width = max(3, int(0.2 * fps))
    kernel = np.hanning(width + 2)[1:-1]
    kernel /= kernel.sum()
    smooth = np.convolve(np.pad(walk, (width, width), mode="edge"), kernel, mode="same")[width:-width]
    scale = np.deg2rad(amplitude_deg) / max(1.0, np.abs(smooth).max())
    return smooth * scale


def _spontaneous(rng, T, fps):
    angles, root = _static(rng, T)
    n_limbs = rng.integers(1, 4)
    for name in rng.choice(_BURST_JOINTS, size=n_limbs, replace=False):
        axis = rng.integers(0, 3) if name in ("spine", "neck") else 0
        angles[:, _J[name], axis] += _smooth_bursts(rng, T, fps, rng.uniform(20, 50))
    root[:, 0] += 0.3 * np.cumsum(_smooth_bursts(rng, T, fps, 20.0))
    return angles, root


def synth_generate(kind, n_frames, joints=22, fps=25.0, seed=0, jitter_sigma=None,
                   heading_deg=0.0, place_mm=500.0):
    """One synthetic sequence of ``kind`` in {cyclic, static, spontaneous}.

    ``jitter_sigma`` is i.i.d. Gaussian noise per joint-frame (default 2 mm
    for cyclic, 5 mm otherwise). The figure starts at a random floor position
    within ``place_mm`` of the origin, facing ``heading_deg`` about +y.
    """
    if kind not in CLASSES:
        raise ValueError(f"unknown class {kind!r}; choose from {CLASSES}")
    if not 2 <= joints <= J_FULL:
        raise ValueError(f"synthetic skeleton supports 2..{J_FULL} joints, got {joints}")
    if n_frames < 1:
        raise ValueError("n_frames must be positive")
    rng = np.random.default_rng(seed)
    if jitter_sigma is None:
        jitter_sigma = 2.0 if kind == "cyclic" else 5.0
    if kind == "cyclic":
        angles, root, _ = _cyclic(rng, n_frames, fps)
    elif kind == "static":
        angles, root = _static(rng, n_frames)
    else:
        angles, root = _spontaneous(rng, n_frames, fps)
    pos = forward_kinematics(angles, root, np.deg2rad(heading_deg))
    origin = np.array([rng.uniform(-place_mm, place_mm), 0.0, rng.uniform(-place_mm, place_mm)])
    pos = pos + origin
    pos = pos + rng.normal(0.0, jitter_sigma, pos.shape)
    return PoseSequence(pos[:, :joints], fps, kind, f"synth-{seed}")


def cyclic_period(seed, fps=25.0, n_frames=2):
    """Gait period (seconds) that ``synth_generate('cyclic', seed=seed)`` uses."""
    rng = np.random.default_rng(seed)
    return _cyclic(rng, n_frames, fps)[2]


def synth_dataset(count=600, classes=CLASSES, n_frames=60, joints=22, fps=25.0, seed=0):
    """Round-robin over ``classes``; sequence i is split train/val/test by ``i % 10`` (8/1/1)."""
    ds = SequenceDataset()
    for i in range(count):
        kind = classes[i % len(classes)]
        seq = synth_generate(kind, n_frames, joints, fps, seed=[seed, i])
        seq.subject_id = f"synth-{i:05d}"
        r = (i // len(classes)) % 10
        split = "train" if r < 8 else "val" if r == 8 else "test"
        ds.add(seq, split)
    return ds
