"""Horizon MPJPE tables, the zero-velocity baseline and robustness sweeps."""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data.augment import add_joint_noise, pivot, rotate_y
from .training.loss import per_joint_distance
from .training.trainer import forecast

log = logging.getLogger(__name__)

DEFAULT_HORIZONS_MS = (80, 160, 320, 400, 560, 720, 880, 1000)
SAMPLINGS = ("all", "per_action_fixed")
SWEEP_KINDS = ("rotation_y", "noise")
AVERAGE = "average"
EVAL_BATCH = 256


def horizon_frame_index(ms, fps=25.0, t2=25):
    """1-based output frame reached ``ms`` milliseconds after the last input frame."""
    x = ms * fps / 1000.0
    index = int(np.floor(x + 0.5))
    if index < 1 or index > t2:
        raise ValueError(f"horizon {ms} ms at {fps} Hz maps to frame {index}, outside 1..{t2}")
    return index


@dataclass
class HorizonTable:
    """MPJPE (mm) per action and horizon, plus an ``average`` row over actions."""

    horizons_ms: list
    frames: list
    rows: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    metric: str = "frame"

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.horizons_ms, self.horizons_ms[1:])):
            raise ValueError("horizons must be strictly increasing")

    @property
    def actions(self):
        return [a for a in self.rows if a != AVERAGE]

    def value(self, action, ms):
        return self.rows[action][self.horizons_ms.index(ms)]

    def records(self):
        for action, values in self.rows.items():
            for ms, frame, v in zip(self.horizons_ms, self.frames, values):
                yield {"action": action, "horizon_ms": ms, "frame": frame,
                       "mpjpe": float(v), "count": int(self.counts[action]), "metric": self.metric}

    def max_abs_diff(self, other):
        if self.horizons_ms != other.horizons_ms or set(self.rows) != set(other.rows):
            return float("inf")
        return max(float(np.max(np.abs(np.asarray(self.rows[a]) - np.asarray(other.rows[a]))))
                   for a in self.rows)


@dataclass
class SweepReport:
    kind: str
    grid: list
    mpjpe: list
    count: int

    @property
    def ratio(self):
        """max/min MPJPE over the grid."""
        return float(max(self.mpjpe) / min(self.mpjpe))

    def records(self):
        for g, v in zip(self.grid, self.mpjpe):
            yield {"kind": self.kind, "value": float(g), "mpjpe": float(v), "count": self.count}


class ZeroVelocity:
    """Predictor that repeats the last observed pose for every output frame."""

    def __init__(self, t2):
        self.t2 = t2

    def __call__(self, inputs):
        last = np.asarray(inputs, dtype=np.float64)[:, -1:]
        return np.repeat(last, self.t2, axis=1)


def _as_predictor(model, workers=1, batch_size=EVAL_BATCH):
    if callable(model) and not hasattr(model, "named_parameters"):
        return model
    if workers <= 1:
        return lambda inputs: forecast(model, inputs, batch_size)

    replicas = [model.clone().eval() for _ in range(workers)]

    def run(inputs):
        # Chunk boundaries match the serial path, so every batch sees the same
        # arithmetic; each worker thread owns one model replica.
        starts = list(range(0, len(inputs), batch_size))

        def work(k):
            return [(s, forecast(replicas[k], inputs[s:s + batch_size], batch_size))
                    for s in starts[k::workers]]

        with ThreadPoolExecutor(workers) as pool:
            done = dict(pair for part in pool.map(work, range(workers)) for pair in part)
        return np.concatenate([done[s] for s in starts]) if starts else forecast(model, inputs)
    return run


def select_windows(windows, sampling="all", per_action=256, seed=0):
    """All windows, or up to ``per_action`` windows per action drawn without replacement."""
    if sampling not in SAMPLINGS:
        raise ValueError(f"sampling must be one of {SAMPLINGS}")
    if sampling == "all":
        return windows
    rng = np.random.default_rng(seed)
    actions = np.asarray(windows.actions)
    chosen = []
    for action in sorted(set(windows.actions)):
        idx = np.flatnonzero(actions == action)
        if len(idx) > per_action:
            idx = np.sort(rng.choice(idx, per_action, replace=False))
        chosen.append(idx)
    return windows.subset(np.concatenate(chosen) if chosen else [])


def horizon_table(errors, actions, horizons_ms=DEFAULT_HORIZONS_MS, fps=25.0, averaged=False):
    """Build a table from per-sample, per-frame errors ``(N, t2)``.

    The default reports the error at the horizon frame alone; ``averaged``
    reports the mean over frames 1..index instead.
    """
    errors = np.asarray(errors, dtype=np.float64)
    horizons_ms = list(horizons_ms)
    frames = [horizon_frame_index(ms, fps, errors.shape[1]) for ms in horizons_ms]
    if averaged:
        cum = np.cumsum(errors, axis=1) / np.arange(1, errors.shape[1] + 1)
        at = cum[:, [f - 1 for f in frames]]
    else:
        at = errors[:, [f - 1 for f in frames]]
    table = HorizonTable(horizons_ms, frames, metric="averaged" if averaged else "frame")
    actions = np.asarray(actions)
    for action in sorted(set(actions.tolist())):
        mask = actions == action
        table.rows[action] = at[mask].mean(axis=0).tolist()
        table.counts[action] = int(mask.sum())
    if table.rows:
        table.rows[AVERAGE] = np.mean([table.rows[a] for a in table.actions], axis=0).tolist()
        table.counts[AVERAGE] = int(len(actions))
    return table


def frame_errors(predictor, windows):
    """Per-sample, per-frame MPJPE ``(N, t2)``."""
    pred = predictor(windows.inputs)
    return per_joint_distance(pred, windows.targets).mean(axis=-1)


def evaluate(model, windows, horizons_ms=DEFAULT_HORIZONS_MS, fps=25.0, sampling="all",
             per_action=256, seed=0, averaged=False, workers=1):
    """Horizon table of ``model`` (or any ``inputs -> predictions`` callable) on ``windows``."""
    windows = select_windows(windows, sampling, per_action, seed)
    if len(windows) == 0:
        raise ValueError("no windows to evaluate")
    errors = frame_errors(_as_predictor(model, workers), windows)
    return horizon_table(errors, windows.actions, horizons_ms, fps, averaged)


def zero_velocity_baseline(windows, horizons_ms=DEFAULT_HORIZONS_MS, fps=25.0, **kwargs):
    return evaluate(ZeroVelocity(windows.targets.shape[1]), windows, horizons_ms, fps, **kwargs)


def perturb(windows, kind, value, seed=0, noise_sigma_mm=25.0):
    """Return ``(inputs, targets)`` with one sweep perturbation applied.

    Rotation turns inputs and targets about the vertical axis through the
    last input frame's centroid; noise corrupts the inputs only.
    """
    x = windows.inputs.astype(np.float64)
    y = windows.targets.astype(np.float64)
    if kind == "rotation_y":
        if value % 360.0 == 0.0:
            return x, y
        c = pivot(x)[:, None, None, :]
        return rotate_y(x, value, c), rotate_y(y, value, c)
    if kind == "noise":
        rng = np.random.default_rng([seed, int(round(value * 1e6))])
        return add_joint_noise(x, value, noise_sigma_mm, rng), y
    raise ValueError(f"unknown sweep kind {kind!r}; choose from {SWEEP_KINDS}")


def robustness_sweep(model, windows, kind, grid, seed=0, noise_sigma_mm=25.0,
                     max_noise_rate=0.2, workers=1):
    """Mean MPJPE over all output frames for each perturbation level in ``grid``."""
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("sweep grid is empty")
    if kind == "rotation_y" and not all(0.0 <= g <= 360.0 for g in grid):
        raise ValueError("rotation grid must lie in [0, 360]")
    if kind == "noise" and not all(0.0 <= g <= max_noise_rate for g in grid):
        raise ValueError(f"noise grid must lie in [0, {max_noise_rate}]")
    predictor = _as_predictor(model, workers)
    values = []
    for g in grid:
        x, y = perturb(windows, kind, g, seed, noise_sigma_mm)
        values.append(float(per_joint_distance(predictor(x), y).mean()))
    return SweepReport(kind, grid, values, len(windows))


def emit_report(report, path, fmt="tsv"):
    """Write a table or sweep as TSV (header row) or JSON lines with the same fields."""
    records = list(report.records())
    if fmt not in ("tsv", "jsonl"):
        raise ValueError("format must be 'tsv' or 'jsonl'")
    with open(path, "w", encoding="utf-8") as f:
        if fmt == "jsonl":
            for r in records:
                f.write(json.dumps(r) + "\n")
            return
        if not records:
            return
        keys = list(records[0])
        f.write("\t".join(keys) + "\n")
        for r in records:
            f.write("\t".join(f"{r[k]:.6f}" if isinstance(r[k], float) else str(r[k])
                              for k in keys) + "\n")
