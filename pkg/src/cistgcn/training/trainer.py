"""Training loop, per-epoch reports and checkpoint/resume."""
import logging
import os
import struct
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..data.augment import AugmentationSpec, augment
from ..model.config import ModelConfig
from ..model.network import CISTGCN, build_input_features
from ..tensor import NumericError, backward, new_tape, no_grad
from .checkpoint import (Checkpoint, load_checkpoint, load_model_state, model_state,
                         save_checkpoint)
from .loss import mpjpe_loss, per_joint_distance
from .optim import Adam, clip_grad_norm, step_decay

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    lr_decay: float = 0.5
    lr_interval: int = 0  # 0: a third of the epochs
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 5.0
    window_stride: int = 5
    seed: int = 0
    augmentation: AugmentationSpec = field(default_factory=AugmentationSpec)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if isinstance(self.augmentation, dict):
            self.augmentation = AugmentationSpec(**self.augmentation)

    @property
    def decay_interval(self):
        return self.lr_interval or max(1, self.epochs // 3)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "augmentation"}
        for k, v in asdict(self.augmentation).items():
            d[f"aug_{k}"] = ",".join(str(x) for x in v) if isinstance(v, tuple) else v
        return d

    @classmethod
    def from_dict(cls, d):
        kwargs, aug = {}, {}
        types = {f.name: f.type for f in fields(cls)}
        aug_types = {f.name: f.type for f in fields(AugmentationSpec)}
        for key, value in d.items():
            if key.startswith("aug_"):
                name = key[4:]
                if name not in aug_types:
                    raise KeyError(f"unknown augmentation key {key!r}")
                if name == "scale_range":
                    value = tuple(float(v) for v in str(value).split(",")) if isinstance(value, str) else tuple(value)
                else:
                    value = float(value)
                aug[name] = value
            elif key in types:
                kwargs[key] = int(value) if types[key] == "int" or types[key] is int else float(value)
            else:
                raise KeyError(f"unknown train config key {key!r}")
        return cls(augmentation=AugmentationSpec(**aug), **kwargs)


@dataclass
class EpochReport:
    epoch: int
    loss: float
    lr: float
    grad_norm_mean: float
    grad_norm_max: float
    seconds: float
    batches: int
    val_mpjpe: float = float("nan")


def _rng_bytes(seed, epoch):
    return struct.pack("<QQ", seed & 0xFFFFFFFFFFFFFFFF, epoch)


def _rng_from_bytes(raw):
    return struct.unpack("<QQ", raw)


def forecast(model, inputs, batch_size=256):
    """Predict (N, t2, J, 3) for (N, t1, J, 3) input windows in eval mode."""
    was_training = model.training
    model.eval()
    out = []
    try:
        for s in range(0, len(inputs), batch_size):
            x = np.asarray(inputs[s:s + batch_size], dtype=np.float64)
            with no_grad():
                pred, _ = model(build_input_features(x), x[:, -1])
            out.append(pred.data.astype(np.float64))
    finally:
        model.train(was_training)
    if not out:
        c = model.config
        return np.zeros((0, c.t2, c.joints, 3))
    return np.concatenate(out)


class Trainer:
    """Owns a model, its optimizer and the epoch counter.

    Randomness for epoch ``e`` (shuffling, augmentation of sample ``i``) is drawn
    from streams seeded by ``(seed, e)`` and ``(seed, e, i)``, so resuming from a
    checkpoint replays exactly what an uninterrupted run would do.
    """

    def __init__(self, model, config, dataset=None):
        self.model = model
        self.config = config
        self.dataset = dataset
        self.optimizer = Adam(model.named_parameters(), config.learning_rate,
                              config.beta1, config.beta2, config.adam_eps)
        self.epoch = 0
        self.history = []
        self._train = None
        self._val = None

    @classmethod
    def create(cls, model_config, train_config, dataset=None):
        return cls(CISTGCN(model_config), train_config, dataset)

    def _windows(self, split):
        c = self.model.config
        return self.dataset.windows(split, c.t1, c.t2, self.config.window_stride)

    @property
    def train_windows(self):
        if self._train is None:
            self._train = self._windows("train")
        return self._train

    @property
    def val_windows(self):
        if self._val is None:
            self._val = self._windows("val")
        return self._val

    def lr_at(self, epoch):
        c = self.config
        return step_decay(c.learning_rate, epoch, c.lr_decay, c.decay_interval)

    def _batch(self, windows, idx, epoch):
        spec = self.config.augmentation
        x = windows.inputs[idx].astype(np.float64)
        y = windows.targets[idx].astype(np.float64)
        if not spec.is_identity:
            for k, i in enumerate(idx):
                rng = np.random.default_rng([self.config.seed, epoch, int(i)])
                x[k], y[k], _ = augment(x[k], y[k], spec, rng)
        return x, y

    def train_epoch(self):
        """One pass over the training windows; returns an :class:`EpochReport`."""
        windows = self.train_windows
        if len(windows) == 0:
            raise ValueError("training split has no windows")
        epoch = self.epoch
        lr = self.lr_at(epoch)
        self.optimizer.lr = lr
        rng = np.random.default_rng([self.config.seed, epoch])
        order = rng.permutation(len(windows))
        bs = self.config.batch_size
        dtype = self.model.dtype
        self.model.train()
        t0 = time.perf_counter()
        losses, norms = [], []
        for b, s in enumerate(range(0, len(order), bs)):
            idx = order[s:s + bs]
            x, y = self._batch(windows, idx, epoch)
            feats = build_input_features(x).astype(dtype)
            try:
                with new_tape():
                    pred, _ = self.model(feats, x[:, -1].astype(dtype))
                    loss = mpjpe_loss(pred, y.astype(dtype))
                    self.optimizer.zero_grad()
                    backward(loss)
            except NumericError as e:
                seqs = sorted({windows.seq_ids[i] for i in idx})[:5]
                raise NumericError(f"epoch {epoch + 1} batch {b} (sequences {seqs}): {e}") from e
            norms.append(clip_grad_norm(self.model.parameters(), self.config.clip_norm))
            if not np.isfinite(norms[-1]):
                raise NumericError(f"epoch {epoch + 1} batch {b}: non-finite gradient norm")
            self.optimizer.step()
            losses.append(float(loss.data) * len(idx))
        self.epoch += 1
        report = EpochReport(epoch + 1, sum(losses) / len(order), lr, float(np.mean(norms)),
                             float(np.max(norms)), time.perf_counter() - t0, len(norms))
        self.history.append(report)
        return report

    def evaluate_split(self, split="val"):
        windows = self.val_windows if split == "val" else self._windows(split)
        if len(windows) == 0:
            return float("nan")
        pred = forecast(self.model, windows.inputs)
        return float(per_joint_distance(pred, windows.targets).mean())

    def fit(self, epochs=None, log_path=None, checkpoint_dir=None, validate=True, callback=None):
        """Train until ``epochs`` (default: the configured total) have been run."""
        total = epochs if epochs is not None else self.config.epochs
        while self.epoch < total:
            report = self.train_epoch()
            if validate:
                report.val_mpjpe = self.evaluate_split("val")
            lines = [f"{report.epoch}\ttrain\t{report.loss:.6f}\t{report.lr:.6g}\t{report.seconds:.3f}\n"]
            if validate:
                lines.append(f"{report.epoch}\tval\t{report.val_mpjpe:.6f}\t{report.lr:.6g}\t{report.seconds:.3f}\n")
            if log_path:
                with open(log_path, "a", encoding="utf-8") as f:
                    f.writelines(lines)
            log.info("epoch %d loss %.3f val %.3f lr %.2g (%.1fs)", report.epoch, report.loss,
                     report.val_mpjpe, report.lr, report.seconds)
            if checkpoint_dir:
                os.makedirs(checkpoint_dir, exist_ok=True)
                self.save(os.path.join(checkpoint_dir, f"epoch_{self.epoch:04d}.ckpt"))
                self.save(os.path.join(checkpoint_dir, "last.ckpt"))
            if callback:
                callback(self, report)
        return self.history

    def to_checkpoint(self):
        config = {f"model.{k}": v for k, v in self.model.config.to_dict().items()}
        config.update({f"train.{k}": v for k, v in self.config.to_dict().items()})
        config["state.epoch"] = self.epoch
        return Checkpoint(config, model_state(self.model), self.optimizer.state_tensors(),
                          _rng_bytes(self.config.seed, self.epoch))

    def save(self, path):
        save_checkpoint(self.to_checkpoint(), path)

    @classmethod
    def from_checkpoint(cls, ckpt, dataset=None):
        if isinstance(ckpt, (str, os.PathLike)):
            ckpt = load_checkpoint(ckpt)
        model_cfg, train_cfg = split_config(ckpt.config)
        trainer = cls(CISTGCN(ModelConfig.from_dict(model_cfg)), TrainConfig.from_dict(train_cfg), dataset)
        load_model_state(trainer.model, ckpt.params)
        trainer.optimizer.load_state_tensors(ckpt.optimizer)
        seed, epoch = _rng_from_bytes(ckpt.rng_state)
        trainer.epoch = int(ckpt.config.get("state.epoch", epoch))
        return trainer


def split_config(flat):
    model, train = {}, {}
    for key, value in flat.items():
        section, _, name = key.partition(".")
        if section == "model":
            model[name] = value
        elif section == "train":
            train[name] = value
    return model, train


def load_model(path):
    """Model (eval mode) from a checkpoint file."""
    ckpt = load_checkpoint(path) if not isinstance(path, Checkpoint) else path
    model_cfg, _ = split_config(ckpt.config)
    model = CISTGCN(ModelConfig.from_dict(model_cfg))
    load_model_state(model, ckpt.params)
    return model.eval()
