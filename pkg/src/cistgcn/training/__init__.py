from .checkpoint import (BUFFER_PREFIX, Checkpoint, CheckpointError, dumps_checkpoint,
                         load_checkpoint, load_model_state, loads_checkpoint, model_state,
                         save_checkpoint)
from .loss import mpjpe, mpjpe_loss, per_joint_distance
from .optim import Adam, clip_grad_norm, step_decay
from .trainer import EpochReport, TrainConfig, Trainer, forecast, load_model, split_config

__all__ = [
    "Adam", "BUFFER_PREFIX", "Checkpoint", "CheckpointError", "EpochReport", "TrainConfig",
    "Trainer", "clip_grad_norm", "dumps_checkpoint", "forecast", "load_checkpoint",
    "load_model", "load_model_state", "loads_checkpoint", "model_state", "mpjpe",
    "mpjpe_loss", "per_joint_distance", "save_checkpoint", "split_config", "step_decay",
]
