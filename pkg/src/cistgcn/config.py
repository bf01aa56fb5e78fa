"""Run configuration: dotted ``section.key=value`` lines plus command-line overrides."""
import os
from collections import OrderedDict

from .model.config import ModelConfig
from .training.trainer import TrainConfig

SECTIONS = ("model", "train", "data", "eval", "interpret")
SEED_ENV = "CISTGCN_SEED"

# short aliases accepted in config files
ALIASES = {"model.F": "model.hidden", "model.J": "model.joints", "model.D_in": "model.in_channels"}


class ConfigError(ValueError):
    pass


def _defaults():
    d = OrderedDict()
    d["seed"] = 0
    d["model.preset"] = ""
    for k, v in ModelConfig().to_dict().items():
        d[f"model.{k}"] = v
    for k, v in TrainConfig().to_dict().items():
        d[f"train.{k}"] = v
    d.update({
        "data.classes": "cyclic,static,spontaneous", "data.count": 600, "data.frames": 60,
        "data.fps": 25.0, "data.joints": 22,
        "eval.horizons": "80,160,320,400,560,720,880,1000", "eval.sampling": "all",
        "eval.per_action": 256, "eval.split": "test", "eval.window_stride": 1,
        "eval.averaged": False, "eval.format": "tsv",
        "interpret.split": "test", "interpret.bundles": 8, "interpret.pca_dims": 2,
        "interpret.window_stride": 5,
    })
    return d


DEFAULTS = _defaults()


def _coerce(key, value, default):
    if isinstance(value, str):
        value = value.strip()
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r} as {type(default).__name__}") from None
    return str(value)


def parse_lines(lines, origin="<config>"):
    """``key=value`` pairs from text lines; ``#`` starts a comment."""
    out = OrderedDict()
    for n, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{origin}:{n}: expected key=value, got {raw.strip()!r}")
        out[key.strip()] = value.strip()
    return out


class RunConfig:
    """Resolved configuration; every key has a default, unknown keys are rejected.

    The global ``seed`` comes from the file or overrides, else from the
    ``CISTGCN_SEED`` environment variable, else 0. It seeds the model and the
    training run unless ``model.seed`` or ``train.seed`` are set explicitly.
    """

    def __init__(self, values=None):
        self.values = OrderedDict(DEFAULTS)
        self.explicit = set()
        if values:
            self.update(values)

    @classmethod
    def load(cls, path=None, overrides=None, env=None):
        cfg = cls()
        if path:
            try:
                with open(path, encoding="utf-8") as f:
                    cfg.update(parse_lines(f, path))
            except OSError as e:
                raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        if overrides:
            cfg.update(overrides)
        cfg.resolve_seed(os.environ if env is None else env)
        return cfg

    def update(self, values):
        for key, value in dict(values).items():
            key = ALIASES.get(key, key)
            if key not in self.values:
                raise ConfigError(f"unknown config key {key!r}")
            self.values[key] = _coerce(key, value, DEFAULTS[key])
            self.explicit.add(key)

    def resolve_seed(self, env):
        if "seed" not in self.explicit and env.get(SEED_ENV):
            self.values["seed"] = _coerce(SEED_ENV, env[SEED_ENV], 0)
        for key in ("model.seed", "train.seed"):
            if key not in self.explicit:
                self.values[key] = self.values["seed"]

    def __getitem__(self, key):
        return self.values[key]

    def section(self, name):
        prefix = name + "."
        return OrderedDict((k[len(prefix):], v) for k, v in self.values.items() if k.startswith(prefix))

    def model_config(self):
        d = self.section("model")
        preset = d.pop("preset")
        if preset:
            if "model.hidden" in self.explicit:
                raise ConfigError("set either model.preset or model.hidden, not both")
            d["hidden"] = ModelConfig.preset(preset).hidden
        return ModelConfig.from_dict(d)

    def train_config(self):
        return TrainConfig.from_dict(self.section("train"))

    def lines(self):
        return [f"{k}={v}" for k, v in self.values.items()]
