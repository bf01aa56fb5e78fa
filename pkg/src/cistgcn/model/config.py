import warnings
from dataclasses import asdict, dataclass, fields

PRESET_WIDTHS = {"M8": 8, "M16": 16, "M32": 32, "M64": 64}


@dataclass
class ModelConfig:
    t1: int = 10
    t2: int = 25
    joints: int = 22
    in_channels: int = 10
    hidden: int = 32
    encoder_depth: int = 5
    aptcn_dilations: tuple = (1, 2, 3)
    kernel: int = 3
    input_scale: float = 1e-3
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        self.aptcn_dilations = tuple(int(d) for d in self.aptcn_dilations)
        if self.t1 < 3:
            raise ValueError("t1 must be >= 3 (accelerations need three frames)")
        if self.t2 < 1:
            raise ValueError("t2 must be >= 1")
        if self.joints < 2:
            raise ValueError("need at least two joints")
        if self.in_channels != 10:
            raise ValueError("input features have exactly 10 channels")
        if self.hidden < 1 or self.encoder_depth < 1 or not self.aptcn_dilations:
            raise ValueError("hidden, encoder_depth and aptcn_dilations must be positive/non-empty")
        if self.hidden not in PRESET_WIDTHS.values():
            warnings.warn(f"hidden width {self.hidden} is not one of the M8/M16/M32/M64 presets",
                          stacklevel=3)

    @classmethod
    def preset(cls, name, **overrides):
        try:
            width = PRESET_WIDTHS[name.upper()]
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESET_WIDTHS)}") from None
        return cls(hidden=width, **overrides)

    def to_dict(self):
        d = asdict(self)
        d["aptcn_dilations"] = ",".join(str(x) for x in self.aptcn_dilations)
        return d

    @classmethod
    def from_dict(cls, d):
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, value in d.items():
            if key not in types:
                raise KeyError(f"unknown model config key {key!r}")
            if key == "aptcn_dilations":
                if isinstance(value, str):
                    value = tuple(int(v) for v in value.split(",") if v.strip())
                kwargs[key] = tuple(value)
            elif key == "dtype":
                kwargs[key] = str(value)
            elif key == "input_scale":
                kwargs[key] = float(value)
            else:
                kwargs[key] = int(value)
        return cls(**kwargs)
