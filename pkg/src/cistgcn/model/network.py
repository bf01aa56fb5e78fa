"""The full CIST-GCN forecaster and its interpretability bundle."""
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from ..tensor import Tensor, no_grad, ops
from .blocks import APTCN, ContextNetwork, DSTGCNBlock
from .config import ModelConfig
from .layers import ChannelLinear, Module

FEATURE_CHANNELS = 10


def build_input_features(window):
    """Positions, velocities, accelerations and speed for a (t1, J, 3) window.

    Returns (t1, J, 10): xyz, velocity xyz, acceleration xyz, |velocity|. The
    velocity at frame 0 and the acceleration at frames 0 and 1 are zero.
    Leading batch axes are allowed.
    """
    x = np.asarray(window)
    if x.ndim < 3 or x.shape[-1] != 3:
        raise ValueError(f"expected (..., t1, J, 3) window, got {x.shape}")
    if x.shape[-3] < 3:
        raise ValueError("feature construction needs at least 3 frames")
    vel = np.zeros_like(x)
    vel[..., 1:, :, :] = x[..., 1:, :, :] - x[..., :-1, :, :]
    acc = np.zeros_like(x)
    acc[..., 2:, :, :] = vel[..., 2:, :, :] - vel[..., 1:-1, :, :]
    speed = np.sqrt(np.sum(vel * vel, axis=-1, keepdims=True))
    return np.concatenate([x, vel, acc, speed], axis=-1)


@dataclass
class InterpretationBundle:
    """Adjacency maps and importance vectors from one forward pass.

    Arrays carry a leading batch axis. ``encoder`` holds one dict per encoder
    block with keys ``A_s`` (J, J), ``A_t`` (t1, t1), ``W1`` and ``W2`` (F,);
    ``output`` the same for the output block with ``A_t`` (t2, t2).
    """

    encoder: list
    output: dict
    temporal_importance: np.ndarray
    spatial_importance: np.ndarray
    context: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def batch_size(self):
        return self.context.shape[0]

    def maps(self):
        """Adjacency maps keyed by layer name (``dsgn-in-1`` ... ``tsgn-out``)."""
        out = OrderedDict()
        for i, layer in enumerate(self.encoder, start=1):
            out[f"dsgn-in-{i}"] = layer["A_s"]
            out[f"tsgn-in-{i}"] = layer["A_t"]
        out["dsgn-out"] = self.output["A_s"]
        out["tsgn-out"] = self.output["A_t"]
        return out

    def importance_vector(self):
        """Canonical concatenation: encoder blocks (W1, W2), output block, ConNet temporal, spatial."""
        parts = []
        for layer in self.encoder + [self.output]:
            parts += [layer["W1"], layer["W2"]]
        parts += [self.temporal_importance, self.spatial_importance]
        return np.concatenate(parts, axis=-1)

    def sample(self, i):
        pick = lambda d: {k: v[i] for k, v in d.items()}
        return InterpretationBundle(
            [pick(layer) for layer in self.encoder], pick(self.output),
            self.temporal_importance[i], self.spatial_importance[i], self.context[i])


def importance_layout(config):
    """Names and lengths of the canonical importance-vector segments."""
    F = config.hidden
    layout = []
    for i in range(1, config.encoder_depth + 1):
        layout += [(f"in-{i}.W1", F), (f"in-{i}.W2", F)]
    layout += [("out.W1", F), ("out.W2", F), ("connet.temporal", config.t2),
               ("connet.spatial", config.joints)]
    return layout


class CISTGCN(Module):
    """Encoder of DST-GCN blocks, APTCN decoder, output block and context net.

    The network predicts per-frame displacements from the last observed pose.
    Position inputs are centred on that pose's centroid and all inputs are
    multiplied by ``config.input_scale``; displacements are divided by it.
    """

    def __init__(self, config=None):
        super().__init__()
        config = config or ModelConfig()
        self.config = config
        rng = np.random.default_rng(config.seed)
        F, J, k = config.hidden, config.joints, config.kernel
        self.embed = ChannelLinear(rng, FEATURE_CHANNELS, F)
        self.add_children("encoder", [DSTGCNBlock(rng, F, F, config.t1, J, k)
                                      for _ in range(config.encoder_depth)])
        self.decoder = APTCN(rng, F, config.t1, config.t2, config.aptcn_dilations, k)
        self.output_block = DSTGCNBlock(rng, F, F, config.t2, J, k)
        self.head = ChannelLinear(rng, F, 3, zero=True)
        self.connet = ContextNetwork(rng, F, config.t2, J)
        self.astype(config.dtype)

    @property
    def dtype(self):
        return self.embed.weight.dtype

    def _prepare(self, features, last_pose):
        feats = np.asarray(features.data if isinstance(features, Tensor) else features)
        last = np.asarray(last_pose.data if isinstance(last_pose, Tensor) else last_pose)
        single = feats.ndim == 3
        if single:
            feats, last = feats[None], last[None]
        c = self.config
        if feats.shape[1:] != (c.t1, c.joints, FEATURE_CHANNELS):
            raise ValueError(f"features must be (t1={c.t1}, J={c.joints}, 10), got {feats.shape[1:]}")
        if last.shape[1:] != (c.joints, 3):
            raise ValueError(f"last_pose must be (J={c.joints}, 3), got {last.shape[1:]}")
        return feats, last, single

    def forward(self, features, last_pose):
        """Return ``(prediction, bundle)``; prediction is (B, t2, J, 3) or (t2, J, 3)."""
        feats, last, single = self._prepare(features, last_pose)
        dtype = self.dtype
        offset = np.zeros((feats.shape[0], 1, 1, FEATURE_CHANNELS), dtype=dtype)
        offset[:, 0, 0, :3] = last.mean(axis=1)
        if isinstance(features, Tensor) and features.requires_grad:
            x = features if not single else ops.reshape(features, feats.shape)
            x = ops.sub(x, Tensor(offset))
        else:
            x = Tensor((feats - offset).astype(dtype))
        x = ops.scale(x, self.config.input_scale)
        h = self.embed(ops.transpose(x, (0, 3, 1, 2)))
        infos = []
        for block in self.encoder:
            h, info = block(h)
            infos.append(info)
        h = self.decoder(h)
        o, out_info = self.output_block(h)
        disp = ops.transpose(self.head(o), (0, 2, 3, 1))
        ctx, imp_t, imp_s, context = self.connet(h)
        delta = ops.scale(ops.add(disp, ctx), 1.0 / self.config.input_scale)
        lp = last_pose if isinstance(last_pose, Tensor) else Tensor(last.astype(dtype))
        pred = ops.add(ops.reshape(lp, (last.shape[0], 1, self.config.joints, 3)), delta)
        if single:
            pred = ops.reshape(pred, pred.shape[1:])
        bundle = InterpretationBundle(
            [{k: v.data for k, v in info.items()} for info in infos],
            {k: v.data for k, v in out_info.items()},
            imp_t.data, imp_s.data, context.data)
        return pred, bundle

    def predict(self, features, last_pose):
        """Forward without recording; returns numpy arrays."""
        with no_grad():
            pred, bundle = self(features, last_pose)
        return pred.data, bundle

    def param_breakdown(self):
        out = OrderedDict()
        for name, p in self.named_parameters():
            top = name.split(".")[0]
            if top == "encoder":
                top = "encoder." + name.split(".")[1]
            out[top] = out.get(top, 0) + p.size
        return out


def param_count(config):
    """Exact trainable parameter count for a configuration."""
    return sum(p.size for p in CISTGCN(config).parameters())

