"""Building blocks: adjacency encoder, graph convolutions, gating, APTCN, context net.

Feature maps are laid out (B, C, T, J): batch, channels, frames, joints.
"""
import numpy as np

from ..tensor import Tensor, ops
from .layers import (ChannelLinear, ConvBNPReLU, Linear, Module, PReLU,
                     kaiming_uniform)

SPATIAL = "spatial"
TEMPORAL = "temporal"


def open_sigmoid(x):
    """Sigmoid squeezed into [eps, 1 - eps] so gates stay strictly inside (0, 1).

    A plain float sigmoid rounds to exactly 0 or 1 once the logit passes about
    17 (float32) or 37 (float64).
    """
    eps = float(np.finfo(x.dtype).eps)
    return ops.add(ops.scale(ops.sigmoid(x), 1.0 - 2.0 * eps), Tensor(np.asarray(eps, x.dtype)))


class DynamicAdjacency(Module):
    """Sample-specific P x P adjacency from a (B, C, T, J) feature map.

    The non-node axis is averaged away, two Conv+BN+PReLU stages run along the
    node axis, and a bilinear form ``Z^T M Z`` gives the P x P map. A learnable
    static matrix (identity at init) is added so the layer can fall back to a
    shared graph.
    """

    def __init__(self, rng, channels, nodes, domain, hidden=None, kernel=3):
        super().__init__()
        if domain not in (SPATIAL, TEMPORAL):
            raise ValueError(f"domain must be {SPATIAL!r} or {TEMPORAL!r}")
        hidden = hidden or max(channels // 2, 4)
        self.domain, self.nodes = domain, nodes
        self.stage1 = ConvBNPReLU(rng, channels, hidden, kernel)
        self.stage2 = ConvBNPReLU(rng, hidden, hidden, kernel)
        self.param("bilinear", rng.uniform(-1.0, 1.0, (hidden, hidden)) / hidden)
        self.param("static", np.eye(nodes))

    def forward(self, h):
        # spatial: average frames -> (B, C, J); temporal: average joints -> (B, C, T)
        axis = 2 if self.domain == SPATIAL else 3
        if h.shape[axis ^ 1] != self.nodes:
            raise ValueError(f"{self.domain} adjacency expects {self.nodes} nodes, got shape {h.shape}")
        z = ops.mean(h, axis=axis)
        z = self.stage2(self.stage1(z))
        zt = ops.swapaxes(z, 1, 2)  # B, P, hidden
        # 1/P keeps the contraction over P nodes at unit gain, so stacked blocks do not blow up
        a = ops.scale(ops.matmul(ops.matmul(zt, self.bilinear), z), 1.0 / self.nodes)
        return ops.add(a, self.static)


class GraphConv(Module):
    """``act(A H W)`` contracting the adjacency over joints or frames."""

    def __init__(self, rng, c_in, c_out, domain):
        super().__init__()
        self.domain = domain
        self.param("weight", kaiming_uniform(rng, (c_out, c_in), c_in))
        self.act = PReLU(c_out)

    def forward(self, h, adj):
        B, _, T, J = h.shape
        P = J if self.domain == SPATIAL else T
        if adj.shape != (B, P, P):
            raise ValueError(f"adjacency shape {adj.shape} inconsistent with features {h.shape}")
        a = ops.reshape(adj, (B, 1, P, P))
        if self.domain == SPATIAL:
            x = ops.matmul(h, ops.swapaxes(a, 2, 3))
        else:
            x = ops.matmul(a, h)
        return self.act(ops.channel_mix(x, self.weight))


class GatingNetwork(Module):
    """Two length-F gates from per-channel statistics of the block input.

    Mean, std and max over frames and joints give a (B, C, 3) summary that a
    separable convolution folds into (B, F). ``W1`` is a sigmoid gate in (0, 1);
    ``W2`` is a softmax over channels rescaled by F, so it averages to one.
    """

    def __init__(self, rng, c_in, c_out):
        super().__init__()
        self.param("depthwise", kaiming_uniform(rng, (c_in, 1, 3), 3))
        self.param("pointwise", kaiming_uniform(rng, (c_out, c_in, 1), c_in))
        self.act = PReLU(c_out)
        self.head1 = Linear(rng, c_out, c_out)
        self.head2 = Linear(rng, c_out, c_out)
        self.width = c_out

    def forward(self, h):
        B, C = h.shape[:2]
        flat = ops.reshape(h, (B, C, -1))
        stats = ops.concat([
            ops.mean(flat, axis=2, keepdims=True),
            ops.std(flat, axis=2, keepdims=True),
            ops.max(flat, axis=2, keepdims=True),
        ], axis=2)
        z = ops.separable_conv(stats, self.depthwise, self.pointwise, padding="valid")
        z = self.act(ops.reshape(z, (B, self.width)))
        w1 = open_sigmoid(self.head1(z))
        w2 = ops.scale(ops.softmax(self.head2(z), axis=1), self.width)
        return w1, w2


class DSTGCNBlock(Module):
    """Gated sum of a spatial and a temporal dynamic graph convolution plus a skip."""

    def __init__(self, rng, c_in, c_out, frames, joints, kernel=3):
        super().__init__()
        self.dae_spatial = DynamicAdjacency(rng, c_in, joints, SPATIAL, kernel=kernel)
        self.dae_temporal = DynamicAdjacency(rng, c_in, frames, TEMPORAL, kernel=kernel)
        self.dsgn = GraphConv(rng, c_in, c_out, SPATIAL)
        self.dtgn = GraphConv(rng, c_in, c_out, TEMPORAL)
        self.ganet = GatingNetwork(rng, c_in, c_out)
        self.skip = ChannelLinear(rng, c_in, c_out, bias=False) if c_in != c_out else None

    def forward(self, h):
        a_s = self.dae_spatial(h)
        a_t = self.dae_temporal(h)
        w1, w2 = self.ganet(h)
        B = h.shape[0]
        g1 = ops.reshape(w1, (B, -1, 1, 1))
        g2 = ops.reshape(w2, (B, -1, 1, 1))
        out = ops.add(ops.mul(g1, self.dsgn(h, a_s)), ops.mul(g2, self.dtgn(h, a_t)))
        out = ops.add(out, self.skip(h) if self.skip is not None else h)
        return out, {"A_s": a_s, "A_t": a_t, "W1": w1, "W2": w2}


class TemporalProjection(Module):
    """Linear map over the frame axis: (B, C, t_in, J) -> (B, C, t_out, J)."""

    def __init__(self, rng, t_in, t_out, identity=False):
        super().__init__()
        if identity:
            if t_in != t_out:
                raise ValueError("identity projection needs t_in == t_out")
            w = np.eye(t_in)
        else:
            w = kaiming_uniform(rng, (t_out, t_in), t_in)
        self.param("weight", w)
        self.param("bias", np.zeros((t_out, 1)))

    def forward(self, h):
        return ops.add(ops.matmul(self.weight, h), self.bias)


class APTCN(Module):
    """Parallel dilated temporal convolutions, concatenated, compressed, then t1 -> t2."""

    def __init__(self, rng, channels, t_in, t_out, dilations=(1, 2, 3), kernel=3,
                 identity_projection=False):
        super().__init__()
        self.add_children("branches", [ConvBNPReLU(rng, channels, channels, kernel, d)
                                       for d in dilations])
        self.compress = ChannelLinear(rng, channels * len(dilations), channels)
        self.project = TemporalProjection(rng, t_in, t_out, identity_projection)

    def forward(self, h):
        outs = [branch(h) for branch in self.branches]
        x = outs[0] if len(outs) == 1 else ops.concat(outs, axis=1)
        return self.project(self.compress(x))


class PoolBranch(Module):
    """Conv+BN+PReLU, pooling over joints, then a linear map to a length-T vector."""

    def __init__(self, rng, channels, frames, kind):
        super().__init__()
        self.kind = kind
        self.pre = ConvBNPReLU(rng, channels, channels, kernel=1)
        if kind == "attention":
            self.score = ChannelLinear(rng, channels, 1)
        self.post = Linear(rng, channels * frames, frames)

    def pooled(self, h, scores=None):
        x = self.pre(h)
        if self.kind == "attention" and scores is None:
            scores = self.score(x)
        return ops.pool(x, axis=3, kind=self.kind, scores=scores)

    def forward(self, h, scores=None):
        p = self.pooled(h, scores)
        return self.post(ops.reshape(p, (p.shape[0], -1)))


class ContextNetwork(Module):
    """Max/avg/attention pooling branches merged into the context vector O (length 3T).

    O feeds two sigmoid importance heads (per frame, per joint) and a zero-init
    linear head giving a per-frame xyz offset. The offset, weighted by the
    frame and joint importances, is the residual contribution (B, T, J, 3).
    """

    POOLS = ("max", "avg", "attention")

    def __init__(self, rng, channels, frames, joints):
        super().__init__()
        self.frames, self.joints = frames, joints
        self.add_children("branches", [PoolBranch(rng, channels, frames, k) for k in self.POOLS])
        self.temporal_head = Linear(rng, 3 * frames, frames)
        self.spatial_head = Linear(rng, 3 * frames, joints)
        self.residual_head = Linear(rng, 3 * frames, 3 * frames, zero=True)

    def forward(self, h):
        B = h.shape[0]
        context = ops.concat([branch(h) for branch in self.branches], axis=1)
        imp_t = open_sigmoid(self.temporal_head(context))
        imp_s = open_sigmoid(self.spatial_head(context))
        offset = ops.reshape(self.residual_head(context), (B, self.frames, 1, 3))
        weight = ops.mul(ops.reshape(imp_t, (B, self.frames, 1, 1)),
                         ops.reshape(imp_s, (B, 1, self.joints, 1)))
        return ops.mul(offset, weight), imp_t, imp_s, context
