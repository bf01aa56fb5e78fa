from .blocks import (APTCN, DSTGCNBlock, DynamicAdjacency, GatingNetwork, GraphConv,
                     ContextNetwork, TemporalProjection)
from .config import PRESET_WIDTHS, ModelConfig
from .layers import Module
from .network import (CISTGCN, InterpretationBundle, build_input_features,
                      importance_layout, param_count)

__all__ = [
    "APTCN", "CISTGCN", "ContextNetwork", "DSTGCNBlock", "DynamicAdjacency",
    "GatingNetwork", "GraphConv", "InterpretationBundle", "ModelConfig", "Module",
    "PRESET_WIDTHS", "TemporalProjection", "build_input_features", "importance_layout",
    "param_count",
]
