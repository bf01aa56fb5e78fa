"""CIST-GCN human motion forecasting with interpretable learned adjacency."""
from .model import CISTGCN, ModelConfig, param_count
from .tensor import NumericError, Tensor

__version__ = "0.1.0"

__all__ = ["CISTGCN", "ModelConfig", "NumericError", "Tensor", "param_count", "__version__"]
