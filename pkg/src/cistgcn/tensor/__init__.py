"""Dense tensors with tape-based reverse-mode differentiation."""
from . import ops
from .core import (NumericError, Tape, TapeError, Tensor, as_tensor, backward,
                   get_tape, name_scope, new_tape, no_grad)
from .gradcheck import GradReport, grad_check

__all__ = [
    "ops", "Tensor", "Tape", "TapeError", "NumericError", "as_tensor", "backward",
    "get_tape", "new_tape", "no_grad", "name_scope", "grad_check", "GradReport",
]
