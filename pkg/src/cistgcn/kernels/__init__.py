"""Hot kernels with a compiled backend and a pure numpy fallback.

The compiled extension is used when it imports; set ``CISTGCN_KERNELS=python``
to force the fallback (``compiled`` makes a missing extension an error).
"""
import os

from . import _reference

try:
    from . import _conv as _compiled
except ImportError:  # extension not built
    _compiled = None

_choice = os.environ.get("CISTGCN_KERNELS", "auto").lower()
if _choice == "python" or (_choice == "auto" and _compiled is None):
    backend = _reference
    BACKEND = "python"
elif _compiled is None:
    raise ImportError("CISTGCN_KERNELS=compiled but the extension cistgcn.kernels._conv is not built")
else:
    backend = _compiled
    BACKEND = "compiled"


def available_backends():
    names = {"python": _reference}
    if _compiled is not None:
        names["compiled"] = _compiled
    return names


def conv1d_forward(x, w, dilation, pad_left, out_len, groups):
    return backend.conv1d_forward(x, w, dilation, pad_left, out_len, groups)


def conv1d_backward(g, x, w, dilation, pad_left, groups, need_x=True, need_w=True):
    return backend.conv1d_backward(g, x, w, dilation, pad_left, groups, need_x, need_w)
