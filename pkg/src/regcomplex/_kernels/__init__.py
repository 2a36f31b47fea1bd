"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
always available.  Set REGCOMPLEX_BACKEND=python or =cython to force one
(forcing cython raises if the extension is missing).
"""

import os

from . import _py

BACKEND = "python"
_impl = _py

_choice = os.environ.get("REGCOMPLEX_BACKEND", "auto").lower()
if _choice not in ("auto", "cython", "python"):
    raise ValueError(f"REGCOMPLEX_BACKEND must be auto, cython or python, got {_choice!r}")
if _choice in ("auto", "cython"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        _impl = _py

blur_apply = _impl.blur_apply
blur_adjoint = _impl.blur_adjoint
grad2d_apply = _impl.grad2d_apply
grad2d_adjoint = _impl.grad2d_adjoint
soft_threshold = _impl.soft_threshold
group_l2_norms = _impl.group_l2_norms
group_l2_norm_sum = _impl.group_l2_norm_sum
group_l2_shrink = _impl.group_l2_shrink
group_l2_project = _impl.group_l2_project
fb_l1_dense = _impl.fb_l1_dense
