"""Select the compiled kernels when available, numpy otherwise.

Set ``WFDCS_BACKEND=python`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
kernels = _fallback

if os.environ.get("WFDCS_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as kernels  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

dwt2_forward = kernels.dwt2_forward
dwt2_inverse = kernels.dwt2_inverse
tv_chambolle = kernels.tv_chambolle
