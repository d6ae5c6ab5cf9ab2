"""Kernel selection.

The compiled kernel is used when importable; set ``PGVAR_BACKEND=python`` to
force the numpy fallback. Both expose the same ``shift_axis1`` signature.
"""

import os

from . import _fallback

BACKEND = "python"
shift_axis1 = _fallback.shift_axis1

if os.environ.get("PGVAR_BACKEND", "").lower() != "python":
    try:
        from . import _kernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        shift_axis1 = _kernels.shift_axis1

KERNELS = {"python": _fallback.shift_axis1}
try:
    from . import _kernels as _k

    KERNELS["cython"] = _k.shift_axis1
except ImportError:
    pass
