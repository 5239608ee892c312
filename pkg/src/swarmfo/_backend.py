"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``SWARMFO_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernel

try:
    if os.environ.get("SWARMFO_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("compiled kernel disabled by SWARMFO_PURE_PYTHON")
    from . import _ckernel as kernel

    BACKEND = "cython"
except ImportError:
    kernel = _pykernel
    BACKEND = "python"

KERNELS = {"python": _pykernel}
if BACKEND == "cython":
    KERNELS["cython"] = kernel


def get_kernel(name=None):
    if name is None:
        return kernel
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None
