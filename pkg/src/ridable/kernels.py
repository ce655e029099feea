"""Backend selection for the hot log-cosh kernels.

The compiled extension is used when it was built; otherwise, or when
``RIDABLE_BACKEND=python`` is set, the numpy implementation is used.
"""
import os

from . import _kernels_py as python_impl

try:
    from . import _kernels as compiled_impl
except ImportError:  # extension not built
    compiled_impl = None

if compiled_impl is not None and os.environ.get("RIDABLE_BACKEND", "").lower() != "python":
    _impl = compiled_impl
    BACKEND = "cython"
else:
    _impl = python_impl
    BACKEND = "python"

logcosh_mean = _impl.logcosh_mean
logcosh_derivatives = _impl.logcosh_derivatives

__all__ = ["BACKEND", "compiled_impl", "python_impl", "logcosh_mean", "logcosh_derivatives"]
