"""Kernel selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``PATL_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the numpy implementation is used.  Both backends share one
signature per function.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("PATL_PURE_PYTHON", "0") in ("", "0"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _pykernels

solve_tridiagonal = _impl.solve_tridiagonal
leapfrog_forward = _impl.leapfrog_forward
leapfrog_adjoint = _impl.leapfrog_adjoint


def backend_module(name):
    """Return the kernel module for ``name`` (``"cython"`` or ``"python"``)."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
