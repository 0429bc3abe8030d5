"""Kernel backend selection.

The compiled extension is used when importable; setting ``POLARQUANT_PURE=1``
forces the numpy fallback.
"""

from __future__ import annotations

import os

from polarquant import _pycore

_native = None
if not os.environ.get("POLARQUANT_PURE"):
    try:
        from polarquant import _core as _native
    except ImportError:  # extension not built
        _native = None

BACKEND = "cython" if _native is not None else "python"
_impl = _native if _native is not None else _pycore


def get_backend(name: str | None = None):
    """Kernel module by name (``cython`` or ``python``); default is the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pycore
    if name == "cython":
        if _native is None:
            raise RuntimeError("compiled kernels are not available")
        return _native
    raise ValueError(f"unknown backend {name!r}")


def sc_decode(llr, frozen, fa_upper=None, fa_lower=None, w=0):
    return _impl.sc_decode(llr, frozen, fa_upper, fa_lower, w)


def scl_decode(llr, frozen, list_size, fa_upper=None, fa_lower=None, w=0, metric_table=None):
    return _impl.scl_decode(llr, frozen, list_size, fa_upper, fa_lower, w, metric_table)
