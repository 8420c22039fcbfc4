"""Hot-kernel backend selection.

The compiled extension is preferred; the pure-python implementation is a
drop-in replacement used when the build is unavailable (or when forced
via the RANDWG_KERNEL_BACKEND environment variable, handy for the
benchmark and for equivalence tests).
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels  # compiled extension

    _HAVE_EXT = True
except ImportError:
    _kernels = None
    _HAVE_EXT = False

_FORCED = os.environ.get("RANDWG_KERNEL_BACKEND", "").strip().lower()
if _FORCED == "python":
    _impl = _kernels_py
    BACKEND = "python"
elif _FORCED == "cython":
    if not _HAVE_EXT:
        raise ImportError("RANDWG_KERNEL_BACKEND=cython but the extension is not built")
    _impl = _kernels
    BACKEND = "cython"
else:
    _impl = _kernels if _HAVE_EXT else _kernels_py
    BACKEND = "cython" if _HAVE_EXT else "python"


def backend_name() -> str:
    return BACKEND


def get_backend(name: str):
    """Explicit backend module ('cython' or 'python'), for benchmarks/tests."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        if not _HAVE_EXT:
            raise ImportError("compiled kernel extension not available")
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def rk4_forward(*args, **kwargs):
    return _impl.rk4_forward(*args, **kwargs)
