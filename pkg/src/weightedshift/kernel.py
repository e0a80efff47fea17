"""Backend selection for the flow kernel.

The compiled extension ``_ckernel`` is used when it imports; otherwise the
pure-Python implementation in ``_pykernel`` takes over.  Setting
``WEIGHTEDSHIFT_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _pykernel
from ._pykernel import LEFT_DOMAIN, OK, STEP_FAILURE, KernelResult

__all__ = ["BACKEND", "integrate_program", "integrate_callable", "get_backend",
           "OK", "LEFT_DOMAIN", "STEP_FAILURE", "KernelResult"]

_compiled = None
if os.environ.get("WEIGHTEDSHIFT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernel as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"

integrate_callable = _pykernel.integrate


def get_backend(name: str | None = None):
    """Return the ``integrate_program`` implementation called ``name``.

    ``None`` selects the active backend.
    """
    name = name or BACKEND
    if name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available")
        return _compiled.integrate_program
    if name == "python":
        return _pykernel.integrate_program
    raise ValueError(f"unknown backend {name!r}")


def integrate_program(*args, backend: str | None = None) -> KernelResult:
    return KernelResult(*get_backend(backend)(*args))
