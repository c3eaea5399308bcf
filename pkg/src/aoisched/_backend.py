"""Select the compiled kernels when available, else the NumPy fallback.

``AOISCHED_BACKEND=python`` forces the fallback; ``=compiled`` makes a
missing extension an import error instead of a silent downgrade.
"""
import os

from . import _fallback

_choice = os.environ.get("AOISCHED_BACKEND", "auto").lower()

compiled = None
if _choice != "python":
    try:
        from . import _kernels as compiled
    except ImportError:
        if _choice == "compiled":
            raise
        compiled = None

kernels = compiled if compiled is not None else _fallback
NAME = "compiled" if compiled is not None else "python"


def get(name=None):
    """Kernel module by name (``"compiled"``/``"python"``), default active one."""
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "compiled":
        if compiled is None:
            raise ImportError("compiled kernels are not built")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
